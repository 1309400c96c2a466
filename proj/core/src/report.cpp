#include "splatalign/report.hpp"

#include <algorithm>
#include <cstdio>

#include "json.hpp"

namespace splatalign {
namespace {

using Json = nlohmann::ordered_json;

Json retrieval_json(const RetrievalReport& r) {
  Json j;
  j["direction"] = std::string(direction_name(r.direction));
  j["r1"] = r.r1;
  j["r5"] = r.r5;
  j["r10"] = r.r10;
  j["queries"] = r.queries;
  return j;
}

Json zero_shot_json(const ZeroShotReport& z) {
  Json j;
  j["top1"] = z.top1;
  j["top3"] = z.top3;
  j["top5"] = z.top5;
  j["objects"] = z.objects;
  j["classes"] = z.classes;
  return j;
}

Json config_or_null(const std::string& text) {
  if (text.empty()) return Json();
  return Json::parse(text);
}

}  // namespace

std::string format_percent(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", x * 100.0);
  return buf;
}

std::string text_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c) out += "  ";
      const std::string& cell = rows[r][c];
      // first column left aligned, numbers right aligned
      if (c == 0) {
        out += cell + std::string(widths[c] - cell.size(), ' ');
      } else {
        out += std::string(widths[c] - cell.size(), ' ') + cell;
      }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < widths.size(); ++c) total += widths[c] + (c ? 2 : 0);
      out += std::string(total, '-') + '\n';
    }
  }
  return out;
}

std::string eval_report_json(const EvalReport& report) {
  Json j;
  j["config"] = config_or_null(report.config_json);
  Json retrieval = Json::array();
  for (const auto& r : report.retrieval) retrieval.push_back(retrieval_json(r));
  j["retrieval"] = retrieval;
  j["zero_shot"] = report.zero_shot ? zero_shot_json(*report.zero_shot) : Json();
  if (report.few_shot) {
    const FewShotReport& f = *report.few_shot;
    Json fs;
    fs["n_way"] = f.n_way;
    fs["m_shot"] = f.m_shot;
    fs["accuracies"] = f.accuracies;
    fs["mean"] = f.mean;
    fs["std"] = f.std;
    j["few_shot"] = fs;
  } else {
    j["few_shot"] = Json();
  }
  return j.dump(2) + "\n";
}

std::string eval_report_table(const EvalReport& report) {
  std::string out;
  if (!report.retrieval.empty()) {
    std::vector<std::vector<std::string>> rows{{"Direction", "R@1", "R@5", "R@10"}};
    for (const auto& r : report.retrieval) {
      rows.push_back({std::string(direction_name(r.direction)), format_percent(r.r1),
                      format_percent(r.r5), format_percent(r.r10)});
    }
    out += text_table(rows);
  }
  if (report.zero_shot) {
    if (!out.empty()) out += '\n';
    const auto& z = *report.zero_shot;
    out += text_table({{"Zero-shot", "Top1", "Top3", "Top5"},
                       {std::to_string(z.classes) + " classes", format_percent(z.top1),
                        format_percent(z.top3), format_percent(z.top5)}});
  }
  if (report.few_shot) {
    if (!out.empty()) out += '\n';
    const auto& f = *report.few_shot;
    out += text_table({{"Few-shot", "Mean", "Std"},
                       {std::to_string(f.n_way) + "-way " + std::to_string(f.m_shot) + "-shot",
                        format_percent(f.mean), format_percent(f.std)}});
  }
  return out;
}

std::string ablation_json(const std::vector<AblationRow>& rows, const std::string& config_json) {
  Json j;
  j["config"] = config_or_null(config_json);
  Json arr = Json::array();
  for (const auto& r : rows) {
    Json row;
    row["orderings"] = r.orderings;
    row["positional_tables"] = r.positional_tables;
    row["first_loss"] = r.first_loss;
    row["final_loss"] = r.final_loss;
    row["text_to_3d"] = retrieval_json(r.text_to_3d);
    row["3d_to_text"] = retrieval_json(r.gs_to_text);
    row["zero_shot"] = zero_shot_json(r.zero_shot);
    arr.push_back(row);
  }
  j["runs"] = arr;
  return j.dump(2) + "\n";
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::vector<std::vector<std::string>> cells{
      {"Orderings", "Tables", "Text->3D R@1", "3D->Text R@1", "Zero-shot Top1", "Final loss"}};
  for (const auto& r : rows) {
    char loss[32];
    std::snprintf(loss, sizeof(loss), "%.4f", r.final_loss);
    cells.push_back({r.orderings, std::to_string(r.positional_tables), format_percent(r.text_to_3d.r1),
                     format_percent(r.gs_to_text.r1), format_percent(r.zero_shot.top1), loss});
  }
  return text_table(cells);
}

}  // namespace splatalign
