#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splatalign/metrics.hpp"

namespace splatalign {

// x in [0, 1] -> "xx.x".
std::string format_percent(double x);

// Aligned columns; the first row is the header.
std::string text_table(const std::vector<std::vector<std::string>>& rows);

struct EvalReport {
  std::vector<RetrievalReport> retrieval;
  std::optional<ZeroShotReport> zero_shot;
  std::optional<FewShotReport> few_shot;
  std::string config_json;  // effective run config, echoed verbatim
};

std::string eval_report_json(const EvalReport& report);
std::string eval_report_table(const EvalReport& report);

struct AblationRow {
  std::string orderings;
  std::size_t positional_tables = 0;
  double first_loss = 0.0;
  double final_loss = 0.0;
  RetrievalReport text_to_3d;
  RetrievalReport gs_to_text;
  ZeroShotReport zero_shot;
};

std::string ablation_json(const std::vector<AblationRow>& rows, const std::string& config_json = {});
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace splatalign
