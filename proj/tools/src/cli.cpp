#include "splatalign_cli/cli.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "splatalign/checkpoint.hpp"
#include "splatalign/dataset.hpp"
#include "splatalign/errors.hpp"
#include "splatalign/fixtures.hpp"
#include "splatalign/metrics.hpp"
#include "splatalign/ply.hpp"
#include "splatalign/report.hpp"

namespace splatalign::cli {

using Json = nlohmann::ordered_json;

namespace {

std::vector<std::string> ordering_names(const std::vector<Ordering>& orderings) {
  std::vector<std::string> out;
  for (Ordering o : orderings) out.emplace_back(ordering_name(o));
  return out;
}

template <typename T>
void read_key(const Json& j, const char* key, T& dst) {
  if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<T>();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ArgumentError(std::string("missing required ") + what + " path");
  if (!std::filesystem::is_regular_file(path)) {
    throw IoError(std::string(what) + " file '" + path + "' does not exist");
  }
}

void require_output(const std::string& path, const char* what) {
  if (path.empty()) throw ArgumentError(std::string("missing required ") + what + " path");
  const auto parent = std::filesystem::absolute(path).parent_path();
  if (!std::filesystem::is_directory(parent)) {
    throw IoError(std::string(what) + " directory '" + parent.string() + "' does not exist");
  }
}

}  // namespace

std::pair<std::size_t, std::size_t> parse_few_shot(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos || x == 0 || x + 1 == text.size()) {
    throw ArgumentError("few-shot setting '" + text + "' must look like NxM, e.g. 5x10");
  }
  try {
    std::size_t used = 0;
    const std::string a = text.substr(0, x), b = text.substr(x + 1);
    const unsigned long n = std::stoul(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    const unsigned long m = std::stoul(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
    if (n < 1 || m < 1) throw std::invalid_argument(text);
    return {n, m};
  } catch (const std::logic_error&) {
    throw ArgumentError("few-shot setting '" + text + "' must look like NxM with positive integers");
  }
}

std::string RunConfig::to_json() const {
  Json j;
  j["preset"] = preset;
  j["orderings"] = ordering_names(orderings);
  j["points"] = points;
  j["patches"] = patches;
  j["neighbors"] = neighbors;
  j["quant_bits"] = quant_bits;
  j["numeric"] = std::string(numeric_mode_name(numeric));
  Json t;
  t["epochs"] = train.epochs;
  t["steps"] = train.max_steps ? Json(*train.max_steps) : Json();
  t["batch"] = train.batch;
  t["views"] = train.views;
  t["seed"] = train.seed;
  t["lr_tokenizer"] = train.adam.lr_tokenizer;
  t["lr_other"] = train.adam.lr_other;
  t["weight_decay"] = train.adam.weight_decay;
  t["beta1"] = train.adam.beta1;
  t["beta2"] = train.adam.beta2;
  t["eps"] = train.adam.eps;
  t["variant"] = std::string(loss_variant_name(train.loss.variant));
  t["image_term"] = train.loss.image_term;
  t["threads"] = train.threads;
  j["train"] = t;
  Json d;
  d["manifest"] = manifest;
  d["text"] = text;
  d["images"] = images;
  d["classes"] = classes;
  d["eval_manifest"] = eval_manifest;
  d["checkpoint"] = checkpoint;
  d["log"] = log;
  d["out"] = out;
  j["data"] = d;
  Json e;
  e["retrieval"] = retrieval;
  e["zero_shot"] = zero_shot;
  e["few_shot"] = few_shot ? Json(std::to_string(few_shot->first) + "x" +
                                  std::to_string(few_shot->second))
                           : Json();
  e["runs"] = runs;
  e["seed"] = eval_seed;
  j["eval"] = e;
  return j.dump();
}

RunConfig RunConfig::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("config must be a JSON object");
  static const std::array<const char*, 10> top{"preset", "orderings", "points", "patches", "neighbors",
                                               "quant_bits", "numeric", "train", "data", "eval"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(top.begin(), top.end(), [&](const char* k) { return key == k; }) == top.end()) {
      throw SchemaError("unknown config key '" + key + "'");
    }
  }
  RunConfig c;
  try {
    read_key(j, "preset", c.preset);
    if (j.contains("orderings")) {
      std::string joined;
      for (const auto& o : j.at("orderings")) joined += (joined.empty() ? "" : ",") + o.get<std::string>();
      c.orderings = parse_orderings(joined);
    }
    read_key(j, "points", c.points);
    read_key(j, "patches", c.patches);
    read_key(j, "neighbors", c.neighbors);
    read_key(j, "quant_bits", c.quant_bits);
    if (j.contains("numeric")) c.numeric = parse_numeric_mode(j.at("numeric").get<std::string>());
    if (j.contains("train")) {
      const Json& t = j.at("train");
      read_key(t, "epochs", c.train.epochs);
      if (t.contains("steps") && !t.at("steps").is_null()) c.train.max_steps = t.at("steps").get<std::size_t>();
      read_key(t, "batch", c.train.batch);
      read_key(t, "views", c.train.views);
      read_key(t, "seed", c.train.seed);
      read_key(t, "lr_tokenizer", c.train.adam.lr_tokenizer);
      read_key(t, "lr_other", c.train.adam.lr_other);
      read_key(t, "weight_decay", c.train.adam.weight_decay);
      read_key(t, "beta1", c.train.adam.beta1);
      read_key(t, "beta2", c.train.adam.beta2);
      read_key(t, "eps", c.train.adam.eps);
      if (t.contains("variant")) c.train.loss.variant = parse_loss_variant(t.at("variant").get<std::string>());
      read_key(t, "image_term", c.train.loss.image_term);
      read_key(t, "threads", c.train.threads);
    }
    if (j.contains("data")) {
      const Json& d = j.at("data");
      read_key(d, "manifest", c.manifest);
      read_key(d, "text", c.text);
      read_key(d, "images", c.images);
      read_key(d, "classes", c.classes);
      read_key(d, "eval_manifest", c.eval_manifest);
      read_key(d, "checkpoint", c.checkpoint);
      read_key(d, "log", c.log);
      read_key(d, "out", c.out);
    }
    if (j.contains("eval")) {
      const Json& e = j.at("eval");
      read_key(e, "retrieval", c.retrieval);
      read_key(e, "zero_shot", c.zero_shot);
      if (e.contains("few_shot") && !e.at("few_shot").is_null()) {
        c.few_shot = parse_few_shot(e.at("few_shot").get<std::string>());
      }
      read_key(e, "runs", c.runs);
      read_key(e, "seed", c.eval_seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("config has a value of the wrong type: ") + e.what());
  }
  return c;
}

ModelConfig RunConfig::model_config(std::size_t clip_dim) const {
  ModelConfig m = ModelConfig::from_preset(preset, clip_dim);
  m.tokenizer.orderings = orderings;
  m.tokenizer.points = points;
  m.tokenizer.num_patches = patches;
  m.tokenizer.neighbors = neighbors;
  m.tokenizer.quant_bits = quant_bits;
  m.numeric = numeric;
  m.validate();
  return m;
}

namespace {

// Flags are bound to scratch values and only applied when given, so they
// override a config file without clobbering it with defaults.
class Overlay {
 public:
  template <typename T, typename Set>
  CLI::Option* add(CLI::App* app, const std::string& name, Set set, const std::string& desc) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, desc);
    appliers_.push_back([opt, value, set](RunConfig& c) {
      if (opt->count() > 0) set(c, *value);
    });
    return opt;
  }

  template <typename Set>
  CLI::Option* flag(CLI::App* app, const std::string& name, Set set, const std::string& desc) {
    CLI::Option* opt = app->add_flag(name, desc);
    appliers_.push_back([opt, set](RunConfig& c) {
      if (opt->count() > 0) set(c);
    });
    return opt;
  }

  RunConfig resolve(const std::string& config_path) const {
    RunConfig c;
    if (!config_path.empty()) c = RunConfig::from_json(read_text_file(config_path));
    for (const auto& f : appliers_) f(c);
    return c;
  }

 private:
  std::vector<std::function<void(RunConfig&)>> appliers_;
};

void add_model_flags(CLI::App* app, Overlay& ov) {
  ov.add<std::string>(app, "--preset", [](RunConfig& c, const std::string& v) { c.preset = v; },
                      "Encoder size: nano, tiny, small, base or large");
  ov.add<std::string>(app, "--orderings",
                      [](RunConfig& c, const std::string& v) { c.orderings = parse_orderings(v); },
                      "Comma-separated serializations: xyz, hilbert, z");
  ov.add<std::size_t>(app, "--points", [](RunConfig& c, std::size_t v) { c.points = v; },
                      "Points kept per cloud");
  ov.add<std::size_t>(app, "--patches", [](RunConfig& c, std::size_t v) { c.patches = v; },
                      "Patch centers per cloud");
  ov.add<std::size_t>(app, "--neighbors", [](RunConfig& c, std::size_t v) { c.neighbors = v; },
                      "Points per patch");
  ov.flag(app, "--f64", [](RunConfig& c) { c.numeric = NumericMode::f64; },
          "Keep parameters in 64-bit precision");
}

void add_train_flags(CLI::App* app, Overlay& ov) {
  ov.add<std::size_t>(app, "--views", [](RunConfig& c, std::size_t v) { c.train.views = v; },
                      "Views sampled per object per step (K)");
  ov.add<std::size_t>(app, "--epochs", [](RunConfig& c, std::size_t v) { c.train.epochs = v; },
                      "Training epochs");
  ov.add<std::size_t>(app, "--steps", [](RunConfig& c, std::size_t v) { c.train.max_steps = v; },
                      "Optimizer steps (overrides --epochs)");
  ov.add<std::size_t>(app, "--batch", [](RunConfig& c, std::size_t v) { c.train.batch = v; },
                      "Objects per batch");
  ov.add<std::uint64_t>(app, "--seed", [](RunConfig& c, std::uint64_t v) { c.train.seed = v; },
                        "Run seed");
  ov.add<double>(app, "--lr-tokenizer", [](RunConfig& c, double v) { c.train.adam.lr_tokenizer = v; },
                 "Learning rate of tokenizer tensors");
  ov.add<double>(app, "--lr", [](RunConfig& c, double v) { c.train.adam.lr_other = v; },
                 "Learning rate of all other tensors");
  ov.add<double>(app, "--weight-decay", [](RunConfig& c, double v) { c.train.adam.weight_decay = v; },
                 "Decoupled weight decay");
  ov.flag(app, "--eq4-literal", [](RunConfig& c) { c.train.loss.variant = LossVariant::eq4_literal; },
          "Weight the text terms by the mean raw view cosine instead of per-view voting");
  ov.flag(app, "--no-image-term", [](RunConfig& c) { c.train.loss.image_term = false; },
          "Drop the image loss");
  ov.add<std::size_t>(app, "--threads", [](RunConfig& c, std::size_t v) { c.train.threads = v; },
                      "Worker threads (1 = serial reference mode)");
}

void add_data_flags(CLI::App* app, Overlay& ov) {
  ov.add<std::string>(app, "--manifest", [](RunConfig& c, const std::string& v) { c.manifest = v; },
                      "Triplet manifest (JSON)");
  ov.add<std::string>(app, "--text", [](RunConfig& c, const std::string& v) { c.text = v; },
                      "Text embedding table (GSEB)");
  ov.add<std::string>(app, "--images", [](RunConfig& c, const std::string& v) { c.images = v; },
                      "Image embedding table (GSEB)");
  ov.add<std::string>(app, "--classes", [](RunConfig& c, const std::string& v) { c.classes = v; },
                      "Class embedding table (GSEB) for zero-shot");
}

void add_eval_flags(CLI::App* app, Overlay& ov) {
  ov.add<std::string>(app, "--retrieval",
                      [](RunConfig& c, const std::string& v) {
                        if (v == "all") {
                          c.retrieval = true;
                        } else if (v == "none") {
                          c.retrieval = false;
                        } else {
                          throw ArgumentError("--retrieval expects 'all' or 'none', got '" + v + "'");
                        }
                      },
                      "Retrieval directions: all or none");
  ov.flag(app, "--zero-shot", [](RunConfig& c) { c.zero_shot = true; },
          "Zero-shot classification against --classes");
  ov.add<std::string>(app, "--few-shot",
                      [](RunConfig& c, const std::string& v) { c.few_shot = parse_few_shot(v); },
                      "n-way m-shot setting, e.g. 5x10");
  ov.add<std::size_t>(app, "--runs", [](RunConfig& c, std::size_t v) { c.runs = v; },
                      "Few-shot repetitions");
  ov.add<std::uint64_t>(app, "--eval-seed", [](RunConfig& c, std::uint64_t v) { c.eval_seed = v; },
                        "Few-shot sampling seed");
}

struct TrainOutcome {
  Model model;
  std::vector<StepRecord> records;
};

TrainOutcome train_model(const RunConfig& rc, const TripletDataset& data, std::ostream* log) {
  Model model(rc.model_config(data.text.dim()), rc.train.seed);
  Trainer trainer(model, data, rc.train);
  std::vector<StepRecord> records = trainer.run([&](const StepRecord& r) {
    if (log) *log << step_record_json(r) << '\n';
  });
  return {std::move(model), std::move(records)};
}

std::uint64_t training_seed(const std::string& checkpoint_config) {
  const Json j = Json::parse(checkpoint_config);
  if (j.contains("run") && j["run"].contains("train") && j["run"]["train"].contains("seed")) {
    return j["run"]["train"]["seed"].get<std::uint64_t>();
  }
  return TrainConfig{}.seed;
}

EvalReport evaluate(const RunConfig& rc, const Model& model, std::uint64_t point_seed,
                    const TripletDataset& data, const EmbeddingTable* classes) {
  EvalReport report;
  report.config_json = rc.to_json();
  const std::vector<Vector> emb = embed_dataset(model, data, point_seed, rc.train.threads);
  if (rc.retrieval) report.retrieval = retrieval_eval(emb, data.text, data.images, data.manifest);
  const auto labels = manifest_labels(data.manifest);
  if (rc.zero_shot) {
    if (!classes) {
      throw ArgumentError("zero-shot classification needs a class embedding table (--classes FILE)");
    }
    report.zero_shot = zero_shot_classify(emb, labels, *classes);
  }
  if (rc.few_shot) {
    report.few_shot = few_shot_eval(emb, labels, rc.few_shot->first, rc.few_shot->second, rc.runs,
                                    rc.eval_seed);
  }
  return report;
}

void write_reports(const std::string& prefix, const std::string& json, const std::string& table) {
  if (prefix.empty()) return;
  write_text_file(prefix + ".json", json);
  write_text_file(prefix + ".txt", table);
}

int cmd_fixtures(const FixtureConfig& fc, const std::string& out_dir, std::ostream& out) {
  if (out_dir.empty()) throw ArgumentError("fixtures needs --out DIR");
  const SyntheticData data = gen_synthetic_triplets(fc);
  const FixturePaths paths = write_synthetic(data, out_dir);
  out << "objects: " << data.manifest.entries.size() << "\n"
      << "classes: " << fc.classes << "\n"
      << "views: " << fc.views << "\n"
      << "dim: " << fc.dim << "\n"
      << "heldout: " << data.heldout_indices.size() << "\n"
      << "output: " << out_dir << "\n"
      << "manifest: " << paths.manifest.string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  require_file(rc.manifest, "manifest");
  require_file(rc.text, "text embedding");
  require_file(rc.images, "image embedding");
  require_output(rc.checkpoint, "checkpoint");
  const std::string log_path = rc.log.empty() ? rc.checkpoint + ".log.jsonl" : rc.log;
  require_output(log_path, "log");

  const TripletDataset data = load_dataset(rc.manifest, rc.text, rc.images);
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw IoError("cannot open log '" + log_path + "' for writing");
  log << Json{{"config", Json::parse(rc.to_json())}}.dump() << '\n';

  Model model(rc.model_config(data.text.dim()), rc.train.seed);
  Trainer trainer(model, data, rc.train);
  const std::vector<StepRecord> records = trainer.run([&](const StepRecord& r) {
    log << step_record_json(r) << '\n';
    log.flush();
  });
  if (!log) throw IoError("failed writing log '" + log_path + "'");
  save_params(model, rc.checkpoint, trainer.optimizer().export_state(), rc.to_json());

  out << "steps: " << records.size() << "\n";
  if (!records.empty()) {
    out << "first loss: " << records.front().loss.total << "\n"
        << "final loss: " << records.back().loss.total << "\n"
        << "tau: " << model.tau() << "\n";
  }
  out << "variant: " << loss_variant_name(rc.train.loss.variant) << "\n"
      << "orderings: " << join_orderings(rc.orderings) << "\n"
      << "checkpoint: " << rc.checkpoint << "\n"
      << "log: " << log_path << "\n";
  return 0;
}

int cmd_eval(const RunConfig& rc, std::ostream& out) {
  require_file(rc.checkpoint, "checkpoint");
  require_file(rc.manifest, "manifest");
  require_file(rc.text, "text embedding");
  require_file(rc.images, "image embedding");
  if (rc.zero_shot && rc.classes.empty()) {
    throw ArgumentError("zero-shot classification needs a class embedding table (--classes FILE)");
  }
  if (!rc.classes.empty()) require_file(rc.classes, "class embedding");
  if (!rc.out.empty()) require_output(rc.out, "report");

  LoadReport lr;
  const Model model = load_params(rc.checkpoint, nullptr, &lr);
  const std::uint64_t point_seed = training_seed(lr.config_json);
  const TripletDataset data = load_dataset(rc.manifest, rc.text, rc.images);
  std::optional<EmbeddingTable> classes;
  if (!rc.classes.empty()) classes = load_embeddings(rc.classes);

  const EvalReport report = evaluate(rc, model, point_seed, data, classes ? &*classes : nullptr);
  const std::string table = eval_report_table(report);
  write_reports(rc.out, eval_report_json(report), table);
  for (const auto& w : lr.warnings) out << "warning: " << w << "\n";
  out << table;
  return 0;
}

int cmd_ablate(const RunConfig& base, std::ostream& out) {
  require_file(base.manifest, "manifest");
  require_file(base.text, "text embedding");
  require_file(base.images, "image embedding");
  if (!base.eval_manifest.empty()) require_file(base.eval_manifest, "evaluation manifest");
  if (!base.classes.empty()) require_file(base.classes, "class embedding");
  if (!base.out.empty()) require_output(base.out, "report");

  const TripletDataset train_data = load_dataset(base.manifest, base.text, base.images);
  const TripletDataset eval_data =
      base.eval_manifest.empty() ? train_data : load_dataset(base.eval_manifest, base.text, base.images);
  std::optional<EmbeddingTable> classes;
  if (!base.classes.empty()) classes = load_embeddings(base.classes);

  const std::vector<std::vector<Ordering>> settings{
      {Ordering::xyz}, {Ordering::hilbert}, {Ordering::z_order},
      {Ordering::xyz, Ordering::hilbert, Ordering::z_order}};
  std::vector<AblationRow> rows;
  for (const auto& orderings : settings) {
    RunConfig rc = base;
    rc.orderings = orderings;
    rc.retrieval = true;
    rc.zero_shot = classes.has_value();
    rc.few_shot.reset();
    TrainOutcome t = train_model(rc, train_data, nullptr);
    const EvalReport rep = evaluate(rc, t.model, rc.train.seed, eval_data, classes ? &*classes : nullptr);

    AblationRow row;
    row.orderings = orderings.size() == 3 ? "all" : join_orderings(orderings);
    row.positional_tables = count_positional_tables(t.model.params());
    row.first_loss = t.records.front().loss.total;
    row.final_loss = t.records.back().loss.total;
    row.text_to_3d = rep.retrieval.at(0);
    row.gs_to_text = rep.retrieval.at(1);
    if (rep.zero_shot) row.zero_shot = *rep.zero_shot;
    rows.push_back(row);
    out << "finished orderings=" << row.orderings << " (" << t.records.size() << " steps)\n";
  }
  const std::string table = ablation_table(rows);
  write_reports(base.out, ablation_json(rows, base.to_json()), table);
  out << table;
  return 0;
}

std::string bucket_label(std::size_t n) {
  static const std::array<std::pair<std::size_t, const char*>, 5> edges{
      {{1000, "<1k"}, {5000, "1k-5k"}, {10000, "5k-10k"}, {20000, "10k-20k"}, {50000, "20k-50k"}}};
  for (const auto& [edge, label] : edges) {
    if (n < edge) return label;
  }
  return ">=50k";
}

int cmd_inspect(const std::vector<std::string>& paths, std::ostream& out) {
  if (paths.empty()) throw ArgumentError("inspect needs at least one file");
  std::map<std::string, std::size_t> histogram;
  std::size_t ply_files = 0;
  for (const std::string& path : paths) {
    const std::vector<std::byte> bytes = read_file_bytes(path);
    auto starts_with = [&](const char* magic) {
      const std::size_t n = std::strlen(magic);
      return bytes.size() >= n && std::memcmp(bytes.data(), magic, n) == 0;
    };
    out << "file: " << path << "\n";
    if (starts_with("GSCK")) {
      const CheckpointFile ck = decode_checkpoint(bytes);
      out << "format: checkpoint v" << ck.version << "\n"
          << "config: " << ck.config_json << "\n"
          << "tensors: " << ck.tensors.size() << "\n";
      std::vector<std::vector<std::string>> rows{{"name", "shape", "numel"}};
      for (const NamedTensor& t : ck.tensors) {
        std::string shape = "[";
        for (std::size_t i = 0; i < t.shape.size(); ++i) shape += (i ? "," : "") + std::to_string(t.shape[i]);
        rows.push_back({t.name, shape + "]", std::to_string(t.values.size())});
      }
      out << text_table(rows);
    } else if (starts_with("GSEB")) {
      const EmbeddingTable table = decode_embeddings(bytes);
      out << "format: embedding table\n"
          << "rows: " << table.size() << "\n"
          << "dim: " << table.dim() << "\n";
    } else if (starts_with("ply")) {
      const GaussianCloud cloud = parse_ply(bytes);
      ++ply_files;
      ++histogram[bucket_label(cloud.size())];
      out << "format: ply\n"
          << "points: " << cloud.size() << "\n"
          << "bucket: " << bucket_label(cloud.size()) << "\n";
      static const std::array<const char*, kGaussianAttributes> names{
          "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
          "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"};
      std::array<double, kGaussianAttributes> lo, hi, sum{};
      lo.fill(std::numeric_limits<double>::infinity());
      hi.fill(-std::numeric_limits<double>::infinity());
      for (const GaussianPoint& p : cloud.points) {
        const auto v = p.vectorize();
        for (std::size_t a = 0; a < v.size(); ++a) {
          lo[a] = std::min(lo[a], static_cast<double>(v[a]));
          hi[a] = std::max(hi[a], static_cast<double>(v[a]));
          sum[a] += v[a];
        }
      }
      std::vector<std::vector<std::string>> rows{{"attribute", "min", "max", "mean"}};
      auto fmt = [](double x) {
        std::ostringstream s;
        s.precision(4);
        s << std::fixed << x;
        return s.str();
      };
      for (std::size_t a = 0; a < names.size(); ++a) {
        rows.push_back({names[a], fmt(lo[a]), fmt(hi[a]), fmt(sum[a] / static_cast<double>(cloud.size()))});
      }
      out << text_table(rows);
    } else {
      throw ParseError("'" + path + "' is not a PLY, checkpoint or embedding file");
    }
  }
  if (ply_files > 1) {
    out << "gaussian-count histogram over " << ply_files << " files:\n";
    for (const char* label : {"<1k", "1k-5k", "5k-10k", "10k-20k", "20k-50k", ">=50k"}) {
      out << "  " << label << ": " << histogram[label] << "\n";
    }
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Align 3D gaussian splatting assets with frozen image/text embeddings", "splatalign"};
  app.require_subcommand(1);

  // fixtures
  FixtureConfig fc;
  std::string fixture_out;
  CLI::App* fixtures = app.add_subcommand("fixtures", "Generate a synthetic triplet dataset");
  fixtures->add_option("--classes", fc.classes, "Number of classes (>= 2)");
  fixtures->add_option("--per-class", fc.per_class, "Objects per class");
  fixtures->add_option("--views", fc.views, "Image embeddings per object");
  fixtures->add_option("--dim", fc.dim, "Teacher embedding dimension");
  fixtures->add_option("--noise", fc.noise, "Embedding noise sigma");
  fixtures->add_option("--seed", fc.seed, "Seed");
  fixtures->add_option("--holdout", fc.holdout_per_class, "Objects per class written to heldout.json");
  fixtures->add_option("--min-points", fc.min_points, "Minimum gaussians per object");
  fixtures->add_option("--max-points", fc.max_points, "Maximum gaussians per object");
  fixtures->add_option("--out", fixture_out, "Output directory")->required();

  // train
  Overlay train_ov;
  std::string train_config;
  CLI::App* train = app.add_subcommand("train", "Train the encoder; writes a checkpoint and a JSONL log");
  train->add_option("--config", train_config, "JSON run config; flags override it");
  add_model_flags(train, train_ov);
  add_train_flags(train, train_ov);
  add_data_flags(train, train_ov);
  train_ov.add<std::string>(train, "--out", [](RunConfig& c, const std::string& v) { c.checkpoint = v; },
                            "Checkpoint to write");
  train_ov.add<std::string>(train, "--log", [](RunConfig& c, const std::string& v) { c.log = v; },
                            "JSONL log (default: <checkpoint>.log.jsonl)");

  // eval
  Overlay eval_ov;
  std::string eval_config;
  CLI::App* eval = app.add_subcommand("eval", "Retrieval, zero-shot and few-shot metrics");
  eval->add_option("--config", eval_config, "JSON run config; flags override it");
  add_data_flags(eval, eval_ov);
  add_eval_flags(eval, eval_ov);
  eval_ov.add<std::string>(eval, "--checkpoint", [](RunConfig& c, const std::string& v) { c.checkpoint = v; },
                           "Trained checkpoint");
  eval_ov.add<std::string>(eval, "--out", [](RunConfig& c, const std::string& v) { c.out = v; },
                           "Report prefix; writes PREFIX.json and PREFIX.txt");
  eval_ov.add<std::size_t>(eval, "--threads", [](RunConfig& c, std::size_t v) { c.train.threads = v; },
                           "Worker threads");
  eval_ov.add<std::uint64_t>(eval, "--seed", [](RunConfig& c, std::uint64_t v) { c.eval_seed = v; },
                             "Few-shot sampling seed");

  // inspect
  std::vector<std::string> inspect_paths;
  CLI::App* inspect = app.add_subcommand("inspect", "Summarize PLY, checkpoint or embedding files");
  inspect->add_option("paths", inspect_paths, "Files to inspect")->required();

  // ablate
  Overlay ablate_ov;
  std::string ablate_config;
  CLI::App* ablate = app.add_subcommand("ablate", "Train and evaluate under each ordering and all three");
  ablate->add_option("--config", ablate_config, "JSON run config; flags override it");
  add_model_flags(ablate, ablate_ov);
  add_train_flags(ablate, ablate_ov);
  add_data_flags(ablate, ablate_ov);
  ablate_ov.add<std::string>(ablate, "--eval-manifest",
                             [](RunConfig& c, const std::string& v) { c.eval_manifest = v; },
                             "Manifest evaluated after each run (default: --manifest)");
  ablate_ov.add<std::string>(ablate, "--out", [](RunConfig& c, const std::string& v) { c.out = v; },
                             "Report prefix; writes PREFIX.json and PREFIX.txt");

  std::vector<std::string> argv_storage{"splatalign"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*fixtures) return cmd_fixtures(fc, fixture_out, out);
    if (*train) return cmd_train(train_ov.resolve(train_config), out);
    if (*eval) return cmd_eval(eval_ov.resolve(eval_config), out);
    if (*inspect) return cmd_inspect(inspect_paths, out);
    if (*ablate) return cmd_ablate(ablate_ov.resolve(ablate_config), out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace splatalign::cli
