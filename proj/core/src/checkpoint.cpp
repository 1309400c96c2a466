#include "splatalign/checkpoint.hpp"

#include <cstring>
#include <unordered_set>

#include "json.hpp"
#include "splatalign/errors.hpp"
#include "splatalign/ply.hpp"

namespace splatalign {
namespace {

using json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'G', 'S', 'C', 'K'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void scalar(T v) {
    bytes(&v, sizeof(T));
  }
  std::vector<std::byte> take() { return std::move(out_); }

 private:
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}
  void bytes(void* dst, std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw SizeMismatchError(std::string("checkpoint truncated while reading ") + what);
    }
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T scalar(const char* what) {
    T v;
    bytes(&v, sizeof(T), what);
    return v;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::byte> encode_checkpoint(const CheckpointFile& file) {
  Writer w;
  w.bytes(kMagic, 4);
  w.scalar<std::uint32_t>(file.version);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(file.config_json.size()));
  w.bytes(file.config_json.data(), file.config_json.size());
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(file.tensors.size()));
  for (const NamedTensor& t : file.tensors) {
    if (t.name.size() > 0xffff) throw ArgumentError("tensor name too long: " + t.name);
    if (t.shape.size() > 0xff) throw ArgumentError("tensor rank too large: " + t.name);
    w.scalar<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.scalar<std::uint8_t>(static_cast<std::uint8_t>(t.shape.size()));
    std::size_t numel = 1;
    for (std::size_t dim : t.shape) {
      w.scalar<std::uint32_t>(static_cast<std::uint32_t>(dim));
      numel *= dim;
    }
    if (numel != t.values.size()) {
      throw ShapeMismatchError("tensor '" + t.name + "' payload does not match its shape");
    }
    w.bytes(t.values.data(), t.values.size() * sizeof(float));
  }
  return w.take();
}

CheckpointFile decode_checkpoint(std::span<const std::byte> bytes) {
  Reader r(bytes);
  char magic[4];
  if (bytes.size() < 4) throw ParseError("not a checkpoint: file shorter than the magic");
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("not a checkpoint: bad magic bytes");

  CheckpointFile file;
  file.version = r.scalar<std::uint32_t>("version");
  if (file.version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(file.version) +
                       " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto config_len = r.scalar<std::uint32_t>("config length");
  file.config_json.resize(config_len);
  r.bytes(file.config_json.data(), config_len, "config");
  const auto count = r.scalar<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = r.scalar<std::uint16_t>("tensor name length");
    t.name.resize(name_len);
    r.bytes(t.name.data(), name_len, "tensor name");
    const auto rank = r.scalar<std::uint8_t>("tensor rank");
    std::size_t numel = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      t.shape.push_back(r.scalar<std::uint32_t>("tensor dims"));
      numel *= t.shape.back();
    }
    if (numel > r.remaining() / sizeof(float)) {
      throw SizeMismatchError("checkpoint truncated inside tensor '" + t.name + "'");
    }
    t.values.resize(numel);
    r.bytes(t.values.data(), numel * sizeof(float), "tensor payload");
    file.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) {
    throw SizeMismatchError("checkpoint has " + std::to_string(r.remaining()) +
                            " trailing bytes");
  }
  return file;
}

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& file) {
  write_file_bytes(path, encode_checkpoint(file));
}

std::string model_config_to_json(const ModelConfig& c) {
  json orderings = json::array();
  for (Ordering o : c.tokenizer.orderings) orderings.push_back(std::string(ordering_name(o)));
  json j = {
      {"tokenizer",
       {{"num_patches", c.tokenizer.num_patches},
        {"neighbors", c.tokenizer.neighbors},
        {"points", c.tokenizer.points},
        {"orderings", orderings},
        {"quant_bits", c.tokenizer.quant_bits},
        {"token_dim", c.tokenizer.token_dim}}},
      {"encoder",
       {{"preset", c.encoder.preset},
        {"depth", c.encoder.depth},
        {"width", c.encoder.width},
        {"heads", c.encoder.heads},
        {"clip_dim", c.encoder.clip_dim}}},
      {"numeric", std::string(numeric_mode_name(c.numeric))},
      {"init_tau", c.init_tau}};
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    if (j.contains("model")) j = j.at("model");
    ModelConfig c;
    const auto& t = j.at("tokenizer");
    c.tokenizer.num_patches = t.at("num_patches").get<std::size_t>();
    c.tokenizer.neighbors = t.at("neighbors").get<std::size_t>();
    c.tokenizer.points = t.at("points").get<std::size_t>();
    c.tokenizer.orderings.clear();
    for (const auto& o : t.at("orderings")) {
      c.tokenizer.orderings.push_back(parse_ordering(o.get<std::string>()));
    }
    c.tokenizer.quant_bits = t.at("quant_bits").get<unsigned>();
    c.tokenizer.token_dim = t.at("token_dim").get<std::size_t>();
    const auto& e = j.at("encoder");
    c.encoder.preset = e.at("preset").get<std::string>();
    c.encoder.depth = e.at("depth").get<std::size_t>();
    c.encoder.width = e.at("width").get<std::size_t>();
    c.encoder.heads = e.at("heads").get<std::size_t>();
    c.encoder.clip_dim = e.at("clip_dim").get<std::size_t>();
    c.numeric = parse_numeric_mode(j.at("numeric").get<std::string>());
    c.init_tau = j.value("init_tau", kDefaultInitTau);
    c.validate();
    return c;
  } catch (const json::exception& ex) {
    throw ParseError(std::string("invalid model config JSON: ") + ex.what());
  }
}

std::string checkpoint_config_json(const ModelConfig& config, const std::string& run_json) {
  json j;
  j["model"] = json::parse(model_config_to_json(config));
  if (!run_json.empty()) j["run"] = json::parse(run_json);
  return j.dump();
}

std::vector<NamedTensor> export_tensors(const ParamSet& params, std::string_view prefix) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    NamedTensor t;
    t.name = std::string(prefix) + params.spec(i).name;
    t.shape = params.spec(i).shape;
    const auto v = params.values(i);
    t.values.reserve(v.size());
    for (double x : v) t.values.push_back(static_cast<float>(x));
    out.push_back(std::move(t));
  }
  return out;
}

void save_params(const Model& model, const std::filesystem::path& path,
                 std::span<const NamedTensor> extra, const std::string& run_json) {
  CheckpointFile file;
  file.config_json = checkpoint_config_json(model.config(), run_json);
  file.tensors = export_tensors(model.params());
  file.tensors.insert(file.tensors.end(), extra.begin(), extra.end());
  write_checkpoint(path, file);
}

Model load_params(const std::filesystem::path& path, const ModelConfig* expected,
                  LoadReport* report, std::uint64_t init_seed) {
  return load_params(read_checkpoint(path), expected, report, init_seed);
}

Model load_params(const CheckpointFile& file, const ModelConfig* expected, LoadReport* report,
                  std::uint64_t init_seed) {
  const ModelConfig config = expected ? *expected : model_config_from_json(file.config_json);
  Model model(config, init_seed);
  ParamSet& params = model.params();

  LoadReport local;
  LoadReport& rep = report ? *report : local;
  rep.config_json = file.config_json;

  std::unordered_set<std::string> seen;
  for (const NamedTensor& t : file.tensors) {
    if (t.name.starts_with(kOptimizerPrefix)) {
      rep.extra.push_back(t);
      continue;
    }
    const auto idx = params.find(t.name);
    if (!idx) {
      rep.warnings.push_back("ignored unknown tensor '" + t.name + "'");
      continue;
    }
    if (t.shape != params.spec(*idx).shape) {
      auto fmt = [](const std::vector<std::size_t>& s) {
        std::string out = "[";
        for (std::size_t k = 0; k < s.size(); ++k) out += (k ? "," : "") + std::to_string(s[k]);
        return out + "]";
      };
      throw ShapeMismatchError("tensor '" + t.name + "' has shape " + fmt(t.shape) +
                               " but the config expects " + fmt(params.spec(*idx).shape));
    }
    auto dst = params.values(*idx);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<double>(t.values[k]);
    seen.insert(t.name);
  }

  std::size_t fresh_tokenizer = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& spec = params.spec(i);
    if (seen.contains(spec.name)) continue;
    if (spec.name.starts_with("tokenizer.")) {
      ++fresh_tokenizer;
      continue;
    }
    throw SchemaError("checkpoint is missing tensor '" + spec.name + "'");
  }
  if (fresh_tokenizer > 0) {
    rep.warnings.push_back("checkpoint lacks " + std::to_string(fresh_tokenizer) +
                           " tokenizer tensors; initialized them fresh");
  }
  model.apply_storage_precision();
  return model;
}

}  // namespace splatalign
