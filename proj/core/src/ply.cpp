#include "splatalign/ply.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string_view>

#include "splatalign/errors.hpp"

namespace splatalign {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

constexpr std::array<std::string_view, kGaussianAttributes> kRequired = {
    "x",       "y",       "z",       "f_dc_0", "f_dc_1",
    "f_dc_2",  "opacity", "scale_0", "scale_1", "scale_2",
    "rot_0",   "rot_1",   "rot_2",   "rot_3"};

enum class ScalarType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<ScalarType> scalar_type(std::string_view name) {
  if (name == "char" || name == "int8") return ScalarType::i8;
  if (name == "uchar" || name == "uint8") return ScalarType::u8;
  if (name == "short" || name == "int16") return ScalarType::i16;
  if (name == "ushort" || name == "uint16") return ScalarType::u16;
  if (name == "int" || name == "int32") return ScalarType::i32;
  if (name == "uint" || name == "uint32") return ScalarType::u32;
  if (name == "float" || name == "float32") return ScalarType::f32;
  if (name == "double" || name == "float64") return ScalarType::f64;
  return std::nullopt;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::i8:
    case ScalarType::u8:
      return 1;
    case ScalarType::i16:
    case ScalarType::u16:
      return 2;
    case ScalarType::i32:
    case ScalarType::u32:
    case ScalarType::f32:
      return 4;
    case ScalarType::f64:
      return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::f32;
  bool is_list = false;
  std::size_t offset = 0;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
  std::size_t stride = 0;
  bool has_list = false;
};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

[[noreturn]] void header_error(std::size_t line_no, std::string_view line,
                               std::string_view why) {
  std::ostringstream os;
  os << "PLY header line " << line_no << " ('" << line << "'): " << why;
  throw ParseError(os.str());
}

std::size_t parse_count(std::string_view s, std::size_t line_no,
                        std::string_view line) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) {
        return c >= '0' && c <= '9';
      })) {
    header_error(line_no, line, "element count is not a non-negative integer");
  }
  std::size_t v = 0;
  for (char c : s) v = v * 10 + static_cast<std::size_t>(c - '0');
  return v;
}

float read_scalar(const std::byte* p, ScalarType t) {
  switch (t) {
    case ScalarType::f32: {
      float v;
      std::memcpy(&v, p, 4);
      return v;
    }
    case ScalarType::f64: {
      double v;
      std::memcpy(&v, p, 8);
      return static_cast<float>(v);
    }
    default:
      break;
  }
  return 0.0f;
}

}  // namespace

GaussianCloud parse_ply(std::span<const std::byte> bytes, std::string source_id) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()),
                              bytes.size());
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    if (pos >= text.size()) return std::nullopt;
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) return std::nullopt;
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl + 1;
    ++line_no;
    return line;
  };

  auto first = next_line();
  if (!first || *first != "ply") {
    header_error(1, first.value_or(""), "expected magic 'ply'");
  }

  std::vector<Element> elements;
  bool saw_format = false;
  bool saw_end = false;
  while (auto line = next_line()) {
    const auto tok = split_ws(*line);
    if (tok.empty()) continue;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3) header_error(line_no, *line, "malformed format line");
      if (tok[1] != "binary_little_endian") {
        header_error(line_no, *line, "only binary_little_endian is supported");
      }
      if (tok[2] != "1.0") header_error(line_no, *line, "unsupported version");
      saw_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) header_error(line_no, *line, "malformed element line");
      Element e;
      e.name = std::string(tok[1]);
      e.count = parse_count(tok[2], line_no, *line);
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty()) {
        header_error(line_no, *line, "property declared before any element");
      }
      Element& e = elements.back();
      Property p;
      if (tok.size() == 5 && tok[1] == "list") {
        if (!scalar_type(tok[2]) || !scalar_type(tok[3])) {
          header_error(line_no, *line, "unknown list property type");
        }
        p.name = std::string(tok[4]);
        p.is_list = true;
        e.has_list = true;
      } else if (tok.size() == 3) {
        const auto t = scalar_type(tok[1]);
        if (!t) header_error(line_no, *line, "unknown property type");
        p.name = std::string(tok[2]);
        p.type = *t;
        p.offset = e.stride;
        e.stride += scalar_size(*t);
      } else {
        header_error(line_no, *line, "malformed property line");
      }
      e.properties.push_back(std::move(p));
    } else if (tok[0] == "end_header") {
      saw_end = true;
      break;
    } else {
      header_error(line_no, *line, "unknown header keyword");
    }
  }
  if (!saw_end) throw ParseError("PLY header: missing end_header");
  if (!saw_format) throw ParseError("PLY header: missing format line");

  const auto vertex_it = std::find_if(elements.begin(), elements.end(),
                                      [](const Element& e) { return e.name == "vertex"; });
  if (vertex_it == elements.end()) {
    throw SchemaError("PLY header: missing element 'vertex'");
  }
  const Element& vertex = *vertex_it;

  std::array<const Property*, kGaussianAttributes> layout{};
  for (std::size_t a = 0; a < kRequired.size(); ++a) {
    const auto it = std::find_if(
        vertex.properties.begin(), vertex.properties.end(),
        [&](const Property& p) { return p.name == kRequired[a]; });
    if (it == vertex.properties.end()) {
      throw SchemaError("PLY vertex element is missing required property '" +
                        std::string(kRequired[a]) + "'");
    }
    if (it->is_list || (it->type != ScalarType::f32 && it->type != ScalarType::f64)) {
      throw SchemaError("PLY vertex property '" + it->name +
                        "' must be a float or double scalar");
    }
    layout[a] = &*it;
  }
  if (vertex.has_list) {
    throw SchemaError("PLY vertex element contains a list property");
  }

  // Elements preceding the vertex block must be fixed-size to locate it.
  std::size_t vertex_offset = pos;
  for (auto it = elements.begin(); it != vertex_it; ++it) {
    if (it->has_list) {
      throw SchemaError("PLY element '" + it->name +
                        "' before 'vertex' contains a list property");
    }
    vertex_offset += it->count * it->stride;
  }
  const std::size_t vertex_bytes = vertex.count * vertex.stride;
  const bool fixed_size = std::none_of(elements.begin(), elements.end(),
                                       [](const Element& e) { return e.has_list; });
  std::size_t expected = pos;
  for (const Element& e : elements) expected += e.count * e.stride;
  if (bytes.size() < vertex_offset + vertex_bytes ||
      (fixed_size && bytes.size() != expected)) {
    std::ostringstream os;
    os << "PLY payload size mismatch: header implies "
       << (fixed_size ? expected : vertex_offset + vertex_bytes)
       << " bytes, got " << bytes.size();
    throw SizeMismatchError(os.str());
  }
  if (vertex.count == 0) {
    throw EmptyCloudError("PLY declares 0 vertices; clouds must be non-empty");
  }

  GaussianCloud cloud;
  cloud.source_id = std::move(source_id);
  cloud.points.reserve(vertex.count);
  const std::byte* base = bytes.data() + vertex_offset;
  std::array<float, kGaussianAttributes> values{};
  for (std::size_t i = 0; i < vertex.count; ++i) {
    const std::byte* row = base + i * vertex.stride;
    for (std::size_t a = 0; a < kGaussianAttributes; ++a) {
      values[a] = read_scalar(row + layout[a]->offset, layout[a]->type);
    }
    cloud.points.push_back(GaussianPoint::from_vector(values));
  }
  cloud.validate();
  return cloud;
}

std::vector<std::byte> write_ply(const GaussianCloud& cloud) {
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n";
  header << "element vertex " << cloud.size() << "\n";
  for (std::string_view name : kRequired) header << "property float " << name << "\n";
  header << "end_header\n";
  const std::string h = header.str();

  std::vector<std::byte> out(h.size() + cloud.size() * kGaussianAttributes * 4);
  std::memcpy(out.data(), h.data(), h.size());
  std::byte* dst = out.data() + h.size();
  for (const GaussianPoint& p : cloud.points) {
    const auto v = p.vectorize();
    std::memcpy(dst, v.data(), sizeof(float) * v.size());
    dst += sizeof(float) * v.size();
  }
  return out;
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  if (size < 0) throw IoError("cannot determine size of '" + path.string() + "'");
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> data(static_cast<std::size_t>(size));
  if (!data.empty() &&
      !in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size))) {
    throw IoError("failed reading '" + path.string() + "'");
  }
  return data;
}

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

GaussianCloud read_ply_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_ply(bytes, path.stem().string());
}

void write_ply_file(const GaussianCloud& cloud, const std::filesystem::path& path) {
  write_file_bytes(path, write_ply(cloud));
}

}  // namespace splatalign
