#include "splatalign/manifest.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "splatalign/errors.hpp"

namespace splatalign {

using json = nlohmann::ordered_json;

std::filesystem::path TripletManifest::asset_path(std::size_t i) const {
  const std::filesystem::path p(entries.at(i).asset);
  return p.is_absolute() ? p : base_dir / p;
}

TripletManifest parse_manifest(const std::string& json_text, std::filesystem::path base_dir) {
  TripletManifest m;
  m.base_dir = std::move(base_dir);
  try {
    const json j = json::parse(json_text);
    if (!j.contains("dim")) throw SchemaError("manifest is missing 'dim'");
    if (!j.contains("entries")) throw SchemaError("manifest is missing 'entries'");
    m.dim = j.at("dim").get<std::size_t>();
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      for (const char* field : {"asset", "text_key", "image_keys"}) {
        if (!e.contains(field)) {
          throw SchemaError("manifest entry " + std::to_string(m.entries.size()) +
                            " is missing '" + field + "'");
        }
      }
      entry.asset = e.at("asset").get<std::string>();
      entry.text_key = e.at("text_key").get<std::string>();
      entry.image_keys = e.at("image_keys").get<std::vector<std::string>>();
      if (e.contains("label") && !e.at("label").is_null()) {
        entry.label = e.at("label").get<std::string>();
      }
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& ex) {
    throw ParseError(std::string("invalid manifest JSON: ") + ex.what());
  }
  if (m.dim == 0) throw SchemaError("manifest 'dim' must be positive");
  std::unordered_set<std::string> text_keys;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    if (e.image_keys.empty()) {
      throw SchemaError("manifest entry '" + e.text_key + "' has no image embedding keys");
    }
    if (!text_keys.insert(e.text_key).second) {
      throw DuplicateKeyError("manifest lists text key '" + e.text_key + "' twice");
    }
  }
  return m;
}

TripletManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  TripletManifest m = parse_manifest(ss.str(), path.parent_path());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    if (!std::filesystem::exists(m.asset_path(i))) {
      throw DanglingKeyError("manifest asset '" + m.entries[i].asset + "' does not exist");
    }
  }
  return m;
}

std::string manifest_to_json(const TripletManifest& manifest) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    json je;
    je["asset"] = e.asset;
    je["text_key"] = e.text_key;
    je["image_keys"] = e.image_keys;
    je["label"] = e.label ? json(*e.label) : json(nullptr);
    entries.push_back(std::move(je));
  }
  json j;
  j["dim"] = manifest.dim;
  j["entries"] = std::move(entries);
  return j.dump(2) + "\n";
}

void save_manifest(const TripletManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << manifest_to_json(manifest);
  if (!out) throw IoError("failed writing manifest '" + path.string() + "'");
}

void resolve_manifest(const TripletManifest& manifest, const EmbeddingTable& text,
                      const EmbeddingTable& images) {
  for (const EmbeddingTable* t : {&text, &images}) {
    if (t->dim() != manifest.dim) {
      throw DimensionMismatchError("embedding table dimension " + std::to_string(t->dim()) +
                                   " does not match manifest dimension " +
                                   std::to_string(manifest.dim));
    }
  }
  for (const auto& e : manifest.entries) {
    if (!text.contains(e.text_key)) {
      throw DanglingKeyError("manifest references missing text key '" + e.text_key + "'");
    }
    for (const auto& k : e.image_keys) {
      if (!images.contains(k)) {
        throw DanglingKeyError("manifest references missing image key '" + k + "'");
      }
    }
  }
}

}  // namespace splatalign
