#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "splatalign/tensor.hpp"

namespace splatalign {

inline constexpr std::uint32_t kEmbeddingTableVersion = 1;

// Precomputed teacher embeddings keyed by string ("<object>/text",
// "<object>/view_<k>", class names, ...). Rows keep insertion order.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }

  // DimensionMismatchError on a wrong row length, DuplicateKeyError on reuse.
  void add(std::string key, std::span<const float> row);
  bool contains(const std::string& key) const { return index_.contains(key); }
  // DanglingKeyError if absent.
  std::span<const float> row(const std::string& key) const;
  std::span<const float> row_at(std::size_t i) const;
  Vector row_vector(const std::string& key) const;

  bool operator==(const EmbeddingTable& other) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> keys_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

// "GSEB" | version u32 | dim u32 | count u32 | rows of
// (key length u16, UTF-8 key, dim x f32), all little-endian.
std::vector<std::byte> encode_embeddings(const EmbeddingTable& table);
EmbeddingTable decode_embeddings(std::span<const std::byte> bytes);

EmbeddingTable load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

}  // namespace splatalign
