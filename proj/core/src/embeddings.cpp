#include "splatalign/embeddings.hpp"

#include <cstring>

#include "splatalign/errors.hpp"
#include "splatalign/ply.hpp"

namespace splatalign {

void EmbeddingTable::add(std::string key, std::span<const float> row) {
  if (row.size() != dim_) {
    throw DimensionMismatchError("embedding '" + key + "' has " + std::to_string(row.size()) +
                                 " values but the table dimension is " + std::to_string(dim_));
  }
  if (index_.contains(key)) throw DuplicateKeyError("duplicate embedding key '" + key + "'");
  index_.emplace(key, keys_.size());
  keys_.push_back(std::move(key));
  data_.insert(data_.end(), row.begin(), row.end());
}

std::span<const float> EmbeddingTable::row(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) throw DanglingKeyError("no embedding with key '" + key + "'");
  return row_at(it->second);
}

std::span<const float> EmbeddingTable::row_at(std::size_t i) const {
  if (i >= keys_.size()) throw ArgumentError("embedding row index out of range");
  return {data_.data() + i * dim_, dim_};
}

Vector EmbeddingTable::row_vector(const std::string& key) const {
  const auto r = row(key);
  Vector v(static_cast<Eigen::Index>(r.size()));
  for (std::size_t k = 0; k < r.size(); ++k) v(static_cast<Eigen::Index>(k)) = r[k];
  return v;
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
  return dim_ == other.dim_ && keys_ == other.keys_ && data_.size() == other.data_.size() &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

std::vector<std::byte> encode_embeddings(const EmbeddingTable& table) {
  std::vector<std::byte> out;
  const auto put = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out.insert(out.end(), b, b + n);
  };
  const auto put_u32 = [&](std::uint32_t v) { put(&v, 4); };
  put("GSEB", 4);
  put_u32(kEmbeddingTableVersion);
  put_u32(static_cast<std::uint32_t>(table.dim()));
  put_u32(static_cast<std::uint32_t>(table.size()));
  for (std::size_t i = 0; i < table.size(); ++i) {
    const std::string& key = table.keys()[i];
    if (key.size() > 0xffff) throw ArgumentError("embedding key too long: " + key);
    const auto len = static_cast<std::uint16_t>(key.size());
    put(&len, 2);
    put(key.data(), key.size());
    const auto row = table.row_at(i);
    put(row.data(), row.size() * sizeof(float));
  }
  return out;
}

EmbeddingTable decode_embeddings(std::span<const std::byte> bytes) {
  std::size_t pos = 0;
  const auto take = [&](void* dst, std::size_t n, const char* what) {
    if (bytes.size() - pos < n) {
      throw SizeMismatchError(std::string("embedding table truncated while reading ") + what);
    }
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  };
  char magic[4];
  if (bytes.size() < 4) throw ParseError("not an embedding table: file shorter than the magic");
  take(magic, 4, "magic");
  if (std::memcmp(magic, "GSEB", 4) != 0) throw ParseError("not an embedding table: bad magic");
  std::uint32_t version = 0, dim = 0, count = 0;
  take(&version, 4, "version");
  if (version != kEmbeddingTableVersion) {
    throw VersionError("embedding table version " + std::to_string(version) + " is not supported");
  }
  take(&dim, 4, "dim");
  take(&count, 4, "count");
  if (dim == 0) throw ParseError("embedding table declares dimension 0");

  EmbeddingTable table(dim);
  std::vector<float> row(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t len = 0;
    take(&len, 2, "key length");
    std::string key(len, '\0');
    take(key.data(), len, "key");
    const std::size_t available = bytes.size() - pos;
    if (available < dim * sizeof(float)) {
      // Only the final row can come up short; report how many values it holds.
      throw DimensionMismatchError("embedding '" + key + "' holds " +
                                   std::to_string(available / sizeof(float)) +
                                   " values but the table dimension is " + std::to_string(dim));
    }
    take(row.data(), dim * sizeof(float), "row");
    table.add(std::move(key), row);
  }
  if (pos != bytes.size()) {
    throw SizeMismatchError("embedding table has " + std::to_string(bytes.size() - pos) +
                            " trailing bytes after " + std::to_string(count) + " rows");
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(read_file_bytes(path));
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  write_file_bytes(path, encode_embeddings(table));
}

}  // namespace splatalign
