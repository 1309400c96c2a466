#include "splatalign/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "splatalign/errors.hpp"
#include "splatalign/rng.hpp"

namespace splatalign {
namespace {

Matrix normalized_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

Matrix stack(std::span<const Vector> rows) {
  if (rows.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw DimensionMismatchError("embedding rows differ in length");
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

Matrix table_rows(const EmbeddingTable& table, const std::vector<std::string>& keys) {
  Matrix m(static_cast<Eigen::Index>(keys.size()), static_cast<Eigen::Index>(table.dim()));
  for (std::size_t i = 0; i < keys.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = table.row_vector(keys[i]).transpose();
  }
  return m;
}

std::unordered_map<std::string, std::size_t> key_index(const std::vector<std::string>& keys) {
  std::unordered_map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < keys.size(); ++i) idx.emplace(keys[i], i);
  return idx;
}

std::size_t find_candidate(const std::unordered_map<std::string, std::size_t>& idx,
                           const std::string& key) {
  auto it = idx.find(key);
  if (it == idx.end()) throw DanglingKeyError("truth key '" + key + "' is not among the candidates");
  return it->second;
}

}  // namespace

SimilarityMatrix cosine_similarity(const Matrix& queries, std::vector<std::string> query_keys,
                                   const Matrix& candidates,
                                   std::vector<std::string> candidate_keys) {
  if (queries.cols() != candidates.cols()) {
    throw DimensionMismatchError("query and candidate embeddings differ in dimension");
  }
  if (static_cast<std::size_t>(queries.rows()) != query_keys.size() ||
      static_cast<std::size_t>(candidates.rows()) != candidate_keys.size()) {
    throw ArgumentError("similarity key lists do not match the row counts");
  }
  SimilarityMatrix s;
  s.values = normalized_rows(queries) * normalized_rows(candidates).transpose();
  s.query_keys = std::move(query_keys);
  s.candidate_keys = std::move(candidate_keys);
  return s;
}

std::size_t rank_of(const SimilarityMatrix& sim, std::size_t q, std::size_t c) {
  const auto row = sim.values.row(static_cast<Eigen::Index>(q));
  const double target = row(static_cast<Eigen::Index>(c));
  const std::string& key = sim.candidate_keys[c];
  std::size_t rank = 0;
  for (std::size_t j = 0; j < sim.candidate_keys.size(); ++j) {
    if (j == c) continue;
    const double v = row(static_cast<Eigen::Index>(j));
    if (v > target || (v == target && sim.candidate_keys[j] < key)) ++rank;
  }
  return rank;
}

double recall_at_k(const SimilarityMatrix& sim, std::span<const std::string> truth, std::size_t k) {
  std::vector<std::vector<std::string>> wrapped;
  wrapped.reserve(truth.size());
  for (const auto& t : truth) wrapped.push_back({t});
  return recall_at_k_any(sim, wrapped, k);
}

double recall_at_k_any(const SimilarityMatrix& sim,
                       std::span<const std::vector<std::string>> truth, std::size_t k) {
  if (truth.size() != sim.query_keys.size()) {
    throw ArgumentError("truth list does not match the number of queries");
  }
  if (truth.empty()) throw ArgumentError("recall over zero queries");
  const auto idx = key_index(sim.candidate_keys);
  std::size_t hits = 0;
  for (std::size_t q = 0; q < truth.size(); ++q) {
    if (truth[q].empty()) throw ArgumentError("query '" + sim.query_keys[q] + "' has no truth");
    bool hit = false;
    for (const std::string& t : truth[q]) {
      if (rank_of(sim, q, find_candidate(idx, t)) < k) hit = true;
    }
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::string_view direction_name(Direction d) {
  switch (d) {
    case Direction::text_to_3d: return "text_to_3d";
    case Direction::gs_to_text: return "3d_to_text";
    case Direction::image_to_3d: return "image_to_3d";
    case Direction::gs_to_image: return "3d_to_image";
  }
  return "?";
}

std::vector<RetrievalReport> retrieval_eval(std::span<const Vector> gaussian,
                                            const EmbeddingTable& text,
                                            const EmbeddingTable& images,
                                            const TripletManifest& manifest) {
  if (gaussian.size() != manifest.entries.size()) {
    throw ArgumentError("expected one gaussian embedding per manifest entry");
  }
  if (gaussian.empty()) throw ArgumentError("retrieval over an empty manifest");
  resolve_manifest(manifest, text, images);

  std::vector<std::string> object_keys, text_keys, image_keys, image_owner;
  std::vector<std::vector<std::string>> views_of;
  for (const ManifestEntry& e : manifest.entries) {
    object_keys.push_back(e.text_key);
    text_keys.push_back(e.text_key);
    views_of.push_back(e.image_keys);
    for (const std::string& k : e.image_keys) {
      image_keys.push_back(k);
      image_owner.push_back(e.text_key);
    }
  }
  const Matrix g = stack(gaussian);
  const Matrix t = table_rows(text, text_keys);
  const Matrix v = table_rows(images, image_keys);

  auto report = [](Direction d, auto&& recall, std::size_t queries) {
    RetrievalReport r;
    r.direction = d;
    r.r1 = recall(1);
    r.r5 = recall(5);
    r.r10 = recall(10);
    r.queries = queries;
    return r;
  };

  std::vector<RetrievalReport> out;
  {
    const SimilarityMatrix s = cosine_similarity(t, text_keys, g, object_keys);
    out.push_back(report(Direction::text_to_3d, [&](std::size_t k) { return recall_at_k(s, object_keys, k); },
                         text_keys.size()));
  }
  {
    const SimilarityMatrix s = cosine_similarity(g, object_keys, t, text_keys);
    out.push_back(report(Direction::gs_to_text, [&](std::size_t k) { return recall_at_k(s, text_keys, k); },
                         object_keys.size()));
  }
  {
    const SimilarityMatrix s = cosine_similarity(v, image_keys, g, object_keys);
    out.push_back(report(Direction::image_to_3d, [&](std::size_t k) { return recall_at_k(s, image_owner, k); },
                         image_keys.size()));
  }
  {
    const SimilarityMatrix s = cosine_similarity(g, object_keys, v, image_keys);
    out.push_back(report(Direction::gs_to_image,
                         [&](std::size_t k) { return recall_at_k_any(s, views_of, k); },
                         object_keys.size()));
  }
  return out;
}

ZeroShotReport zero_shot_classify(std::span<const Vector> gaussian,
                                  std::span<const std::optional<std::string>> labels,
                                  const EmbeddingTable& classes) {
  if (gaussian.size() != labels.size()) throw ArgumentError("expected one label per embedding");
  if (gaussian.empty()) throw ArgumentError("zero-shot over zero objects");
  if (classes.size() == 0) throw ArgumentError("zero-shot needs at least one class embedding");
  std::vector<std::string> object_keys;
  std::vector<std::string> truth;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) throw SchemaError("object " + std::to_string(i) + " has no label");
    if (!classes.contains(*labels[i])) {
      throw DanglingKeyError("label '" + *labels[i] + "' has no class embedding");
    }
    object_keys.push_back(std::to_string(i));
    truth.push_back(*labels[i]);
  }
  const SimilarityMatrix s =
      cosine_similarity(stack(gaussian), object_keys, table_rows(classes, classes.keys()), classes.keys());
  ZeroShotReport r;
  r.top1 = recall_at_k(s, truth, 1);
  r.top3 = recall_at_k(s, truth, 3);
  r.top5 = recall_at_k(s, truth, 5);
  r.objects = gaussian.size();
  r.classes = classes.size();
  return r;
}

FewShotReport few_shot_eval(std::span<const Vector> embeddings,
                            std::span<const std::optional<std::string>> labels, std::size_t n_way,
                            std::size_t m_shot, std::size_t runs, std::uint64_t seed) {
  if (embeddings.size() != labels.size()) throw ArgumentError("expected one label per embedding");
  if (n_way < 1 || m_shot < 1 || runs < 1) throw ArgumentError("few-shot needs n, m, runs >= 1");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) throw SchemaError("object " + std::to_string(i) + " has no label");
    by_class[*labels[i]].push_back(i);
  }
  if (by_class.size() < n_way) {
    throw ArgumentError("few-shot " + std::to_string(n_way) + "-way needs " + std::to_string(n_way) +
                        " classes, found " + std::to_string(by_class.size()));
  }
  for (const auto& [name, members] : by_class) {
    if (members.size() < m_shot + 1) {
      throw ArgumentError("class '" + name + "' has " + std::to_string(members.size()) +
                          " samples; " + std::to_string(m_shot) + "-shot needs at least " +
                          std::to_string(m_shot + 1));
    }
  }
  const Matrix all = normalized_rows(stack(embeddings));
  std::vector<std::string> class_names;
  for (const auto& kv : by_class) class_names.push_back(kv.first);

  FewShotReport report;
  report.n_way = n_way;
  report.m_shot = m_shot;
  for (std::size_t run = 0; run < runs; ++run) {
    Rng rng(seed, "few-shot", run);
    std::vector<std::size_t> cls(class_names.size());
    std::iota(cls.begin(), cls.end(), std::size_t{0});
    for (std::size_t i = 0; i < n_way; ++i) {
      std::swap(cls[i], cls[i + static_cast<std::size_t>(rng.below(cls.size() - i))]);
    }
    cls.resize(n_way);
    std::sort(cls.begin(), cls.end());  // key order for tie-breaks

    Matrix protos = Matrix::Zero(static_cast<Eigen::Index>(n_way), all.cols());
    std::vector<std::string> proto_keys;
    std::vector<std::size_t> queries;
    std::vector<std::string> truth;
    for (std::size_t c = 0; c < n_way; ++c) {
      std::vector<std::size_t> members = by_class[class_names[cls[c]]];
      for (std::size_t i = 0; i < m_shot; ++i) {
        std::swap(members[i], members[i + static_cast<std::size_t>(rng.below(members.size() - i))]);
        protos.row(static_cast<Eigen::Index>(c)) += all.row(static_cast<Eigen::Index>(members[i]));
      }
      protos.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(m_shot);
      const double norm = protos.row(static_cast<Eigen::Index>(c)).norm();
      if (norm > 0.0) protos.row(static_cast<Eigen::Index>(c)) /= norm;
      proto_keys.push_back(class_names[cls[c]]);
      for (std::size_t i = m_shot; i < members.size(); ++i) {
        queries.push_back(members[i]);
        truth.push_back(class_names[cls[c]]);
      }
    }
    Matrix q(static_cast<Eigen::Index>(queries.size()), all.cols());
    std::vector<std::string> qkeys;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      q.row(static_cast<Eigen::Index>(i)) = all.row(static_cast<Eigen::Index>(queries[i]));
      qkeys.push_back(std::to_string(queries[i]));
    }
    SimilarityMatrix s;
    s.values = q * protos.transpose();
    s.query_keys = std::move(qkeys);
    s.candidate_keys = proto_keys;
    report.accuracies.push_back(recall_at_k(s, truth, 1));
  }
  const double n = static_cast<double>(report.accuracies.size());
  report.mean = std::accumulate(report.accuracies.begin(), report.accuracies.end(), 0.0) / n;
  double var = 0.0;
  for (double a : report.accuracies) var += (a - report.mean) * (a - report.mean);
  report.std = std::sqrt(var / n);
  return report;
}

std::vector<std::optional<std::string>> manifest_labels(const TripletManifest& manifest) {
  std::vector<std::optional<std::string>> out;
  for (const ManifestEntry& e : manifest.entries) out.push_back(e.label);
  return out;
}

}  // namespace splatalign
