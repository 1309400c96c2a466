#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splatalign/embeddings.hpp"
#include "splatalign/manifest.hpp"
#include "splatalign/tensor.hpp"

namespace splatalign {

struct SimilarityMatrix {
  Matrix values;  // queries x candidates
  std::vector<std::string> query_keys;
  std::vector<std::string> candidate_keys;
};

// Cosine similarities between row sets (rows need not be unit length; zero
// rows give similarity 0).
SimilarityMatrix cosine_similarity(const Matrix& queries, std::vector<std::string> query_keys,
                                   const Matrix& candidates,
                                   std::vector<std::string> candidate_keys);

// 0-based rank of candidate `c` in row `q`: candidates with a higher score,
// or an equal score and a smaller key, come first.
std::size_t rank_of(const SimilarityMatrix& sim, std::size_t q, std::size_t c);

// truth[q] is the key of the single correct candidate of query q.
double recall_at_k(const SimilarityMatrix& sim, std::span<const std::string> truth, std::size_t k);
// Any-of variant: a query counts when one of its true candidates is in the top k.
double recall_at_k_any(const SimilarityMatrix& sim,
                       std::span<const std::vector<std::string>> truth, std::size_t k);

enum class Direction { text_to_3d, gs_to_text, image_to_3d, gs_to_image };
std::string_view direction_name(Direction d);

struct RetrievalReport {
  Direction direction = Direction::text_to_3d;
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  std::size_t queries = 0;
};

// gaussian[i] is the embedding of manifest.entries[i].
std::vector<RetrievalReport> retrieval_eval(std::span<const Vector> gaussian,
                                            const EmbeddingTable& text,
                                            const EmbeddingTable& images,
                                            const TripletManifest& manifest);

struct ZeroShotReport {
  double top1 = 0.0;
  double top3 = 0.0;
  double top5 = 0.0;
  std::size_t objects = 0;
  std::size_t classes = 0;
};

// Every label must be a key of `classes`; unlabeled objects are an error.
ZeroShotReport zero_shot_classify(std::span<const Vector> gaussian,
                                  std::span<const std::optional<std::string>> labels,
                                  const EmbeddingTable& classes);

struct FewShotReport {
  std::size_t n_way = 0;
  std::size_t m_shot = 0;
  std::vector<double> accuracies;
  double mean = 0.0;
  double std = 0.0;  // population
};

FewShotReport few_shot_eval(std::span<const Vector> embeddings,
                            std::span<const std::optional<std::string>> labels, std::size_t n_way,
                            std::size_t m_shot, std::size_t runs = 5, std::uint64_t seed = 0);

std::vector<std::optional<std::string>> manifest_labels(const TripletManifest& manifest);

}  // namespace splatalign
