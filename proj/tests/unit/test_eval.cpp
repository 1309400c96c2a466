#include <gtest/gtest.h>

#include <cmath>

#include "splatalign/errors.hpp"
#include "splatalign/fixtures.hpp"
#include "splatalign/metrics.hpp"
#include "splatalign/report.hpp"
#include "splatalign/rng.hpp"

namespace sa = splatalign;
using sa::Matrix;
using sa::Vector;

namespace {

std::vector<std::string> keys(std::size_t n, const std::string& prefix) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

Vector random_vector(std::size_t d, sa::Rng& rng) {
  Vector v(static_cast<Eigen::Index>(d));
  for (auto& x : v) x = rng.normal();
  return v;
}

std::vector<Vector> teacher_as_gaussian(const sa::SyntheticData& data) {
  std::vector<Vector> out;
  for (const auto& e : data.manifest.entries) out.push_back(data.text.row_vector(e.text_key));
  return out;
}

}  // namespace

TEST(Recall, IdentityIsPerfect) {
  const auto q = keys(5, "q");
  const auto c = keys(5, "c");
  const auto sim = sa::cosine_similarity(Matrix::Identity(5, 5), q, Matrix::Identity(5, 5), c);
  EXPECT_EQ(sa::recall_at_k(sim, c, 1), 1.0);
}

TEST(Recall, AntiDiagonal) {
  Matrix anti = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) anti(i, 3 - i) = 1.0;
  const auto c = keys(4, "c");
  const auto sim = sa::cosine_similarity(anti, keys(4, "q"), Matrix::Identity(4, 4), c);
  EXPECT_EQ(sa::recall_at_k(sim, c, 1), 0.0);
  EXPECT_EQ(sa::recall_at_k(sim, c, 5), 1.0);
  EXPECT_EQ(sa::recall_at_k(sim, c, 4), 1.0);
}

TEST(Recall, TiesBreakOnCandidateKey) {
  Matrix cand(2, 2);
  cand << 1, 0, 1, 0;
  const std::vector<std::string> ck{"b", "a"};
  const auto sim = sa::cosine_similarity(Matrix::Identity(1, 2), {"q"}, cand, ck);
  EXPECT_EQ(sa::rank_of(sim, 0, 1), 0u);
  EXPECT_EQ(sa::rank_of(sim, 0, 0), 1u);
  EXPECT_EQ(sa::recall_at_k(sim, std::vector<std::string>{"b"}, 1), 0.0);
}

TEST(Recall, AnyOfSeveralTruths) {
  Matrix q(1, 3);
  q << 1, 0, 0;
  const auto sim = sa::cosine_similarity(q, {"q"}, Matrix::Identity(3, 3), keys(3, "c"));
  const std::vector<std::vector<std::string>> truth{{"c2", "c0"}};
  EXPECT_EQ(sa::recall_at_k_any(sim, truth, 1), 1.0);
  const std::vector<std::vector<std::string>> miss{{"c2", "c1"}};
  EXPECT_EQ(sa::recall_at_k_any(sim, miss, 1), 0.0);
  EXPECT_EQ(sa::recall_at_k_any(sim, miss, 2), 1.0);
}

TEST(Recall, Errors) {
  const auto sim = sa::cosine_similarity(Matrix::Identity(2, 2), keys(2, "q"), Matrix::Identity(2, 2), keys(2, "c"));
  EXPECT_THROW(sa::recall_at_k(sim, std::vector<std::string>{"c0", "zz"}, 1), sa::DanglingKeyError);
  EXPECT_THROW(sa::recall_at_k(sim, std::vector<std::string>{"c0"}, 1), sa::ArgumentError);
  EXPECT_THROW(sa::cosine_similarity(Matrix::Identity(2, 2), keys(2, "q"), Matrix::Identity(2, 3), keys(2, "c")),
               sa::DimensionMismatchError);
}

TEST(Retrieval, TeacherOracleFindsItsOwnText) {
  sa::FixtureConfig fc;
  fc.classes = 3;
  fc.per_class = 6;
  fc.views = 3;
  fc.dim = 16;
  fc.min_points = 16;
  fc.max_points = 16;
  const auto data = sa::gen_synthetic_triplets(fc);
  const auto reports = sa::retrieval_eval(teacher_as_gaussian(data), data.text, data.images, data.manifest);
  ASSERT_EQ(reports.size(), 4u);
  const std::vector<std::string> names{"text_to_3d", "3d_to_text", "image_to_3d", "3d_to_image"};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(sa::direction_name(reports[i].direction), names[i]);
    EXPECT_GE(reports[i].r10, reports[i].r5);
    EXPECT_GE(reports[i].r5, reports[i].r1);
  }
  EXPECT_EQ(reports[0].r1, 1.0);
  EXPECT_EQ(reports[1].r1, 1.0);
  EXPECT_GT(reports[2].r1, 1.0 / 18.0);
  EXPECT_EQ(reports[0].queries, 18u);
  EXPECT_EQ(reports[2].queries, 54u);
}

TEST(Retrieval, DuplicateTextsTieOnKey) {
  // noise 0 collapses every text of a class onto its prototype
  sa::FixtureConfig fc;
  fc.classes = 2;
  fc.per_class = 3;
  fc.dim = 8;
  fc.noise = 0.0;
  fc.min_points = 16;
  fc.max_points = 16;
  const auto data = sa::gen_synthetic_triplets(fc);
  const auto reports = sa::retrieval_eval(teacher_as_gaussian(data), data.text, data.images, data.manifest);
  // only the smallest key of each class wins its tie
  EXPECT_NEAR(reports[0].r1, 2.0 / 6.0, 1e-12);
  EXPECT_EQ(reports[0].r5, 1.0);
}

TEST(Retrieval, RandomEmbeddingsSitNearChance) {
  sa::Rng rng(11, "chance");
  double total = 0.0;
  const std::size_t n = 100, trials = 30;
  for (std::size_t t = 0; t < trials; ++t) {
    Matrix a(n, 32), b(n, 32);
    for (std::size_t i = 0; i < n; ++i) {
      a.row(static_cast<Eigen::Index>(i)) = random_vector(32, rng).transpose();
      b.row(static_cast<Eigen::Index>(i)) = random_vector(32, rng).transpose();
    }
    const auto c = keys(n, "c");
    total += sa::recall_at_k(sa::cosine_similarity(a, keys(n, "q"), b, c), c, 1);
  }
  EXPECT_NEAR(total / trials, 0.01, 0.006);
}

TEST(ZeroShot, NearestPrototype) {
  sa::EmbeddingTable classes(2);
  classes.add("cat", std::vector<float>{1.0f, 0.0f});
  classes.add("dog", std::vector<float>{0.0f, 1.0f});
  std::vector<Vector> emb{Vector::Unit(2, 0), Vector::Unit(2, 1), Vector::Unit(2, 0)};
  emb[2](1) = 0.9;
  const std::vector<std::optional<std::string>> labels{"cat", "dog", "dog"};
  const auto r = sa::zero_shot_classify(emb, labels, classes);
  EXPECT_NEAR(r.top1, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(r.top3, 1.0);
  EXPECT_EQ(r.objects, 3u);
  EXPECT_EQ(r.classes, 2u);

  const std::vector<std::optional<std::string>> unlabeled{"cat", std::nullopt, "dog"};
  EXPECT_THROW(sa::zero_shot_classify(emb, unlabeled, classes), sa::SchemaError);
  const std::vector<std::optional<std::string>> unknown{"cat", "dog", "eel"};
  try {
    sa::zero_shot_classify(emb, unknown, classes);
    FAIL() << "expected DanglingKeyError";
  } catch (const sa::DanglingKeyError& e) {
    EXPECT_NE(std::string(e.what()).find("eel"), std::string::npos);
  }
}

TEST(ZeroShot, TeacherOracleOnFixtures) {
  sa::FixtureConfig fc;
  fc.dim = 32;
  fc.min_points = 16;
  fc.max_points = 16;
  const auto data = sa::gen_synthetic_triplets(fc);
  const auto r = sa::zero_shot_classify(teacher_as_gaussian(data), sa::manifest_labels(data.manifest),
                                        data.class_prototypes);
  EXPECT_EQ(r.top1, 1.0);
  EXPECT_EQ(r.classes, 8u);
}

namespace {

struct Labeled {
  std::vector<Vector> emb;
  std::vector<std::optional<std::string>> labels;
};

Labeled clusters(std::size_t classes, std::size_t per_class, double spread, std::size_t dim, std::uint64_t seed) {
  sa::Rng rng(seed, "clusters");
  Labeled out;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Vector v = spread * random_vector(dim, rng);
      if (spread < 1.0) v(static_cast<Eigen::Index>(c)) += 1.0;
      out.emb.push_back(v);
      out.labels.emplace_back("class_" + std::to_string(c));
    }
  }
  return out;
}

}  // namespace

TEST(FewShot, SeparatedClustersAreSolved) {
  const auto d = clusters(6, 10, 0.05, 8, 1);
  const auto r = sa::few_shot_eval(d.emb, d.labels, 5, 3, 5, 7);
  EXPECT_EQ(r.n_way, 5u);
  EXPECT_EQ(r.m_shot, 3u);
  ASSERT_EQ(r.accuracies.size(), 5u);
  EXPECT_EQ(r.mean, 1.0);
  EXPECT_EQ(r.std, 0.0);
}

TEST(FewShot, DeterministicUnderSeed) {
  const auto d = clusters(6, 10, 1.0, 8, 2);
  const auto a = sa::few_shot_eval(d.emb, d.labels, 5, 2, 5, 3);
  const auto b = sa::few_shot_eval(d.emb, d.labels, 5, 2, 5, 3);
  const auto c = sa::few_shot_eval(d.emb, d.labels, 5, 2, 5, 4);
  EXPECT_EQ(a.accuracies, b.accuracies);
  EXPECT_NE(a.accuracies, c.accuracies);
  double mean = 0.0, var = 0.0;
  for (double x : a.accuracies) mean += x / 5.0;
  for (double x : a.accuracies) var += (x - mean) * (x - mean) / 5.0;
  EXPECT_NEAR(a.mean, mean, 1e-12);
  EXPECT_NEAR(a.std, std::sqrt(var), 1e-12);
}

TEST(FewShot, RandomEmbeddingsSitNearChance) {
  const auto d = clusters(10, 30, 1.0, 16, 3);
  const auto r = sa::few_shot_eval(d.emb, d.labels, 5, 1, 40, 5);
  EXPECT_NEAR(r.mean, 0.2, 0.05);
}

TEST(FewShot, SmallClassIsNamed) {
  auto d = clusters(5, 4, 0.1, 8, 4);
  d.emb.pop_back();
  d.emb.pop_back();
  d.labels.pop_back();
  d.labels.pop_back();
  try {
    sa::few_shot_eval(d.emb, d.labels, 5, 3, 1, 0);
    FAIL() << "expected ArgumentError";
  } catch (const sa::ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("class_4"), std::string::npos) << e.what();
  }
  EXPECT_THROW(sa::few_shot_eval(d.emb, d.labels, 6, 1, 1, 0), sa::ArgumentError);
}

TEST(Report, PercentAndTable) {
  EXPECT_EQ(sa::format_percent(0.8591), "85.9");
  EXPECT_EQ(sa::format_percent(1.0), "100.0");
  EXPECT_EQ(sa::text_table({{"name", "R@1"}, {"text_to_3d", "85.9"}, {"x", "100.0"}}),
            "name          R@1\n"
            "-----------------\n"
            "text_to_3d   85.9\n"
            "x           100.0\n");
}

TEST(Report, EvalJsonAndTable) {
  sa::EvalReport r;
  r.retrieval.push_back({sa::Direction::text_to_3d, 0.5, 0.75, 1.0, 8});
  r.zero_shot = sa::ZeroShotReport{0.25, 0.5, 1.0, 8, 4};
  r.config_json = R"({"seed":3})";
  const std::string json = sa::eval_report_json(r);
  EXPECT_NE(json.find("text_to_3d"), std::string::npos);
  EXPECT_NE(json.find("\"seed\""), std::string::npos);
  const std::string table = sa::eval_report_table(r);
  EXPECT_NE(table.find("75.0"), std::string::npos);
  EXPECT_NE(table.find("25.0"), std::string::npos);
}
