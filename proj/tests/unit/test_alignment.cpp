#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "splatalign/adam.hpp"
#include "splatalign/dataset.hpp"
#include "splatalign/errors.hpp"
#include "splatalign/fixtures.hpp"
#include "splatalign/loss.hpp"
#include "splatalign/trainer.hpp"
#include "test_support.hpp"

namespace sa = splatalign;
using sa::Matrix;
using sa::Vector;

namespace {

// -ln(1 + e^-1)
constexpr double kPairTerm = -0.31326168751822286;

Matrix random_unit_rows(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  sa::Rng rng(seed, "rows");
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.row(i) = sa::testing::unit_random(static_cast<std::size_t>(d), rng).transpose();
  }
  return m;
}

sa::LossBatch random_batch(Eigen::Index n, std::size_t k, Eigen::Index d, std::uint64_t seed) {
  sa::LossBatch b;
  b.gaussian = random_unit_rows(n, d, seed);
  b.text = random_unit_rows(n, d, seed + 1);
  for (std::size_t v = 0; v < k; ++v) b.views.push_back(random_unit_rows(n, d, seed + 2 + v));
  return b;
}

sa::FixtureConfig tiny_fixture() {
  sa::FixtureConfig fc;
  fc.classes = 2;
  fc.per_class = 5;
  fc.views = 3;
  fc.dim = 16;
  fc.min_points = 64;
  fc.max_points = 80;
  return fc;
}

sa::TrainConfig tiny_train(std::size_t steps) {
  sa::TrainConfig tc;
  tc.max_steps = steps;
  tc.batch = 4;
  tc.views = 3;
  return tc;
}

}  // namespace

TEST(Contra, SingleObjectIsZero) {
  const Matrix a = random_unit_rows(1, 4, 1);
  const Matrix b = random_unit_rows(1, 4, 2);
  EXPECT_DOUBLE_EQ(sa::contra(a, b, 0.07)(0), 0.0);
}

TEST(Contra, OrthonormalPair) {
  const Matrix eye = Matrix::Identity(2, 2);
  const Vector c = sa::contra(eye, eye, 1.0);
  EXPECT_NEAR(c(0), kPairTerm, 1e-12);
  EXPECT_NEAR(c(1), kPairTerm, 1e-12);
  EXPECT_NEAR(sa::loss_text(eye, eye, 1.0), 0.31326, 1e-5);
}

TEST(Contra, RejectsBadInputs) {
  const Matrix eye = Matrix::Identity(2, 2);
  EXPECT_THROW(sa::contra(eye, eye, 0.0), sa::NumericError);
  EXPECT_THROW(sa::contra(eye, Matrix::Identity(3, 3), 1.0), sa::DimensionMismatchError);
}

TEST(Voting, OpposedViewsSplitBySoftmax) {
  sa::RowVector t(3);
  t << 1.0, 0.0, 0.0;
  Matrix views(2, 3);
  views.row(0) = t;
  views.row(1) = -t;
  const Vector w = sa::voting_scores(t, views);
  EXPECT_NEAR(w(0), 0.8807970779778823, 1e-12);
  EXPECT_NEAR(w(1), 0.11920292202211755, 1e-12);
  EXPECT_NEAR(sa::view_cosines(t, views)(1), -1.0, 1e-15);
}

TEST(Voting, IdenticalViewsAreUniform) {
  const Matrix t = random_unit_rows(1, 8, 3);
  Matrix views(4, 8);
  for (int k = 0; k < 4; ++k) views.row(k) = random_unit_rows(1, 8, 4);
  const Vector w = sa::voting_scores(t.row(0), views);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(w(k), 0.25, 1e-15);
}

TEST(Voting, ZeroViewIsNumericError) {
  const Matrix t = random_unit_rows(1, 4, 5);
  EXPECT_THROW(sa::voting_scores(t.row(0), Matrix::Zero(2, 4)), sa::NumericError);
}

TEST(LossImg, SingleViewCollapsesToSymmetricContrastive) {
  sa::LossBatch b = random_batch(6, 1, 8, 10);
  const double tau = 0.3;
  EXPECT_NEAR(sa::loss_img(b, tau), sa::loss_text(b.gaussian, b.views[0], tau), 1e-12);
}

TEST(TotalLoss, ViewsEqualToTextDoubleTheTextTerm) {
  sa::LossBatch b;
  b.gaussian = Matrix::Identity(2, 2);
  b.text = Matrix::Identity(2, 2);
  b.views = {b.text, b.text};
  const sa::LossBreakdown l = sa::total_loss(b, 0.0);
  EXPECT_NEAR(l.l_text, 0.31326, 1e-5);
  EXPECT_NEAR(l.l_img, 0.31326, 1e-5);
  EXPECT_NEAR(l.total, 0.62652, 1e-5);
  EXPECT_DOUBLE_EQ(l.tau, 1.0);
}

TEST(TotalLoss, IsExactSumOfTerms) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const sa::LossBatch b = random_batch(5, 3, 7, 100 + seed);
    for (auto variant : {sa::LossVariant::voting, sa::LossVariant::eq4_literal}) {
      const sa::LossBreakdown l = sa::total_loss(b, -1.3, {variant, true});
      EXPECT_EQ(l.total, l.l_text + l.l_img);
    }
  }
}

TEST(TotalLoss, ImageTermSwitch) {
  const sa::LossBatch b = random_batch(4, 2, 6, 7);
  const sa::LossBreakdown l = sa::total_loss(b, -1.0, {sa::LossVariant::voting, false});
  EXPECT_EQ(l.l_img, 0.0);
  EXPECT_EQ(l.total, l.l_text);
}

TEST(TotalLoss, LiteralVariantDiffersAndRecordsCosines) {
  const sa::LossBatch b = random_batch(4, 3, 6, 8);
  const auto vote = sa::total_loss(b, -1.0, {sa::LossVariant::voting, true});
  const auto lit = sa::total_loss(b, -1.0, {sa::LossVariant::eq4_literal, true});
  EXPECT_EQ(vote.l_text, lit.l_text);
  EXPECT_NE(vote.l_img, lit.l_img);
  EXPECT_NEAR(lit.votes(0, 1), sa::view_cosines(b.text.row(0), Matrix(b.views[1].row(0)))(0), 1e-15);
  EXPECT_NEAR(vote.votes.row(2).sum(), 1.0, 1e-12);
  EXPECT_EQ(sa::parse_loss_variant(sa::loss_variant_name(sa::LossVariant::eq4_literal)),
            sa::LossVariant::eq4_literal);
  EXPECT_THROW(sa::parse_loss_variant("eq5"), sa::ArgumentError);
}

TEST(TotalLoss, ShapeChecks) {
  sa::LossBatch b = random_batch(3, 2, 4, 9);
  b.views[1] = random_unit_rows(3, 5, 1);
  EXPECT_THROW(sa::total_loss(b, 0.0), sa::DimensionMismatchError);
  b.views.clear();
  EXPECT_THROW(sa::total_loss(b, 0.0), sa::ArgumentError);
}

class LossGradient : public ::testing::TestWithParam<sa::LossVariant> {};

TEST_P(LossGradient, MatchesCentralDifferences) {
  sa::LossBatch b = random_batch(5, 3, 6, 21);
  // unnormalized rows exercise the cosine path as well
  b.gaussian *= 1.7;
  const sa::LossOptions opt{GetParam(), true};
  const double log_tau = -0.8;
  sa::LossGradients g;
  sa::total_loss(b, log_tau, opt, &g);
  const double h = 1e-5;
  double diff = 0.0, norm = 0.0;
  for (Eigen::Index i = 0; i < b.gaussian.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.gaussian.cols(); ++j) {
      const double saved = b.gaussian(i, j);
      b.gaussian(i, j) = saved + h;
      const double up = sa::total_loss(b, log_tau, opt).total;
      b.gaussian(i, j) = saved - h;
      const double down = sa::total_loss(b, log_tau, opt).total;
      b.gaussian(i, j) = saved;
      const double numeric = (up - down) / (2 * h);
      diff += std::pow(numeric - g.d_gaussian(i, j), 2);
      norm += numeric * numeric;
    }
  }
  EXPECT_LE(std::sqrt(diff / norm), 1e-7);
  const double numeric_tau =
      (sa::total_loss(b, log_tau + h, opt).total - sa::total_loss(b, log_tau - h, opt).total) / (2 * h);
  EXPECT_NEAR(g.d_log_tau, numeric_tau, 1e-6 * std::abs(numeric_tau));
}

INSTANTIATE_TEST_SUITE_P(Variants, LossGradient,
                         ::testing::Values(sa::LossVariant::voting, sa::LossVariant::eq4_literal));

TEST(ModelGradient, SmallConfigMatchesFiniteDifferences) {
  const sa::ModelConfig config = sa::testing::small_config(8, sa::NumericMode::f64);
  sa::Model model(config, 3);
  sa::testing::jitter_params(model, 3);
  const auto problem = sa::testing::make_grad_problem(config, 3, 2, 4);
  const auto checks = sa::testing::check_gradients(model, problem, 3, 1e-4, 5);
  EXPECT_GT(checks.size(), 30u);
  for (const auto& c : checks) {
    EXPECT_LE(c.rel_error, 1e-6) << c.name;
    EXPECT_GT(c.analytic_norm, 0.0) << c.name;
  }
}

TEST(AdamW, ZeroGradientsOnlyDecay) {
  sa::Model model(sa::testing::small_config(), 1);
  const sa::ParamSet before = model.params();
  sa::AdamConfig cfg;
  sa::AdamW adam(model.params(), cfg);
  adam.step(model.params(), model.params().zeros_like());
  for (std::size_t i = 0; i < before.size(); ++i) {
    const auto& spec = before.spec(i);
    const double factor = spec.decay ? 1.0 - cfg.lr_for(spec.group) * cfg.weight_decay : 1.0;
    for (std::size_t j = 0; j < before.values(i).size(); ++j) {
      EXPECT_DOUBLE_EQ(model.params().values(i)[j], before.values(i)[j] * factor) << spec.name;
    }
  }
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(AdamW, DecayExcludesNormsBiasesTokensAndTemperature) {
  const sa::Model model(sa::testing::small_config(), 1);
  const sa::ParamSet& p = model.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::string& n = p.spec(i).name;
    const bool weight_matrix = p.spec(i).shape.size() == 2 && !n.starts_with("encoder.pos_embed");
    EXPECT_EQ(p.spec(i).decay, weight_matrix) << n;
  }
}

TEST(AdamW, FirstStepMovesByGroupLearningRate) {
  sa::Model model(sa::testing::small_config(), 1);
  sa::AdamConfig cfg;
  cfg.weight_decay = 0.0;
  sa::AdamW adam(model.params(), cfg);
  const sa::ParamSet before = model.params();
  sa::ParamSet g = model.params().zeros_like();
  for (std::size_t i = 0; i < g.size(); ++i)
    for (double& v : g.values(i)) v = 0.5;
  adam.step(model.params(), g);
  for (std::size_t i = 0; i < before.size(); ++i) {
    const auto& spec = before.spec(i);
    const double expected = spec.group == sa::ParamGroup::buffer ? 0.0 : cfg.lr_for(spec.group);
    EXPECT_NEAR(before.values(i)[0] - model.params().values(i)[0], expected, 1e-10) << spec.name;
  }
}

TEST(AdamW, StateRoundTrips) {
  sa::Model model(sa::testing::small_config(), 1);
  sa::AdamW a(model.params(), {});
  sa::ParamSet g = model.params().zeros_like();
  for (std::size_t i = 0; i < g.size(); ++i)
    for (double& v : g.values(i)) v = 0.25;
  a.step(model.params(), g);
  sa::AdamW b(model.params(), {});
  b.import_state(a.export_state());
  EXPECT_EQ(b.steps(), 1u);
  sa::Model m2 = model;
  a.step(model.params(), g);
  b.step(m2.params(), g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.values(i).size(); ++j) {
      // exported moments are f32
      EXPECT_NEAR(model.params().values(i)[j], m2.params().values(i)[j], 1e-9);
    }
  }
}

TEST(Trainer, EpochsDropIncompleteBatch) {
  const auto data = sa::gen_synthetic_triplets(tiny_fixture());
  std::vector<std::size_t> all(10);
  std::iota(all.begin(), all.end(), 0);
  const auto ds = sa::dataset_from_synthetic(data, all);
  sa::Model model(sa::testing::small_config(16), 1);
  sa::TrainConfig tc = tiny_train(0);
  tc.max_steps.reset();
  tc.epochs = 2;
  tc.batch = 3;
  sa::Trainer trainer(model, ds, tc);
  EXPECT_EQ(trainer.steps_per_epoch(), 3u);
  EXPECT_EQ(trainer.total_steps(), 6u);
  const auto records = trainer.run();
  ASSERT_EQ(records.size(), 6u);
  std::vector<std::size_t> seen;
  for (std::size_t s = 0; s < 3; ++s) seen.insert(seen.end(), records[s].objects.begin(), records[s].objects.end());
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(std::adjacent_find(seen.begin(), seen.end()), seen.end());
  EXPECT_EQ(seen.size(), 9u);
}

TEST(Trainer, SameSeedSameRun) {
  const auto data = sa::gen_synthetic_triplets(tiny_fixture());
  const auto ds = sa::dataset_from_synthetic(data, data.train_indices);
  const sa::EmbeddingTable text = ds.text;
  const sa::EmbeddingTable images = ds.images;
  auto run = [&] {
    sa::Model model(sa::testing::small_config(16, sa::NumericMode::f32), 2);
    sa::Trainer trainer(model, ds, tiny_train(4));
    std::string log;
    for (const auto& r : trainer.run()) log += sa::step_record_json(r) + "\n";
    return std::make_pair(log, model.params());
  };
  const auto [log_a, params_a] = run();
  const auto [log_b, params_b] = run();
  EXPECT_EQ(log_a, log_b);
  for (std::size_t i = 0; i < params_a.size(); ++i) {
    EXPECT_TRUE(std::equal(params_a.values(i).begin(), params_a.values(i).end(), params_b.values(i).begin()))
        << params_a.spec(i).name;
  }
  EXPECT_TRUE(ds.text == text);
  EXPECT_TRUE(ds.images == images);
}

TEST(Trainer, CleanFixturesReduceLoss) {
  sa::FixtureConfig fc = tiny_fixture();
  fc.noise = 0.0;
  const auto data = sa::gen_synthetic_triplets(fc);
  const auto ds = sa::dataset_from_synthetic(data, data.train_indices);
  sa::Model model(sa::testing::small_config(16, sa::NumericMode::f32), 3);
  sa::TrainConfig tc = tiny_train(60);
  tc.adam.lr_other = 1e-3;
  tc.adam.lr_tokenizer = 1e-3;
  sa::Trainer trainer(model, ds, tc);
  const auto records = trainer.run();
  EXPECT_LT(records.back().loss.total, 0.5 * records.front().loss.total);
}

TEST(Trainer, NonFiniteLossNamesStepAndObjects) {
  const auto data = sa::gen_synthetic_triplets(tiny_fixture());
  const auto ds = sa::dataset_from_synthetic(data, data.train_indices);
  sa::Model model(sa::testing::small_config(16), 1);
  model.params().values(model.params().index(sa::kLogTauName))[0] = std::nan("");
  sa::Trainer trainer(model, ds, tiny_train(1));
  try {
    trainer.step();
    FAIL() << "expected NumericError";
  } catch (const sa::NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("step 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("obj_"), std::string::npos) << msg;
  }
}

TEST(Trainer, ConfigValidation) {
  sa::TrainConfig tc;
  tc.batch = 0;
  EXPECT_THROW(tc.validate(), sa::ArgumentError);
  tc = {};
  tc.views = 0;
  EXPECT_THROW(tc.validate(), sa::ArgumentError);
  tc = {};
  tc.max_steps = 0;
  EXPECT_THROW(tc.validate(), sa::ArgumentError);
}
