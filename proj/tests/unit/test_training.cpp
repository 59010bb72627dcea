#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "test_support.hpp"

namespace nbrescore {
namespace {

using training::mwer_loss;
using training::posterior;

TEST(Posterior, AnalyticCases) {
  const auto p = posterior(std::vector<double>{0.0, std::numbers::ln2});
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
  for (double x : posterior(std::vector<double>{4.0, 4.0, 4.0})) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);
  const auto extreme = posterior(std::vector<double>{1000.0, 0.0});
  EXPECT_EQ(extreme[1], 1.0);
  EXPECT_GE(extreme[0], 0.0);
  EXPECT_LT(extreme[0], 1e-300);
  EXPECT_THROW(posterior(std::vector<double>{}), std::invalid_argument);
}

TEST(MwerLoss, AnalyticCases) {
  EXPECT_EQ(mwer_loss(std::vector<double>{2, 2, 2}, std::vector<double>{0.2, 0.5, 0.3}), 0.0);
  EXPECT_DOUBLE_EQ(mwer_loss(std::vector<double>{0, 2}, std::vector<double>{0.25, 0.75}), 0.5);
  EXPECT_DOUBLE_EQ(mwer_loss(std::vector<double>{0, 2}, std::vector<double>{1.0, 0.0}), -1.0);
  EXPECT_THROW(mwer_loss(std::vector<double>{0, 2}, std::vector<double>{1.0}), std::invalid_argument);
}

// Property tests over random n-best lists.
TEST(MwerLoss, ShiftInvariance) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.index(8);
    std::vector<double> v(n), eps(n), shifted(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = 5.0 * rng.normal();
      eps[i] = static_cast<double>(rng.index(5));
    }
    const double c = 100.0 * rng.normal();
    for (std::size_t i = 0; i < n; ++i) shifted[i] = v[i] + c;
    const auto p = posterior(v), q = posterior(shifted);
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_NEAR(p[i], q[i], 1e-6);
      sum += p[i];
    }
    ASSERT_NEAR(sum, 1.0, 1e-6);
    ASSERT_NEAR(mwer_loss(eps, p), mwer_loss(eps, q), 1e-6);
    const auto g1 = training::mwer_gradient_wrt_fused(eps, p);
    const auto g2 = training::mwer_gradient_wrt_fused(eps, q);
    for (std::size_t i = 0; i < n; ++i) ASSERT_NEAR(g1[i], g2[i], 1e-6);
  }
}

// Lowering the fused score of the best hypothesis (raising its posterior)
// never increases the loss.
TEST(MwerLoss, FavoringBestHypothesisNeverHurts) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.index(7);
    std::vector<double> v(n), eps(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = 3.0 * rng.normal();
      eps[i] = static_cast<double>(rng.index(6));
    }
    const auto best = static_cast<std::size_t>(std::min_element(eps.begin(), eps.end()) - eps.begin());
    const double before = mwer_loss(eps, posterior(v));
    v[best] -= 0.1 + rng.uniform();
    ASSERT_LE(mwer_loss(eps, posterior(v)), before + 1e-12);
  }
}

TEST(MwerLoss, DegenerateListHasZeroGradient) {
  nnet::ScorerModel model(nnet::Architecture::Baseline, testing::tiny_config(), 1);
  Rng rng(3);
  auto nb = testing::random_nbest(nnet::Architecture::Baseline, 16, rng);
  std::fill(nb.eps.begin(), nb.eps.end(), 2.0);
  nnet::GradientSet grads(model.parameters());
  EXPECT_EQ(testing::mwer_of(model, nb, &grads), 0.0);
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    EXPECT_TRUE(grads.dense(nnet::ParamId{i}).isZero(0.0));
  }
}

corpus::Dataset mixed(std::size_t pers, std::size_t gen) {
  corpus::Dataset d;
  for (std::size_t i = 0; i < pers + gen; ++i) {
    corpus::NBestList u;
    u.utterance_id = "u" + std::to_string(i);
    u.is_personalized = i < pers;
    d.push_back(u);
  }
  return d;
}

std::size_t count_personalized(const corpus::Dataset& d, const std::vector<std::size_t>& idx) {
  std::size_t n = 0;
  for (auto i : idx) n += d[i].is_personalized ? 1 : 0;
  return n;
}

TEST(Batching, FractionBoundaries) {
  const auto d = mixed(60, 100);
  const training::BatchPlan zero(d, 0.0, 16, 1);
  EXPECT_EQ(count_personalized(d, zero.pool()), 0u);
  const training::BatchPlan one(d, 1.0, 16, 1);
  EXPECT_EQ(count_personalized(d, one.pool()), one.pool().size());
  EXPECT_EQ(one.pool().size(), 100u);  // larger source pool; personalized drawn with replacement
  const training::BatchPlan half(d, 0.5, 16, 1, 100);
  EXPECT_NEAR(static_cast<double>(count_personalized(d, half.pool())), 50.0, 1.0);
}

TEST(Batching, EpochsCoverPoolAndAreSeeded) {
  const auto d = mixed(50, 50);
  const training::BatchPlan plan(d, 0.3, 16, 7);
  for (std::size_t e = 1; e <= 3; ++e) {
    std::vector<std::size_t> seen;
    for (const auto& b : plan.epoch(e)) {
      ASSERT_LE(b.size(), 16u);
      seen.insert(seen.end(), b.begin(), b.end());
    }
    auto pool = plan.pool();
    std::sort(pool.begin(), pool.end());
    std::sort(seen.begin(), seen.end());
    EXPECT_EQ(seen, pool);
  }
  EXPECT_EQ(plan.epoch(2), training::BatchPlan(d, 0.3, 16, 7).epoch(2));
  EXPECT_NE(plan.epoch(1), plan.epoch(2));
}

TEST(Batching, Errors) {
  EXPECT_THROW(training::BatchPlan(mixed(0, 10), 0.5, 16, 1), ValidationError);
  EXPECT_THROW(training::BatchPlan(mixed(10, 0), 0.5, 16, 1), ValidationError);
  EXPECT_THROW(training::BatchPlan(mixed(10, 10), 1.5, 16, 1), ValidationError);
  EXPECT_THROW(training::BatchPlan(mixed(10, 10), 0.5, 0, 1), ValidationError);
  EXPECT_NO_THROW(training::BatchPlan(mixed(10, 0), 1.0, 16, 1));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  nnet::ParameterSet params;
  const auto w = params.add("w", nnet::Matrix::Constant(1, 3, 1.0));
  nnet::GradientSet g(params);
  g.at(w) << 0.5, -2.0, 0.0;
  training::Adam adam(params);
  adam.step(params, g, 0.1);
  const auto& v = params.value(w);
  EXPECT_NEAR(v(0, 0), 0.9, 1e-7);
  EXPECT_NEAR(v(0, 1), 1.1, 1e-7);
  EXPECT_EQ(v(0, 2), 1.0);
}

TEST(Adam, FrozenParametersUnchanged) {
  nnet::ParameterSet params;
  const auto w = params.add("w", nnet::Matrix::Constant(2, 2, 1.0));
  params.set_trainable(w, false);
  nnet::GradientSet g(params);
  g.at(w).setConstant(3.0);
  training::Adam adam(params);
  adam.step(params, g, 0.1);
  EXPECT_EQ(params.value(w), nnet::Matrix::Constant(2, 2, 1.0));
}

TEST(EarlyStopper, StopsAfterPatienceBadEpochs) {
  training::EarlyStopper s(2);
  EXPECT_TRUE(s.update(1, 0.5));
  EXPECT_FALSE(s.update(2, 0.5));  // ties are not improvements
  EXPECT_FALSE(s.should_stop());
  EXPECT_FALSE(s.update(3, 0.6));
  EXPECT_TRUE(s.should_stop());
  EXPECT_EQ(s.best_epoch(), 1u);
  training::EarlyStopper never(0);
  for (std::size_t e = 1; e < 10; ++e) never.update(e, 1.0 + static_cast<double>(e));
  EXPECT_FALSE(never.should_stop());
}

TEST(Regime, PairsValidated) {
  using nnet::Variant;
  using training::Regime;
  EXPECT_NO_THROW(training::validate_regime(Variant::Baseline, Regime::Trained));
  EXPECT_NO_THROW(training::validate_regime(Variant::Prompt, Regime::Untrained));
  EXPECT_NO_THROW(training::validate_regime(Variant::Prompt, Regime::Finetuned));
  EXPECT_NO_THROW(training::validate_regime(Variant::EarlyFusion, Regime::Frozen));
  EXPECT_NO_THROW(training::validate_regime(Variant::LateFusion, Regime::Trained));
  EXPECT_NO_THROW(training::validate_regime(Variant::CrossAttention, Regime::Trained));
  EXPECT_THROW(training::validate_regime(Variant::Baseline, Regime::Frozen), ValidationError);
  EXPECT_THROW(training::validate_regime(Variant::Prompt, Regime::Frozen), ValidationError);
  EXPECT_THROW(training::validate_regime(Variant::CrossAttention, Regime::Frozen), ValidationError);
  EXPECT_THROW(training::parse_regime("warm"), ValidationError);
}

class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    corpus::GeneratorConfig g;
    g.train_personalized = 48;
    g.train_general = 48;
    g.valid_personalized = 16;
    g.test_personalized = 8;
    g.test_general = 8;
    data_ = new corpus::GeneratedCorpus(corpus::generate_corpus(g, corpus::Lexicon::builtin()));
  }
  static void TearDownTestSuite() { delete data_; }

  training::TrainConfig config() const {
    training::TrainConfig c;
    c.max_epochs = 2;
    c.batch_size = 8;
    c.initial_lr = 1e-2;
    c.personalized_fraction = 0.5;
    c.threads = 2;
    return c;
  }
  nnet::ScorerModel model(nnet::Architecture arch) const {
    auto cfg = testing::tiny_config(data_->vocab.size(), 1);
    cfg.max_positions = 48;
    return nnet::ScorerModel(arch, cfg, 3);
  }
  training::TrainResult run(nnet::ScorerModel& m, nnet::Variant v, training::Regime r,
                            const training::TrainConfig& c, const training::TrainHooks& hooks = {}) {
    return training::train(m, v, r, data_->train, data_->valid, data_->catalogs,
                           textproc::PromptTemplate::defaults(data_->vocab), c, hooks);
  }
  static bool same_weights(const nnet::ScorerModel& a, const nnet::ScorerModel& b,
                           std::string_view except = {}) {
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
      const nnet::ParamId id{i};
      if (a.parameters().name(id) == except) continue;
      if (a.parameters().value(id) != b.parameters().value(id)) return false;
    }
    return true;
  }

  static corpus::GeneratedCorpus* data_;
};

corpus::GeneratedCorpus* TrainerTest::data_ = nullptr;

TEST_F(TrainerTest, UntrainedPromptTakesNoSteps) {
  auto m = model(nnet::Architecture::Baseline);
  const auto before = m;
  const auto r = run(m, nnet::Variant::Prompt, training::Regime::Untrained, config());
  EXPECT_EQ(r.steps, 0u);
  EXPECT_TRUE(r.history.empty());
  EXPECT_TRUE(same_weights(m, before));
}

TEST_F(TrainerTest, FrozenEarlyChangesOnlySlotVector) {
  auto m = model(nnet::Architecture::EarlyFusion);
  const auto before = m;
  auto c = config();
  c.max_epochs = 1;
  c.epoch_size = 8;
  const auto r = run(m, nnet::Variant::EarlyFusion, training::Regime::Frozen, c);
  EXPECT_EQ(r.steps, 1u);
  EXPECT_TRUE(same_weights(m, before, "embeddings.slot"));
  EXPECT_FALSE(same_weights(m, before));
  EXPECT_TRUE(m.parameters().trainable(m.parameters().id("head.weight")));
}

TEST_F(TrainerTest, ScriptedEarlyStopReturnsBestEpoch) {
  auto m = model(nnet::Architecture::Baseline);
  std::vector<nnet::ScorerModel> snapshots;
  training::TrainHooks hooks;
  hooks.validation_metric = [&](const nnet::ScorerModel& current, std::size_t epoch) {
    snapshots.push_back(current);
    return 0.1 * static_cast<double>(epoch);  // strictly worsening
  };
  auto c = config();
  c.max_epochs = 10;
  c.patience = 2;
  const auto r = run(m, nnet::Variant::Baseline, training::Regime::Trained, c, hooks);
  EXPECT_EQ(r.history.size(), 3u);
  EXPECT_TRUE(r.early_stopped);
  EXPECT_EQ(r.best_epoch, 1u);
  ASSERT_EQ(snapshots.size(), 3u);
  EXPECT_TRUE(same_weights(m, snapshots[0]));
  EXPECT_FALSE(same_weights(m, snapshots[2]));
}

TEST_F(TrainerTest, HistoryIsDeterministicAcrossThreadCounts) {
  auto a = model(nnet::Architecture::CrossAttention);
  auto b = model(nnet::Architecture::CrossAttention);
  auto c1 = config();
  auto c2 = config();
  c2.threads = 1;
  const auto r1 = run(a, nnet::Variant::CrossAttention, training::Regime::Trained, c1);
  const auto r2 = run(b, nnet::Variant::CrossAttention, training::Regime::Trained, c2);
  EXPECT_EQ(r1.history, r2.history);
  EXPECT_TRUE(same_weights(a, b));
  std::ostringstream h1, h2;
  training::write_history(h1, r1);
  training::write_history(h2, r2);
  EXPECT_EQ(h1.str(), h2.str());
  EXPECT_NE(h1.str().find("# epoch lr train_loss valid_wer"), std::string::npos);
}

TEST_F(TrainerTest, LearningRateDecaysPerEpoch) {
  auto m = model(nnet::Architecture::Baseline);
  auto c = config();
  c.max_epochs = 3;
  c.patience = 0;
  const auto r = run(m, nnet::Variant::Baseline, training::Regime::Trained, c);
  ASSERT_EQ(r.history.size(), 3u);
  EXPECT_DOUBLE_EQ(r.history[1].lr, 1e-2 * 0.95);
  EXPECT_DOUBLE_EQ(r.history[2].lr, 1e-2 * 0.95 * 0.95);
}

TEST_F(TrainerTest, NonFiniteLossAbortsWithDiagnostics) {
  auto m = model(nnet::Architecture::Baseline);
  m.parameters().value(m.parameters().id("head.bias"))(0, 0) = NAN;
  try {
    run(m, nnet::Variant::Baseline, training::Regime::Trained, config());
    FAIL();
  } catch (const training::TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("non-finite MWER loss"), std::string::npos);
    EXPECT_NE(msg.find("train-"), std::string::npos);
  }
}

TEST_F(TrainerTest, WrongArchitectureRejected) {
  auto m = model(nnet::Architecture::Baseline);
  EXPECT_THROW(run(m, nnet::Variant::EarlyFusion, training::Regime::Trained, config()),
               ValidationError);
}

TEST(TrainConfig, PublishedPresets) {
  EXPECT_EQ(training::TrainConfig::published_tiny().batch_size, 256u);
  EXPECT_EQ(training::TrainConfig::published_tiny().initial_lr, 1e-5);
  EXPECT_EQ(training::TrainConfig::published_big().batch_size, 128u);
  EXPECT_EQ(training::TrainConfig::published_big().initial_lr, 1e-6);
  training::TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

}  // namespace
}  // namespace nbrescore
