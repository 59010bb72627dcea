#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

namespace nbrescore {
namespace {

using nnet::Architecture;
using nnet::ScorerInput;
using nnet::ScorerModel;

constexpr Architecture kAllArchitectures[] = {Architecture::Baseline, Architecture::EarlyFusion,
                                              Architecture::LateFusion,
                                              Architecture::CrossAttention};

TEST(Gradients, MatchFiniteDifferences) {
  for (auto arch : kAllArchitectures) {
    for (std::size_t layers : {1u, 2u}) {
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        ScorerModel model(arch, testing::tiny_config(16, layers), seed);
        testing::randomize(model, seed + 100);
        Rng rng(seed + 200);
        const auto nb = testing::random_nbest(arch, 16, rng);
        const auto r = testing::check_gradients(model, nb, seed + 300);
        EXPECT_LT(r.worst_relative, 1e-4)
            << to_string(arch) << " layers=" << layers << " seed=" << seed << " " << r.worst_tensor;
      }
    }
  }
}

TEST(Gradients, SlotVectorUntouchedWithoutTags) {
  ScorerModel model(Architecture::EarlyFusion, testing::tiny_config(), 1);
  testing::randomize(model, 2);
  Rng rng(3);
  auto nb = testing::random_nbest(Architecture::EarlyFusion, 16, rng);
  for (auto& in : nb.inputs) std::fill(in.tags.begin(), in.tags.end(), 0);
  nnet::GradientSet grads(model.parameters());
  testing::mwer_of(model, nb, &grads);
  const auto slot = model.parameters().id("embeddings.slot");
  EXPECT_TRUE(grads.dense(slot).isZero(0.0));
}

TEST(Gradients, FrozenParametersReceiveNothing) {
  ScorerModel model(Architecture::LateFusion, testing::tiny_config(), 1);
  model.freeze_all_but_slots();
  Rng rng(4);
  const auto nb = testing::random_nbest(Architecture::LateFusion, 16, rng);
  nnet::GradientSet grads(model.parameters());
  testing::mwer_of(model, nb, &grads);
  const auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const nnet::ParamId id{i};
    EXPECT_EQ(grads.touched(id), params.name(id) == "embeddings.slot") << params.name(id);
  }
}

TEST(Tape, BackwardMisuseIsRejected) {
  ScorerModel model(Architecture::Baseline, testing::tiny_config(), 1);
  nnet::GradientSet grads(model.parameters());
  {
    nnet::Tape tape(model.parameters());
    EXPECT_THROW(tape.backward(nnet::Var{}, grads), std::logic_error);
  }
  {
    nnet::Tape tape(model.parameters(), {.train = false, .record = false});
    const auto s = model.forward(tape, {{5, 6}, {}, {}});
    EXPECT_THROW(tape.backward(s, grads), std::logic_error);
  }
  {
    nnet::Tape tape(model.parameters());
    const auto s = model.forward(tape, {{5, 6}, {}, {}});
    tape.backward(s, grads);
    EXPECT_THROW(tape.backward(s, grads), std::logic_error);
  }
}

TEST(Model, RejectsBadInputs) {
  ScorerModel model(Architecture::EarlyFusion, testing::tiny_config(), 1);
  EXPECT_THROW(model.score({TokenSeq(16, 5), {}, {}}), std::invalid_argument);
  EXPECT_THROW(model.score({{5, 6}, {1}, {}}), std::invalid_argument);
  ScorerModel base(Architecture::Baseline, testing::tiny_config(), 1);
  EXPECT_THROW(base.score({{5, 6}, {1, 0}, {}}), std::invalid_argument);
}

// Eval-mode forward passes are pure functions of (weights, input).
TEST(Model, EvalScoresDeterministic) {
  ScorerModel a(Architecture::CrossAttention, testing::tiny_config(), 7);
  ScorerModel b(Architecture::CrossAttention, testing::tiny_config(), 7);
  const ScorerInput in{{5, 6, 7}, {}, {kClsId, 9, kSepId}};
  EXPECT_EQ(a.score(in), a.score(in));
  EXPECT_EQ(a.score(in), b.score(in));
  EXPECT_TRUE(std::isfinite(a.score_cross_attention(in.tokens, TokenSeq{kClsId})));
}

TEST(Model, DropoutOnlyInTraining) {
  ScorerModel model(Architecture::Baseline, testing::tiny_config(), 7);
  testing::randomize(model, 1);
  Rng r1(1), r2(2);
  nnet::Tape t1(model.parameters(), {.train = true, .record = false, .rng = &r1});
  nnet::Tape t2(model.parameters(), {.train = true, .record = false, .rng = &r2});
  const ScorerInput in{{5, 6, 7, 8}, {}, {}};
  EXPECT_NE(t1.scalar(model.forward(t1, in)), t2.scalar(model.forward(t2, in)));
}

void expect_baseline_equivalent(Architecture arch, bool zero_tags) {
  ScorerModel base(Architecture::Baseline, testing::tiny_config(20), 3);
  ScorerModel fused(arch, testing::tiny_config(20), 99);
  fused.copy_shared_from(base);
  const auto slot = fused.parameters().id("embeddings.slot");
  if (zero_tags) {
    testing::randomize(fused, 5);
    fused.copy_shared_from(base);
    fused.parameters().value(slot) = nnet::Matrix::Constant(1, 8, 0.7);
  }
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    ScorerInput in{testing::random_tokens(rng, 20, 1, 10), {}, {}};
    in.tags.resize(in.tokens.size());
    for (auto& t : in.tags) t = zero_tags ? 0 : static_cast<std::uint8_t>(rng.bernoulli(0.5));
    ASSERT_EQ(fused.score(in), base.score_baseline(in.tokens));
  }
}

TEST(Model, FusionWithZeroTagsEqualsBaseline) {
  expect_baseline_equivalent(Architecture::EarlyFusion, true);
  expect_baseline_equivalent(Architecture::LateFusion, true);
}

TEST(Model, FusionWithZeroSlotVectorEqualsBaseline) {
  expect_baseline_equivalent(Architecture::EarlyFusion, false);
  expect_baseline_equivalent(Architecture::LateFusion, false);
}

TEST(Model, EarlyAndLateCoincideWithOneLayer) {
  ScorerModel early(Architecture::EarlyFusion, testing::tiny_config(16, 1), 1);
  testing::randomize(early, 2);
  ScorerModel late(Architecture::LateFusion, testing::tiny_config(16, 1), 3);
  late.copy_shared_from(early);
  const ScorerInput in{{5, 6, 7, 8}, {0, 1, 1, 0}, {}};
  EXPECT_EQ(early.score(in), late.score(in));
  ScorerModel late2(Architecture::LateFusion, testing::tiny_config(16, 2), 3);
  ScorerModel early2(Architecture::EarlyFusion, testing::tiny_config(16, 2), 3);
  testing::randomize(early2, 2);
  late2.copy_shared_from(early2);
  EXPECT_NE(early2.score(in), late2.score(in));
}

TEST(Model, ParameterCounts) {
  const auto cfg = testing::tiny_config(16, 2);
  const std::size_t h = 8, m = 12;
  const std::size_t attention = 4 * (h * h + h);
  const std::size_t norm = 2 * h;
  const std::size_t ffn = h * m + m + m * h + h;
  const std::size_t layer = attention + norm + ffn + norm;
  const std::size_t base = 16 * h + 16 * h + 2 * layer + h + 1;
  EXPECT_EQ(ScorerModel(Architecture::Baseline, cfg, 1).parameters().scalar_count(), base);
  EXPECT_EQ(ScorerModel(Architecture::EarlyFusion, cfg, 1).parameters().scalar_count(), base + h);
  EXPECT_EQ(ScorerModel(Architecture::LateFusion, cfg, 1).parameters().scalar_count(), base + h);
  const std::size_t decoder = 2 * (attention + norm) + ffn + norm;
  EXPECT_EQ(ScorerModel(Architecture::CrossAttention, cfg, 1).parameters().scalar_count(),
            base + decoder);
}

TEST(Model, CopySharedSkipsMissingTensors) {
  ScorerModel base(Architecture::Baseline, testing::tiny_config(), 1);
  ScorerModel x(Architecture::CrossAttention, testing::tiny_config(), 2);
  EXPECT_EQ(x.copy_shared_from(base), base.parameters().size());
}

TEST(Config, Presets) {
  const auto tiny = nnet::ModelConfig::tiny(100);
  EXPECT_EQ(tiny.hidden_size, 320u);
  EXPECT_EQ(tiny.num_layers, 4u);
  EXPECT_EQ(tiny.num_heads, 16u);
  EXPECT_EQ(tiny.intermediate_size, 1200u);
  const auto big = nnet::ModelConfig::big(100);
  EXPECT_EQ(big.hidden_size, 1024u);
  EXPECT_EQ(big.intermediate_size, 3072u);
  auto bad = tiny;
  bad.num_heads = 7;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Fuse, Examples) {
  EXPECT_EQ(nnet::fuse(0.5, 2.0, 20.0, 1.0), 12.0);
  EXPECT_EQ(nnet::fuse(0.5, 2.0, 20.0, 0.0), 10.0);
  EXPECT_EQ(nnet::fuse(0.5, 2.0, 0.0, 1.0), 2.0);
  EXPECT_THROW(nnet::fuse(NAN, 2.0, 20.0, 1.0), std::invalid_argument);
}

class ScoringTest : public ::testing::Test {
 protected:
  corpus::Vocabulary vocab = testing::words_vocab(
      {"call", "john", "doe", "jane", "roe", "as", "i", "need", "to", "contact", "and"});
  TokenSeq ids(std::string_view t) const { return textproc::tokenize(t, vocab); }
  textproc::PromptTemplate prompt = textproc::PromptTemplate::defaults(vocab);
  ScorerModel model{Architecture::Baseline, testing::tiny_config(vocab.size(), 2), 4};
};

TEST_F(ScoringTest, PromptedScoreWithoutMatchEqualsBaseline) {
  const auto hyp = ids("call jane doe");
  const auto m = textproc::match_entities(hyp, {"u", {ids("john doe")}});
  EXPECT_EQ(nnet::score_prompted(model, hyp, m, prompt), model.score_baseline(hyp));
}

TEST_F(ScoringTest, PromptedScoreUsesContactPhrase) {
  const auto hyp = ids("call john doe");
  const auto m = textproc::match_entities(hyp, {"u", {ids("john doe")}});
  EXPECT_EQ(nnet::score_prompted(model, hyp, m, prompt),
            model.score_baseline(ids("call john doe as i need to contact john doe")));
}

TEST_F(ScoringTest, TwoEntitiesUseOneJoiner) {
  const textproc::EntityMatcher matcher(std::vector<TokenSeq>{ids("john doe"), ids("jane roe")});
  const auto in = nnet::prepare_input(nnet::Variant::Prompt, ids("call john doe and jane roe"),
                                      matcher, prompt, 64);
  const auto suffix = TokenSeq(in.tokens.begin() + 6, in.tokens.end());
  EXPECT_EQ(std::count(suffix.begin(), suffix.end(), vocab.id("and")), 1);
}

TEST_F(ScoringTest, LongPromptTruncatedAndCounted) {
  const textproc::EntityMatcher matcher(std::vector<TokenSeq>{ids("john doe")});
  nnet::InputCounters counters;
  const auto hyp = ids("call john doe");
  const auto in = nnet::prepare_input(nnet::Variant::Prompt, hyp, matcher, prompt, 8, &counters);
  EXPECT_EQ(in.tokens.size(), 7u);
  EXPECT_EQ(counters.truncated, 1u);
  EXPECT_EQ(counters.matched, 1u);
}

TEST_F(ScoringTest, VariantInputs) {
  const textproc::EntityMatcher matcher(std::vector<TokenSeq>{ids("john doe")});
  const auto hyp = ids("call john doe");
  const auto early = nnet::prepare_input(nnet::Variant::EarlyFusion, hyp, matcher, prompt, 64);
  EXPECT_EQ(early.tags, (textproc::SlotTags{0, 1, 1}));
  const auto x = nnet::prepare_input(nnet::Variant::CrossAttention, hyp, matcher, prompt, 64);
  EXPECT_EQ(x.slot_sequence, (TokenSeq{kClsId, vocab.id("john"), vocab.id("doe"), kSepId}));
  const auto b = nnet::prepare_input(nnet::Variant::Baseline, hyp, matcher, prompt, 64);
  EXPECT_EQ(b.tokens, hyp);
  EXPECT_TRUE(b.tags.empty());
}

TEST(Variant, NamesRoundTrip) {
  for (auto v : {nnet::Variant::Baseline, nnet::Variant::Prompt, nnet::Variant::EarlyFusion,
                 nnet::Variant::LateFusion, nnet::Variant::CrossAttention}) {
    EXPECT_EQ(nnet::parse_variant(nnet::to_string(v)), v);
  }
  EXPECT_THROW(nnet::parse_variant("bert"), ValidationError);
  EXPECT_EQ(nnet::architecture_for(nnet::Variant::Prompt), Architecture::Baseline);
}

TEST(Checkpoint, RoundTripIsExact) {
  testing::TempDir dir("ckpt");
  ScorerModel model(Architecture::CrossAttention, testing::tiny_config(), 5);
  testing::randomize(model, 6);
  nnet::save_checkpoint(model, nnet::Variant::CrossAttention, dir.str("m.ckpt"));
  const auto ck = nnet::load_checkpoint(dir.str("m.ckpt"), 16);
  EXPECT_EQ(ck.variant, nnet::Variant::CrossAttention);
  EXPECT_EQ(ck.model.config(), model.config());
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const nnet::ParamId id{i};
    EXPECT_EQ(ck.model.parameters().value(id), model.parameters().value(id));
  }
}

TEST(Checkpoint, VocabularyMismatchIsConfigError) {
  testing::TempDir dir("ckpt-vocab");
  ScorerModel model(Architecture::Baseline, testing::tiny_config(), 5);
  nnet::save_checkpoint(model, nnet::Variant::Prompt, dir.str("m.ckpt"));
  EXPECT_EQ(nnet::load_checkpoint(dir.str("m.ckpt")).variant, nnet::Variant::Prompt);
  try {
    nnet::load_checkpoint(dir.str("m.ckpt"), 17);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("config mismatch"), std::string::npos);
  }
}

TEST(Checkpoint, CorruptFilesRejected) {
  testing::TempDir dir("ckpt-bad");
  testing::write_file(dir.path() / "junk.ckpt", "not a checkpoint at all");
  EXPECT_THROW(nnet::load_checkpoint(dir.str("junk.ckpt")), FormatError);
  ScorerModel model(Architecture::Baseline, testing::tiny_config(), 5);
  nnet::save_checkpoint(model, nnet::Variant::Baseline, dir.str("m.ckpt"));
  auto bytes = testing::read_file(dir.path() / "m.ckpt");
  bytes.resize(bytes.size() - 8);
  testing::write_file(dir.path() / "t.ckpt", bytes);
  EXPECT_THROW(nnet::load_checkpoint(dir.str("t.ckpt")), FormatError);
  EXPECT_THROW(nnet::save_checkpoint(model, nnet::Variant::EarlyFusion, dir.str("x.ckpt")),
               std::invalid_argument);
}

}  // namespace
}  // namespace nbrescore
