// Expected scores come from tests/oracles/forward_oracle.py, a separate
// numpy implementation of the same architectures.
#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

namespace nbrescore {
namespace {

using nnet::Architecture;

nnet::ScorerModel oracle_model(Architecture arch) {
  nnet::ModelConfig cfg;
  cfg.hidden_size = 4;
  cfg.num_heads = 2;
  cfg.num_layers = 2;
  cfg.intermediate_size = 6;
  cfg.vocab_size = 10;
  cfg.max_positions = 8;
  nnet::ScorerModel model(arch, cfg, 0);
  auto& params = model.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& v = params.value(nnet::ParamId{p});
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      v.data()[k] = 0.5 * std::sin(0.7 * static_cast<double>(k) + 1.3 * static_cast<double>(p) + 0.1);
    }
  }
  return model;
}

constexpr double kTolerance = 1e-12;

TEST(ForwardOracle, Baseline) {
  const auto m = oracle_model(Architecture::Baseline);
  EXPECT_NEAR(m.score_baseline(TokenSeq{5, 7}), 0.76274616860582345, kTolerance);
  EXPECT_NEAR(m.score_baseline(TokenSeq{4, 9, 6, 8, 5}), 0.75618622645862232, kTolerance);
}

TEST(ForwardOracle, EarlyFusion) {
  const auto m = oracle_model(Architecture::EarlyFusion);
  EXPECT_NEAR(m.score({{5, 7, 9}, {1, 1, 0}, {}}), 0.74791744563449014, kTolerance);
}

TEST(ForwardOracle, LateFusion) {
  const auto m = oracle_model(Architecture::LateFusion);
  EXPECT_NEAR(m.score({{5, 7, 9}, {1, 1, 0}, {}}), 0.75439258782893748, kTolerance);
}

TEST(ForwardOracle, CrossAttention) {
  const auto m = oracle_model(Architecture::CrossAttention);
  EXPECT_NEAR(m.score_cross_attention(TokenSeq{5, 7}, TokenSeq{2, 6, 3}), 0.23131819663012509,
              kTolerance);
  EXPECT_NEAR(m.score_cross_attention(TokenSeq{5, 7}, TokenSeq{2}), 0.23381250037012308,
              kTolerance);
}

}  // namespace
}  // namespace nbrescore
