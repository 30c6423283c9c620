#include "perflaw/core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "oracle.hpp"

namespace perflaw {
namespace {

constexpr double kRel = 1e-9;

void expect_rel(double actual, double expected, double rel = kRel) {
  EXPECT_NEAR(actual, expected, std::abs(expected) * rel) << "expected " << expected;
}

void expect_error(ErrorCode code, auto&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected perflaw::Error " << code_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

const DenseArch kMistral7B{32, 4096, 14336, 7.0};

TEST(EffectiveTokens, ClipsToCapacity) {
  EXPECT_EQ(effective_tokens(3, 7), 3);
  EXPECT_EQ(effective_tokens(15, 8), 8);
  // sqrt(39 * 141) = 74.155..., well above 10
  EXPECT_EQ(effective_tokens(10, std::sqrt(39.0 * 141.0)), 10);
}

TEST(EffectiveTokens, RejectsNonPositive) {
  expect_error(ErrorCode::kInvalidInput, [] { effective_tokens(0, 7); });
  expect_error(ErrorCode::kInvalidInput, [] { effective_tokens(3, -1); });
}

TEST(UnstableDiscount, MatchesDirectEvaluation) {
  // exp(-((10/14336 + 20/4096) * 32)^2), evaluated at 30 digits.
  expect_rel(unstable_discount(kMistral7B), 0.968615298102971217285441630015, 1e-14);
}

TEST(UnstableDiscount, GammaZeroAndWideLimit) {
  DenseArch a = kMistral7B;
  a.gamma = 0.0;
  EXPECT_EQ(unstable_discount(a), 1.0);
  DenseArch wide{32, std::int64_t{1} << 40, std::int64_t{1} << 40, 7.0};
  EXPECT_NEAR(unstable_discount(wide), 1.0, 1e-15);
}

TEST(PredictDense, ReferenceValue) {
  const auto p = predict_dense(kMistral7B, TrainingSpec{3});
  expect_rel(p.raw_score, 60.13969302998589);
  EXPECT_EQ(p.adjusted_score, p.raw_score);
  EXPECT_FALSE(p.token_clipped);
  EXPECT_EQ(p.effective_tokens, 3.0);
  EXPECT_FALSE(p.expansion_factor.has_value());
}

TEST(PredictDense, TableRows) {
  // Printed to 2 decimals in the table.
  EXPECT_NEAR(predict_dense({80, 8192, 28672, 70}, {2}).adjusted_score, 70.21, 0.005);
  const auto qwen = predict_dense({21, 1024, 2816, 0.5}, {2.4});
  EXPECT_NEAR(qwen.adjusted_score, 41.18, 0.005);
  EXPECT_TRUE(qwen.token_clipped);
  EXPECT_EQ(qwen.effective_tokens, 0.5);
}

TEST(PredictDense, RejectsInvalidArch) {
  expect_error(ErrorCode::kInvalidInput, [] { predict_dense({0, 4096, 14336, 7}, {3}); });
  expect_error(ErrorCode::kInvalidInput, [] { predict_dense({32, 4096, 14336, 0}, {3}); });
  expect_error(ErrorCode::kInvalidInput, [] { predict_dense(kMistral7B, {0}); });
  DenseArch neg = kMistral7B;
  neg.gamma = -1;
  expect_error(ErrorCode::kInvalidInput, [&] { predict_dense(neg, {3}); });
}

TEST(PredictDense, DiscountUnderflowIsDomainError) {
  DenseArch slim{5000, 64, 64, 1.0, 50.0};
  expect_error(ErrorCode::kNegativeLog, [&] { predict_dense(slim, {1}); });
}

TEST(MoeExpansionFactor, DirectEvaluation) {
  // 30-digit evaluations of (sqrt(AS)/A)^(1/3) * (0.5 + sqrt(A/S)) / (1 + e^(-A/4)).
  expect_rel(moe_expansion_factor({56, 6144, 16384, 16384, 141, 39}), 1.27091205708718458712701988814,
             1e-14);
  expect_rel(moe_expansion_factor({32, 4096, 14336, 14336, 47, 13}), 1.22354418784729736766777999625,
             1e-14);
  EXPECT_NEAR(moe_expansion_factor({1, 1, 1, 1, 1e9, 1e9}), 1.5, 1e-12);
}

TEST(MoeExpansionFactor, RejectsBadActivation) {
  expect_error(ErrorCode::kInvalidInput, [] { moe_expansion_factor({56, 6144, 16384, 16384, 141, 200}); });
  expect_error(ErrorCode::kInvalidInput, [] { moe_expansion_factor({56, 6144, 16384, 16384, 141, 0}); });
}

TEST(PredictMoe, ReferenceValue) {
  const auto p = predict_moe({56, 6144, 16384, 16384, 141, 39}, TrainingSpec{10});
  expect_rel(p.raw_score, 77.50985935370231);
  ASSERT_TRUE(p.expansion_factor.has_value());
  EXPECT_FALSE(p.token_clipped);
}

TEST(PredictMoe, FineGrainedRowsUseDenseFfnInLogTerm) {
  EXPECT_NEAR(predict_moe({60, 5120, 1536, 12288, 236, 21}, {8.1}).adjusted_score, 76.83, 0.005);
  EXPECT_NEAR(predict_moe({28, 3584, 18944, 20480, 57, 14}, {11.5}).adjusted_score, 68.24, 0.005);
  EXPECT_NEAR(predict_moe({32, 4096, 14336, 14336, 47, 13}, {8}).adjusted_score, 68.26, 0.005);
}

TEST(PredictMoe, SaturationClipUsesGeometricMean) {
  const auto p = predict_moe({16, 1024, 4096, 4096, 2, 0.5}, {10});
  EXPECT_TRUE(p.token_clipped);
  EXPECT_DOUBLE_EQ(p.effective_tokens, 1.0);
}

TEST(AdjustHighScore, Examples) {
  EXPECT_EQ(adjust_high_score(90.0), 90.0);
  expect_rel(adjust_high_score(100.0), 97.6159415595576488811945828261, 1e-14);
  EXPECT_EQ(adjust_high_score(60.13969302998589), 60.13969302998589);
}

TEST(AdjustHighScore, ContinuousMonotoneAndBounded) {
  EXPECT_NEAR(adjust_high_score(90.0 + 1e-9), 90.0, 1e-8);
  double prev = adjust_high_score(80.0);
  for (double x = 80.0; x < 2000.0; x += 0.37) {
    const double y = adjust_high_score(x);
    EXPECT_GE(y, prev);
    EXPECT_LT(y, 100.0);
    prev = y;
  }
  EXPECT_LT(adjust_high_score(1e300), 100.0);
}

TEST(MmluToMmluPro, LinearMap) {
  EXPECT_NEAR(mmlu_to_mmlu_pro(85), 65.05, 1e-12);
  EXPECT_NEAR(mmlu_to_mmlu_pro(70.0000001), 30.1, 1e-6);
  EXPECT_NEAR(mmlu_to_mmlu_pro(88), 72.04, 1e-12);
}

TEST(MmluToMmluPro, RejectsWeakModels) {
  expect_error(ErrorCode::kOutOfScope, [] { mmlu_to_mmlu_pro(70.0); });
  expect_error(ErrorCode::kOutOfScope, [] { mmlu_to_mmlu_pro(45.0); });
}

TEST(EstimateParamCount, Arithmetic) {
  EXPECT_NEAR(estimate_param_count(80, 8192, 28672, 0), 77.84628224, 1e-12);
  EXPECT_NEAR(estimate_param_count(1, 1, 1, 0), 7e-9, 1e-24);
  EXPECT_NEAR(estimate_param_count(32, 4096, 14336), 7.784628224 + 2 * 128000 * 4096 / 1e9, 1e-12);
  expect_error(ErrorCode::kInvalidInput, [] { estimate_param_count(0, 4096, 14336); });
}

// ---------------------------------------------------------------------------
// Properties over generated configurations.

struct Gen {
  std::mt19937_64 rng{20240901};
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  DenseArch dense() {
    return DenseArch{integer(8, 128), 128 * integer(4, 128), 128 * integer(8, 512), real(0.3, 500),
                     real(0.0, 2.0)};
  }
  MoeArch moe() {
    const double total = real(5, 2000);
    const auto ffn = 128 * integer(4, 256);
    return MoeArch{integer(8, 96), 128 * integer(8, 96), ffn, ffn + 128 * integer(0, 64), total,
                   total * real(0.05, 1.0), real(0.0, 1.5)};
  }
};

TEST(Properties, DenseAgreesWithExpandedFormOracle) {
  Gen gen;
  for (int i = 0; i < 500; ++i) {
    const auto a = gen.dense();
    const double tokens = gen.real(0.05, 20);
    const auto p = predict_dense(a, {tokens});
    const long double expected = oracle::dense(a.n_layers, a.hidden_size, a.ffn_size, tokens,
                                               a.param_count, a.gamma);
    EXPECT_NEAR(p.raw_score, static_cast<double>(expected), 1e-9 * std::abs(static_cast<double>(expected)) + 1e-9);
  }
}

TEST(Properties, MoeAgreesWithExpandedFormOracle) {
  Gen gen;
  for (int i = 0; i < 500; ++i) {
    const auto m = gen.moe();
    const double tokens = gen.real(0.05, 30);
    const auto p = predict_moe(m, {tokens});
    const long double expected = oracle::moe(m.n_layers, m.hidden_size, m.ffn_size, m.expert_ffn_size,
                                             tokens, m.total_params, m.active_params, m.gamma);
    EXPECT_NEAR(p.raw_score, static_cast<double>(expected), 1e-9 * std::abs(static_cast<double>(expected)) + 1e-9);
  }
}

TEST(Properties, MonotoneInTokensBelowClipConstantAbove) {
  Gen gen;
  for (int i = 0; i < 100; ++i) {
    auto a = gen.dense();
    a.gamma = 1.0;
    const double cap = a.param_count;
    double prev = -1e300;
    for (int k = 1; k <= 20; ++k) {
      const double t = cap * k / 20.0;
      const double s = predict_dense(a, {t}).raw_score;
      EXPECT_GT(s, prev);
      prev = s;
    }
    EXPECT_EQ(predict_dense(a, {cap * 1.5}).raw_score, predict_dense(a, {cap}).raw_score);
    EXPECT_EQ(predict_dense(a, {cap * 40}).raw_score, predict_dense(a, {cap}).raw_score);
  }
}

TEST(Properties, DiscountBoundsAndMonotonicity) {
  Gen gen;
  for (int i = 0; i < 200; ++i) {
    auto a = gen.dense();
    a.gamma = gen.real(0.1, 2.0);
    const double u = unstable_discount(a);
    EXPECT_GT(u, 0.0);
    EXPECT_LE(u, 1.0);

    auto more_gamma = a;
    more_gamma.gamma *= 1.1;
    EXPECT_LT(unstable_discount(more_gamma), u);
    auto deeper = a;
    deeper.n_layers += 1;
    EXPECT_LT(unstable_discount(deeper), u);
    auto wider = a;
    wider.hidden_size += 128;
    EXPECT_GT(unstable_discount(wider), u);
    auto fatter = a;
    fatter.ffn_size += 128;
    EXPECT_GT(unstable_discount(fatter), u);
  }
}

TEST(Properties, ScoreStrictlyDecreasingInGamma) {
  Gen gen;
  for (int i = 0; i < 200; ++i) {
    auto a = gen.dense();
    const double tokens = gen.real(0.1, 15);
    double prev = 1e300;
    for (double g = 0.0; g <= 3.0; g += 0.25) {
      a.gamma = g;
      const double s = predict_dense(a, {tokens}).raw_score;
      EXPECT_LT(s, prev);
      prev = s;
    }
  }
}

TEST(Properties, DeterministicBitIdentical) {
  Gen gen;
  for (int i = 0; i < 100; ++i) {
    const auto a = gen.dense();
    const auto p1 = predict_dense(a, {3.0});
    const auto p2 = predict_dense(a, {3.0});
    EXPECT_EQ(std::memcmp(&p1.raw_score, &p2.raw_score, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&p1.discount, &p2.discount, sizeof(double)), 0);
  }
}

}  // namespace
}  // namespace perflaw
