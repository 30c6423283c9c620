#include "perflaw/calibration.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

namespace perflaw {
namespace {

void expect_error(ErrorCode code, auto&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected perflaw::Error " << code_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

const DenseArch kMistral7B{32, 4096, 14336, 7.0};

// Samples whose targets are exactly linear in the features under `truth`.
std::vector<FitSample> synthetic_samples(const RegressionWeights& truth, int count,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> layers(12, 96);
  std::uniform_int_distribution<int> width(16, 128);
  std::uniform_real_distribution<double> tokens(0.2, 15.0);
  std::vector<FitSample> out;
  for (int i = 0; i < count; ++i) {
    const DenseArch arch{layers(rng), 128 * width(rng), 384 * width(rng), 1000.0};
    auto s = build_sample(arch, TrainingSpec{tokens(rng)}, 50.0);
    s.target = linear_score(s.features, truth);
    out.push_back(s);
  }
  return out;
}

TEST(BuildSample, FeaturesReproduceThePrediction) {
  const auto s = build_sample(kMistral7B, TrainingSpec{3}, 62.5);
  EXPECT_NEAR(linear_score(s.features, RegressionWeights{}), 60.13969302998589, 1e-9);
  EXPECT_EQ(s.target, 62.5);
  EXPECT_EQ(s.weight, 1.0);
}

TEST(BuildSample, MoeFeaturesMatchPredictMoe) {
  const MoeArch m{56, 6144, 16384, 16384, 141, 39};
  const auto s = build_sample(m, TrainingSpec{10}, 77.0, 2.0);
  EXPECT_DOUBLE_EQ(linear_score(s.features, RegressionWeights{}), predict_moe(m, {10}).raw_score);
  EXPECT_EQ(s.weight, 2.0);
}

TEST(BuildSample, RejectsBadObservationAndWeight) {
  expect_error(ErrorCode::kInvalidInput, [] { build_sample(kMistral7B, {3}, 62.5, 0.0); });
  expect_error(ErrorCode::kInvalidInput, [] { build_sample(kMistral7B, {3}, 0.0); });
  expect_error(ErrorCode::kInvalidInput, [] { build_sample(kMistral7B, {3}, 100.0); });
}

TEST(BuildSample, DegenerateArchIsDomainError) {
  expect_error(ErrorCode::kNegativeLog,
               [] { build_sample(DenseArch{5000, 64, 64, 1.0, 50.0}, {1}, 50.0); });
}

TEST(Fit, RecoversNoiselessWeights) {
  const RegressionWeights truth{};
  const auto samples = synthetic_samples(truth, 40, 7);
  const auto report = fit(samples);
  const auto got = report.weights.coefficients();
  const auto want = truth.coefficients();
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(got[i], want[i], 1e-6) << "w" << i + 1;
  EXPECT_NEAR(report.weights.b, truth.b, 1e-6);
  EXPECT_LT(report.mae, 1e-8);
  EXPECT_NEAR(report.pearson_r, 1.0, 1e-12);
  EXPECT_FALSE(report.pseudo_inverse);
  EXPECT_EQ(report.residuals.size(), samples.size());
}

TEST(Fit, RecoversArbitraryWeights) {
  const RegressionWeights truth{3.5, -1.25, 0.75, 2.0, -12.0};
  const auto report = fit(synthetic_samples(truth, 25, 99));
  EXPECT_NEAR(report.weights.w1, 3.5, 1e-6);
  EXPECT_NEAR(report.weights.w2, -1.25, 1e-6);
  EXPECT_NEAR(report.weights.w3, 0.75, 1e-6);
  EXPECT_NEAR(report.weights.w4, 2.0, 1e-6);
  EXPECT_NEAR(report.weights.b, -12.0, 1e-6);
}

TEST(Fit, ResidualsAreOrthogonalToTheDesign) {
  auto samples = synthetic_samples(RegressionWeights{}, 30, 3);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 2.0);
  std::uniform_real_distribution<double> weight(0.5, 3.0);
  for (auto& s : samples) {
    s.target += noise(rng);
    s.weight = weight(rng);
  }
  const auto report = fit(samples);
  for (int j = 0; j < 5; ++j) {
    double dot = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double x = j < 4 ? samples[i].features[j] : 1.0;
      dot += samples[i].weight * x * report.residuals[i];
      scale += std::abs(samples[i].weight * x * samples[i].target);
    }
    EXPECT_NEAR(dot / scale, 0.0, 1e-10) << kFitColumnNames[j];
  }
  EXPECT_GT(report.mae, 0.0);
  EXPECT_LE(std::abs(report.pearson_r), 1.0);
}

TEST(Fit, UniformWeightScalingDoesNotChangeTheSolution) {
  auto samples = synthetic_samples(RegressionWeights{}, 20, 5);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (auto& s : samples) s.target += noise(rng);
  const auto base = fit(samples);
  for (auto& s : samples) s.weight *= 2.0;
  const auto doubled = fit(samples);
  const auto a = base.weights.coefficients();
  const auto b = doubled.weights.coefficients();
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
  EXPECT_NEAR(base.weights.b, doubled.weights.b, 1e-8);
}

TEST(Fit, UpweightingPullsTowardsTheUpweightedSample) {
  auto samples = synthetic_samples(RegressionWeights{}, 20, 8);
  samples[0].target += 5.0;
  const double before = std::abs(fit(samples).residuals[0]);
  samples[0].weight = 20.0;
  const double after = std::abs(fit(samples).residuals[0]);
  EXPECT_LT(after, before);
}

TEST(Fit, NeedsFiveSamples) {
  const auto samples = synthetic_samples(RegressionWeights{}, 4, 1);
  expect_error(ErrorCode::kPrecondition, [&] { fit(samples); });
}

TEST(Fit, IdenticalSamplesAreRankDeficient) {
  std::vector<FitSample> samples(6, build_sample(kMistral7B, TrainingSpec{3}, 60.0));
  try {
    fit(samples);
    FAIL() << "expected RANK_DEFICIENT";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRankDeficient);
    EXPECT_NE(std::string(e.what()).find("collinear columns"), std::string::npos) << e.what();
  }
}

TEST(Fit, CollinearColumnsAreNamed) {
  // Hidden and FFN widths move together, so ln_hidden and ln_ffn differ by a constant.
  std::vector<FitSample> samples;
  const std::int64_t layers[] = {16, 24, 32, 40, 48, 64, 80};
  const std::int64_t widths[] = {2048, 3072, 4096, 5120, 6144, 8192, 12288};
  for (int i = 0; i < 7; ++i) {
    FitSample s;
    s.features = {std::log(double(layers[i])), std::log(double(widths[i])),
                  std::log(4.0 * double(widths[i])), std::log(0.5 + 0.7 * i * i)};
    s.target = 40.0 + i;
    samples.push_back(s);
  }
  try {
    fit(samples);
    FAIL() << "expected RANK_DEFICIENT";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRankDeficient);
    const std::string what = e.what();
    EXPECT_NE(what.find("ln_hidden"), std::string::npos) << what;
    EXPECT_NE(what.find("ln_ffn"), std::string::npos) << what;
  }
}

TEST(Fit, NearCollinearDesignFallsBackToPseudoInverse) {
  auto samples = synthetic_samples(RegressionWeights{}, 30, 13);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  for (auto& s : samples) s.features[2] = s.features[1] + 1.3 + 3e-4 * jitter(rng);
  const auto report = fit(samples);
  EXPECT_TRUE(report.pseudo_inverse);
  ASSERT_EQ(report.warnings.size(), 1u);
  for (double r : report.residuals) EXPECT_TRUE(std::isfinite(r));
}

TEST(Fit, RejectsNonPositiveWeight) {
  auto samples = synthetic_samples(RegressionWeights{}, 6, 1);
  samples[3].weight = 0.0;
  expect_error(ErrorCode::kInvalidInput, [&] { fit(samples); });
}

TEST(PearsonCorrelation, DegenerateInputIsZero) {
  const std::vector<double> flat{1, 1, 1};
  const std::vector<double> rising{1, 2, 3};
  EXPECT_EQ(pearson_correlation(flat, rising), 0.0);
  EXPECT_NEAR(pearson_correlation(rising, rising), 1.0, 1e-15);
}

TEST(InferGamma, RoundTripsThePrediction) {
  DenseArch arch = kMistral7B;
  arch.gamma = 1.4;
  const double observed = predict_dense(arch, {3}).adjusted_score;
  arch.gamma = 1.0;
  const auto est = infer_gamma(arch, {3}, RegressionWeights{}, observed);
  ASSERT_TRUE(est.feasible);
  EXPECT_NEAR(*est.gamma, 1.4, 1e-9);
  EXPECT_FALSE(is_unhealthy(est));
}

TEST(InferGamma, RoundTripsAboveTheSoftCap) {
  DenseArch big{1300, 51200, 65536, 1500, 0.3};
  const double observed = predict_dense(big, {15}).adjusted_score;
  ASSERT_GT(observed, 90.0);
  const auto est = infer_gamma(big, {15}, RegressionWeights{}, observed);
  ASSERT_TRUE(est.feasible);
  EXPECT_NEAR(*est.gamma, 0.3, 1e-6);
}

TEST(InferGamma, ZeroGammaWhenObservedEqualsTheCeiling) {
  DenseArch arch = kMistral7B;
  arch.gamma = 0.0;
  const double ceiling = predict_dense(arch, {3}).raw_score;
  const auto est = infer_gamma(kMistral7B, {3}, RegressionWeights{}, ceiling);
  ASSERT_TRUE(est.feasible);
  EXPECT_NEAR(*est.gamma, 0.0, 1e-6);
  EXPECT_DOUBLE_EQ(est.score_at_zero, ceiling);
}

TEST(InferGamma, InfeasibleAboveTheCeiling) {
  const auto est = infer_gamma(kMistral7B, {3}, RegressionWeights{}, 75.0);
  EXPECT_FALSE(est.feasible);
  EXPECT_FALSE(est.gamma.has_value());
  EXPECT_GT(75.0, est.score_at_zero);
}

TEST(InferGamma, NonPositiveCoefficientSumUnsupported) {
  const RegressionWeights negative{1, 1, -10, 1, 0};
  expect_error(ErrorCode::kUnsupportedWeights,
               [&] { infer_gamma(kMistral7B, {3}, negative, 40.0); });
}

TEST(InferGamma, LargeGammaFlaggedUnhealthy) {
  DenseArch arch = kMistral7B;
  arch.gamma = 3.7;
  const double observed = predict_dense(arch, {3}).adjusted_score;
  const auto est = infer_gamma(kMistral7B, {3}, RegressionWeights{}, observed);
  ASSERT_TRUE(est.feasible);
  EXPECT_NEAR(*est.gamma, 3.7, 1e-9);
  EXPECT_TRUE(is_unhealthy(est));
}

TEST(InferGamma, RandomRoundTrips) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> layers(8, 96);
  std::uniform_int_distribution<int> width(8, 128);
  std::uniform_real_distribution<double> real(0.0, 1.0);
  int checked = 0;
  while (checked < 100) {
    DenseArch arch{layers(rng), 128 * width(rng), 256 * width(rng), 1.0 + 300.0 * real(rng),
                   2.0 * real(rng)};
    const double tokens = 0.2 + 14.0 * real(rng);
    const double observed = predict_dense(arch, {tokens}).adjusted_score;
    if (observed <= 0.0 || observed >= 99.0) continue;
    const double truth = arch.gamma;
    arch.gamma = 1.0;
    const auto est = infer_gamma(arch, {tokens}, RegressionWeights{}, observed);
    ASSERT_TRUE(est.feasible);
    EXPECT_NEAR(*est.gamma, truth, 1e-9 * std::max(1.0, truth));
    ++checked;
  }
}

TEST(InferGammaCurve, RecoversGammaFromCheckpoints) {
  DenseArch arch{40, 5120, 13824, 13, 1.3};
  std::vector<double> tokens{0.5, 1.0, 2.0, 4.0};
  std::vector<double> scores;
  for (double t : tokens) scores.push_back(predict_dense(arch, {t}).adjusted_score);
  const auto est = infer_gamma_curve(arch, tokens, scores, RegressionWeights{});
  ASSERT_TRUE(est.feasible);
  EXPECT_NEAR(*est.gamma, 1.3, 1e-9);
}

TEST(InferGammaCurve, RejectsMismatchedSeries) {
  const std::vector<double> tokens{1.0, 2.0};
  const std::vector<double> scores{50.0};
  expect_error(ErrorCode::kPrecondition,
               [&] { infer_gamma_curve(kMistral7B, tokens, scores, RegressionWeights{}); });
}

TEST(ContaminationCheck, Flags) {
  EXPECT_EQ(contamination_check(60.0, 75.0), ContaminationFlag::kContaminationSuspect);
  EXPECT_EQ(contamination_check(60.0, 65.0), ContaminationFlag::kOk);
  EXPECT_EQ(contamination_check(60.0, 70.0), ContaminationFlag::kOk);
  EXPECT_EQ(contamination_check(70.0, 55.0), ContaminationFlag::kUnderperformance);
  EXPECT_EQ(contamination_check(60.0, 63.0, 2.0), ContaminationFlag::kContaminationSuspect);
  EXPECT_EQ(flag_name(ContaminationFlag::kContaminationSuspect), "CONTAMINATION_SUSPECT");
}

}  // namespace
}  // namespace perflaw
