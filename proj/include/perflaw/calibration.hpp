#pragma once

// Weighted least-squares fitting of the law's coefficients in log-feature
// space, the closed-form precision (gamma) inverse, and residual-based
// contamination flags.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "perflaw/core.hpp"

namespace perflaw {

struct FitSample {
  std::array<double, 4> features{};  // ln(uN), ln(uh), ln(ud), ln(uT')
  double target = 0.0;
  double weight = 1.0;
};

struct FitReport {
  RegressionWeights weights;
  std::vector<double> residuals;  // target - prediction, in sample order
  double mae = 0.0;
  double pearson_r = 0.0;
  bool pseudo_inverse = false;
  std::vector<std::string> warnings;
};

struct GammaEstimate {
  std::optional<double> gamma;
  bool feasible = false;
  double score_at_zero = 0.0;  // raw score with gamma = 0
};

enum class ContaminationFlag { kOk, kContaminationSuspect, kUnderperformance };

constexpr std::string_view flag_name(ContaminationFlag flag) {
  switch (flag) {
    case ContaminationFlag::kOk: return "OK";
    case ContaminationFlag::kContaminationSuspect: return "CONTAMINATION_SUSPECT";
    case ContaminationFlag::kUnderperformance: return "UNDERPERFORMANCE";
  }
  return "OK";
}

inline constexpr std::array<std::string_view, 5> kFitColumnNames = {
    "ln_depth", "ln_hidden", "ln_ffn", "ln_tokens", "intercept"};

namespace detail {

inline void check_observed(double observed) {
  require(observed > 0.0 && observed < 100.0, ErrorCode::kInvalidInput,
          "observed score must lie in (0, 100)");
}

inline FitSample make_sample(const LawTerms& terms, double observed, double weight) {
  check_observed(observed);
  require(weight > 0.0 && std::isfinite(weight), ErrorCode::kInvalidInput,
          "sample weight must be positive");
  return FitSample{log_features(terms), observed, weight};
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace detail

inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size() && !x.empty(), ErrorCode::kPrecondition,
                  "pearson_correlation needs two equally sized, non-empty series");
  return detail::pearson(x, y);
}

/// Builds a regression sample whose features are exactly the log arguments
/// used by predict_dense.
inline FitSample build_sample(const DenseArch& arch, const TrainingSpec& train, double observed,
                              double weight = 1.0) {
  return detail::make_sample(dense_terms(arch, train), observed, weight);
}

inline FitSample build_sample(const MoeArch& moe, const TrainingSpec& train, double observed,
                              double weight = 1.0) {
  return detail::make_sample(moe_terms(moe, train), observed, weight);
}

/// Weighted normal equations X^T W X beta = X^T W y with an intercept column.
///
/// Columns are equilibrated before factorisation. An eigenvalue below 1e-12
/// of the largest marks the design rank-deficient; a condition number above
/// 1e8 switches to a pseudo-inverse solve and records a warning.
inline FitReport fit(std::span<const FitSample> samples) {
  using detail::require;
  require(samples.size() >= 5, ErrorCode::kPrecondition,
          "fit needs at least 5 samples, got " + std::to_string(samples.size()));

  constexpr int kCols = 5;
  Eigen::Matrix<double, kCols, kCols> normal = Eigen::Matrix<double, kCols, kCols>::Zero();
  Eigen::Matrix<double, kCols, 1> rhs = Eigen::Matrix<double, kCols, 1>::Zero();
  for (const auto& s : samples) {
    require(s.weight > 0.0 && std::isfinite(s.weight), ErrorCode::kInvalidInput,
            "sample weight must be positive");
    require(std::isfinite(s.target), ErrorCode::kInvalidInput, "sample target must be finite");
    Eigen::Matrix<double, kCols, 1> row;
    for (int j = 0; j < 4; ++j) {
      require(std::isfinite(s.features[j]), ErrorCode::kInvalidInput,
              "sample features must be finite");
      row(j) = s.features[j];
    }
    row(4) = 1.0;
    normal.noalias() += s.weight * row * row.transpose();
    rhs.noalias() += s.weight * s.target * row;
  }

  Eigen::Matrix<double, kCols, 1> scale;
  for (int j = 0; j < kCols; ++j) {
    if (normal(j, j) <= 0.0) {
      throw Error(ErrorCode::kRankDeficient,
                  "design matrix is rank deficient: column " +
                      std::string(kFitColumnNames[j]) + " is identically zero");
    }
    scale(j) = 1.0 / std::sqrt(normal(j, j));
  }
  const Eigen::Matrix<double, kCols, kCols> scaled =
      scale.asDiagonal() * normal * scale.asDiagonal();
  const Eigen::Matrix<double, kCols, 1> scaled_rhs = scale.asDiagonal() * rhs;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, kCols, kCols>> eigen(scaled);
  const auto& values = eigen.eigenvalues();  // ascending
  const double largest = values(kCols - 1);
  if (values(0) <= 1e-12 * largest) {
    std::string names;
    const auto null_vector = eigen.eigenvectors().col(0);
    for (int j = 0; j < kCols; ++j) {
      if (std::abs(null_vector(j)) > 0.1) {
        if (!names.empty()) names += ", ";
        names += kFitColumnNames[j];
      }
    }
    throw Error(ErrorCode::kRankDeficient,
                "design matrix is rank deficient; collinear columns: " + names);
  }

  FitReport report;
  Eigen::Matrix<double, kCols, 1> z;
  const double condition = largest / values(0);
  if (condition > 1e8) {
    Eigen::Matrix<double, kCols, 1> inv = Eigen::Matrix<double, kCols, 1>::Zero();
    for (int j = 0; j < kCols; ++j) {
      if (values(j) > 1e-12 * largest) inv(j) = 1.0 / values(j);
    }
    z = eigen.eigenvectors() * inv.asDiagonal() * eigen.eigenvectors().transpose() * scaled_rhs;
    report.pseudo_inverse = true;
    report.warnings.push_back("ill-conditioned design (condition number " +
                              std::to_string(condition) + "); solved by pseudo-inverse");
  } else {
    z = scaled.llt().solve(scaled_rhs);
  }
  const Eigen::Matrix<double, kCols, 1> beta = scale.asDiagonal() * z;
  report.weights = RegressionWeights{beta(0), beta(1), beta(2), beta(3), beta(4)};

  std::vector<double> predicted;
  std::vector<double> targets;
  predicted.reserve(samples.size());
  targets.reserve(samples.size());
  report.residuals.reserve(samples.size());
  double abs_sum = 0.0;
  for (const auto& s : samples) {
    const double p = linear_score(s.features, report.weights);
    predicted.push_back(p);
    targets.push_back(s.target);
    report.residuals.push_back(s.target - p);
    abs_sum += std::abs(s.target - p);
  }
  report.mae = abs_sum / static_cast<double>(samples.size());
  report.pearson_r = detail::pearson(predicted, targets);
  return report;
}

/// Recovers gamma from one observed score. The law is affine in gamma^2:
/// score(gamma) = score(0) - sum(w) * ((10/d + 20/h) * N)^2 * gamma^2.
/// Observations above 90 are mapped back through the high-score adjustment.
inline GammaEstimate infer_gamma(const DenseArch& arch, const TrainingSpec& train,
                                 const RegressionWeights& weights, double observed) {
  detail::check_observed(observed);
  const double weight_sum = weights.coefficient_sum();
  detail::require(weight_sum > 0.0, ErrorCode::kUnsupportedWeights,
                  "gamma inference needs a positive coefficient sum");

  DenseArch at_zero = arch;
  at_zero.gamma = 0.0;
  GammaEstimate estimate;
  estimate.score_at_zero = predict_dense(at_zero, train, weights).raw_score;

  const double observed_raw =
      observed > 90.0 ? 90.0 + 10.0 * std::atanh((observed - 90.0) / 10.0) : observed;
  const double gap = estimate.score_at_zero - observed_raw;
  if (gap < 0.0) return estimate;

  const double width_term =
      10.0 / static_cast<double>(arch.ffn_size) + 20.0 / static_cast<double>(arch.hidden_size);
  const double slope = width_term * static_cast<double>(arch.n_layers);
  estimate.gamma = std::sqrt(gap / (weight_sum * slope * slope));
  estimate.feasible = true;
  return estimate;
}

/// Least-squares gamma over a training curve (same arch, several checkpoints).
inline GammaEstimate infer_gamma_curve(const DenseArch& arch, std::span<const double> tokens,
                                       std::span<const double> observed,
                                       const RegressionWeights& weights) {
  detail::require(!tokens.empty() && tokens.size() == observed.size(), ErrorCode::kPrecondition,
                  "infer_gamma_curve needs matching, non-empty token and score series");
  const double weight_sum = weights.coefficient_sum();
  detail::require(weight_sum > 0.0, ErrorCode::kUnsupportedWeights,
                  "gamma inference needs a positive coefficient sum");

  DenseArch at_zero = arch;
  at_zero.gamma = 0.0;
  double mean_gap = 0.0;
  double mean_zero = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    detail::check_observed(observed[i]);
    const double zero = predict_dense(at_zero, TrainingSpec{tokens[i]}, weights).raw_score;
    const double raw = observed[i] > 90.0
                           ? 90.0 + 10.0 * std::atanh((observed[i] - 90.0) / 10.0)
                           : observed[i];
    mean_gap += zero - raw;
    mean_zero += zero;
  }
  mean_gap /= static_cast<double>(tokens.size());

  GammaEstimate estimate;
  estimate.score_at_zero = mean_zero / static_cast<double>(tokens.size());
  if (mean_gap < 0.0) return estimate;
  const double width_term =
      10.0 / static_cast<double>(arch.ffn_size) + 20.0 / static_cast<double>(arch.hidden_size);
  const double slope = width_term * static_cast<double>(arch.n_layers);
  estimate.gamma = std::sqrt(mean_gap / (weight_sum * slope * slope));
  estimate.feasible = true;
  return estimate;
}

// Runs with an inferred gamma above this are treated as unhealthy (bugs or
// precision loss). Good infrastructure sits near 1.
inline constexpr double kHealthyGammaLimit = 2.0;

inline bool is_unhealthy(const GammaEstimate& estimate, double limit = kHealthyGammaLimit) {
  return estimate.feasible && estimate.gamma && *estimate.gamma > limit;
}

inline ContaminationFlag contamination_check(double predicted, double observed,
                                             double threshold = 10.0) {
  if (observed - predicted > threshold) return ContaminationFlag::kContaminationSuspect;
  if (predicted - observed > threshold) return ContaminationFlag::kUnderperformance;
  return ContaminationFlag::kOk;
}

}  // namespace perflaw
