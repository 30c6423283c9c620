#pragma once

// Closed-form MMLU predictor for dense and mixture-of-experts Transformers.
//
// Units follow the published formulation: training tokens are in trillions
// and parameter counts in billions. The saturation clip compares the two
// numerically (min(T, S)), so a 7B model saturates at 7T tokens.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "perflaw/error.hpp"

namespace perflaw {

struct DenseArch {
  std::int64_t n_layers = 0;
  std::int64_t hidden_size = 0;
  std::int64_t ffn_size = 0;
  double param_count = 0.0;  // billions
  double gamma = 1.0;        // precision coefficient, 1 = healthy infrastructure
};

struct MoeArch {
  std::int64_t n_layers = 0;
  std::int64_t hidden_size = 0;
  std::int64_t ffn_size = 0;         // dense / compressed FFN width (log term)
  std::int64_t expert_ffn_size = 0;  // widest activated expert FFN (discount)
  double total_params = 0.0;         // billions
  double active_params = 0.0;        // billions
  double gamma = 1.0;
};

struct TrainingSpec {
  double tokens = 0.0;  // trillions
};

struct RegressionWeights {
  double w1 = 13.95018;  // ln(depth)
  double w2 = 0.23072;   // ln(hidden)
  double w3 = -0.48523;  // ln(ffn)
  double w4 = 5.39802;   // ln(effective tokens)
  double b = 9.19541;

  std::array<double, 4> coefficients() const { return {w1, w2, w3, w4}; }
  double coefficient_sum() const { return w1 + w2 + w3 + w4; }

  friend bool operator==(const RegressionWeights&, const RegressionWeights&) = default;
};

struct PredictionResult {
  double raw_score = 0.0;
  double adjusted_score = 0.0;
  double effective_tokens = 0.0;  // T' in trillions
  double discount = 1.0;          // u (dense) or u' (MoE)
  std::optional<double> expansion_factor;  // g, MoE only
  bool token_clipped = false;
};

// The four multiplicands of the log-linear law before the discount is applied:
// depth, hidden width, FFN width and effective tokens.
struct LawTerms {
  std::array<double, 4> values{};
  double discount = 1.0;
  double effective_tokens = 0.0;
  bool token_clipped = false;
  std::optional<double> expansion_factor;
};

inline void validate(const DenseArch& arch) {
  using detail::require;
  require(arch.n_layers >= 1, ErrorCode::kInvalidInput, "n_layers must be >= 1");
  require(arch.hidden_size >= 1, ErrorCode::kInvalidInput, "hidden_size must be >= 1");
  require(arch.ffn_size >= 1, ErrorCode::kInvalidInput, "ffn_size must be >= 1");
  require(arch.param_count > 0.0 && std::isfinite(arch.param_count), ErrorCode::kInvalidInput,
          "param_count must be a positive number of billions");
  require(arch.gamma >= 0.0 && std::isfinite(arch.gamma), ErrorCode::kInvalidInput,
          "gamma must be non-negative");
}

inline void validate(const MoeArch& arch) {
  using detail::require;
  require(arch.n_layers >= 1, ErrorCode::kInvalidInput, "n_layers must be >= 1");
  require(arch.hidden_size >= 1, ErrorCode::kInvalidInput, "hidden_size must be >= 1");
  require(arch.ffn_size >= 1, ErrorCode::kInvalidInput, "ffn_size must be >= 1");
  require(arch.expert_ffn_size >= 1, ErrorCode::kInvalidInput, "expert_ffn_size must be >= 1");
  require(arch.total_params > 0.0 && std::isfinite(arch.total_params), ErrorCode::kInvalidInput,
          "total_params must be positive");
  require(arch.active_params > 0.0 && arch.active_params <= arch.total_params,
          ErrorCode::kInvalidInput, "active_params must lie in (0, total_params]");
  require(arch.gamma >= 0.0 && std::isfinite(arch.gamma), ErrorCode::kInvalidInput,
          "gamma must be non-negative");
}

inline void validate(const TrainingSpec& train) {
  detail::require(train.tokens > 0.0 && std::isfinite(train.tokens), ErrorCode::kInvalidInput,
                  "tokens must be a positive number of trillions");
}

/// Saturation clip: min(tokens, capacity), trillions against billions.
inline double effective_tokens(double tokens, double capacity) {
  detail::require(tokens > 0.0 && capacity > 0.0, ErrorCode::kInvalidInput,
                  "effective_tokens requires positive tokens and capacity");
  return std::min(tokens, capacity);
}

/// Instability penalty exp(-[(10/d + 20/h) * gamma * N]^2) for real-valued
/// dims. The whole product is squared.
inline double discount_for(double n_layers, double hidden, double ffn, double gamma) {
  const double width_term = 10.0 / ffn + 20.0 / hidden;
  const double x = width_term * (gamma * n_layers);
  return std::exp(-(x * x));
}

inline double unstable_discount(const DenseArch& arch) {
  validate(arch);
  return discount_for(static_cast<double>(arch.n_layers), static_cast<double>(arch.hidden_size),
                      static_cast<double>(arch.ffn_size), arch.gamma);
}

/// MoE expansion factor g applied to depth and hidden width.
inline double moe_expansion_factor(const MoeArch& moe) {
  validate(moe);
  const double act = moe.active_params;
  const double total = moe.total_params;
  return std::pow(std::sqrt(act * total) / act, 1.0 / 3.0) *
         ((1.0 + std::sqrt(4.0 * act / total)) / 2.0) * (1.0 / (1.0 + std::exp(-act / 4.0)));
}

inline double adjust_high_score(double raw) {
  if (raw <= 90.0) return raw;
  const double adjusted = 90.0 + 10.0 * std::tanh(0.1 * raw - 9.0);
  // tanh rounds to exactly 1 for raw scores above ~280; keep the bound strict.
  return adjusted < 100.0 ? adjusted : std::nextafter(100.0, 0.0);
}

/// Linear MMLU -> MMLU-Pro map, only defined for strong models (MMLU > 70).
inline double mmlu_to_mmlu_pro(double mmlu) {
  detail::require(mmlu > 70.0, ErrorCode::kOutOfScope,
                  "MMLU-Pro mapping is only defined for MMLU > 70");
  return 2.33 * mmlu - 133.0;
}

// Rough parameter count in billions: attention (4h^2) plus gated FFN (3hd)
// per layer, plus untied input/output embeddings. Callers with a known size
// should pass it directly instead.
inline double estimate_param_count(std::int64_t n_layers, std::int64_t hidden_size,
                                   std::int64_t ffn_size, std::int64_t vocab_size = 128000) {
  detail::require(n_layers >= 1 && hidden_size >= 1 && ffn_size >= 1, ErrorCode::kInvalidInput,
                  "estimate_param_count requires positive layers, hidden and ffn");
  detail::require(vocab_size >= 0, ErrorCode::kInvalidInput, "vocab_size must be >= 0");
  const double n = static_cast<double>(n_layers);
  const double h = static_cast<double>(hidden_size);
  const double d = static_cast<double>(ffn_size);
  const double v = static_cast<double>(vocab_size);
  return (n * (4.0 * h * h + 3.0 * h * d) + 2.0 * v * h) / 1e9;
}

inline LawTerms dense_terms(const DenseArch& arch, const TrainingSpec& train) {
  validate(arch);
  validate(train);
  LawTerms terms;
  terms.effective_tokens = effective_tokens(train.tokens, arch.param_count);
  terms.token_clipped = arch.param_count < train.tokens;
  terms.discount = unstable_discount(arch);
  terms.values = {static_cast<double>(arch.n_layers), static_cast<double>(arch.hidden_size),
                  static_cast<double>(arch.ffn_size), terms.effective_tokens};
  return terms;
}

// Depth and width are scaled by g before the discount is taken; the discount
// uses the expert width while the log term keeps the dense FFN width.
inline LawTerms moe_terms(const MoeArch& moe, const TrainingSpec& train) {
  validate(train);
  const double g = moe_expansion_factor(moe);
  const double depth = static_cast<double>(moe.n_layers) * g;
  const double hidden = static_cast<double>(moe.hidden_size) * g;
  const double capacity = std::sqrt(moe.active_params * moe.total_params);

  LawTerms terms;
  terms.expansion_factor = g;
  terms.effective_tokens = effective_tokens(train.tokens, capacity);
  terms.token_clipped = capacity < train.tokens;
  terms.discount =
      discount_for(depth, hidden, static_cast<double>(moe.expert_ffn_size), moe.gamma);
  terms.values = {depth, hidden, static_cast<double>(moe.ffn_size), terms.effective_tokens};
  return terms;
}

/// ln(u * x_i) for each term; throws when an argument underflows to zero.
inline std::array<double, 4> log_features(const LawTerms& terms) {
  std::array<double, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    const double arg = terms.discount * terms.values[i];
    detail::require(arg > 0.0 && std::isfinite(arg), ErrorCode::kNegativeLog,
                    "log argument is not positive (discount underflow or degenerate input)");
    out[i] = std::log(arg);
  }
  return out;
}

inline double linear_score(const std::array<double, 4>& features, const RegressionWeights& w) {
  const auto c = w.coefficients();
  double sum = c[0] * features[0];
  for (std::size_t i = 1; i < 4; ++i) sum += c[i] * features[i];
  return sum + w.b;
}

inline PredictionResult score_terms(const LawTerms& terms, const RegressionWeights& weights) {
  PredictionResult result;
  result.raw_score = linear_score(log_features(terms), weights);
  result.adjusted_score = adjust_high_score(result.raw_score);
  result.effective_tokens = terms.effective_tokens;
  result.discount = terms.discount;
  result.expansion_factor = terms.expansion_factor;
  result.token_clipped = terms.token_clipped;
  return result;
}

inline PredictionResult predict_dense(const DenseArch& arch, const TrainingSpec& train,
                                      const RegressionWeights& weights = {}) {
  return score_terms(dense_terms(arch, train), weights);
}

inline PredictionResult predict_moe(const MoeArch& moe, const TrainingSpec& train,
                                    const RegressionWeights& weights = {}) {
  return score_terms(moe_terms(moe, train), weights);
}

}  // namespace perflaw
