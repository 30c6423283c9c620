#pragma once

// Planning utilities built on the predictor: parameter sweeps, exhaustive
// architecture search, and dense-model expansion (upcycling) schedules.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "perflaw/core.hpp"

namespace perflaw {

using AnyArch = std::variant<DenseArch, MoeArch>;

enum class SweepVariable { kGamma, kTokens, kLayers };

constexpr std::string_view variable_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::kGamma: return "gamma";
    case SweepVariable::kTokens: return "tokens";
    case SweepVariable::kLayers: return "n_layers";
  }
  return "gamma";
}

inline std::optional<SweepVariable> parse_sweep_variable(std::string_view text) {
  if (text == "gamma") return SweepVariable::kGamma;
  if (text == "tokens") return SweepVariable::kTokens;
  if (text == "n_layers" || text == "layers") return SweepVariable::kLayers;
  return std::nullopt;
}

struct SweepSpec {
  SweepVariable variable = SweepVariable::kGamma;
  double min = 0.0;
  double max = 0.0;
  int steps = 2;
  AnyArch arch = DenseArch{};
  TrainingSpec train;
};

struct SweepPoint {
  double x = 0.0;
  double raw = 0.0;
  double adjusted = 0.0;
};

inline PredictionResult predict_any(const AnyArch& arch, const TrainingSpec& train,
                                    const RegressionWeights& weights) {
  return std::visit(
      [&](const auto& a) -> PredictionResult {
        if constexpr (std::is_same_v<std::decay_t<decltype(a)>, DenseArch>) {
          return predict_dense(a, train, weights);
        } else {
          return predict_moe(a, train, weights);
        }
      },
      arch);
}

/// Evaluates the predictor at `steps` evenly spaced values of one variable.
/// Layer sweeps round each grid value to the nearest whole layer.
inline std::vector<SweepPoint> sweep(const SweepSpec& spec, const RegressionWeights& weights = {}) {
  using detail::require;
  require(std::isfinite(spec.min) && std::isfinite(spec.max) && spec.min < spec.max,
          ErrorCode::kInvalidInput, "sweep range must satisfy min < max");
  require(spec.steps >= 2, ErrorCode::kInvalidInput, "sweep needs at least 2 steps");
  switch (spec.variable) {
    case SweepVariable::kGamma:
      require(spec.min >= 0.0, ErrorCode::kInvalidInput, "gamma sweep must start at >= 0");
      break;
    case SweepVariable::kTokens:
      require(spec.min > 0.0, ErrorCode::kInvalidInput, "token sweep must start above 0");
      break;
    case SweepVariable::kLayers:
      require(spec.min >= 1.0, ErrorCode::kInvalidInput, "layer sweep must start at >= 1");
      break;
  }

  std::vector<SweepPoint> out;
  out.reserve(static_cast<std::size_t>(spec.steps));
  for (int i = 0; i < spec.steps; ++i) {
    double x = i == spec.steps - 1
                   ? spec.max
                   : spec.min + (spec.max - spec.min) * static_cast<double>(i) / (spec.steps - 1);
    AnyArch arch = spec.arch;
    TrainingSpec train = spec.train;
    switch (spec.variable) {
      case SweepVariable::kGamma:
        std::visit([&](auto& a) { a.gamma = x; }, arch);
        break;
      case SweepVariable::kTokens:
        train.tokens = x;
        break;
      case SweepVariable::kLayers: {
        const auto layers = static_cast<std::int64_t>(std::llround(x));
        x = static_cast<double>(layers);
        std::visit([&](auto& a) { a.n_layers = layers; }, arch);
        break;
      }
    }
    const auto p = predict_any(arch, train, weights);
    out.push_back(SweepPoint{x, p.raw_score, p.adjusted_score});
  }
  return out;
}

// Hypothetical next-generation MoE: 125T total / 22T active parameters,
// 1300 layers, hidden 51200, FFN 65536, trained on 100T tokens.
struct GiantScenario {
  MoeArch arch{1300, 51200, 65536, 65536, 125000.0, 22000.0, 1.9};
  TrainingSpec train{100.0};
};

inline PredictionResult giant_projection(double gamma = 1.9, const RegressionWeights& weights = {}) {
  GiantScenario scenario;
  scenario.arch.gamma = gamma;
  return predict_moe(scenario.arch, scenario.train, weights);
}

// ---------------------------------------------------------------------------
// Architecture search

struct IntRange {
  std::int64_t min = 0;
  std::int64_t max = 0;
  std::int64_t step = 1;

  std::vector<std::int64_t> values() const {
    std::vector<std::int64_t> out;
    for (std::int64_t v = min; v <= max; v += step) out.push_back(v);
    return out;
  }
};

struct RatioRange {
  double min = 0.0;
  double max = 0.0;
  int steps = 1;

  std::vector<double> values() const {
    if (steps == 1) return {min};
    std::vector<double> out;
    for (int i = 0; i < steps; ++i)
      out.push_back(i == steps - 1 ? max : min + (max - min) * i / (steps - 1));
    return out;
  }
};

struct SearchConstraints {
  double max_params = 0.0;    // billions, checked against estimate_param_count
  double token_budget = 0.0;  // trillions
  double gamma = 1.0;
  IntRange layers{1, 1, 1};
  IntRange hidden{128, 128, 128};
  IntRange ffn{128, 128, 128};
  std::int64_t vocab_size = 128000;
  // When set, every grid shape is also evaluated as an MoE whose total size
  // is the estimated count and whose active size is ratio * total.
  std::optional<RatioRange> moe_activation;
};

struct SearchCandidate {
  std::int64_t n_layers = 0;
  std::int64_t hidden_size = 0;
  std::int64_t ffn_size = 0;
  double params = 0.0;  // estimated total, billions
  std::optional<double> active_params;
  PredictionResult prediction;
};

struct SearchResult {
  bool feasible = false;
  std::size_t evaluated = 0;
  std::vector<SearchCandidate> ranked;
};

namespace detail {

inline void check_range(const IntRange& r, std::string_view name) {
  require(r.step >= 1 && r.min >= 1 && r.min <= r.max, ErrorCode::kInvalidInput,
          std::string(name) + " range must satisfy 1 <= min <= max and step >= 1");
}

// Higher score first; then fewer params, shallower, narrower; then less activation.
inline bool ranks_before(const SearchCandidate& a, const SearchCandidate& b) {
  if (a.prediction.adjusted_score != b.prediction.adjusted_score)
    return a.prediction.adjusted_score > b.prediction.adjusted_score;
  if (a.params != b.params) return a.params < b.params;
  if (a.n_layers != b.n_layers) return a.n_layers < b.n_layers;
  if (a.hidden_size != b.hidden_size) return a.hidden_size < b.hidden_size;
  if (a.ffn_size != b.ffn_size) return a.ffn_size < b.ffn_size;
  return a.active_params.value_or(0.0) < b.active_params.value_or(0.0);
}

inline void keep_top(std::vector<SearchCandidate>& v, std::size_t k) {
  if (v.size() <= k) {
    std::sort(v.begin(), v.end(), ranks_before);
    return;
  }
  std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), ranks_before);
  v.resize(k);
}

}  // namespace detail

/// Exhaustive grid search. Work is split by layer count across threads; the
/// ranking key is a total order, so results do not depend on thread count.
inline SearchResult search_architectures(const SearchConstraints& c,
                                         const RegressionWeights& weights, std::size_t top_k,
                                         unsigned threads = 0) {
  using detail::require;
  require(c.max_params > 0.0, ErrorCode::kInvalidInput, "max_params must be > 0");
  require(c.token_budget > 0.0, ErrorCode::kInvalidInput, "token_budget must be > 0");
  require(c.gamma >= 0.0, ErrorCode::kInvalidInput, "gamma must be >= 0");
  require(top_k >= 1, ErrorCode::kInvalidInput, "top_k must be >= 1");
  detail::check_range(c.layers, "layers");
  detail::check_range(c.hidden, "hidden");
  detail::check_range(c.ffn, "ffn");
  if (c.moe_activation) {
    const auto& m = *c.moe_activation;
    require(m.steps >= 1 && m.min > 0.0 && m.min <= m.max && m.max <= 1.0,
            ErrorCode::kInvalidInput, "moe activation ratios must satisfy 0 < min <= max <= 1");
  }

  const auto layer_values = c.layers.values();
  const auto hidden_values = c.hidden.values();
  const auto ffn_values = c.ffn.values();
  const TrainingSpec train{c.token_budget};

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, layer_values.size()));

  struct Partial {
    std::vector<SearchCandidate> best;
    std::size_t evaluated = 0;
    std::exception_ptr error;
  };
  std::vector<Partial> partials(threads);
  const std::size_t flush_at = 4 * top_k + 1024;

  // Shapes so deep that the discount underflows cannot be scored; skip them.
  auto try_score = [](auto&& predict) -> std::optional<PredictionResult> {
    try {
      return predict();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNegativeLog) throw;
      return std::nullopt;
    }
  };

  auto scan = [&](unsigned t) {
    Partial& part = partials[t];
    for (std::size_t li = t; li < layer_values.size(); li += threads) {
      const auto n = layer_values[li];
      for (const auto h : hidden_values) {
        for (const auto d : ffn_values) {
          const double params = estimate_param_count(n, h, d, c.vocab_size);
          if (params > c.max_params) continue;
          if (c.moe_activation) {
            for (const double ratio : c.moe_activation->values()) {
              MoeArch moe{n, h, d, d, params, ratio * params, c.gamma};
              ++part.evaluated;
              if (auto p = try_score([&] { return predict_moe(moe, train, weights); }))
                part.best.push_back(SearchCandidate{n, h, d, params, moe.active_params, *p});
            }
          } else {
            DenseArch arch{n, h, d, params, c.gamma};
            ++part.evaluated;
            if (auto p = try_score([&] { return predict_dense(arch, train, weights); }))
              part.best.push_back(SearchCandidate{n, h, d, params, std::nullopt, *p});
          }
          if (part.best.size() >= flush_at) detail::keep_top(part.best, top_k);
        }
      }
    }
    detail::keep_top(part.best, top_k);
  };
  auto worker = [&](unsigned t) {
    try {
      scan(t);
    } catch (...) {
      partials[t].error = std::current_exception();
    }
  };

  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
  }

  SearchResult result;
  for (auto& p : partials) {
    if (p.error) std::rethrow_exception(p.error);
    result.evaluated += p.evaluated;
    result.ranked.insert(result.ranked.end(), p.best.begin(), p.best.end());
  }
  detail::keep_top(result.ranked, top_k);
  result.feasible = !result.ranked.empty();
  return result;
}

// ---------------------------------------------------------------------------
// Dense model expansion

struct ExpansionPlan {
  DenseArch small;
  double small_tokens = 0.0;  // T1, trillions spent on the small model
  DenseArch large;            // target shape; its gamma is used for the discount
  double large_tokens = 0.0;  // T2, trillions spent after expansion
  double recovery_scale = 0.1;
};

struct ExpansionResult {
  PredictionResult prediction;
  double ratio = 0.0;  // interpolation weight from small (0) to large (1)
  double n_layers = 0.0;
  double hidden = 0.0;
  double ffn = 0.0;
};

/// Effective size after expanding `small` into `large`:
///   ratio = (S1*T1 + S2*T2) / (T1 + T2) / S2 - T1*S1 / S2 / (1 + exp(T2 / recovery))
/// Depth and widths are interpolated by ratio; the token term uses T1 + T2
/// with no saturation clip.
inline ExpansionResult predict_expanded(const ExpansionPlan& plan,
                                        const RegressionWeights& weights = {}) {
  using detail::require;
  validate(plan.small);
  validate(plan.large);
  require(plan.small_tokens > 0.0 && plan.large_tokens > 0.0, ErrorCode::kInvalidInput,
          "expansion token counts must be positive");
  require(plan.recovery_scale > 0.0, ErrorCode::kInvalidInput, "recovery_scale must be positive");
  require(plan.large.n_layers >= plan.small.n_layers &&
              plan.large.hidden_size >= plan.small.hidden_size &&
              plan.large.ffn_size >= plan.small.ffn_size,
          ErrorCode::kInvalidInput, "large architecture must be at least as big as small");

  const double s1 = plan.small.param_count, s2 = plan.large.param_count;
  const double t1 = plan.small_tokens, t2 = plan.large_tokens;
  const double ratio =
      ((s1 * t1) + (s2 * t2)) / (t1 + t2) / s2 - t1 * s1 / s2 / (1.0 + std::exp(t2 / plan.recovery_scale));

  auto lerp = [ratio](std::int64_t a, std::int64_t b) {
    return static_cast<double>(a) + static_cast<double>(b - a) * ratio;
  };
  ExpansionResult out;
  out.ratio = ratio;
  out.n_layers = lerp(plan.small.n_layers, plan.large.n_layers);
  out.hidden = lerp(plan.small.hidden_size, plan.large.hidden_size);
  out.ffn = lerp(plan.small.ffn_size, plan.large.ffn_size);
  require(out.n_layers > 0.0 && out.hidden > 0.0 && out.ffn > 0.0, ErrorCode::kInvalidInput,
          "expansion ratio produced non-positive effective dimensions");

  LawTerms terms;
  terms.effective_tokens = t1 + t2;
  terms.discount = discount_for(out.n_layers, out.hidden, out.ffn, plan.large.gamma);
  terms.values = {out.n_layers, out.hidden, out.ffn, terms.effective_tokens};
  out.prediction = score_terms(terms, weights);
  return out;
}

struct SplitPoint {
  double small_tokens = 0.0;
  double large_tokens = 0.0;
  double score = 0.0;  // adjusted
};

struct SplitOptimum {
  SplitPoint best;
  std::size_t best_index = 0;
  std::vector<SplitPoint> curve;
};

/// Scans T1 over `grid` points strictly inside (0, total), T1 = total*(i+1)/(grid+1),
/// with T2 = total - T1. Ties go to the smaller T1.
inline SplitOptimum optimize_expansion_split(const DenseArch& small, const DenseArch& large,
                                             double total_tokens,
                                             const RegressionWeights& weights = {},
                                             int grid = 41, double recovery_scale = 0.1) {
  detail::require(total_tokens > 0.0 && std::isfinite(total_tokens), ErrorCode::kInvalidInput,
                  "total_tokens must be positive");
  detail::require(grid >= 3, ErrorCode::kInvalidInput, "split grid needs at least 3 points");

  SplitOptimum out;
  out.curve.reserve(static_cast<std::size_t>(grid));
  for (int i = 0; i < grid; ++i) {
    const double t1 = total_tokens * static_cast<double>(i + 1) / static_cast<double>(grid + 1);
    const double t2 = total_tokens - t1;
    const auto r = predict_expanded(ExpansionPlan{small, t1, large, t2, recovery_scale}, weights);
    out.curve.push_back(SplitPoint{t1, t2, r.prediction.adjusted_score});
    if (i == 0 || out.curve.back().score > out.best.score) {
      out.best = out.curve.back();
      out.best_index = static_cast<std::size_t>(i);
    }
  }
  return out;
}

}  // namespace perflaw
