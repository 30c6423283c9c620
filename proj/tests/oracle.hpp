#pragma once

// Independent reference evaluation used only by tests.
//
// Uses long double and the expanded form of the law,
//   sum_i w_i ln(x_i) - (sum_i w_i) * (c * gamma * N)^2 + b,  c = 10/d + 20/h,
// rather than ln(u * x_i). The MoE factor uses the (0.5 + sqrt(A/S)) form.
// Nothing here calls into the library's computation paths.

#include <array>
#include <cmath>

namespace oracle {

struct Weights {
  long double w[4] = {13.95018L, 0.23072L, -0.48523L, 5.39802L};
  long double b = 9.19541L;
  long double sum() const { return w[0] + w[1] + w[2] + w[3]; }
};

inline long double expanded_score(long double depth, long double hidden, long double ffn,
                                  long double tokens, long double discount_ffn, long double gamma,
                                  const Weights& wt = {}) {
  const long double c = 10.0L / discount_ffn + 20.0L / hidden;
  const long double penalty = (c * gamma * depth) * (c * gamma * depth);
  return wt.w[0] * std::log(depth) + wt.w[1] * std::log(hidden) + wt.w[2] * std::log(ffn) +
         wt.w[3] * std::log(tokens) - wt.sum() * penalty + wt.b;
}

inline long double dense(long double n, long double h, long double d, long double tokens,
                         long double size, long double gamma = 1.0L, const Weights& wt = {}) {
  const long double t = tokens < size ? tokens : size;
  return expanded_score(n, h, d, t, d, gamma, wt);
}

inline long double expansion_factor(long double act, long double total) {
  return std::cbrt(std::sqrt(total / act)) * (0.5L + std::sqrt(act / total)) /
         (1.0L + std::exp(-act / 4.0L));
}

inline long double moe(long double n, long double h, long double d, long double d_expert,
                       long double tokens, long double total, long double act,
                       long double gamma = 1.0L, const Weights& wt = {}) {
  const long double g = expansion_factor(act, total);
  const long double cap = std::sqrt(act * total);
  const long double t = tokens < cap ? tokens : cap;
  return expanded_score(n * g, h * g, d, t, d_expert, gamma, wt);
}

inline long double adjust(long double raw) {
  return raw <= 90.0L ? raw : 90.0L + 10.0L * std::tanh(raw / 10.0L - 9.0L);
}

}  // namespace oracle
