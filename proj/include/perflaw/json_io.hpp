#pragma once

// JSON shapes shared by the CLI, the HTTP service and on-disk files.

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "perflaw/calibration.hpp"
#include "perflaw/core.hpp"
#include "perflaw/planner.hpp"
#include "perflaw/zoo.hpp"

namespace perflaw {

using json = nlohmann::json;

namespace detail {

inline const json& require_field(const json& j, std::string_view key) {
  if (!j.is_object()) throw Error(ErrorCode::kSchema, "expected a JSON object");
  auto it = j.find(key);
  if (it == j.end() || it->is_null())
    throw Error(ErrorCode::kSchema, "missing required field '" + std::string(key) + "'");
  return *it;
}

inline double as_number(const json& v, std::string_view key) {
  if (!v.is_number())
    throw Error(ErrorCode::kSchema, "field '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

inline std::int64_t as_integer(const json& v, std::string_view key) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15)
      return static_cast<std::int64_t>(d);
  }
  throw Error(ErrorCode::kSchema, "field '" + std::string(key) + "' must be an integer");
}

inline double number(const json& j, std::string_view key) {
  return as_number(require_field(j, key), key);
}

inline double number_or(const json& j, std::string_view key, double fallback) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : as_number(*it, key);
}

inline std::int64_t integer(const json& j, std::string_view key) {
  return as_integer(require_field(j, key), key);
}

inline std::int64_t integer_or(const json& j, std::string_view key, std::int64_t fallback) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : as_integer(*it, key);
}

inline std::string string_field(const json& j, std::string_view key) {
  const auto& v = require_field(j, key);
  if (!v.is_string()) throw Error(ErrorCode::kSchema, "field '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

}  // namespace detail

inline json to_json(const RegressionWeights& w) {
  return json{{"w1", w.w1}, {"w2", w.w2}, {"w3", w.w3}, {"w4", w.w4}, {"b", w.b}};
}

inline RegressionWeights weights_from_json(const json& j) {
  return RegressionWeights{detail::number(j, "w1"), detail::number(j, "w2"),
                           detail::number(j, "w3"), detail::number(j, "w4"),
                           detail::number(j, "b")};
}

inline RegressionWeights load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open weights file '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kParse, "weights file '" + path + "' is not valid JSON");
  // A saved FitReport is accepted as well as a bare weights object.
  if (j.is_object() && j.contains("weights")) return weights_from_json(j.at("weights"));
  return weights_from_json(j);
}

inline json to_json(const PredictionResult& p) {
  json j{{"raw", p.raw_score},
         {"adjusted", p.adjusted_score},
         {"effective_tokens", p.effective_tokens},
         {"discount", p.discount},
         {"token_clipped", p.token_clipped}};
  j["expansion_factor"] = p.expansion_factor ? json(*p.expansion_factor) : json(nullptr);
  j["mmlu_pro"] = p.adjusted_score > 70.0 ? json(mmlu_to_mmlu_pro(p.adjusted_score)) : json(nullptr);
  return j;
}

// {"layers","hidden","ffn","size","gamma"?}
inline DenseArch dense_from_json(const json& j) {
  return DenseArch{detail::integer(j, "layers"), detail::integer(j, "hidden"),
                   detail::integer(j, "ffn"), detail::number(j, "size"),
                   detail::number_or(j, "gamma", 1.0)};
}

// Dense fields plus "act" and optional "expert_ffn" (defaults to "ffn").
inline MoeArch moe_from_json(const json& j) {
  const auto ffn = detail::integer(j, "ffn");
  return MoeArch{detail::integer(j, "layers"),
                 detail::integer(j, "hidden"),
                 ffn,
                 detail::integer_or(j, "expert_ffn", ffn),
                 detail::number(j, "size"),
                 detail::number(j, "act"),
                 detail::number_or(j, "gamma", 1.0)};
}

inline json to_json(const DenseArch& a) {
  return json{{"layers", a.n_layers}, {"hidden", a.hidden_size}, {"ffn", a.ffn_size},
              {"size", a.param_count}, {"gamma", a.gamma}};
}

inline json to_json(const FitReport& r) {
  return json{{"weights", to_json(r.weights)}, {"residuals", r.residuals}, {"mae", r.mae},
              {"pearson_r", r.pearson_r},     {"pseudo_inverse", r.pseudo_inverse},
              {"warnings", r.warnings}};
}

inline json to_json(const GammaEstimate& g) {
  json j{{"feasible", g.feasible}, {"score_at_zero", g.score_at_zero}};
  j["gamma"] = g.gamma ? json(*g.gamma) : json(nullptr);
  j["unhealthy"] = is_unhealthy(g);
  return j;
}

inline json to_json(const ModelRecord& r) {
  json j{{"name", r.name},         {"kind", std::string(kind_name(r.kind))},
         {"layers", r.n_layers},   {"hidden", r.hidden_size},
         {"ffn", r.ffn_size},      {"tokens_T", r.tokens},
         {"size_B", r.total_params}, {"mmlu", r.reported_mmlu},
         {"guessed", r.guessed_config}};
  j["expert_ffn"] = r.expert_ffn_size ? json(*r.expert_ffn_size) : json(nullptr);
  j["act_B"] = r.active_params ? json(*r.active_params) : json(nullptr);
  return j;
}

/// Loads the JSON mirror of the dataset (an array of record objects).
inline std::vector<ModelRecord> records_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kSchema, "dataset JSON must be an array");
  std::vector<ModelRecord> out;
  std::size_t index = 0;
  for (const auto& item : j) {
    ++index;
    ModelRecord r;
    r.name = detail::string_field(item, "name");
    const auto kind = detail::string_field(item, "kind");
    if (kind != "dense" && kind != "moe")
      throw Error(ErrorCode::kParse, "record " + std::to_string(index) + ": bad kind '" + kind + "'");
    r.kind = kind == "moe" ? ModelKind::kMoe : ModelKind::kDense;
    r.n_layers = detail::integer(item, "layers");
    r.hidden_size = detail::integer(item, "hidden");
    r.ffn_size = detail::integer(item, "ffn");
    if (item.contains("expert_ffn") && !item["expert_ffn"].is_null())
      r.expert_ffn_size = detail::integer(item, "expert_ffn");
    r.tokens = detail::number(item, "tokens_T");
    r.total_params = detail::number(item, "size_B");
    if (item.contains("act_B") && !item["act_B"].is_null()) r.active_params = detail::number(item, "act_B");
    r.reported_mmlu = detail::number(item, "mmlu");
    r.guessed_config = item.value("guessed", false);
    detail::check_record(r, index);
    out.push_back(std::move(r));
  }
  if (out.empty()) throw Error(ErrorCode::kSchema, "dataset JSON has no records");
  return out;
}

inline json to_json(const ZooSummary& s) {
  return json{{"count", s.count}, {"mae", s.mae}, {"pearson_r", s.pearson_r}};
}

inline json to_json(const ZooReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back(json{{"name", r.name},
                        {"kind", std::string(kind_name(r.kind))},
                        {"reported", r.reported},
                        {"predicted", r.predicted},
                        {"raw", r.raw},
                        {"diff", r.diff},
                        {"guessed", r.guessed_config}});
  }
  return json{{"rows", std::move(rows)},
              {"summary",
               {{"all", to_json(report.all)},
                {"english_ex_llama1", to_json(report.english_ex_llama1)}}}};
}

inline json to_json(const std::vector<ScatterPoint>& points) {
  json out = json::array();
  for (const auto& p : points)
    out.push_back(json{{"name", p.name}, {"predicted", p.predicted}, {"reported", p.reported}, {"tags", p.tags}});
  return out;
}

inline json to_json(const std::vector<SweepPoint>& points) {
  json out = json::array();
  for (const auto& p : points) out.push_back(json{{"x", p.x}, {"raw", p.raw}, {"adjusted", p.adjusted}});
  return out;
}

inline json to_json(const SearchResult& r) {
  json ranked = json::array();
  for (const auto& c : r.ranked) {
    json item{{"layers", c.n_layers}, {"hidden", c.hidden_size}, {"ffn", c.ffn_size},
              {"params", c.params},   {"raw", c.prediction.raw_score},
              {"adjusted", c.prediction.adjusted_score}};
    item["act"] = c.active_params ? json(*c.active_params) : json(nullptr);
    ranked.push_back(std::move(item));
  }
  return json{{"feasible", r.feasible}, {"evaluated", r.evaluated}, {"results", std::move(ranked)}};
}

inline json to_json(const ExpansionResult& r) {
  json j = to_json(r.prediction);
  j["ratio"] = r.ratio;
  j["effective_layers"] = r.n_layers;
  j["effective_hidden"] = r.hidden;
  j["effective_ffn"] = r.ffn;
  return j;
}

inline json to_json(const SplitOptimum& s) {
  json curve = json::array();
  for (const auto& p : s.curve)
    curve.push_back(json{{"small_tokens", p.small_tokens}, {"large_tokens", p.large_tokens}, {"score", p.score}});
  return json{{"best",
               {{"small_tokens", s.best.small_tokens},
                {"large_tokens", s.best.large_tokens},
                {"score", s.best.score},
                {"index", s.best_index}}},
              {"curve", std::move(curve)}};
}

// Integer range: {"min","max","step"?}
inline IntRange range_from_json(const json& j, std::string_view key, std::int64_t default_step) {
  const auto& r = detail::require_field(j, key);
  return IntRange{detail::integer(r, "min"), detail::integer(r, "max"),
                  detail::integer_or(r, "step", default_step)};
}

inline FitSample sample_from_json(const json& j) {
  if (j.contains("features")) {
    const auto& f = j.at("features");
    if (!f.is_array() || f.size() != 4) throw Error(ErrorCode::kSchema, "'features' must be an array of 4 numbers");
    FitSample s;
    for (std::size_t i = 0; i < 4; ++i) s.features[i] = detail::as_number(f[i], "features");
    s.target = detail::number(j, "target");
    s.weight = detail::number_or(j, "weight", 1.0);
    detail::require(s.weight > 0.0, ErrorCode::kInvalidInput, "sample weight must be positive");
    return s;
  }
  // Architecture form: dense or moe fields plus "tokens" and "observed".
  const TrainingSpec train{detail::number(j, "tokens")};
  const double observed = detail::number(j, "observed");
  const double weight = detail::number_or(j, "weight", 1.0);
  if (j.contains("act")) return build_sample(moe_from_json(j), train, observed, weight);
  return build_sample(dense_from_json(j), train, observed, weight);
}

}  // namespace perflaw
