#pragma once

// Published-model dataset: loading, batch prediction and comparison reports.
//
// Canonical CSV schema (UTF-8, empty field = absent):
//   name,kind,layers,hidden,ffn,expert_ffn,tokens_T,size_B,act_B,mmlu,guessed

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "perflaw/calibration.hpp"
#include "perflaw/core.hpp"
#include "perflaw/format.hpp"

namespace perflaw {

enum class ModelKind { kDense, kMoe };

constexpr std::string_view kind_name(ModelKind kind) {
  return kind == ModelKind::kMoe ? "moe" : "dense";
}

struct ModelRecord {
  std::string name;
  ModelKind kind = ModelKind::kDense;
  std::int64_t n_layers = 0;
  std::int64_t hidden_size = 0;
  std::int64_t ffn_size = 0;
  std::optional<std::int64_t> expert_ffn_size;
  double tokens = 0.0;        // trillions
  double total_params = 0.0;  // billions
  std::optional<double> active_params;
  double reported_mmlu = 0.0;
  bool guessed_config = false;  // row contains values guessed by the table authors
};

inline constexpr std::string_view kZooHeader =
    "name,kind,layers,hidden,ffn,expert_ffn,tokens_T,size_B,act_B,mmlu,guessed";

struct ZooRow {
  std::string name;
  ModelKind kind = ModelKind::kDense;
  double reported = 0.0;
  double predicted = 0.0;  // adjusted score
  double raw = 0.0;
  double diff = 0.0;  // reported - predicted; positive means the model beat the law
  bool guessed_config = false;
};

struct ZooSummary {
  std::size_t count = 0;
  double mae = 0.0;
  double pearson_r = 0.0;
};

struct ZooReport {
  std::vector<ZooRow> rows;  // dataset order
  ZooSummary all;
  ZooSummary english_ex_llama1;
};

struct ScatterPoint {
  double predicted = 0.0;
  double reported = 0.0;
  std::string name;
  std::vector<std::string> tags;
};

// The first-generation Llama rows ("Llama 7B", ...), not Llama2/Llama3.x.
inline bool is_llama1(std::string_view name) { return name.starts_with("Llama "); }

// Families trained on Chinese-enhanced mixtures; everything else counts as English.
inline bool is_chinese_enhanced(std::string_view name) {
  constexpr std::string_view kFamilies[] = {"Qwen", "Yi", "GLM", "Deepseek",
                                            "DeepSeek", "DeekSeek", "Skywork"};
  return std::any_of(std::begin(kFamilies), std::end(kFamilies),
                     [&](std::string_view f) { return name.starts_with(f); });
}

inline std::vector<std::string> subset_tags(const ZooRow& row) {
  std::vector<std::string> tags;
  tags.emplace_back(kind_name(row.kind));
  tags.emplace_back(is_chinese_enhanced(row.name) ? "chinese" : "english");
  if (is_llama1(row.name)) tags.emplace_back("llama1");
  if (!is_chinese_enhanced(row.name) && !is_llama1(row.name)) tags.emplace_back("english-ex-llama1");
  if (row.guessed_config) tags.emplace_back("guessed");
  return tags;
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (quoted) {
    throw Error(ErrorCode::kParse, "row " + std::to_string(line_no) + ": unterminated quote");
  }
  fields.push_back(std::move(current));
  return fields;
}

inline std::string field_error(std::size_t line_no, std::string_view field, std::string_view what) {
  return "row " + std::to_string(line_no) + ", field '" + std::string(field) + "': " +
         std::string(what);
}

template <typename T>
std::optional<T> parse_optional(const std::string& text, std::size_t line_no,
                                std::string_view field) {
  if (text.empty()) return std::nullopt;
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw Error(ErrorCode::kParse, field_error(line_no, field, "cannot parse '" + text + "'"));
  }
  return value;
}

template <typename T>
T parse_required(const std::string& text, std::size_t line_no, std::string_view field) {
  auto value = parse_optional<T>(text, line_no, field);
  if (!value) throw Error(ErrorCode::kSchema, field_error(line_no, field, "missing required value"));
  return *value;
}

inline void check_record(const ModelRecord& r, std::size_t line_no) {
  auto fail = [&](std::string_view field, std::string_view what) {
    throw Error(ErrorCode::kInvalidInput, field_error(line_no, field, what));
  };
  if (r.name.empty()) fail("name", "must not be empty");
  if (r.n_layers < 1) fail("layers", "must be >= 1");
  if (r.hidden_size < 1) fail("hidden", "must be >= 1");
  if (r.ffn_size < 1) fail("ffn", "must be >= 1");
  if (r.expert_ffn_size && *r.expert_ffn_size < 1) fail("expert_ffn", "must be >= 1");
  if (!(r.tokens > 0.0)) fail("tokens_T", "must be > 0");
  if (!(r.total_params > 0.0)) fail("size_B", "must be > 0");
  if (!(r.reported_mmlu > 0.0 && r.reported_mmlu < 100.0)) fail("mmlu", "must lie in (0, 100)");
  if (r.kind == ModelKind::kMoe) {
    if (!r.active_params) fail("act_B", "required for moe rows");
    if (!(*r.active_params > 0.0 && *r.active_params <= r.total_params))
      fail("act_B", "must lie in (0, size_B]");
  } else {
    if (r.active_params) fail("act_B", "must be empty for dense rows");
    if (r.expert_ffn_size) fail("expert_ffn", "must be empty for dense rows");
  }
}

}  // namespace detail

inline std::vector<ModelRecord> parse_zoo_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line()) throw Error(ErrorCode::kSchema, "dataset is empty (missing header)");
  if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  if (line != kZooHeader) {
    throw Error(ErrorCode::kSchema,
                "unexpected header '" + line + "', expected '" + std::string(kZooHeader) + "'");
  }

  std::vector<ModelRecord> records;
  while (next_line()) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line, line_no);
    if (f.size() != 11) {
      throw Error(ErrorCode::kSchema, "row " + std::to_string(line_no) + ": expected 11 fields, got " +
                                          std::to_string(f.size()));
    }
    ModelRecord r;
    r.name = f[0];
    if (f[1] == "dense") {
      r.kind = ModelKind::kDense;
    } else if (f[1] == "moe") {
      r.kind = ModelKind::kMoe;
    } else {
      throw Error(ErrorCode::kParse,
                  detail::field_error(line_no, "kind", "expected 'dense' or 'moe', got '" + f[1] + "'"));
    }
    r.n_layers = detail::parse_required<std::int64_t>(f[2], line_no, "layers");
    r.hidden_size = detail::parse_required<std::int64_t>(f[3], line_no, "hidden");
    r.ffn_size = detail::parse_required<std::int64_t>(f[4], line_no, "ffn");
    r.expert_ffn_size = detail::parse_optional<std::int64_t>(f[5], line_no, "expert_ffn");
    r.tokens = detail::parse_required<double>(f[6], line_no, "tokens_T");
    r.total_params = detail::parse_required<double>(f[7], line_no, "size_B");
    r.active_params = detail::parse_optional<double>(f[8], line_no, "act_B");
    r.reported_mmlu = detail::parse_required<double>(f[9], line_no, "mmlu");
    if (f[10] == "1" || f[10] == "true") {
      r.guessed_config = true;
    } else if (f[10] == "0" || f[10] == "false" || f[10].empty()) {
      r.guessed_config = false;
    } else {
      throw Error(ErrorCode::kParse, detail::field_error(line_no, "guessed", "expected 0 or 1"));
    }
    detail::check_record(r, line_no);
    records.push_back(std::move(r));
  }
  if (records.empty()) throw Error(ErrorCode::kSchema, "dataset has a header but no rows");
  return records;
}

inline std::vector<ModelRecord> load_zoo(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dataset '" + path + "'");
  return parse_zoo_csv(in);
}

inline PredictionResult predict_record(const ModelRecord& r, const RegressionWeights& weights) {
  const TrainingSpec train{r.tokens};
  if (r.kind == ModelKind::kMoe) {
    MoeArch moe{r.n_layers,          r.hidden_size,     r.ffn_size,
                r.expert_ffn_size.value_or(r.ffn_size), r.total_params, r.active_params.value_or(0.0)};
    return predict_moe(moe, train, weights);
  }
  return predict_dense(DenseArch{r.n_layers, r.hidden_size, r.ffn_size, r.total_params}, train,
                       weights);
}

namespace detail {

template <typename Pred>
ZooSummary summarize(const std::vector<ZooRow>& rows, Pred include) {
  std::vector<double> predicted, reported;
  double abs_sum = 0.0;
  for (const auto& row : rows) {
    if (!include(row)) continue;
    predicted.push_back(row.predicted);
    reported.push_back(row.reported);
    abs_sum += std::abs(row.diff);
  }
  ZooSummary s;
  s.count = predicted.size();
  if (s.count == 0) return s;
  s.mae = abs_sum / static_cast<double>(s.count);
  s.pearson_r = pearson(predicted, reported);
  return s;
}

}  // namespace detail

inline ZooReport evaluate_zoo(const std::vector<ModelRecord>& records,
                              const RegressionWeights& weights) {
  ZooReport report;
  report.rows.reserve(records.size());
  for (const auto& r : records) {
    const auto p = predict_record(r, weights);
    report.rows.push_back(ZooRow{r.name, r.kind, r.reported_mmlu, p.adjusted_score, p.raw_score,
                                 r.reported_mmlu - p.adjusted_score, r.guessed_config});
  }
  report.all = detail::summarize(report.rows, [](const ZooRow&) { return true; });
  report.english_ex_llama1 = detail::summarize(report.rows, [](const ZooRow& row) {
    return !is_chinese_enhanced(row.name) && !is_llama1(row.name);
  });
  return report;
}

/// Scatter points for plotting, sorted by name. `subset` is "all" or one of
/// the tags produced by subset_tags (e.g. "english-ex-llama1", "moe").
inline std::vector<ScatterPoint> export_scatter(const ZooReport& report,
                                                std::string_view subset = "all") {
  detail::require(!report.rows.empty(), ErrorCode::kPrecondition, "cannot export an empty report");
  std::vector<ScatterPoint> points;
  for (const auto& row : report.rows) {
    auto tags = subset_tags(row);
    if (subset != "all" && std::find(tags.begin(), tags.end(), subset) == tags.end()) continue;
    points.push_back(ScatterPoint{row.predicted, row.reported, row.name, std::move(tags)});
  }
  std::stable_sort(points.begin(), points.end(),
                   [](const ScatterPoint& a, const ScatterPoint& b) { return a.name < b.name; });
  return points;
}

namespace detail {

inline std::string csv_escape(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace detail

// name,kind,reported,predicted,raw,diff,guessed
inline void write_report_csv(std::ostream& out, const ZooReport& report) {
  out << "name,kind,reported,predicted,raw,diff,guessed\n";
  for (const auto& row : report.rows) {
    out << detail::csv_escape(row.name) << ',' << kind_name(row.kind) << ','
        << format_exact(row.reported) << ',' << format_exact(row.predicted) << ','
        << format_exact(row.raw) << ',' << format_exact(row.diff) << ','
        << (row.guessed_config ? 1 : 0) << '\n';
  }
}

// name,predicted,reported,tags  (tags joined with ';')
inline void write_scatter_csv(std::ostream& out, const std::vector<ScatterPoint>& points) {
  out << "name,predicted,reported,tags\n";
  for (const auto& p : points) {
    std::string tags;
    for (const auto& t : p.tags) {
      if (!tags.empty()) tags += ';';
      tags += t;
    }
    out << detail::csv_escape(p.name) << ',' << format_exact(p.predicted) << ','
        << format_exact(p.reported) << ',' << tags << '\n';
  }
}

}  // namespace perflaw
