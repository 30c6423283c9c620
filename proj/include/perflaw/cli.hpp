#pragma once

// Command-line front end. run() is the whole program so tests can drive it
// with string streams; tools/perflaw.cpp only forwards argv.
//
// Exit codes: 0 success, 1 computation/domain error, 2 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "perflaw/json_io.hpp"
#include "perflaw/service.hpp"

#ifndef PERFLAW_DEFAULT_DATASET
#define PERFLAW_DEFAULT_DATASET "data/table1.csv"
#endif

namespace perflaw::cli {

enum class OutputFormat { kTable, kCsv, kJson };

struct CliConfig {
  std::string weights_file;  // empty = published defaults
  std::string dataset = PERFLAW_DEFAULT_DATASET;
  OutputFormat format = OutputFormat::kTable;
  int verbosity = 0;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

inline std::int64_t to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("invalid integer '" + s + "' in " + what);
  }
}

inline double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const auto v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("invalid number '" + s + "' in " + what);
  }
}

// MIN:MAX[:STEP]
inline IntRange parse_int_range(const std::string& text, std::int64_t default_step,
                                const std::string& what) {
  const auto parts = split(text, ':');
  if (parts.size() < 2 || parts.size() > 3) throw UsageError(what + " expects MIN:MAX[:STEP]");
  return IntRange{to_int(parts[0], what), to_int(parts[1], what),
                  parts.size() == 3 ? to_int(parts[2], what) : default_step};
}

// MIN:MAX[:STEPS]
inline RatioRange parse_ratio_range(const std::string& text, const std::string& what) {
  const auto parts = split(text, ':');
  if (parts.size() < 2 || parts.size() > 3) throw UsageError(what + " expects MIN:MAX[:STEPS]");
  return RatioRange{to_double(parts[0], what), to_double(parts[1], what),
                    parts.size() == 3 ? static_cast<int>(to_int(parts[2], what)) : 1};
}

// LAYERS,HIDDEN,FFN,SIZE
inline DenseArch parse_shape(const std::string& text, double gamma, const std::string& what) {
  const auto parts = split(text, ',');
  if (parts.size() != 4) throw UsageError(what + " expects LAYERS,HIDDEN,FFN,SIZE_B");
  return DenseArch{to_int(parts[0], what), to_int(parts[1], what), to_int(parts[2], what),
                   to_double(parts[3], what), gamma};
}

// Plain column table; the first column is left aligned, the rest right aligned.
inline void print_table(std::ostream& out, const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
      } else {
        out << "  " << std::right << std::setw(static_cast<int>(width[c])) << cells[c];
      }
    }
    out << std::left << '\n';
  };
  line(header);
  for (const auto& row : rows) line(row);
}

inline std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline std::string fixed9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", v);
  return buf;
}

inline std::vector<ModelRecord> load_dataset(const std::string& path) {
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open dataset '" + path + "'");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::kParse, "dataset '" + path + "' is not valid JSON");
    return records_from_json(j);
  }
  return load_zoo(path);
}

inline void print_prediction(std::ostream& out, OutputFormat format, const PredictionResult& p,
                             std::optional<double> ratio = std::nullopt) {
  switch (format) {
    case OutputFormat::kJson: {
      json j = to_json(p);
      if (ratio) j["ratio"] = *ratio;
      out << j.dump(2) << '\n';
      return;
    }
    case OutputFormat::kCsv:
      out << "raw,adjusted,effective_tokens,discount,expansion_factor,token_clipped"
          << (ratio ? ",ratio" : "") << '\n';
      out << format_exact(p.raw_score) << ',' << format_exact(p.adjusted_score) << ','
          << format_exact(p.effective_tokens) << ',' << format_exact(p.discount) << ','
          << (p.expansion_factor ? format_exact(*p.expansion_factor) : "") << ','
          << (p.token_clipped ? 1 : 0);
      if (ratio) out << ',' << format_exact(*ratio);
      out << '\n';
      return;
    case OutputFormat::kTable:
      // A single prediction is shown at 9 decimals; tabular listings use 2.
      out << "score            " << fixed9(p.adjusted_score) << '\n';
      if (p.adjusted_score != p.raw_score) out << "raw score        " << fixed9(p.raw_score) << '\n';
      out << "effective tokens " << format_exact(p.effective_tokens) << (p.token_clipped ? " (clipped)" : "") << '\n';
      out << "discount         " << fixed9(p.discount) << '\n';
      if (p.expansion_factor) out << "expansion factor " << fixed9(*p.expansion_factor) << '\n';
      if (ratio) out << "expansion ratio  " << fixed9(*ratio) << '\n';
      if (p.adjusted_score > 70.0) out << "MMLU-Pro (est.)  " << format_2dp(mmlu_to_mmlu_pro(p.adjusted_score)) << '\n';
      return;
  }
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed-form LLM MMLU predictor and planning toolkit", "perflaw"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  CliConfig config;
  std::string format_text = "table";
  app.add_option("--weights", config.weights_file,
                 "Weights JSON file (overrides PERFLAW_WEIGHTS; defaults to the published coefficients)");
  app.add_option("--format", format_text, "Output format")
      ->check(CLI::IsMember({"table", "csv", "json"}));
  app.add_flag("-v,--verbose", config.verbosity, "Increase verbosity");

  // Shared architecture flags.
  struct ArchFlags {
    std::int64_t layers = 0, hidden = 0, ffn = 0;
    std::int64_t expert_ffn = 0;
    double size = 0.0, act = 0.0, tokens = 0.0, gamma = 1.0;
  };

  auto add_dense_flags = [](CLI::App* sub, ArchFlags& f, bool tokens_required) {
    sub->add_option("--layers", f.layers, "Number of layers N")->required();
    sub->add_option("--hidden", f.hidden, "Hidden size h")->required();
    sub->add_option("--ffn", f.ffn, "FFN intermediate size d")->required();
    sub->add_option("--size", f.size, "Parameter count S in billions")->required();
    auto* tokens = sub->add_option("--tokens", f.tokens, "Training tokens T in trillions");
    if (tokens_required) tokens->required();
    sub->add_option("--gamma", f.gamma, "Precision coefficient")->capture_default_str();
  };

  // predict dense|moe
  auto* predict = app.add_subcommand("predict", "Predict an MMLU score");
  predict->require_subcommand(1);
  ArchFlags dense_flags, moe_flags;
  auto* predict_dense_cmd = predict->add_subcommand("dense", "Dense Transformer");
  add_dense_flags(predict_dense_cmd, dense_flags, true);
  auto* predict_moe_cmd = predict->add_subcommand("moe", "Mixture-of-experts Transformer");
  add_dense_flags(predict_moe_cmd, moe_flags, true);
  predict_moe_cmd->add_option("--act", moe_flags.act, "Activated parameters A in billions")->required();
  predict_moe_cmd->add_option("--expert-ffn", moe_flags.expert_ffn,
                              "Widest activated expert FFN d' (defaults to --ffn)");

  // zoo eval|scatter
  auto* zoo = app.add_subcommand("zoo", "Evaluate the published-model dataset");
  zoo->require_subcommand(1);
  auto* zoo_eval = zoo->add_subcommand("eval", "Predict every model and compare with reported MMLU");
  zoo_eval->add_option("--data", config.dataset, "Dataset CSV (or .json mirror)")->capture_default_str();
  auto* zoo_scatter = zoo->add_subcommand("scatter", "Export (predicted, reported) points");
  std::string subset = "all";
  zoo_scatter->add_option("--data", config.dataset, "Dataset CSV (or .json mirror)")->capture_default_str();
  zoo_scatter->add_option("--subset", subset, "all | english-ex-llama1 | english | chinese | moe | dense | guessed")
      ->capture_default_str();

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit regression weights by weighted least squares");
  std::string samples_file;
  std::vector<std::string> upsample;
  std::string fit_out;
  auto* fit_data = fit_cmd->add_option("--data", config.dataset, "Dataset CSV used as observations");
  auto* fit_samples = fit_cmd->add_option("--samples", samples_file, "JSON file {\"samples\": [...]}");
  fit_data->excludes(fit_samples);
  fit_cmd->add_option("--upsample", upsample, "NAME=WEIGHT sample weight for a dataset row (repeatable)");
  fit_cmd->add_option("--out", fit_out, "Write the fit report JSON (usable as --weights)");

  // gamma infer
  auto* gamma_cmd = app.add_subcommand("gamma", "Precision coefficient inference");
  gamma_cmd->require_subcommand(1);
  auto* gamma_infer = gamma_cmd->add_subcommand("infer", "Infer gamma from an observed score");
  ArchFlags gamma_flags;
  double observed = 0.0;
  double unhealthy_above = kHealthyGammaLimit;
  add_dense_flags(gamma_infer, gamma_flags, true);
  gamma_infer->add_option("--observed", observed, "Observed MMLU score")->required();
  gamma_infer->add_option("--unhealthy-above", unhealthy_above, "Gamma above which the run is flagged")
      ->capture_default_str();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a series over gamma, tokens or layers");
  ArchFlags sweep_flags;
  std::string variable;
  double sweep_min = 0.0, sweep_max = 0.0;
  int steps = 0;
  add_dense_flags(sweep_cmd, sweep_flags, false);
  sweep_cmd->add_option("--act", sweep_flags.act, "Activated parameters (switches to MoE)");
  sweep_cmd->add_option("--expert-ffn", sweep_flags.expert_ffn, "Expert FFN width (MoE)");
  sweep_cmd->add_option("--variable", variable, "gamma | tokens | n_layers")
      ->required()
      ->check(CLI::IsMember({"gamma", "tokens", "n_layers", "layers"}));
  sweep_cmd->add_option("--min", sweep_min, "Range start")->required();
  sweep_cmd->add_option("--max", sweep_max, "Range end")->required();
  sweep_cmd->add_option("--steps", steps, "Number of evenly spaced points (>= 2)")->required();

  // search
  auto* search_cmd = app.add_subcommand("search", "Exhaustive architecture search under a size budget");
  double max_params = 0.0, search_tokens = 0.0, search_gamma = 1.0;
  std::string layers_range, hidden_range, ffn_range, moe_ratio;
  std::int64_t vocab = 128000;
  std::size_t top_k = 10;
  unsigned threads = 0;
  search_cmd->add_option("--max-params", max_params, "Budget in billions of parameters")->required();
  search_cmd->add_option("--tokens", search_tokens, "Training tokens in trillions")->required();
  search_cmd->add_option("--gamma", search_gamma, "Precision coefficient")->capture_default_str();
  search_cmd->add_option("--layers", layers_range, "MIN:MAX[:STEP] (step default 1)")->required();
  search_cmd->add_option("--hidden", hidden_range, "MIN:MAX[:STEP] (step default 128)")->required();
  search_cmd->add_option("--ffn", ffn_range, "MIN:MAX[:STEP] (step default 128)")->required();
  search_cmd->add_option("--vocab", vocab, "Vocabulary size for the parameter estimate")->capture_default_str();
  search_cmd->add_option("--moe-ratio", moe_ratio, "Activation ratio MIN:MAX[:STEPS]; enables MoE candidates");
  search_cmd->add_option("--top-k", top_k, "Number of results")->capture_default_str();
  search_cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");

  // expand predict|optimize
  auto* expand = app.add_subcommand("expand", "Dense model expansion planning");
  expand->require_subcommand(1);
  std::string small_shape, large_shape;
  double t1 = 0.0, t2 = 0.0, total = 0.0, expand_gamma = 1.0, recovery = 0.1;
  int grid = 41;
  auto* expand_predict = expand->add_subcommand("predict", "Score after expanding small into large");
  expand_predict->add_option("--small", small_shape, "Small model LAYERS,HIDDEN,FFN,SIZE_B")->required();
  expand_predict->add_option("--large", large_shape, "Large model LAYERS,HIDDEN,FFN,SIZE_B")->required();
  expand_predict->add_option("--t1", t1, "Tokens (T) spent on the small model")->required();
  expand_predict->add_option("--t2", t2, "Tokens (T) spent after expansion")->required();
  expand_predict->add_option("--gamma", expand_gamma, "Precision coefficient")->capture_default_str();
  expand_predict->add_option("--recovery", recovery, "Recovery scale")->capture_default_str();
  auto* expand_optimize = expand->add_subcommand("optimize", "Best split of a token budget");
  expand_optimize->add_option("--small", small_shape, "Small model LAYERS,HIDDEN,FFN,SIZE_B")->required();
  expand_optimize->add_option("--large", large_shape, "Large model LAYERS,HIDDEN,FFN,SIZE_B")->required();
  expand_optimize->add_option("--total", total, "Total tokens (T)")->required();
  expand_optimize->add_option("--grid", grid, "Number of split points (>= 3)")->capture_default_str();
  expand_optimize->add_option("--gamma", expand_gamma, "Precision coefficient")->capture_default_str();
  expand_optimize->add_option("--recovery", recovery, "Recovery scale")->capture_default_str();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the JSON HTTP service");
  ServeOptions serve_options;
  serve_cmd->add_option("--host", serve_options.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", serve_options.port, "Port")->capture_default_str();
  serve_cmd->add_option("--data", config.dataset, "Dataset CSV (or .json mirror)")->capture_default_str();
  serve_cmd->add_option("--cors-origin", serve_options.cors_origin, "Allowed CORS origin (empty = off)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 2;
  }

  config.format = format_text == "json" ? OutputFormat::kJson
                  : format_text == "csv" ? OutputFormat::kCsv
                                         : OutputFormat::kTable;

  try {
    RegressionWeights weights;
    std::string weights_path = config.weights_file;
    if (weights_path.empty()) {
      if (const char* env = std::getenv("PERFLAW_WEIGHTS"); env && *env) weights_path = env;
    }
    if (!weights_path.empty()) weights = load_weights(weights_path);
    if (config.verbosity > 0) {
      err << "weights: " << (weights_path.empty() ? "published defaults" : weights_path) << " "
          << to_json(weights).dump() << '\n';
    }
    const auto fmt = config.format;

    if (predict_dense_cmd->parsed()) {
      const auto& f = dense_flags;
      detail::print_prediction(
          out, fmt, predict_dense(DenseArch{f.layers, f.hidden, f.ffn, f.size, f.gamma}, TrainingSpec{f.tokens}, weights));
      return 0;
    }
    if (predict_moe_cmd->parsed()) {
      const auto& f = moe_flags;
      const MoeArch moe{f.layers, f.hidden, f.ffn, f.expert_ffn > 0 ? f.expert_ffn : f.ffn, f.size, f.act, f.gamma};
      detail::print_prediction(out, fmt, predict_moe(moe, TrainingSpec{f.tokens}, weights));
      return 0;
    }

    if (zoo_eval->parsed()) {
      const auto report = evaluate_zoo(detail::load_dataset(config.dataset), weights);
      if (fmt == OutputFormat::kJson) {
        out << to_json(report).dump(2) << '\n';
      } else if (fmt == OutputFormat::kCsv) {
        write_report_csv(out, report);
      } else {
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : report.rows) {
          rows.push_back({r.name + (r.guessed_config ? " *" : ""), std::string(kind_name(r.kind)),
                          format_2dp(r.reported), format_2dp(r.predicted), format_2dp(r.diff)});
        }
        detail::print_table(out, {"Model", "Kind", "MMLU", "Prediction", "Diff"}, rows);
        out << "\n* row contains guessed configuration values\n";
        out << "all models:        n=" << report.all.count << "  MAE=" << format_2dp(report.all.mae)
            << "  r=" << detail::fixed4(report.all.pearson_r) << '\n';
        out << "english-ex-llama1: n=" << report.english_ex_llama1.count
            << "  MAE=" << format_2dp(report.english_ex_llama1.mae) << "  r="
            << detail::fixed4(report.english_ex_llama1.pearson_r) << '\n';
      }
      return 0;
    }
    if (zoo_scatter->parsed()) {
      const auto points =
          export_scatter(evaluate_zoo(detail::load_dataset(config.dataset), weights), subset);
      if (fmt == OutputFormat::kJson) {
        out << to_json(points).dump(2) << '\n';
      } else if (fmt == OutputFormat::kCsv) {
        write_scatter_csv(out, points);
      } else {
        std::vector<std::vector<std::string>> rows;
        for (const auto& p : points) {
          std::string tags;
          for (const auto& t : p.tags) tags += (tags.empty() ? "" : ";") + t;
          rows.push_back({p.name, format_2dp(p.predicted), format_2dp(p.reported), tags});
        }
        detail::print_table(out, {"Model", "Prediction", "MMLU", "Tags"}, rows);
      }
      return 0;
    }

    if (fit_cmd->parsed()) {
      std::vector<FitSample> samples;
      if (!samples_file.empty()) {
        std::ifstream in(samples_file);
        if (!in) throw Error(ErrorCode::kIo, "cannot open samples file '" + samples_file + "'");
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::kParse, "samples file is not valid JSON");
        const auto& items = perflaw::detail::require_field(j, "samples");
        for (const auto& item : items) samples.push_back(sample_from_json(item));
      } else {
        std::map<std::string, double> multipliers;
        for (const auto& u : upsample) {
          const auto eq = u.rfind('=');
          if (eq == std::string::npos) throw UsageError("--upsample expects NAME=WEIGHT");
          multipliers[u.substr(0, eq)] = detail::to_double(u.substr(eq + 1), "--upsample");
        }
        for (const auto& r : detail::load_dataset(config.dataset)) {
          const auto it = multipliers.find(r.name);
          const double w = it == multipliers.end() ? 1.0 : it->second;
          const TrainingSpec train{r.tokens};
          if (r.kind == ModelKind::kMoe) {
            samples.push_back(build_sample(MoeArch{r.n_layers, r.hidden_size, r.ffn_size,
                                                   r.expert_ffn_size.value_or(r.ffn_size),
                                                   r.total_params, *r.active_params},
                                           train, r.reported_mmlu, w));
          } else {
            samples.push_back(build_sample(DenseArch{r.n_layers, r.hidden_size, r.ffn_size, r.total_params},
                                           train, r.reported_mmlu, w));
          }
        }
      }
      const auto report = fit(samples);
      for (const auto& w : report.warnings) err << "warning: " << w << '\n';
      if (!fit_out.empty()) {
        std::ofstream file(fit_out);
        if (!file) throw Error(ErrorCode::kIo, "cannot write '" + fit_out + "'");
        file << to_json(report).dump(2) << '\n';
      }
      if (fmt == OutputFormat::kJson) {
        out << to_json(report).dump(2) << '\n';
      } else if (fmt == OutputFormat::kCsv) {
        out << "w1,w2,w3,w4,b,mae,pearson_r\n";
        const auto& w = report.weights;
        out << format_exact(w.w1) << ',' << format_exact(w.w2) << ',' << format_exact(w.w3) << ','
            << format_exact(w.w4) << ',' << format_exact(w.b) << ',' << format_exact(report.mae) << ','
            << format_exact(report.pearson_r) << '\n';
      } else {
        const auto& w = report.weights;
        out << "w1 " << format_exact(w.w1) << "\nw2 " << format_exact(w.w2) << "\nw3 "
            << format_exact(w.w3) << "\nw4 " << format_exact(w.w4) << "\nb  " << format_exact(w.b)
            << "\nsamples " << samples.size() << "  MAE " << format_2dp(report.mae) << "  r "
            << format_2dp(report.pearson_r) << '\n';
      }
      return 0;
    }

    if (gamma_infer->parsed()) {
      const auto& f = gamma_flags;
      const auto estimate = infer_gamma(DenseArch{f.layers, f.hidden, f.ffn, f.size, f.gamma},
                                        TrainingSpec{f.tokens}, weights, observed);
      if (!estimate.feasible) {
        throw Error(ErrorCode::kInfeasibleGamma,
                    "observed score " + format_exact(observed) +
                        " is above the gamma = 0 prediction " + format_exact(estimate.score_at_zero));
      }
      const bool unhealthy = is_unhealthy(estimate, unhealthy_above);
      if (fmt == OutputFormat::kJson) {
        json j = to_json(estimate);
        j["unhealthy"] = unhealthy;
        out << j.dump(2) << '\n';
      } else if (fmt == OutputFormat::kCsv) {
        out << "gamma,score_at_zero,unhealthy\n"
            << format_exact(*estimate.gamma) << ',' << format_exact(estimate.score_at_zero) << ','
            << (unhealthy ? 1 : 0) << '\n';
      } else {
        out << "gamma          " << detail::fixed9(*estimate.gamma) << '\n'
            << "score at gamma=0 " << format_2dp(estimate.score_at_zero) << '\n'
            << "status         " << (unhealthy ? "UNHEALTHY" : "healthy") << '\n';
      }
      return 0;
    }

    if (sweep_cmd->parsed()) {
      const auto& f = sweep_flags;
      SweepSpec spec;
      spec.variable = *parse_sweep_variable(variable);
      spec.min = sweep_min;
      spec.max = sweep_max;
      spec.steps = steps;
      // The swept variable overwrites tokens, so --tokens is only needed otherwise.
      spec.train = TrainingSpec{f.tokens > 0.0 ? f.tokens : 1.0};
      if (spec.variable != SweepVariable::kTokens && !(f.tokens > 0.0))
        throw UsageError("--tokens is required unless sweeping tokens");
      if (f.act > 0.0) {
        spec.arch = MoeArch{f.layers, f.hidden, f.ffn, f.expert_ffn > 0 ? f.expert_ffn : f.ffn, f.size, f.act, f.gamma};
      } else {
        spec.arch = DenseArch{f.layers, f.hidden, f.ffn, f.size, f.gamma};
      }
      const auto points = sweep(spec, weights);
      const std::string name(variable_name(spec.variable));
      if (fmt == OutputFormat::kJson) {
        out << json{{"variable", name}, {"points", to_json(points)}}.dump(2) << '\n';
      } else if (fmt == OutputFormat::kCsv) {
        out << name << ",raw,adjusted\n";
        for (const auto& p : points)
          out << format_exact(p.x) << ',' << format_exact(p.raw) << ',' << format_exact(p.adjusted) << '\n';
      } else {
        std::vector<std::vector<std::string>> rows;
        for (const auto& p : points) rows.push_back({format_exact(p.x), format_2dp(p.raw), format_2dp(p.adjusted)});
        detail::print_table(out, {name, "Raw", "Score"}, rows);
      }
      return 0;
    }

    if (search_cmd->parsed()) {
      SearchConstraints c;
      c.max_params = max_params;
      c.token_budget = search_tokens;
      c.gamma = search_gamma;
      c.layers = detail::parse_int_range(layers_range, 1, "--layers");
      c.hidden = detail::parse_int_range(hidden_range, 128, "--hidden");
      c.ffn = detail::parse_int_range(ffn_range, 128, "--ffn");
      c.vocab_size = vocab;
      if (!moe_ratio.empty()) c.moe_activation = detail::parse_ratio_range(moe_ratio, "--moe-ratio");
      const auto result = search_architectures(c, weights, top_k, threads);
      if (fmt == OutputFormat::kJson) {
        out << to_json(result).dump(2) << '\n';
      } else if (fmt == OutputFormat::kCsv) {
        out << "rank,layers,hidden,ffn,params,act,raw,adjusted\n";
        std::size_t rank = 0;
        for (const auto& r : result.ranked) {
          out << ++rank << ',' << r.n_layers << ',' << r.hidden_size << ',' << r.ffn_size << ','
              << format_exact(r.params) << ',' << (r.active_params ? format_exact(*r.active_params) : "")
              << ',' << format_exact(r.prediction.raw_score) << ','
              << format_exact(r.prediction.adjusted_score) << '\n';
        }
      } else if (!result.feasible) {
        out << "no architecture in the grid fits within " << format_exact(max_params) << "B parameters ("
            << result.evaluated << " candidates evaluated)\n";
      } else {
        std::vector<std::vector<std::string>> rows;
        std::size_t rank = 0;
        for (const auto& r : result.ranked) {
          rows.push_back({std::to_string(++rank), std::to_string(r.n_layers), std::to_string(r.hidden_size),
                          std::to_string(r.ffn_size), format_2dp(r.params),
                          r.active_params ? format_2dp(*r.active_params) : "-",
                          format_2dp(r.prediction.adjusted_score)});
        }
        detail::print_table(out, {"#", "Layers", "Hidden", "FFN", "Params/B", "Act/B", "Score"}, rows);
        out << result.evaluated << " candidates evaluated\n";
      }
      return 0;
    }

    if (expand_predict->parsed()) {
      ExpansionPlan plan{detail::parse_shape(small_shape, expand_gamma, "--small"), t1,
                         detail::parse_shape(large_shape, expand_gamma, "--large"), t2, recovery};
      const auto r = predict_expanded(plan, weights);
      if (fmt == OutputFormat::kJson) {
        out << to_json(r).dump(2) << '\n';
      } else {
        detail::print_prediction(out, fmt, r.prediction, r.ratio);
      }
      return 0;
    }
    if (expand_optimize->parsed()) {
      const auto r = optimize_expansion_split(detail::parse_shape(small_shape, expand_gamma, "--small"),
                                              detail::parse_shape(large_shape, expand_gamma, "--large"),
                                              total, weights, grid, recovery);
      if (fmt == OutputFormat::kJson) {
        out << to_json(r).dump(2) << '\n';
      } else if (fmt == OutputFormat::kCsv) {
        out << "small_tokens,large_tokens,score,best\n";
        for (std::size_t i = 0; i < r.curve.size(); ++i) {
          const auto& p = r.curve[i];
          out << format_exact(p.small_tokens) << ',' << format_exact(p.large_tokens) << ','
              << format_exact(p.score) << ',' << (i == r.best_index ? 1 : 0) << '\n';
        }
      } else {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < r.curve.size(); ++i) {
          const auto& p = r.curve[i];
          rows.push_back({format_2dp(p.small_tokens), format_2dp(p.large_tokens), format_2dp(p.score),
                          i == r.best_index ? "<- best" : ""});
        }
        detail::print_table(out, {"T1", "T2", "Score", ""}, rows);
      }
      return 0;
    }

    if (serve_cmd->parsed()) {
      Service service(Snapshot{weights, detail::load_dataset(config.dataset)});
      err << "listening on " << serve_options.host << ':' << serve_options.port << '\n';
      serve(serve_options, service);
      return 0;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.code_name() << ": " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    err << "error: SCHEMA_ERROR: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace perflaw::cli
