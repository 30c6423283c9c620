#pragma once

// Stateless JSON-over-HTTP facade. Every response is an envelope:
//   {"ok": true,  "result": {...}}
//   {"ok": false, "error": {"code": "...", "message": "..."}}
// Routing lives in Service::handle so it can be exercised without sockets;
// serve() binds it to cpp-httplib.

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>

// Must precede httplib.h: <resolv.h> defines a `_res` macro that collides
// with parameter names inside Eigen.
#include "perflaw/json_io.hpp"

#include <httplib.h>

namespace perflaw {

struct Snapshot {
  RegressionWeights weights;
  std::vector<ModelRecord> zoo;
};

struct HttpResponse {
  int status = 200;
  std::string body;
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse:
    case ErrorCode::kSchema:
      return 400;
    case ErrorCode::kIo:
      return 500;
    default:
      return 422;
  }
}

class Service {
 public:
  explicit Service(Snapshot snapshot)
      : snapshot_(std::move(snapshot)),
        zoo_report_(to_json(evaluate_zoo(snapshot_.zoo, snapshot_.weights))) {
    post_["/v1/predict/dense"] = [this](const json& b) { return predict_dense_route(b); };
    post_["/v1/predict/moe"] = [this](const json& b) { return predict_moe_route(b); };
    post_["/v1/sweep"] = [this](const json& b) { return sweep_route(b); };
    post_["/v1/search"] = [this](const json& b) { return search_route(b); };
    post_["/v1/expand/predict"] = [this](const json& b) { return expand_predict_route(b); };
    post_["/v1/expand/optimize"] = [this](const json& b) { return expand_optimize_route(b); };
    post_["/v1/fit"] = [](const json& b) { return fit_route(b); };
    post_["/v1/gamma/infer"] = [this](const json& b) { return gamma_route(b); };
    post_["/v1/contamination"] = [](const json& b) { return contamination_route(b); };

    get_["/v1/zoo"] = [this] {
      json records = json::array();
      for (const auto& r : snapshot_.zoo) records.push_back(to_json(r));
      return json{{"count", snapshot_.zoo.size()}, {"records", std::move(records)}};
    };
    get_["/v1/zoo/report"] = [this] { return zoo_report_; };
    get_["/v1/weights"] = [this] { return to_json(snapshot_.weights); };
    get_["/healthz"] = [] { return json{{"status", "ok"}}; };
  }

  HttpResponse handle(std::string_view method, std::string_view path, std::string_view body) const {
    const std::string key(path);
    try {
      if (method == "GET") {
        if (auto it = get_.find(key); it != get_.end()) return ok(it->second());
      } else if (method == "POST") {
        if (auto it = post_.find(key); it != post_.end()) {
          json parsed = json::parse(body, nullptr, false);
          if (parsed.is_discarded()) return failure(400, "INVALID_JSON", "request body is not valid JSON");
          if (!parsed.is_object()) return failure(400, "SCHEMA_ERROR", "request body must be a JSON object");
          return ok(it->second(parsed));
        }
      }
      if (get_.count(key) || post_.count(key))
        return failure(405, "METHOD_NOT_ALLOWED", std::string(method) + " not allowed on " + key);
      return failure(404, "NOT_FOUND", "no route for " + key);
    } catch (const Error& e) {
      return failure(http_status(e.code()), std::string(e.code_name()), e.what());
    } catch (const json::exception& e) {
      return failure(400, "SCHEMA_ERROR", e.what());
    } catch (const std::exception& e) {
      return failure(500, "INTERNAL", e.what());
    }
  }

  const Snapshot& snapshot() const { return snapshot_; }

 private:
  static HttpResponse ok(json result) {
    return {200, json{{"ok", true}, {"result", std::move(result)}}.dump()};
  }

  static HttpResponse failure(int status, const std::string& code, const std::string& message) {
    return {status, json{{"ok", false}, {"error", {{"code", code}, {"message", message}}}}.dump()};
  }

  json predict_dense_route(const json& b) const {
    return to_json(predict_dense(dense_from_json(b), TrainingSpec{detail::number(b, "tokens")},
                                 snapshot_.weights));
  }

  json predict_moe_route(const json& b) const {
    return to_json(predict_moe(moe_from_json(b), TrainingSpec{detail::number(b, "tokens")},
                               snapshot_.weights));
  }

  // {"variable","min","max","steps","arch":{... , "tokens"}}; MoE when "act" is present.
  json sweep_route(const json& b) const {
    const auto variable = parse_sweep_variable(detail::string_field(b, "variable"));
    if (!variable) throw Error(ErrorCode::kSchema, "variable must be gamma, tokens or n_layers");
    const auto& arch = detail::require_field(b, "arch");
    SweepSpec spec;
    spec.variable = *variable;
    spec.min = detail::number(b, "min");
    spec.max = detail::number(b, "max");
    spec.steps = static_cast<int>(detail::integer(b, "steps"));
    spec.train = TrainingSpec{detail::number(arch, "tokens")};
    if (arch.contains("act")) {
      spec.arch = moe_from_json(arch);
    } else {
      spec.arch = dense_from_json(arch);
    }
    return json{{"variable", std::string(variable_name(*variable))}, {"points", to_json(sweep(spec, snapshot_.weights))}};
  }

  json search_route(const json& b) const {
    SearchConstraints c;
    c.max_params = detail::number(b, "max_params");
    c.token_budget = detail::number(b, "tokens");
    c.gamma = detail::number_or(b, "gamma", 1.0);
    c.layers = range_from_json(b, "layers", 1);
    c.hidden = range_from_json(b, "hidden", 128);
    c.ffn = range_from_json(b, "ffn", 128);
    c.vocab_size = detail::integer_or(b, "vocab_size", 128000);
    if (b.contains("moe") && !b["moe"].is_null()) {
      const auto& m = b["moe"];
      c.moe_activation = RatioRange{detail::number(m, "min"), detail::number(m, "max"),
                                    static_cast<int>(detail::integer_or(m, "steps", 1))};
    }
    const auto top_k = detail::integer_or(b, "top_k", 10);
    if (top_k < 1) throw Error(ErrorCode::kInvalidInput, "top_k must be >= 1");
    return to_json(search_architectures(c, snapshot_.weights, static_cast<std::size_t>(top_k)));
  }

  json expand_predict_route(const json& b) const {
    const auto& small = detail::require_field(b, "small");
    const auto& large = detail::require_field(b, "large");
    ExpansionPlan plan{dense_from_json(small), detail::number(small, "tokens"),
                       dense_from_json(large), detail::number(large, "tokens"),
                       detail::number_or(b, "recovery_scale", 0.1)};
    return to_json(predict_expanded(plan, snapshot_.weights));
  }

  json expand_optimize_route(const json& b) const {
    const auto grid = detail::integer_or(b, "grid", 41);
    return to_json(optimize_expansion_split(
        dense_from_json(detail::require_field(b, "small")),
        dense_from_json(detail::require_field(b, "large")), detail::number(b, "total_tokens"),
        snapshot_.weights, static_cast<int>(grid), detail::number_or(b, "recovery_scale", 0.1)));
  }

  static json fit_route(const json& b) {
    const auto& items = detail::require_field(b, "samples");
    if (!items.is_array()) throw Error(ErrorCode::kSchema, "'samples' must be an array");
    std::vector<FitSample> samples;
    for (const auto& item : items) samples.push_back(sample_from_json(item));
    return to_json(fit(samples));
  }

  // Single observation: dense fields + "tokens" + "observed".
  // Training curve: dense fields + "observations": [{"tokens","observed"}, ...].
  json gamma_route(const json& b) const {
    const auto arch = dense_from_json(b);
    if (b.contains("observations")) {
      const auto& obs = b["observations"];
      if (!obs.is_array()) throw Error(ErrorCode::kSchema, "'observations' must be an array");
      std::vector<double> tokens, scores;
      for (const auto& o : obs) {
        tokens.push_back(detail::number(o, "tokens"));
        scores.push_back(detail::number(o, "observed"));
      }
      return to_json(infer_gamma_curve(arch, tokens, scores, snapshot_.weights));
    }
    return to_json(infer_gamma(arch, TrainingSpec{detail::number(b, "tokens")}, snapshot_.weights,
                               detail::number(b, "observed")));
  }

  static json contamination_route(const json& b) {
    const double predicted = detail::number(b, "predicted");
    const double observed = detail::number(b, "observed");
    const double threshold = detail::number_or(b, "threshold", 10.0);
    return json{{"flag", std::string(flag_name(contamination_check(predicted, observed, threshold)))},
                {"residual", observed - predicted}};
  }

  Snapshot snapshot_;
  json zoo_report_;
  std::map<std::string, std::function<json(const json&)>, std::less<>> post_;
  std::map<std::string, std::function<json()>, std::less<>> get_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin;  // empty disables CORS headers
};

inline void attach_routes(httplib::Server& server, const Service& service,
                          const std::string& cors_origin) {
  auto forward = [&service, cors_origin](const httplib::Request& req, httplib::Response& res) {
    const auto r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    if (!cors_origin.empty()) res.set_header("Access-Control-Allow-Origin", cors_origin);
    res.set_content(r.body, "application/json");
  };
  server.Get(R"(/.*)", forward);
  server.Post(R"(/.*)", forward);
  if (!cors_origin.empty()) {
    server.Options(R"(/.*)", [cors_origin](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", cors_origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
  }
}

/// Blocks until the server stops. Throws on bind failure.
inline void serve(const ServeOptions& options, const Service& service) {
  httplib::Server server;
  attach_routes(server, service, options.cors_origin);
  if (!server.bind_to_port(options.host, options.port)) {
    throw Error(ErrorCode::kIo,
                "cannot bind " + options.host + ":" + std::to_string(options.port));
  }
  server.listen_after_bind();
}

}  // namespace perflaw
