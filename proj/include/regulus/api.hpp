#pragma once

// JSON API over an analysis bundle. `ApiService::handle` is a pure
// request -> response function (apart from the derived-tree, reference and
// preset registries); `ApiServer` exposes it over HTTP.

#include <cstdlib>
#include <map>
#include <mutex>
#include <regex>
#include <shared_mutex>
#include <string>
#include <vector>

// Eigen must be parsed before httplib: resolv.h defines a `_res` macro that
// collides with Eigen parameter names.
#include "regulus/analysis.hpp"

#include <httplib.h>

namespace regulus {

inline constexpr int kDefaultPort = 8472;

struct ApiRequest {
  std::string method = "GET";
  std::string path;
  std::multimap<std::string, std::string> query;
  std::string body;

  /// Builds a request from a target such as "/api/tree?handle=orig".
  static ApiRequest from_target(std::string method, const std::string& target, std::string body = {}) {
    ApiRequest r;
    r.method = std::move(method);
    r.body = std::move(body);
    const auto q = target.find('?');
    r.path = target.substr(0, q);
    if (q != std::string::npos) httplib::detail::parse_query_text(target.substr(q + 1), r.query);
    return r;
  }

  [[nodiscard]] std::optional<std::string> param(const std::string& key) const {
    auto it = query.find(key);
    if (it == query.end()) return std::nullopt;
    return it->second;
  }
};

struct ApiResponse {
  int status = 200;
  json body;
};

class ApiService {
 public:
  explicit ApiService(AnalysisBundle& bundle) : bundle_(bundle) {}

  ApiResponse handle(const ApiRequest& req) {
    try {
      return route(req);
    } catch (const HttpError& e) {
      return {e.status, {{"error", e.what()}}};
    } catch (const Error& e) {
      return {400, {{"error", e.what()}}};
    } catch (const json::exception& e) {
      return {400, {{"error", std::string("malformed request: ") + e.what()}}};
    }
  }

 private:
  struct HttpError : Error {
    HttpError(int s, const std::string& msg) : Error(msg), status(s) {}
    int status;
  };

  ApiResponse route(const ApiRequest& req) {
    static const std::regex partition_re(R"(^/api/partition/(-?\d+)/(points|model|curve)$)");
    static const std::regex measure_re(R"(^/api/measure/([A-Za-z0-9_.\-]+)$)");
    const auto& p = req.path;
    std::smatch m;
    const bool get = req.method == "GET", post = req.method == "POST";

    if (p == "/api/dataset/meta" && get) return read([&] { return meta(); });
    if (p == "/api/tree" && get) return read([&] { return tree_json(req); });
    if (p == "/api/tree/layout" && get) return read([&] { return layout_json(req); });
    if (p == "/api/tree/cut" && get) return read([&] { return cut_json(req); });
    if (p == "/api/tree/reduce" && post) return write([&] { return reduce_json(req); });
    if (p == "/api/selection/validate" && post) return read([&] { return validate_json(req); });
    if (p == "/api/selection/step" && post) return read([&] { return step_json(req); });
    if (std::regex_match(p, m, measure_re) && get)
      return read([&] { return measure_json(req, m[1].str()); });
    if (p == "/api/reference" && post) return write([&] { return reference_json(req); });
    if (p == "/api/reference" && get)
      return read([&] { return json{{"reference", reference_value()}}; });
    if (std::regex_match(p, m, partition_re) && get) {
      const NodeId id = std::stoi(m[1].str());
      const std::string what = m[2].str();
      return read([&] {
        if (what == "points") return points_json(req, id);
        if (what == "model") return model_json(req, id);
        return curve_json(req, id);
      });
    }
    if (p == "/api/projection/presets" && get) return read([&] { return presets_json(); });
    if (p == "/api/projection/presets" && post) return write([&] { return add_preset(req); });
    if (p == "/api/projection/project" && post) return read([&] { return project_json(req); });
    if (p == "/api/projection/edges" && post) return read([&] { return edges_json(req); });
    throw HttpError(404, "no endpoint " + req.method + " " + p);
  }

  template <class F>
  ApiResponse read(F&& f) {
    std::shared_lock lock(mutex_);
    return {200, f()};
  }
  template <class F>
  ApiResponse write(F&& f) {
    std::unique_lock lock(mutex_);
    return {200, f()};
  }

  static json parse_body(const ApiRequest& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
  }

  std::string handle_of(const ApiRequest& req) const {
    auto h = req.param("handle").value_or(req.param("tree").value_or(kOriginalHandle));
    if (!bundle_.has_tree(h)) throw HttpError(404, "unknown tree handle '" + h + "'");
    return h;
  }

  static NodeId node_of(const RegulusTree& t, NodeId id) {
    if (!t.contains(id)) throw HttpError(404, "unknown node " + std::to_string(id));
    return id;
  }

  static double number_param(const ApiRequest& req, const std::string& key, double fallback) {
    auto v = req.param(key);
    if (!v) return fallback;
    char* end = nullptr;
    const double x = std::strtod(v->c_str(), &end);
    if (v->empty() || *end != '\0') throw Error("parameter '" + key + "' must be a number");
    return x;
  }

  json reference_value() const {
    return bundle_.reference() ? json(*bundle_.reference()) : json(nullptr);
  }

  json meta() const {
    const auto& ds = bundle_.dataset();
    return {{"n", ds.n()},
            {"d", ds.d()},
            {"dimNames", ds.dim_names},
            {"outputNames", ds.output_names},
            {"activeOutput", ds.output_names[ds.active_output]},
            {"rawMeans", ds.raw_means},
            {"rawScales", ds.raw_scales},
            {"hash", bundle_.hash()},
            {"handles", bundle_.handles()},
            {"measures", bundle_.store().measure_names()},
            {"settings", to_json(bundle_.settings())},
            {"reference", reference_value()}};
  }

  json tree_json(const ApiRequest& req) const {
    const auto h = handle_of(req);
    const auto& e = bundle_.entry(h);
    json out = to_json(*e.tree);
    out["handle"] = h;
    out["source"] = e.source.empty() ? json(nullptr) : json(e.source);
    return out;
  }

  json layout_json(const ApiRequest& req) const {
    const auto h = handle_of(req);
    return {{"handle", h}, {"rects", to_json(layout_tree(bundle_.tree(h)))}};
  }

  json cut_json(const ApiRequest& req) const {
    const auto h = handle_of(req);
    if (!req.param("p")) throw Error("missing parameter 'p'");
    const auto sel = cut_at_persistence(bundle_.tree(h), number_param(req, "p", 0.0));
    return {{"handle", h}, {"nodes", sel.nodes}};
  }

  json reduce_json(const ApiRequest& req) {
    json body = parse_body(req);
    std::string from = kOriginalHandle;
    if (body.contains("handle")) {
      from = body.at("handle").get<std::string>();
      body.erase("handle");
    }
    if (!bundle_.has_tree(from)) throw HttpError(404, "unknown tree handle '" + from + "'");
    const auto handle = bundle_.reduce(from, reduce_rule_from_json(body));
    return {{"handle", handle}, {"source", from}, {"nodeCount", bundle_.tree(handle).node_count()}};
  }

  static SelectionMode mode_from_string(const std::string& s) {
    if (s == "global-line") return SelectionMode::global_line;
    if (s == "step-line") return SelectionMode::step_line;
    if (s == "discrete") return SelectionMode::discrete;
    if (s == "non-consistent") return SelectionMode::non_consistent;
    throw Error("unknown selection mode '" + s + "'");
  }

  json validate_json(const ApiRequest& req) const {
    const json body = parse_body(req);
    const std::string h = body.value("handle", std::string(kOriginalHandle));
    if (!bundle_.has_tree(h)) throw HttpError(404, "unknown tree handle '" + h + "'");
    const auto sel = validate_selection(bundle_.tree(h), body.at("nodes").get<std::vector<NodeId>>(),
                                        mode_from_string(body.at("mode").get<std::string>()));
    return {{"handle", h}, {"nodes", sel.nodes}, {"mode", body.at("mode")}};
  }

  json step_json(const ApiRequest& req) const {
    const json body = parse_body(req);
    const std::string h = body.value("handle", std::string(kOriginalHandle));
    if (!bundle_.has_tree(h)) throw HttpError(404, "unknown tree handle '" + h + "'");
    std::vector<LineStep> steps;
    for (const auto& s : body.at("steps"))
      steps.push_back({{s.at("lo").get<std::size_t>(), s.at("hi").get<std::size_t>()},
                       s.at("persistence").get<double>()});
    return {{"handle", h}, {"nodes", select_step_line(bundle_.tree(h), std::move(steps)).nodes}};
  }

  json measure_json(const ApiRequest& req, const std::string& name) const {
    const auto h = handle_of(req);
    auto& store = bundle_.store(h);
    if (!store.has_measure(name)) throw HttpError(404, "unknown measure '" + name + "'");
    if (store.scope(name) == MeasureScope::pair) {
      const auto a = req.param("node"), b = req.param("node2");
      if (!a || !b) throw Error("measure '" + name + "' needs 'node' and 'node2'");
      const auto& t = bundle_.tree(h);
      const NodeId na = node_of(t, std::stoi(*a)), nb = node_of(t, std::stoi(*b));
      return {{"measure", name}, {"handle", h}, {"node", na}, {"node2", nb},
              {"value", measure_value(store, name, na, nb)}};
    }
    if (name == "reference_fitness" && !bundle_.reference())
      throw HttpError(409, "no reference set");
    json nodes = json::array(), values = json::array();
    for (NodeId id : bundle_.tree(h).nodes()) {
      nodes.push_back(id);
      values.push_back(measure_value(store, name, id, kNoNode));
    }
    return {{"measure", name}, {"handle", h}, {"nodes", std::move(nodes)}, {"values", std::move(values)}};
  }

  static json measure_value(AttributeStore& store, const std::string& name, NodeId a, NodeId b) {
    const std::any v = store.value(name, a, b);
    if (const auto* d = std::any_cast<double>(&v)) return encode_real(*d);
    if (const auto* vec = std::any_cast<std::vector<double>>(&v)) return encode_reals(*vec);
    if (const auto* model = std::any_cast<LinearModel>(&v)) return to_json(*model);
    if (const auto* curve = std::any_cast<InverseCurve>(&v)) return to_json(*curve);
    if (const auto* dims = std::any_cast<DimModelVector>(&v)) {
      json out = json::array();
      for (const auto& mdl : *dims) out.push_back(to_json(mdl));
      return out;
    }
    throw Error("measure '" + name + "' has no JSON representation");
  }

  json reference_json(const ApiRequest& req) {
    const json body = parse_body(req);
    if (!body.contains("node") || body.at("node").is_null()) {
      bundle_.set_reference(std::nullopt);
    } else {
      bundle_.set_reference(node_of(bundle_.tree(), body.at("node").get<NodeId>()));
    }
    return {{"reference", reference_value()}};
  }

  json points_json(const ApiRequest& req, NodeId id) const {
    const auto h = handle_of(req);
    const auto& t = bundle_.tree(h);
    node_of(t, id);
    const auto& ds = bundle_.dataset();
    const bool standardized = req.param("space").value_or("raw") == "standardized";
    if (auto s = req.param("space"); s && *s != "raw" && *s != "standardized")
      throw Error("space must be 'raw' or 'standardized'");

    std::vector<std::string> cols;
    if (auto c = req.param("cols"); c && !c->empty()) {
      std::size_t start = 0;
      for (;;) {
        const auto comma = c->find(',', start);
        cols.push_back(c->substr(start, comma == std::string::npos ? comma : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    } else {
      cols = ds.dim_names;
      cols.insert(cols.end(), ds.output_names.begin(), ds.output_names.end());
    }

    const auto pts = t.points(id);
    json columns = json::object();
    for (const auto& name : cols) {
      const Eigen::MatrixXd* source = nullptr;
      std::size_t col = 0, slot = 0;
      if (auto it = std::find(ds.dim_names.begin(), ds.dim_names.end(), name); it != ds.dim_names.end()) {
        source = &ds.inputs;
        col = static_cast<std::size_t>(it - ds.dim_names.begin());
        slot = col;
      } else if (auto jt = std::find(ds.output_names.begin(), ds.output_names.end(), name);
                 jt != ds.output_names.end()) {
        source = &ds.outputs;
        col = static_cast<std::size_t>(jt - ds.output_names.begin());
        slot = ds.d() + col;
      } else {
        throw Error("unknown column '" + name + "'");
      }
      json values = json::array();
      for (PointId p : pts) {
        double v = (*source)(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(col));
        if (!standardized) v = v * ds.raw_scales[slot] + ds.raw_means[slot];
        values.push_back(v);
      }
      columns[name] = std::move(values);
    }
    return {{"node", id},
            {"handle", h},
            {"count", pts.size()},
            {"exactCount", t.exact_point_count(id)},
            {"space", standardized ? "standardized" : "raw"},
            {"indices", pts},
            {"columns", std::move(columns)}};
  }

  json model_json(const ApiRequest& req, NodeId id) const {
    const auto h = handle_of(req);
    node_of(bundle_.tree(h), id);
    auto& store = bundle_.store(h);
    json out = to_json(store.get<LinearModel>("model", id));
    out["node"] = id;
    out["dimNames"] = bundle_.dataset().dim_names;
    out["fitness"] = encode_real(store.get<double>("fitness", id));
    return out;
  }

  json curve_json(const ApiRequest& req, NodeId id) const {
    const auto h = handle_of(req);
    const auto& t = bundle_.tree(h);
    node_of(t, id);
    auto& store = bundle_.store(h);
    const auto current = curve_params_from_json(store.parameter("inverse_curve").value_or(json::object()));
    CurveParams p = current;
    p.bandwidth = number_param(req, "bandwidth", current.bandwidth);
    const double samples = number_param(req, "samples", static_cast<double>(current.samples));
    if (samples < 2 || samples != std::floor(samples)) throw Error("samples must be an integer of at least 2");
    p.samples = static_cast<std::size_t>(samples);

    json out;
    if (p.bandwidth == current.bandwidth && p.samples == current.samples) {
      out = to_json(store.get<InverseCurve>("inverse_curve", id));
    } else {
      // Ad-hoc parameters are computed on the fly and not cached, so one
      // client's slider does not invalidate the shared cache.
      auto pts = node_points(t, bundle_.dataset(), id);
      if (pts.x.rows() < 2) throw Error("partition has a single point");
      out = to_json(fit_inverse_curve(pts.x, pts.y, p.bandwidth, p.samples));
    }
    out["node"] = id;
    out["dimNames"] = bundle_.dataset().dim_names;
    return out;
  }

  json presets_json() const {
    json presets = json::object();
    for (const auto& [name, spec] : bundle_.presets()) presets[name] = to_json(spec);
    return {{"presets", std::move(presets)}, {"initial", to_json(initial_spec(bundle_.dataset().d()))}};
  }

  json add_preset(const ApiRequest& req) {
    const json body = parse_body(req);
    const auto name = body.at("name").get<std::string>();
    bundle_.set_preset(name, projection_from_json(body.at("spec")));
    return {{"name", name}, {"spec", to_json(bundle_.presets().at(name))}};
  }

  json project_json(const ApiRequest& req) const {
    const json body = parse_body(req);
    const auto spec = projection_from_json(body.at("spec"));
    json out = json::array();
    for (const auto& pt : body.at("points")) {
      const auto x = pt.at("x").get<std::vector<double>>();
      const auto p = project_point(spec, x, pt.value("y", 0.0));
      out.push_back({p[0], p[1]});
    }
    return {{"positions", std::move(out)}};
  }

  json edges_json(const ApiRequest& req) const {
    const json body = parse_body(req);
    const std::string h = body.value("handle", std::string(kOriginalHandle));
    if (!bundle_.has_tree(h)) throw HttpError(404, "unknown tree handle '" + h + "'");
    const auto& t = bundle_.tree(h);
    const auto spec = projection_from_json(body.at("spec"));
    Selection sel{body.at("nodes").get<std::vector<NodeId>>(), SelectionMode::non_consistent};
    for (NodeId id : sel.nodes) node_of(t, id);
    std::vector<InverseCurve> curves;
    const bool with_curves = body.value("curves", false);
    if (with_curves)
      for (NodeId id : sel.nodes) curves.push_back(bundle_.store(h).get<InverseCurve>("inverse_curve", id));
    json out = json::array();
    for (const auto& e : project_partition_edges(spec, t, bundle_.dataset(), sel,
                                                 with_curves ? &curves : nullptr)) {
      json curve = json::array();
      for (const auto& c : e.curve) curve.push_back({c[0], c[1]});
      out.push_back({{"node", e.node},
                     {"min", {e.min_pos[0], e.min_pos[1]}},
                     {"max", {e.max_pos[0], e.max_pos[1]}},
                     {"curve", std::move(curve)}});
    }
    return {{"handle", h}, {"edges", std::move(out)}};
  }

  AnalysisBundle& bundle_;
  mutable std::shared_mutex mutex_;
};

/// HTTP front end for an ApiService. `bind` fails if the port is taken.
class ApiServer {
 public:
  explicit ApiServer(ApiService& service) : service_(service) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      ApiRequest r;
      r.method = req.method;
      r.path = req.path;
      for (const auto& [k, v] : req.params) r.query.emplace(k, v);
      r.body = req.body;
      const auto out = service_.handle(r);
      res.status = out.status;
      res.set_content(out.body.dump(), "application/json");
    };
    // httplib's default also sets SO_REUSEPORT, which would let a second
    // server bind an occupied port silently.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    server_.Get(R"(/api/.*)", handler);
    server_.Post(R"(/api/.*)", handler);
  }

  /// Binds to `port`, or to a free port when `port` is 0. Returns the port.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      port = server_.bind_to_any_port(host);
      if (port < 0) throw Error("could not bind to any port on " + host);
    } else if (!server_.bind_to_port(host, port)) {
      throw Error("port " + std::to_string(port) + " is in use");
    }
    return port;
  }

  /// Serves until `stop` is called.
  void run() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  ApiService& service_;
  httplib::Server server_;
};

}  // namespace regulus
