#pragma once

// Regression measures over tree nodes.
//
//   model              node         LinearModel fit on the node's points
//   relative_fitness   (a, b)       R^2 of a's model on b's points
//   fitness            node         relative_fitness(n, n)
//   parent_fitness     (n, parent)  relative_fitness(parent, n)
//   child_fitness      (n, parent)  relative_fitness(n, parent)
//   reference_fitness  node         R^2 of the reference model (parameter)
//   dim_models         node         one single-input model per dimension
//   relative_dim       (a, b)       score vector of a's dim models on b's points
//   child_dim_fitness  (n, parent)  cosine(relative_dim(n, n), relative_dim(n, parent))
//   inverse_curve      node         kernel-smoothed inverse curve (parameter)
//
// Parent-relative measures are NaN at the root.

#include <any>
#include <string>
#include <vector>

#include "regulus/measures.hpp"
#include "regulus/regression.hpp"

namespace regulus {

inline json to_json(const FitSpec& s) { return {{"kind", to_string(s.kind)}, {"lambda", s.lambda}}; }

inline FitSpec fit_spec_from_json(const json& j) {
  FitSpec s;
  s.kind = fit_kind_from_string(j.at("kind").get<std::string>());
  s.lambda = j.at("lambda").get<double>();
  return s;
}

struct CurveParams {
  double bandwidth = kDefaultBandwidth;
  std::size_t samples = kDefaultCurveSamples;
};

inline json to_json(const CurveParams& p) {
  return {{"bandwidth", p.bandwidth}, {"samples", p.samples}};
}

inline CurveParams curve_params_from_json(const json& j) {
  CurveParams p;
  p.bandwidth = j.value("bandwidth", kDefaultBandwidth);
  p.samples = j.value("samples", kDefaultCurveSamples);
  return p;
}

/// Registers "model" and "dim_models" for `spec`. Replacing them with a new
/// spec clears every cached value derived from a model.
inline void register_model_measures(AttributeStore& store, FitSpec spec, bool replace = false) {
  MeasureDef model;
  model.name = "model";
  model.compute = [spec](const MeasureContext& ctx, MeasureKey key) {
    auto pts = node_points(ctx.tree(), ctx.dataset(), key.first);
    return std::any(fit_model(pts.x, pts.y, spec));
  };
  model.encode = [](const std::any& v) { return to_json(std::any_cast<const LinearModel&>(v)); };
  model.decode = [](const json& j) { return std::any(linear_model_from_json(j)); };
  store.register_measure(std::move(model), replace);

  MeasureDef dims;
  dims.name = "dim_models";
  dims.compute = [spec](const MeasureContext& ctx, MeasureKey key) {
    auto pts = node_points(ctx.tree(), ctx.dataset(), key.first);
    return std::any(fit_dim_models(pts.x, pts.y, spec));
  };
  dims.encode = [](const std::any& v) {
    json out = json::array();
    for (const auto& m : std::any_cast<const DimModelVector&>(v)) out.push_back(to_json(m));
    return out;
  };
  dims.decode = [](const json& j) {
    DimModelVector models;
    for (const auto& m : j) models.push_back(linear_model_from_json(m));
    return std::any(std::move(models));
  };
  store.register_measure(std::move(dims), replace);
}

inline void register_fitness_measures(AttributeStore& store, FitSpec spec = {}, bool replace = false) {
  register_model_measures(store, spec, replace);

  auto scalar = [&](std::string name, MeasureScope scope, std::vector<std::string> deps,
                    std::function<double(const MeasureContext&, MeasureKey)> fn,
                    bool parameterized = false) {
    MeasureDef def;
    def.name = std::move(name);
    def.scope = scope;
    def.depends_on = std::move(deps);
    def.parameterized = parameterized;
    def.compute = [fn = std::move(fn)](const MeasureContext& ctx, MeasureKey key) {
      return std::any(fn(ctx, key));
    };
    make_scalar_codec(def);
    store.register_measure(std::move(def), replace);
  };

  scalar("relative_fitness", MeasureScope::pair, {"model"},
         [](const MeasureContext& ctx, MeasureKey key) {
           const auto model = ctx.get<LinearModel>("model", key.first);
           auto pts = node_points(ctx.tree(), ctx.dataset(), key.second);
           return r2_score(model, pts.x, pts.y);
         });
  scalar("fitness", MeasureScope::node, {"relative_fitness"},
         [](const MeasureContext& ctx, MeasureKey key) {
           return ctx.get<double>("relative_fitness", key.first, key.first);
         });
  scalar("parent_fitness", MeasureScope::parent_pair, {"relative_fitness"},
         [](const MeasureContext& ctx, MeasureKey key) {
           if (key.second == kNoNode) return kUndefined;
           return ctx.get<double>("relative_fitness", key.second, key.first);
         });
  scalar("child_fitness", MeasureScope::parent_pair, {"relative_fitness"},
         [](const MeasureContext& ctx, MeasureKey key) {
           if (key.second == kNoNode) return kUndefined;
           return ctx.get<double>("relative_fitness", key.first, key.second);
         });
  scalar(
      "reference_fitness", MeasureScope::node, {},
      [](const MeasureContext& ctx, MeasureKey key) {
        if (!ctx.parameter()) throw Error("no reference set");
        const auto reference = linear_model_from_json(*ctx.parameter());
        auto pts = node_points(ctx.tree(), ctx.dataset(), key.first);
        return r2_score(reference, pts.x, pts.y);
      },
      true);

  MeasureDef rel_dim;
  rel_dim.name = "relative_dim";
  rel_dim.scope = MeasureScope::pair;
  rel_dim.depends_on = {"dim_models"};
  rel_dim.compute = [](const MeasureContext& ctx, MeasureKey key) {
    const auto models = ctx.get<DimModelVector>("dim_models", key.first);
    auto pts = node_points(ctx.tree(), ctx.dataset(), key.second);
    return std::any(dim_score_vector(models, pts.x, pts.y));
  };
  rel_dim.encode = [](const std::any& v) {
    return encode_reals(std::any_cast<const std::vector<double>&>(v));
  };
  rel_dim.decode = [](const json& j) { return std::any(decode_reals(j)); };
  store.register_measure(std::move(rel_dim), replace);

  scalar("child_dim_fitness", MeasureScope::parent_pair, {"relative_dim"},
         [](const MeasureContext& ctx, MeasureKey key) {
           if (key.second == kNoNode) return kUndefined;
           const auto own = ctx.get<std::vector<double>>("relative_dim", key.first, key.first);
           const auto up = ctx.get<std::vector<double>>("relative_dim", key.first, key.second);
           return cosine_similarity(own, up);
         });

  MeasureDef curve;
  curve.name = "inverse_curve";
  curve.parameterized = true;
  curve.compute = [](const MeasureContext& ctx, MeasureKey key) {
    const CurveParams p = ctx.parameter() ? curve_params_from_json(*ctx.parameter()) : CurveParams{};
    auto pts = node_points(ctx.tree(), ctx.dataset(), key.first);
    if (pts.x.rows() < 2) {
      // A single point: a one-level curve at that point.
      InverseCurve c;
      c.bandwidth = p.bandwidth;
      c.levels = {pts.y[0]};
      c.mean = {std::vector<double>(pts.x.data(), pts.x.data() + pts.x.cols())};
      c.spread = {std::vector<double>(static_cast<std::size_t>(pts.x.cols()), 0.0)};
      return std::any(std::move(c));
    }
    return std::any(fit_inverse_curve(pts.x, pts.y, p.bandwidth, p.samples));
  };
  curve.encode = [](const std::any& v) { return to_json(std::any_cast<const InverseCurve&>(v)); };
  curve.decode = [](const json& j) { return std::any(inverse_curve_from_json(j)); };
  store.register_measure(std::move(curve), replace);
}

/// Makes `node`'s model the reference for reference_fitness.
inline void set_reference(AttributeStore& store, NodeId node) {
  store.set_parameter("reference_fitness", to_json(store.get<LinearModel>("model", node)));
}

inline void set_reference(AttributeStore& store, const LinearModel& model) {
  store.set_parameter("reference_fitness", to_json(model));
}

/// Every built-in measure: structural plus regression.
inline void register_builtin_measures(AttributeStore& store, FitSpec spec = {}) {
  register_structural_measures(store);
  register_fitness_measures(store, spec);
}

}  // namespace regulus
