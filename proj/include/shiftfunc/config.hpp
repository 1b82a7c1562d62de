#pragma once

#include <json.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "shiftfunc/covariance.hpp"
#include "shiftfunc/diagnostics.hpp"
#include "shiftfunc/errors.hpp"
#include "shiftfunc/functional.hpp"
#include "shiftfunc/lowerbound.hpp"

namespace shiftfunc {

using json = nlohmann::json;

inline NormKind norm_from_string(const std::string& s) {
  if (s == "euclidean") return NormKind::Euclidean;
  if (s == "sup") return NormKind::SupNorm;
  if (s == "matrix_operator") return NormKind::MatrixOperatorNorm;
  throw config_error("config: unknown norm '" + s + "'");
}

namespace detail {

inline const json& require(const json& j, const std::string& key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw config_error("config: missing field '" + ctx + "." + key + "'");
  return *it;
}

inline double require_num(const json& j, const std::string& key, const std::string& ctx) {
  const json& v = require(j, key, ctx);
  if (!v.is_number()) throw config_error("config: field '" + ctx + "." + key + "' must be a number");
  return v.get<double>();
}

inline Eigen::VectorXd vector_from_json(const json& j, const std::string& ctx) {
  if (!j.is_array()) throw config_error("config: '" + ctx + "' must be an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw config_error("config: '" + ctx + "' entries must be numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace detail

inline CovarianceModel model_from_json(const json& j) {
  const std::string kind = detail::require(j, "kind", "model").get<std::string>();
  if (kind == "isotropic") {
    const double sigma2 = detail::require_num(j, "sigma2", "model");
    const int d = detail::require(j, "d", "model").get<int>();
    const NormKind norm =
        norm_from_string(j.value("norm", std::string("euclidean")));
    return CovarianceModel::isotropic(sigma2, d, norm);
  }
  if (kind == "diagonal") {
    Eigen::VectorXd lambdas =
        detail::vector_from_json(detail::require(j, "lambdas", "model"), "model.lambdas");
    const NormKind norm =
        norm_from_string(j.value("norm", std::string("euclidean")));
    return CovarianceModel::diagonal(std::move(lambdas), norm);
  }
  if (kind == "dense_spd") {
    const json& rows = detail::require(j, "matrix", "model");
    if (!rows.is_array() || rows.empty())
      throw config_error("config: model.matrix must be a non-empty array of rows");
    const int d = static_cast<int>(rows.size());
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i) {
      const Eigen::VectorXd row =
          detail::vector_from_json(rows[static_cast<std::size_t>(i)], "model.matrix row");
      if (row.size() != d) throw config_error("config: model.matrix must be square");
      m.row(i) = row;
    }
    const NormKind norm =
        norm_from_string(j.value("norm", std::string("euclidean")));
    return CovarianceModel::dense_spd(m, norm);
  }
  if (kind == "goe") {
    const double sigma = detail::require_num(j, "sigma", "model");
    const int d = detail::require(j, "d", "model").get<int>();
    return CovarianceModel::goe(sigma, d);
  }
  throw config_error("config: unknown model kind '" + kind + "'");
}

inline json model_to_json(const CovarianceModel& m) {
  json j;
  switch (m.kind()) {
    case CovarianceModel::Kind::Isotropic:
      j["kind"] = "isotropic";
      j["sigma2"] = m.iso_sigma2();
      j["d"] = m.dim();
      break;
    case CovarianceModel::Kind::Diagonal:
      j["kind"] = "diagonal";
      j["lambdas"] = detail::vector_to_json(m.lambdas());
      break;
    case CovarianceModel::Kind::DenseSPD: {
      j["kind"] = "dense_spd";
      json rows = json::array();
      for (int i = 0; i < m.dim(); ++i)
        rows.push_back(detail::vector_to_json(m.dense_matrix().row(i)));
      j["matrix"] = rows;
      break;
    }
    case CovarianceModel::Kind::GOE:
      j["kind"] = "goe";
      j["sigma"] = m.goe_sigma();
      j["d"] = m.dim();
      break;
  }
  j["norm"] = norm_kind_name(m.norm());
  return j;
}

// Direction shorthands resolved against the model dimension: "e1" is the
// first coordinate vector, "ones_unit" is (1,...,1)/sqrt(d), and
// {"fill": v} is the constant vector (v,...,v).
inline Point direction_from_json(const json& j, const CovarianceModel& model,
                                 const std::string& ctx) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    Point p = model.zero_point();
    if (s == "e1") {
      p.coords[0] = 1.0;
      return p;
    }
    if (s == "ones_unit") {
      if (model.matrix_view())
        throw config_error("config: '" + ctx + "' shorthand needs a vector model");
      p.coords.setConstant(1.0 / std::sqrt(static_cast<double>(model.dim())));
      return p;
    }
    throw config_error("config: unknown direction shorthand '" + s + "' in " + ctx);
  }
  if (j.is_object() && j.contains("fill")) {
    Point p = model.zero_point();
    p.coords.setConstant(j["fill"].get<double>());
    return p;
  }
  Point p = model.zero_point();
  const Eigen::VectorXd v = detail::vector_from_json(j, ctx);
  if (v.size() != p.coords.size())
    throw config_error("config: '" + ctx + "' has wrong dimension");
  p.coords = v;
  p.validate();
  return p;
}

inline SmoothnessMeta meta_from_json(const json& j, SmoothnessMeta defaults) {
  SmoothnessMeta m = defaults;
  if (j.contains("meta")) {
    const json& mj = j["meta"];
    m.s = mj.value("s", m.s);
    m.gamma = mj.value("gamma", m.gamma);
    m.holder_norm = mj.value("holder_norm", m.holder_norm);
  }
  m.validate();
  return m;
}

inline Functional functional_from_json(const json& j, const CovarianceModel& model) {
  const std::string kind = detail::require(j, "kind", "functional").get<std::string>();
  if (kind == "linear") {
    Point u = direction_from_json(detail::require(j, "u", "functional"), model,
                                  "functional.u");
    Functional f = make_linear(std::move(u));
    f.meta = meta_from_json(j, f.meta);
    return f;
  }
  if (kind == "squared_norm") {
    if (model.matrix_view())
      throw config_error("config: squared_norm needs a vector model");
    Functional f = make_squared_norm();
    f.meta = meta_from_json(j, f.meta);
    return f;
  }
  if (kind == "poly_power") {
    Point u = direction_from_json(detail::require(j, "u", "functional"), model,
                                  "functional.u");
    const int p = detail::require(j, "p", "functional").get<int>();
    Functional f = make_poly_power(std::move(u), p);
    f.meta = meta_from_json(j, f.meta);
    return f;
  }
  if (kind == "exp_linear") {
    Point u = direction_from_json(detail::require(j, "u", "functional"), model,
                                  "functional.u");
    Functional f = make_exp_linear(std::move(u));
    f.meta = meta_from_json(j, f.meta);
    return f;
  }
  if (kind == "bump") {
    Point center = direction_from_json(detail::require(j, "center", "functional"), model,
                                       "functional.center");
    const double eps = detail::require_num(j, "epsilon", "functional");
    const double s = detail::require_num(j, "s", "functional");
    return make_bump(std::move(center), eps, s);
  }
  if (kind == "spectral_bilinear") {
    if (!model.matrix_view())
      throw config_error("config: spectral_bilinear needs the GOE model");
    const std::string h = detail::require(j, "h", "functional").get<std::string>();
    Eigen::VectorXd u =
        detail::vector_from_json(detail::require(j, "u", "functional"), "functional.u");
    Eigen::VectorXd v =
        detail::vector_from_json(detail::require(j, "v", "functional"), "functional.v");
    if (u.size() != model.dim() || v.size() != model.dim())
      throw config_error("config: spectral_bilinear u/v must have length d");
    Functional f = make_spectral_bilinear(scalar_function(h), std::move(u), std::move(v));
    f.meta = meta_from_json(j, f.meta);
    return f;
  }
  if (kind == "cosine_mean") {
    const double omega = detail::require_num(j, "omega", "functional");
    const double amplitude = j.value("amplitude", 1.0);
    Point center = model.zero_point();
    if (j.contains("center"))
      center = direction_from_json(j["center"], model, "functional.center");
    Functional f = make_cosine_mean(omega, amplitude, std::move(center));
    f.meta = meta_from_json(j, f.meta);
    return f;
  }
  throw config_error("config: unknown functional kind '" + kind + "'");
}

inline Point theta_from_json(const json& j, const CovarianceModel& model) {
  if (j.is_string() && j.get<std::string>() == "zeros") return model.zero_point();
  return direction_from_json(j, model, "theta");
}

inline ChainConfig chain_from_json(const json& j) {
  ChainConfig c;
  c.k = detail::require(j, "k", "chain").get<int>();
  c.n_mc = detail::require(j, "n_mc", "chain").get<long>();
  c.seed.master_seed = j.value("seed", std::uint64_t{0});
  c.truncate = j.value("truncate", true);
  c.validate();
  return c;
}

inline json chain_to_json(const ChainConfig& c) {
  return json{{"k", c.k}, {"n_mc", c.n_mc}, {"seed", c.seed.master_seed},
              {"truncate", c.truncate}};
}

inline ExperimentConfig experiment_from_json(const json& root) {
  ExperimentConfig cfg{
      functional_from_json(detail::require(root, "functional", "config"),
                           model_from_json(detail::require(root, "model", "config"))),
      model_from_json(detail::require(root, "model", "config")),
      Point{},
      chain_from_json(detail::require(root, "chain", "config")),
      100,
      2000};
  cfg.theta = theta_from_json(root.value("theta", json("zeros")), cfg.model);
  if (root.contains("experiment")) {
    const json& e = root["experiment"];
    cfg.n_rep = e.value("n_rep", 100L);
    cfg.strongvar_n_mc = e.value("strongvar_n_mc", 2000L);
  }
  cfg.validate();
  return cfg;
}

// Sweep sugar: either an "axis" over sigma (isotropic scale), d (isotropic
// dimension) or k, or an explicit "points" list of JSON merge patches applied
// to the base document.
inline std::vector<SweepPointSpec> sweep_points_from_json(const json& root) {
  const json& sweep = detail::require(root, "sweep", "config");
  const long ctrl_n_mc =
      root.contains("experiment") ? root["experiment"].value("ctrl_n_mc", 200000L)
                                  : 200000L;
  std::vector<SweepPointSpec> out;
  if (sweep.contains("points")) {
    for (const json& patch : sweep["points"]) {
      json doc = root;
      doc.erase("sweep");
      doc.merge_patch(patch);
      SweepPointSpec p{0.0, experiment_from_json(doc), ctrl_n_mc};
      p.sigma = patch.contains("sigma") ? patch["sigma"].get<double>()
                                        : std::sqrt(p.cfg.model.weak_variance());
      out.push_back(std::move(p));
    }
    return out;
  }
  const std::string axis = detail::require(sweep, "axis", "sweep").get<std::string>();
  const json& values = detail::require(sweep, "values", "sweep");
  for (const json& v : values) {
    json doc = root;
    doc.erase("sweep");
    if (axis == "sigma") {
      if (doc["model"].value("kind", std::string()) != "isotropic")
        throw config_error("sweep: the sigma axis needs an isotropic model");
      const double s = v.get<double>();
      doc["model"]["sigma2"] = s * s;
    } else if (axis == "d") {
      if (doc["model"].value("kind", std::string()) != "isotropic")
        throw config_error("sweep: the d axis needs an isotropic model");
      doc["model"]["d"] = v.get<int>();
    } else if (axis == "k") {
      doc["chain"]["k"] = v.get<int>();
    } else {
      throw config_error("sweep: unknown axis '" + axis + "'");
    }
    SweepPointSpec p{0.0, experiment_from_json(doc), ctrl_n_mc};
    p.sigma = std::sqrt(p.cfg.model.weak_variance());
    out.push_back(std::move(p));
  }
  return out;
}

inline BiasEstimator bias_estimator_from_json(const json& root) {
  if (!root.contains("sweep")) return BiasEstimator::Plain;
  const std::string mode =
      root["sweep"].value("bias_estimator", std::string("plain"));
  if (mode == "plain") return BiasEstimator::Plain;
  if (mode == "controlled") return BiasEstimator::Controlled;
  throw config_error("sweep: unknown bias_estimator '" + mode + "'");
}

struct LowerboundConfig {
  int d = 16;
  double sigma = 0.1;
  double s = 2.0;
  double epsilon = 0.0;  // 0 = default rule
  long n_rep = 100;
  RecoveryRule rule;
  bool nearest_codeword = false;
  SeedSpec seed;
};

inline LowerboundConfig lowerbound_from_json(const json& root) {
  const json& j = detail::require(root, "lowerbound", "config");
  LowerboundConfig cfg;
  cfg.d = detail::require(j, "d", "lowerbound").get<int>();
  cfg.sigma = j.value("sigma", 0.1);
  cfg.s = j.value("s", 2.0);
  cfg.epsilon = j.value("epsilon", 0.0);
  cfg.n_rep = j.value("n_rep", 100L);
  cfg.nearest_codeword = j.value("nearest_codeword", false);
  const std::string rule = j.value("rule", std::string("plugin"));
  if (rule == "plugin") {
    cfg.rule.kind = RecoveryRule::Kind::PlugIn;
  } else if (rule == "chain") {
    cfg.rule.kind = RecoveryRule::Kind::Chain;
    cfg.rule.k = j.value("k", 1);
    cfg.rule.n_mc = j.value("n_mc", 64L);
  } else {
    throw config_error("lowerbound: unknown rule '" + rule + "'");
  }
  if (root.contains("chain") && root["chain"].contains("seed"))
    cfg.seed.master_seed = root["chain"]["seed"].get<std::uint64_t>();
  cfg.seed.master_seed = j.value("seed", cfg.seed.master_seed);
  return cfg;
}

}  // namespace shiftfunc
