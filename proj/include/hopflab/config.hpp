#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hopflab/domain.hpp"
#include "hopflab/generator.hpp"

namespace hopflab {

using json = nlohmann::ordered_json;

/// Configuration rejected before any computation starts.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StableBlock {
  double order = 1.0;
  double scale = 1.0;
};

struct CompoundPoissonBlock {
  double rate = 1.0;
  double radius = 0.5;
};

struct OperatorBlock {
  int dim = 1;
  double diffusion = 0.0; // isotropic coefficient of (q/2) Laplacian
  std::vector<double> drift;
  std::optional<StableBlock> stable;
  std::optional<CompoundPoissonBlock> compound_poisson;
  double killing = 0.0;
  double source = 0.0;
};

struct DomainBlock {
  std::string shape = "interval"; // interval | ball | box
  std::vector<double> lo, hi;     // interval/box
  std::vector<double> center;     // ball
  double radius = 1.0;            // ball
};

struct TaskBlock {
  std::string name; // symbol | simulate | gauge | resolvent | eigen | qsd |
                    // minorize | verify | report-suite
  std::vector<std::vector<double>> xi; // symbol: frequencies
  double alpha = 1.0;                  // resolvent / minorize
  double beta = 2.0;                   // resolvent identity partner
  bool plant_supersolution = false;    // verify: inject a known violation
};

struct NumericBlock {
  double dt = 1e-3;
  std::int64_t n = 10000;
  double h = 1e-2;
  std::uint64_t seed = 1;
  double t_max = 50.0;
  int workers = 1;
  double tolerance = 0.0; // extra scheme slack for verify bounds
  std::vector<std::vector<double>> probes;
  std::vector<double> times;
};

struct OutputBlock {
  std::string directory = "out";
  bool json_format = true;
  bool csv_format = true;
};

struct RunConfig {
  OperatorBlock op;
  DomainBlock domain;
  TaskBlock task;
  NumericBlock numeric;
  OutputBlock output;
};

namespace detail {

inline void require_keys(const json& j, const std::string& block,
                         const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config: block '" + block + "' must be an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw ConfigError("config: unknown key '" + item.key() + "' in block '" + block + "'");
}

template <class T>
T get_or(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: key '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  detail::require_keys(j, "<root>", {"operator", "domain", "task", "numeric", "output"});
  if (!j.contains("operator") || !j.contains("domain") || !j.contains("task"))
    throw ConfigError("config: blocks 'operator', 'domain' and 'task' are required");
  RunConfig cfg;

  const json& op = j.at("operator");
  detail::require_keys(op, "operator",
                       {"dim", "diffusion", "drift", "stable", "compound_poisson", "killing",
                        "source"});
  cfg.op.dim = detail::get_or<int>(op, "dim", 1);
  if (cfg.op.dim < 1 || cfg.op.dim > 2)
    throw ConfigError("config: operator.dim must be 1 or 2");
  cfg.op.diffusion = detail::get_or<double>(op, "diffusion", 0.0);
  if (cfg.op.diffusion < 0) throw ConfigError("config: operator.diffusion must be >= 0");
  cfg.op.drift = detail::get_or<std::vector<double>>(op, "drift", {});
  if (!cfg.op.drift.empty() && static_cast<int>(cfg.op.drift.size()) != cfg.op.dim)
    throw ConfigError("config: operator.drift length must equal dim");
  if (op.contains("stable")) {
    detail::require_keys(op.at("stable"), "operator.stable", {"order", "scale"});
    StableBlock sb;
    sb.order = detail::get_or<double>(op.at("stable"), "order", 1.0);
    sb.scale = detail::get_or<double>(op.at("stable"), "scale", 1.0);
    if (sb.order <= 0 || sb.order >= 2)
      throw ConfigError("config: operator.stable.order must lie in (0,2)");
    if (sb.scale <= 0) throw ConfigError("config: operator.stable.scale must be > 0");
    cfg.op.stable = sb;
  }
  if (op.contains("compound_poisson")) {
    detail::require_keys(op.at("compound_poisson"), "operator.compound_poisson",
                         {"rate", "radius"});
    CompoundPoissonBlock cp;
    cp.rate = detail::get_or<double>(op.at("compound_poisson"), "rate", 1.0);
    cp.radius = detail::get_or<double>(op.at("compound_poisson"), "radius", 0.5);
    if (cp.rate <= 0 || cp.radius <= 0)
      throw ConfigError("config: compound_poisson rate and radius must be > 0");
    cfg.op.compound_poisson = cp;
  }
  if (cfg.op.stable && cfg.op.compound_poisson)
    throw ConfigError("config: choose one jump mechanism");
  cfg.op.killing = detail::get_or<double>(op, "killing", 0.0);
  if (cfg.op.killing < 0) throw ConfigError("config: operator.killing must be >= 0");
  cfg.op.source = detail::get_or<double>(op, "source", 0.0);
  if (cfg.op.source > 0) throw ConfigError("config: operator.source must be <= 0");
  if (cfg.op.diffusion == 0 && !cfg.op.stable && !cfg.op.compound_poisson)
    throw ConfigError("config: operator has neither diffusion nor jumps");

  const json& dm = j.at("domain");
  detail::require_keys(dm, "domain", {"shape", "lo", "hi", "center", "radius"});
  cfg.domain.shape = detail::get_or<std::string>(dm, "shape", "interval");
  cfg.domain.lo = detail::get_or<std::vector<double>>(dm, "lo", {});
  cfg.domain.hi = detail::get_or<std::vector<double>>(dm, "hi", {});
  cfg.domain.center = detail::get_or<std::vector<double>>(dm, "center", {});
  cfg.domain.radius = detail::get_or<double>(dm, "radius", 1.0);
  if (cfg.domain.shape == "interval") {
    if (cfg.op.dim != 1) throw ConfigError("config: interval domain needs dim = 1");
    if (cfg.domain.lo.size() != 1 || cfg.domain.hi.size() != 1 ||
        cfg.domain.lo[0] >= cfg.domain.hi[0])
      throw ConfigError("config: interval needs lo < hi");
  } else if (cfg.domain.shape == "box") {
    if (static_cast<int>(cfg.domain.lo.size()) != cfg.op.dim ||
        static_cast<int>(cfg.domain.hi.size()) != cfg.op.dim)
      throw ConfigError("config: box lo/hi must have dim entries");
    for (size_t i = 0; i < cfg.domain.lo.size(); ++i)
      if (cfg.domain.lo[i] >= cfg.domain.hi[i]) throw ConfigError("config: box needs lo < hi");
  } else if (cfg.domain.shape == "ball") {
    if (static_cast<int>(cfg.domain.center.size()) != cfg.op.dim)
      throw ConfigError("config: ball center must have dim entries");
    if (cfg.domain.radius <= 0) throw ConfigError("config: ball radius must be > 0");
  } else {
    throw ConfigError("config: domain.shape must be interval, ball or box");
  }

  const json& tk = j.at("task");
  detail::require_keys(tk, "task", {"name", "xi", "alpha", "beta", "plant_supersolution"});
  cfg.task.name = detail::get_or<std::string>(tk, "name", "");
  static const std::set<std::string> kTasks = {"symbol", "simulate", "gauge",
                                               "resolvent", "eigen", "qsd",
                                               "minorize", "verify", "report-suite"};
  if (!kTasks.count(cfg.task.name))
    throw ConfigError("config: task.name '" + cfg.task.name + "' is not a known task");
  cfg.task.xi = detail::get_or<std::vector<std::vector<double>>>(tk, "xi", {});
  cfg.task.alpha = detail::get_or<double>(tk, "alpha", 1.0);
  cfg.task.beta = detail::get_or<double>(tk, "beta", 2.0);
  if (cfg.task.alpha < 0 || cfg.task.beta < 0)
    throw ConfigError("config: task.alpha and task.beta must be >= 0");
  cfg.task.plant_supersolution = detail::get_or<bool>(tk, "plant_supersolution", false);

  const json nm = j.contains("numeric") ? j.at("numeric") : json::object();
  detail::require_keys(nm, "numeric",
                       {"dt", "n", "h", "seed", "t_max", "workers", "tolerance", "probes",
                        "times"});
  cfg.numeric.dt = detail::get_or<double>(nm, "dt", 1e-3);
  cfg.numeric.n = detail::get_or<std::int64_t>(nm, "n", 10000);
  cfg.numeric.h = detail::get_or<double>(nm, "h", 1e-2);
  cfg.numeric.seed = detail::get_or<std::uint64_t>(nm, "seed", 1);
  cfg.numeric.t_max = detail::get_or<double>(nm, "t_max", 50.0);
  cfg.numeric.workers = detail::get_or<int>(nm, "workers", 1);
  cfg.numeric.tolerance = detail::get_or<double>(nm, "tolerance", 0.0);
  cfg.numeric.probes = detail::get_or<std::vector<std::vector<double>>>(nm, "probes", {});
  cfg.numeric.times = detail::get_or<std::vector<double>>(nm, "times", {});
  if (!(cfg.numeric.dt > 0)) throw ConfigError("config: numeric.dt must be > 0");
  if (cfg.numeric.n < 1) throw ConfigError("config: numeric.n must be >= 1");
  if (!(cfg.numeric.h > 0)) throw ConfigError("config: numeric.h must be > 0");
  if (!(cfg.numeric.t_max > 0)) throw ConfigError("config: numeric.t_max must be > 0");
  if (cfg.numeric.workers < 1) throw ConfigError("config: numeric.workers must be >= 1");
  if (cfg.numeric.tolerance < 0) throw ConfigError("config: numeric.tolerance must be >= 0");
  for (const auto& p : cfg.numeric.probes)
    if (static_cast<int>(p.size()) != cfg.op.dim)
      throw ConfigError("config: every probe must have dim coordinates");
  for (double t : cfg.numeric.times)
    if (!(t > 0)) throw ConfigError("config: numeric.times entries must be > 0");

  const json out = j.contains("output") ? j.at("output") : json::object();
  detail::require_keys(out, "output", {"directory", "formats"});
  cfg.output.directory = detail::get_or<std::string>(out, "directory", "out");
  if (out.contains("formats")) {
    cfg.output.json_format = cfg.output.csv_format = false;
    for (const auto& f : detail::get_or<std::vector<std::string>>(out, "formats", {})) {
      if (f == "json")
        cfg.output.json_format = true;
      else if (f == "csv")
        cfg.output.csv_format = true;
      else
        throw ConfigError("config: output.formats entries must be json or csv");
    }
    if (!cfg.output.json_format && !cfg.output.csv_format)
      throw ConfigError("config: output.formats must name at least one format");
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: parse failure in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

/// Materializes the generator described by the blocks.
inline GeneratorSpec build_spec(const RunConfig& cfg) {
  GeneratorSpec s;
  s.dim = cfg.op.dim;
  s.diffusion = cfg.op.diffusion > 0 ? DiffusionField::isotropic(cfg.op.dim, cfg.op.diffusion)
                                     : DiffusionField::zero(cfg.op.dim);
  if (cfg.op.drift.empty()) {
    s.drift = VectorField::zero(cfg.op.dim);
  } else {
    Vec b(cfg.op.dim);
    for (int i = 0; i < cfg.op.dim; ++i) b[i] = cfg.op.drift[static_cast<size_t>(i)];
    s.drift = VectorField(b);
  }
  if (cfg.op.stable) s.jumps = IsotropicStable{cfg.op.stable->order, cfg.op.stable->scale};
  if (cfg.op.compound_poisson)
    s.jumps = CompoundPoisson{ScalarField(cfg.op.compound_poisson->rate),
                              JumpDistribution::uniform_ball(cfg.op.compound_poisson->radius)};
  s.killing = ScalarField(cfg.op.killing);
  s.source = ScalarField(cfg.op.source);
  s.validate();
  return s;
}

inline Domain build_domain(const RunConfig& cfg) {
  if (cfg.domain.shape == "interval") return Domain(Interval{cfg.domain.lo[0], cfg.domain.hi[0]});
  if (cfg.domain.shape == "ball") {
    Vec c(cfg.op.dim);
    for (int i = 0; i < cfg.op.dim; ++i) c[i] = cfg.domain.center[static_cast<size_t>(i)];
    return Domain(Ball{c, cfg.domain.radius});
  }
  Vec lo(cfg.op.dim), hi(cfg.op.dim);
  for (int i = 0; i < cfg.op.dim; ++i) {
    lo[i] = cfg.domain.lo[static_cast<size_t>(i)];
    hi[i] = cfg.domain.hi[static_cast<size_t>(i)];
  }
  return Domain(Box{lo, hi});
}

/// Canonical serialization of the validated config, excluding the worker
/// count: summaries must not depend on how work was scheduled.
inline json canonical_config(const RunConfig& cfg) {
  json op;
  op["dim"] = cfg.op.dim;
  op["diffusion"] = cfg.op.diffusion;
  if (!cfg.op.drift.empty()) op["drift"] = cfg.op.drift;
  if (cfg.op.stable)
    op["stable"] = {{"order", cfg.op.stable->order}, {"scale", cfg.op.stable->scale}};
  if (cfg.op.compound_poisson)
    op["compound_poisson"] = {{"rate", cfg.op.compound_poisson->rate},
                              {"radius", cfg.op.compound_poisson->radius}};
  op["killing"] = cfg.op.killing;
  op["source"] = cfg.op.source;

  json dm;
  dm["shape"] = cfg.domain.shape;
  if (!cfg.domain.lo.empty()) dm["lo"] = cfg.domain.lo;
  if (!cfg.domain.hi.empty()) dm["hi"] = cfg.domain.hi;
  if (!cfg.domain.center.empty()) {
    dm["center"] = cfg.domain.center;
    dm["radius"] = cfg.domain.radius;
  }

  json tk;
  tk["name"] = cfg.task.name;
  if (!cfg.task.xi.empty()) tk["xi"] = cfg.task.xi;
  tk["alpha"] = cfg.task.alpha;
  tk["beta"] = cfg.task.beta;
  if (cfg.task.plant_supersolution) tk["plant_supersolution"] = true;

  json nm;
  nm["dt"] = cfg.numeric.dt;
  nm["n"] = cfg.numeric.n;
  nm["h"] = cfg.numeric.h;
  nm["seed"] = cfg.numeric.seed;
  nm["t_max"] = cfg.numeric.t_max;
  nm["tolerance"] = cfg.numeric.tolerance;
  if (!cfg.numeric.probes.empty()) nm["probes"] = cfg.numeric.probes;
  if (!cfg.numeric.times.empty()) nm["times"] = cfg.numeric.times;

  json root;
  root["operator"] = op;
  root["domain"] = dm;
  root["task"] = tk;
  root["numeric"] = nm;
  return root;
}

}  // namespace hopflab
