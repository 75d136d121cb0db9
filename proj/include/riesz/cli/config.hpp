#pragma once

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "riesz/geometry.hpp"
#include "riesz/io.hpp"
#include "riesz/measures.hpp"
#include "riesz/solver.hpp"

namespace riesz::cli {

inline constexpr int kSchemaVersion = 1;

struct ConstraintRecipe {
  enum class Kind { Unbounded, UniformCap, ScaledEquilibrium, ExplicitFile };
  Kind kind = Kind::Unbounded;
  double value = 0.0;  // total mass or factor
  std::filesystem::path path;
};

struct FieldRecipe {
  enum class Kind { Zero, RieszOfMeasure, NodeGridFile };
  Kind kind = Kind::Zero;
  std::filesystem::path path;
};

struct PlateConfig {
  PlateSpec spec;
  double mass = 1.0;
  std::optional<std::filesystem::path> gauge_file;
  ConstraintRecipe constraint;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  double alpha = 2.0;
  int dim = 3;
  DiagonalPolicy diag;
  std::uint64_t seed = kDefaultSeed;
  std::vector<PlateConfig> plates;
  FieldRecipe field;
  SolveOptions solver;
  double kkt_tol = 1e-3;
  std::filesystem::path out_dir = "out";
};

namespace detail {

[[noreturn]] inline void fail(const YAML::Node& n, const std::string& key, const std::string& msg) {
  std::ostringstream os;
  if (n && n.Mark().line >= 0) os << "line " << n.Mark().line + 1 << ": ";
  os << key << ": " << msg;
  throw ConfigError(os.str());
}

template <class T>
T get(const YAML::Node& parent, const std::string& key, const std::string& where) {
  const YAML::Node n = parent[key];
  if (!n) fail(parent, where + key, "missing");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(n, where + key, "has the wrong type");
  }
}

template <class T>
T get_or(const YAML::Node& parent, const std::string& key, T fallback, const std::string& where) {
  if (!parent[key]) return fallback;
  return get<T>(parent, key, where);
}

inline void only_keys(const YAML::Node& n, const std::vector<std::string>& keys, const std::string& where) {
  if (!n.IsMap()) fail(n, where, "must be a mapping");
  for (const auto& kv : n) {
    const auto k = kv.first.as<std::string>();
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) fail(kv.first, where + k, "unknown key");
  }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path q(p);
  return q.is_absolute() ? q : base / q;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
  using namespace detail;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root || !root.IsMap()) throw ConfigError("config must be a mapping");
  only_keys(root, {"schema_version", "kernel", "diagonal", "seed", "plates", "field", "solver", "output"}, "");

  RunConfig cfg;
  cfg.schema_version = get<int>(root, "schema_version", "");
  if (cfg.schema_version != kSchemaVersion)
    fail(root["schema_version"], "schema_version", "unsupported version " + std::to_string(cfg.schema_version));

  const YAML::Node kern = root["kernel"];
  if (!kern) fail(root, "kernel", "missing");
  only_keys(kern, {"alpha", "dim"}, "kernel.");
  cfg.alpha = get<double>(kern, "alpha", "kernel.");
  cfg.dim = get<int>(kern, "dim", "kernel.");
  try {
    RieszKernel(cfg.alpha, cfg.dim);
  } catch (const InvalidArgument& e) {
    fail(kern, "kernel", e.what());
  }

  if (const YAML::Node d = root["diagonal"]) {
    only_keys(d, {"mode", "smoothing", "nn_scale"}, "diagonal.");
    const auto mode = get_or<std::string>(d, "mode", "surface_cell", "diagonal.");
    if (mode == "zero") cfg.diag = DiagonalPolicy::zero();
    else if (mode == "nearest_neighbor") cfg.diag = DiagonalPolicy::nearest_neighbor(get_or(d, "nn_scale", 1.0, "diagonal."));
    else if (mode == "surface_cell") cfg.diag = DiagonalPolicy::surface_cell(get_or(d, "smoothing", 0.45, "diagonal."));
    else fail(d["mode"], "diagonal.mode", "expected zero, nearest_neighbor or surface_cell");
  }
  cfg.seed = get_or<std::uint64_t>(root, "seed", kDefaultSeed, "");

  const YAML::Node plates = root["plates"];
  if (!plates || !plates.IsSequence() || plates.size() == 0) fail(root, "plates", "must be a non-empty list");
  for (std::size_t i = 0; i < plates.size(); ++i) {
    const YAML::Node p = plates[i];
    const std::string where = "plates[" + std::to_string(i) + "].";
    only_keys(p, {"shape", "center", "radius", "r_exponent", "x1_min", "x1_max", "path", "sign", "nodes", "mass",
                  "gauge", "constraint", "seed"},
              where);
    PlateConfig pc;
    const auto shape = get<std::string>(p, "shape", where);
    if (shape == "sphere") {
      const auto c = get<std::vector<double>>(p, "center", where);
      if (static_cast<int>(c.size()) != cfg.dim) fail(p["center"], where + "center", "has the wrong dimension");
      pc.spec.shape = SphereShape{Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())),
                                  get<double>(p, "radius", where)};
    } else if (shape == "revolution") {
      if (cfg.dim != 3) fail(p, where + "shape", "revolution surfaces need dim 3");
      pc.spec.shape = RevolutionShape{get<double>(p, "r_exponent", where), get<double>(p, "x1_min", where),
                                      get<double>(p, "x1_max", where)};
    } else if (shape == "point_cloud") {
      pc.spec.shape = PointCloudShape{resolve(base_dir, get<std::string>(p, "path", where))};
    } else {
      fail(p["shape"], where + "shape", "expected sphere, revolution or point_cloud");
    }
    pc.spec.sign = get_or<int>(p, "sign", 1, where);
    if (pc.spec.sign != 1 && pc.spec.sign != -1) fail(p["sign"], where + "sign", "must be 1 or -1");
    pc.spec.node_count = get_or<long>(p, "nodes", 0, where);
    if (shape != "point_cloud" && pc.spec.node_count < 2) fail(p, where + "nodes", "needs at least 2 nodes");
    if (p["seed"]) pc.spec.seed = get<std::uint64_t>(p, "seed", where);
    pc.mass = get_or(p, "mass", 1.0, where);
    if (!(pc.mass > 0.0)) fail(p["mass"], where + "mass", "must be positive");
    if (const YAML::Node g = p["gauge"]) {
      if (g.IsScalar() && g.as<std::string>() == "ones") {
      } else if (g.IsMap() && g["file"]) {
        pc.gauge_file = resolve(base_dir, get<std::string>(g, "file", where + "gauge."));
      } else {
        fail(g, where + "gauge", "expected 'ones' or {file: path}");
      }
    }
    if (const YAML::Node c = p["constraint"]) {
      only_keys(c, {"type", "total", "factor", "path"}, where + "constraint.");
      const auto type = get<std::string>(c, "type", where + "constraint.");
      auto& r = pc.constraint;
      if (type == "unbounded") {
        r.kind = ConstraintRecipe::Kind::Unbounded;
      } else if (type == "uniform_cap") {
        r.kind = ConstraintRecipe::Kind::UniformCap;
        r.value = get<double>(c, "total", where + "constraint.");
        if (!(r.value > 0.0)) fail(c["total"], where + "constraint.total", "must be positive");
      } else if (type == "scaled_equilibrium") {
        r.kind = ConstraintRecipe::Kind::ScaledEquilibrium;
        r.value = get<double>(c, "factor", where + "constraint.");
        if (!(r.value > 0.0)) fail(c["factor"], where + "constraint.factor", "must be positive");
      } else if (type == "explicit_file") {
        r.kind = ConstraintRecipe::Kind::ExplicitFile;
        r.path = resolve(base_dir, get<std::string>(c, "path", where + "constraint."));
      } else {
        fail(c["type"], where + "constraint.type",
             "expected unbounded, uniform_cap, scaled_equilibrium or explicit_file");
      }
    }
    cfg.plates.push_back(std::move(pc));
  }

  if (const YAML::Node f = root["field"]) {
    only_keys(f, {"type", "path"}, "field.");
    const auto type = get<std::string>(f, "type", "field.");
    if (type == "zero") cfg.field.kind = FieldRecipe::Kind::Zero;
    else if (type == "riesz_of_measure") cfg.field.kind = FieldRecipe::Kind::RieszOfMeasure;
    else if (type == "node_grid") cfg.field.kind = FieldRecipe::Kind::NodeGridFile;
    else fail(f["type"], "field.type", "expected zero, riesz_of_measure or node_grid");
    if (cfg.field.kind != FieldRecipe::Kind::Zero) cfg.field.path = resolve(base_dir, get<std::string>(f, "path", "field."));
  }

  if (const YAML::Node s = root["solver"]) {
    only_keys(s, {"max_iters", "grad_tol", "step_rule", "restarts", "seed", "kkt_tol"}, "solver.");
    cfg.solver.max_iters = get_or(s, "max_iters", cfg.solver.max_iters, "solver.");
    cfg.solver.grad_tol = get_or(s, "grad_tol", cfg.solver.grad_tol, "solver.");
    const auto rule = get_or<std::string>(s, "step_rule", "armijo", "solver.");
    if (rule == "armijo") cfg.solver.step_rule = StepRule::BacktrackingArmijo;
    else if (rule == "fixed") cfg.solver.step_rule = StepRule::FixedFromLipschitz;
    else fail(s["step_rule"], "solver.step_rule", "expected armijo or fixed");
    cfg.solver.restart_count = get_or(s, "restarts", cfg.solver.restart_count, "solver.");
    cfg.solver.seed = get_or<std::uint64_t>(s, "seed", cfg.seed, "solver.");
    cfg.kkt_tol = get_or(s, "kkt_tol", cfg.kkt_tol, "solver.");
    try {
      cfg.solver.validate();
    } catch (const InvalidArgument& e) {
      fail(s, "solver", e.what());
    }
  } else {
    cfg.solver.seed = cfg.seed;
  }

  if (const YAML::Node o = root["output"]) {
    only_keys(o, {"dir"}, "output.");
    cfg.out_dir = resolve(base_dir, get<std::string>(o, "dir", "output."));
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

struct Problem {
  Condenser cond;
  ProblemSpec spec;
  RieszKernel kernel;
};

// Node grid file: "plate node_index value" per line; value may be inf.
inline std::vector<Eigen::VectorXd> read_node_grid(const std::filesystem::path& path, const Condenser& cond) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open node grid " + path.string());
  std::vector<Eigen::VectorXd> f;
  for (const auto& p : cond.plates()) f.push_back(Eigen::VectorXd::Constant(p.size(), std::nan("")));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ss(line);
    std::size_t plate;
    long node;
    std::string val;
    if (!(ss >> plate)) continue;
    if (!(ss >> node >> val) || plate >= cond.plate_count() || node < 0 || node >= cond.plate(plate).size())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad node grid entry");
    try {
      f[plate](node) = std::stod(val);
    } catch (const std::exception&) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad value '" + val + "'");
    }
  }
  for (const auto& v : f)
    if (v.array().isNaN().any()) throw ConfigError(path.string() + ": node grid misses nodes");
  return f;
}

// Capacitary weights of one plate scaled to mass factor * a, floored to stay positive.
inline Eigen::VectorXd scaled_equilibrium_caps(const RieszKernel& k, const NodeSet& nodes, const DiagonalPolicy& diag,
                                               const SolveOptions& opts, double factor, double mass) {
  const CapacityResult cap = capacity_solve(k, nodes, diag, opts);
  if (!cap.report.converged) throw ConvergenceError("capacity solve for equilibrium caps did not converge");
  const double floor = 1e-9 / static_cast<double>(nodes.size());
  return factor * mass * cap.weights.cwiseMax(floor);
}

inline Problem build_problem(const RunConfig& cfg) {
  std::vector<PlateSpec> specs;
  for (const auto& p : cfg.plates) specs.push_back(p.spec);
  Condenser cond = [&] {
    try {
      return build_condenser(specs, cfg.seed);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("plates: ") + e.what());
    }
  }();
  RieszKernel k(cfg.alpha, cfg.dim);
  if (cond.dim() != cfg.dim) throw ConfigError("plates: dimension differs from kernel.dim");
  ProblemSpec spec = ProblemSpec::standard(cond);
  for (std::size_t i = 0; i < cfg.plates.size(); ++i) {
    const auto& pc = cfg.plates[i];
    const Eigen::Index n = cond.plate(i).size();
    spec.mass[i] = pc.mass;
    if (pc.gauge_file) {
      spec.gauge[i] = read_column(*pc.gauge_file);
      if (spec.gauge[i].size() != n) throw ConfigError("plates[" + std::to_string(i) + "].gauge: wrong length");
    }
    switch (pc.constraint.kind) {
      case ConstraintRecipe::Kind::Unbounded: break;
      case ConstraintRecipe::Kind::UniformCap:
        spec.caps[i] = Eigen::VectorXd::Constant(n, pc.constraint.value / static_cast<double>(n));
        break;
      case ConstraintRecipe::Kind::ScaledEquilibrium:
        spec.caps[i] = scaled_equilibrium_caps(k, cond.plate(i).nodes, cfg.diag, cfg.solver, pc.constraint.value, pc.mass);
        break;
      case ConstraintRecipe::Kind::ExplicitFile:
        spec.caps[i] = read_column(pc.constraint.path);
        if (spec.caps[i]->size() != n) throw ConfigError("plates[" + std::to_string(i) + "].constraint: wrong length");
        break;
    }
  }
  switch (cfg.field.kind) {
    case FieldRecipe::Kind::Zero: break;
    case FieldRecipe::Kind::RieszOfMeasure: spec.field = RieszField{read_measure(cfg.field.path)}; break;
    case FieldRecipe::Kind::NodeGridFile: spec.field = NodeField{read_node_grid(cfg.field.path, cond)}; break;
  }
  return {std::move(cond), std::move(spec), k};
}

}  // namespace riesz::cli
