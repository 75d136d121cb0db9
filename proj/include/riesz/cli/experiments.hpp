#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "riesz/cli/config.hpp"
#include "riesz/cli/report.hpp"
#include "riesz/problems.hpp"
#include "riesz/verify.hpp"

namespace riesz::cli {

struct Overrides {
  std::optional<Eigen::Index> nodes;
  std::uint64_t seed = kDefaultSeed;
  std::optional<double> tol;
  std::optional<int> max_iters;
  double q = 1.0;
};

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct ExperimentResult {
  std::vector<Table> tables;
  json summary;
  bool ok = true;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"zu",         "short_circuit", "touching_balls", "cusp_surfaces",
                                              "duality",    "continuity",    "capacity_sweep"};
  return names;
}

namespace detail {

inline SolveOptions options(const Overrides& ov, double tol = 1e-8) {
  SolveOptions o;
  o.grad_tol = ov.tol.value_or(tol);
  if (ov.max_iters) o.max_iters = *ov.max_iters;
  o.seed = ov.seed;
  return o;
}

inline std::vector<Eigen::VectorXd> zero_field(const Condenser& c) {
  std::vector<Eigen::VectorXd> f;
  for (const auto& p : c.plates()) f.push_back(Eigen::VectorXd::Zero(p.size()));
  return f;
}

inline double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace detail

// Two concentric spheres r1 = 1 (+), r2 = 2 (-): energy against 1/r1 - 1/r2.
inline ExperimentResult experiment_zu(const Overrides& ov) {
  const std::vector<Eigen::Index> sizes =
      ov.nodes ? std::vector<Eigen::Index>{*ov.nodes} : std::vector<Eigen::Index>{250, 500, 1000, 2000};
  const RieszKernel k(2.0, 3);
  const double exact = 0.5;
  ExperimentResult res;
  Table t{"zu", {"N", "energy_unconstrained", "energy_capped", "exact", "rel_err_unconstrained", "rel_err_capped", "kkt_pass"}, {}};
  for (Eigen::Index n : sizes) {
    const Condenser c = concentric_spheres(1.0, 2.0, n, n, ov.seed);
    const SignedGram g(c, k, {});
    const auto f = detail::zero_field(c);
    ProblemSpec free = ProblemSpec::standard(c);
    ProblemSpec capped = free;
    for (std::size_t i = 0; i < 2; ++i) capped.caps[i] = Eigen::VectorXd::Constant(n, 3.0 / static_cast<double>(n));
    const SolveReport a = solve_unconstrained(c, free, g, f, detail::options(ov));
    const SolveReport b = solve_constrained(c, capped, g, f, detail::options(ov));
    const bool pass = a.converged && b.converged && kkt_check(c, free, a.minimizer, g, f, 1e-3).pass &&
                      kkt_check(c, capped, b.minimizer, g, f, 1e-3).pass;
    t.rows.push_back({static_cast<double>(n), a.energy, b.energy, exact, detail::rel(a.energy, exact),
                      detail::rel(b.energy, exact), pass ? 1.0 : 0.0});
    res.ok = res.ok && pass;
  }
  const auto& last = t.rows.back();
  res.ok = res.ok && last[4] <= 0.05 && last[5] <= 0.05;
  res.summary = {{"experiment", "zu"}, {"exact", exact}, {"energy_unconstrained", last[1]},
                 {"energy_capped", last[2]}, {"nodes_per_plate", last[0]}, {"ok", res.ok}};
  res.tables.push_back(std::move(t));
  return res;
}

// Per-pair energies against k^-q, plus the joint problem's mass drift.
inline ExperimentResult experiment_short_circuit(const Overrides& ov) {
  const Eigen::Index n = ov.nodes.value_or(1000);
  const RieszKernel k(2.0, 3);
  ExperimentResult res;
  Table t{"short_circuit", {"k", "energy", "k_pow_minus_q", "rel_err", "converged"}, {}};
  double prev = kInf;
  for (int kk = 2; kk <= 8; ++kk) {
    const Condenser c = short_circuit_pair(kk, ov.q, n, ov.seed);
    const SignedGram g(c, k, {});
    const SolveReport r = solve_unconstrained(c, ProblemSpec::standard(c), g, detail::zero_field(c), detail::options(ov));
    const double want = std::pow(static_cast<double>(kk), -ov.q);
    t.rows.push_back({static_cast<double>(kk), r.energy, want, detail::rel(r.energy, want), r.converged ? 1.0 : 0.0});
    res.ok = res.ok && r.converged && detail::rel(r.energy, want) <= 0.10 && r.energy < prev;
    prev = r.energy;
  }

  const int kmax = 8;
  const Eigen::Index nj = std::max<Eigen::Index>(50, n / 5);
  const Condenser joint = short_circuit_joint(kmax, ov.q, nj, ov.seed);
  const SignedGram gj(joint, k, {});
  const SolveReport rj =
      solve_unconstrained(joint, ProblemSpec::standard(joint), gj, detail::zero_field(joint), detail::options(ov));
  Table drift{"short_circuit_joint", {"k", "mass_positive", "mass_negative"}, {}};
  for (int kk = 2; kk <= kmax; ++kk) {
    const Eigen::Index o = (kk - 2) * nj;
    drift.rows.push_back({static_cast<double>(kk), rj.minimizer.components[0].segment(o, nj).sum(),
                          rj.minimizer.components[1].segment(o, nj).sum()});
  }
  res.summary = {{"experiment", "short_circuit"},
                 {"q", ov.q},
                 {"nodes_per_sphere", n},
                 {"joint_energy", rj.energy},
                 {"joint_converged", rj.converged},
                 {"ok", res.ok}};
  res.tables.push_back(std::move(t));
  res.tables.push_back(std::move(drift));
  return res;
}

// Four touching balls, alpha = 1.5, caps 1.5 a_i times the capacitary weights.
inline ExperimentResult experiment_touching_balls(const Overrides& ov) {
  const Eigen::Index n = ov.nodes.value_or(500);
  const RieszKernel k(1.5, 3);
  const Condenser c = touching_balls(n, ov.seed);
  const SolveOptions opts = detail::options(ov);
  ProblemSpec spec = ProblemSpec::standard(c);
  for (std::size_t i = 0; i < c.plate_count(); ++i)
    spec.caps[i] = scaled_equilibrium_caps(k, c.plate(i).nodes, {}, opts, 1.5, spec.mass[i]);
  const SignedGram g(c, k, {});
  const auto f = detail::zero_field(c);
  const SolveReport r = solve_constrained(c, spec, g, f, opts);
  const KKTReport kk = kkt_check(c, spec, r.minimizer, g, f, 1e-2);
  ExperimentResult res;
  Table t{"touching_balls", {"plate", "sign", "mass", "cap_total", "capped_fraction", "multiplier"}, {}};
  for (std::size_t i = 0; i < c.plate_count(); ++i) {
    const auto& w = r.minimizer.components[i];
    const auto& cap = *spec.caps[i];
    double at_cap = 0.0;
    for (Eigen::Index j = 0; j < w.size(); ++j)
      if (w(j) >= cap(j) * (1.0 - 1e-9)) at_cap += w(j);
    t.rows.push_back({static_cast<double>(i), static_cast<double>(c.plate(i).sign), w.sum(), cap.sum(),
                      at_cap / w.sum(), r.multipliers[i]});
  }
  res.ok = r.converged && kk.pass;
  res.summary = {{"experiment", "touching_balls"},
                 {"alpha", 1.5},
                 {"energy", r.energy},
                 {"converged", r.converged},
                 {"iterations", r.iterations},
                 {"min_cross_sign_distance", number(r.min_cross_sign_distance)},
                 {"kkt", kkt_json(kk)},
                 {"ok", res.ok}};
  res.tables.push_back(std::move(t));
  return res;
}

// Cusp tubes truncated at growing x1_max; energy should settle.
inline ExperimentResult experiment_cusp_surfaces(const Overrides& ov) {
  const Eigen::Index n = ov.nodes.value_or(600);
  const RieszKernel k(2.0, 3);
  const SolveOptions opts = detail::options(ov);
  const double r1 = 1.5, r2 = 2.5;
  ExperimentResult res;
  Table t{"cusp_surfaces", {"x1_max", "energy", "mass_beyond_x1_2_5_positive", "converged", "kkt_pass"}, {}};
  for (double x1max : {2.5, 3.0, 3.5, 4.0}) {
    const Condenser c = cusp_surfaces(r1, r2, x1max, n, ov.seed);
    ProblemSpec spec = ProblemSpec::standard(c);
    for (std::size_t i = 0; i < 2; ++i) spec.caps[i] = scaled_equilibrium_caps(k, c.plate(i).nodes, {}, opts, 1.5, 1.0);
    const SignedGram g(c, k, {});
    const auto f = detail::zero_field(c);
    const SolveReport r = solve_constrained(c, spec, g, f, opts);
    const bool pass = kkt_check(c, spec, r.minimizer, g, f, 1e-2).pass;
    double far = 0.0;
    for (Eigen::Index j = 0; j < c.plate(0).size(); ++j)
      if (c.plate(0).nodes.points(0, j) > 2.5) far += r.minimizer.components[0](j);
    t.rows.push_back({x1max, r.energy, far, r.converged ? 1.0 : 0.0, pass ? 1.0 : 0.0});
    res.ok = res.ok && r.converged && pass;
  }
  const double spread = std::abs(t.rows.back()[1] - t.rows[t.rows.size() - 2][1]);
  res.summary = {{"experiment", "cusp_surfaces"}, {"r1", r1}, {"r2", r2}, {"last_step_change", spread}, {"ok", res.ok}};
  res.tables.push_back(std::move(t));
  return res;
}

inline ExperimentResult experiment_duality(const Overrides& ov) {
  const Eigen::Index n = ov.nodes.value_or(2000);
  const RieszKernel k(2.0, 3);
  const NodeSet f = sample_sphere(point3(0), 1.0, n, ov.seed);
  const Eigen::VectorXd sigma = Eigen::VectorXd::Constant(n, 2.0 / static_cast<double>(n));
  const DualityReport d = duality_check(f, sigma, k, {}, detail::options(ov), 1e-2);
  ExperimentResult res;
  res.ok = d.pass;
  res.summary = {{"experiment", "duality"},
                 {"q", d.q},
                 {"theta_mass", d.theta_mass},
                 {"potential_level", d.potential_level},
                 {"spread", d.spread},
                 {"theta_energy", d.theta_energy},
                 {"direct_energy", d.direct_energy},
                 {"relative_gap", d.relative_gap},
                 {"kkt", kkt_json(d.kkt)},
                 {"ok", res.ok}};
  Table t{"duality", {"node", "sigma", "lambda", "theta"}, {}};
  for (Eigen::Index j = 0; j < n; ++j) t.rows.push_back({static_cast<double>(j), sigma(j), d.lambda(j), d.theta(j)});
  res.tables.push_back(std::move(t));
  return res;
}

// Caps (1 + 2^-l) sigma shrinking to tilted caps sigma on the zu condenser.
inline std::pair<std::vector<ContinuityLevel>, ContinuityLevel> cap_chain(Eigen::Index n, std::uint64_t seed,
                                                                         int levels = 7) {
  const Condenser c = concentric_spheres(1.0, 2.0, n, n, seed);
  ProblemSpec base = ProblemSpec::standard(c);
  for (std::size_t i = 0; i < 2; ++i) base.caps[i] = tilted_caps(c.plate(i).nodes, point3(0), 1.25);
  std::vector<ContinuityLevel> chain;
  for (int l = 0; l < levels; ++l) {
    ProblemSpec s = base;
    for (auto& cap : s.caps) *cap *= 1.0 + std::pow(2.0, -l);
    chain.push_back({c, s});
  }
  return {chain, ContinuityLevel{c, base}};
}

inline ExperimentResult experiment_continuity(const Overrides& ov) {
  const Eigen::Index n = ov.nodes.value_or(1000);
  const RieszKernel k(2.0, 3);
  auto [chain, limit] = cap_chain(n, ov.seed);
  const ContinuityReport r = continuity_check(chain, limit, k, {}, detail::options(ov), 1e-2);
  ExperimentResult res;
  res.ok = r.pass;
  Table t{"continuity", {"level", "energy", "step_distance"}, {}};
  for (std::size_t l = 0; l < r.energies.size(); ++l)
    t.rows.push_back({static_cast<double>(l), r.energies[l], l < r.step_distances.size() ? r.step_distances[l] : 0.0});
  res.summary = {{"experiment", "continuity"},
                 {"energies", r.energies},
                 {"limit_energy", r.limit_energy},
                 {"nondecreasing", r.nondecreasing},
                 {"distances_shrink", r.distances_shrink},
                 {"final_gap", r.final_gap},
                 {"ok", res.ok}};
  res.tables.push_back(std::move(t));
  return res;
}

inline ExperimentResult experiment_capacity_sweep(const Overrides& ov) {
  const Eigen::Index n = ov.nodes.value_or(4000);
  const RieszKernel k(2.0, 3);
  ExperimentResult res;
  Table t{"capacity_sweep", {"r", "capacity", "exact", "rel_err"}, {}};
  for (double r : {1.0, 2.0, 4.0}) {
    const CapacityResult c = capacity_solve(k, sample_sphere(point3(0), r, n, ov.seed), {}, detail::options(ov));
    t.rows.push_back({r, c.capacity, r, detail::rel(c.capacity, r)});
    res.ok = res.ok && c.report.converged && detail::rel(c.capacity, r) <= 0.05;
  }
  res.summary = {{"experiment", "capacity_sweep"}, {"nodes", n}, {"ok", res.ok}};
  res.tables.push_back(std::move(t));
  return res;
}

inline ExperimentResult run_experiment(const std::string& name, const Overrides& ov) {
  if (name == "zu") return experiment_zu(ov);
  if (name == "short_circuit") return experiment_short_circuit(ov);
  if (name == "touching_balls") return experiment_touching_balls(ov);
  if (name == "cusp_surfaces") return experiment_cusp_surfaces(ov);
  if (name == "duality") return experiment_duality(ov);
  if (name == "continuity") return experiment_continuity(ov);
  if (name == "capacity_sweep") return experiment_capacity_sweep(ov);
  throw ConfigError("unknown experiment '" + name + "'");
}

}  // namespace riesz::cli
