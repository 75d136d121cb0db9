#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "riesz/kkt.hpp"
#include "riesz/solver.hpp"

namespace riesz {

struct KKTReport {
  std::vector<double> multipliers;
  std::vector<double> b1_violation;  // absolute, per plate
  std::vector<double> b2_violation;
  double scale = 1.0;
  double tolerance = 0.0;            // relative to scale
  double variational_min = 0.0;      // min over sampled nu of sum <W, nu - lambda>
  bool pass = false;

  double max_violation() const {
    double v = 0.0;
    for (double x : b1_violation) v = std::max(v, x);
    for (double x : b2_violation) v = std::max(v, x);
    return v;
  }
};

namespace detail {

inline void check_candidate(const Condenser& cond, const ProblemSpec& spec, const DiscreteVectorMeasure& mu,
                            const Eigen::VectorXd& fx) {
  mu.check(cond);
  for (std::size_t i = 0; i < cond.plate_count(); ++i) {
    const Eigen::Index o = cond.offset(i);
    const auto& w = mu.components[i];
    const double got = spec.gauge[i].dot(w);
    if (std::abs(got - spec.mass[i]) > 1e-9 * spec.mass[i]) throw InfeasibleError(i, spec.mass[i] - got);
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      if (spec.caps[i] && w(j) > (*spec.caps[i])(j) * (1.0 + 1e-9) + 1e-15)
        throw InvalidArgument("candidate exceeds its cap on plate " + std::to_string(i));
      if (!std::isfinite(fx(o + j)) && w(j) > 0.0)
        throw InvalidArgument("candidate puts mass where the field is infinite");
    }
  }
}

}  // namespace detail

inline KKTReport kkt_check(const Condenser& cond, const ProblemSpec& spec, const DiscreteVectorMeasure& candidate,
                           const SignedGram& gram, const std::vector<Eigen::VectorXd>& field, double tol,
                           std::uint64_t seed = kDefaultSeed, int samples = 100) {
  if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  validate(cond, spec, &field);
  const Eigen::VectorXd fx = flatten_field(cond, field);
  detail::check_candidate(cond, spec, candidate, fx);
  const Eigen::VectorXd x = candidate.flatten();
  Eigen::VectorXd w = gram.matrix() * x;
  for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = std::isfinite(fx(j)) ? w(j) + fx(j) : kInf;

  const KktResidual r = kkt_residual(cond, spec, x, w);
  KKTReport rep;
  rep.multipliers = r.multipliers;
  rep.b1_violation = r.b1;
  rep.b2_violation = r.b2;
  rep.scale = r.scale;
  rep.tolerance = tol;

  // random feasible competitors
  const Eigen::VectorXd caps = flat_caps(cond, spec, fx);
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> e(1.0);
  double total_mass = 0.0;
  for (double a : spec.mass) total_mass += a;
  rep.variational_min = kInf;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd nu(x.size());
    for (Eigen::Index j = 0; j < nu.size(); ++j) nu(j) = caps(j) == 0.0 ? 0.0 : e(rng);
    for (std::size_t i = 0; i < cond.plate_count(); ++i) {
      const Eigen::Index o = cond.offset(i), n = cond.plate(i).size();
      nu.segment(o, n) *= spec.mass[i] / spec.gauge[i].dot(nu.segment(o, n));
    }
    detail::project_blocks(cond, spec, caps, nu);
    double v = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j)
      if (std::isfinite(w(j))) v += w(j) * (nu(j) - x(j));
    rep.variational_min = std::min(rep.variational_min, v);
  }
  rep.pass = rep.max_violation() <= tol * rep.scale && rep.variational_min >= -tol * rep.scale * total_mass;
  return rep;
}

inline KKTReport kkt_check(const Condenser& cond, const ProblemSpec& spec, const DiscreteVectorMeasure& candidate,
                           const RieszKernel& k, const DiagonalPolicy& diag, double tol) {
  SignedGram gram(cond, k, diag);
  return kkt_check(cond, spec, candidate, gram, resolve_field(cond, spec.field, k, diag), tol);
}

struct UniquenessReport {
  double max_distance = 0.0;
  double relative = 0.0;  // max_distance / ||R lambda_1||
  std::vector<double> energies;
  std::vector<DiscreteVectorMeasure> minimizers;
};

// Independent randomly started solves; distances between their resultants.
inline UniquenessReport uniqueness_check(const Condenser& cond, const ProblemSpec& spec, const SignedGram& gram,
                                         const std::vector<Eigen::VectorXd>& field, const SolveOptions& opts,
                                         int trials) {
  if (trials < 2) throw InvalidArgument("uniqueness check needs at least 2 trials");
  UniquenessReport rep;
  for (int t = 0; t < trials; ++t) {
    SolveOptions o = opts;
    o.seed = opts.seed + 7919u * static_cast<std::uint64_t>(t + 1);
    o.random_start = true;
    o.restart_count = 1;
    SolveReport r = solve_constrained(cond, spec, gram, field, o);
    if (!r.converged) throw ConvergenceError("uniqueness trial " + std::to_string(t) + " did not converge");
    rep.energies.push_back(r.energy);
    rep.minimizers.push_back(std::move(r.minimizer));
  }
  for (int p = 0; p < trials; ++p)
    for (int q = p + 1; q < trials; ++q)
      rep.max_distance = std::max(rep.max_distance, semimetric(gram, cond, rep.minimizers[p], rep.minimizers[q]));
  const double norm = std::sqrt(std::max(0.0, vector_energy(gram, cond, rep.minimizers[0])));
  rep.relative = norm > 0.0 ? rep.max_distance / norm : rep.max_distance;
  return rep;
}

inline UniquenessReport uniqueness_check(const Condenser& cond, const ProblemSpec& spec, const RieszKernel& k,
                                         const DiagonalPolicy& diag, const SolveOptions& opts, int trials) {
  SignedGram gram(cond, k, diag);
  return uniqueness_check(cond, spec, gram, resolve_field(cond, spec.field, k, diag), opts, trials);
}

struct DualityReport {
  double q = 0.0;
  Eigen::VectorXd lambda;          // constrained minimiser with caps sigma
  Eigen::VectorXd theta;           // q (sigma - lambda)
  double theta_mass = 0.0;
  KKTReport kkt;                   // theta for the unconstrained problem
  double potential_level = 0.0;    // mean of W^theta over supp theta, i.e. -eta
  double spread = 0.0;             // (max - min) of W^theta over supp theta
  double theta_energy = 0.0;
  double direct_energy = 0.0;
  double relative_gap = 0.0;
  bool pass = false;
};

inline DualityReport duality_check(const NodeSet& f_nodes, const Eigen::VectorXd& sigma, const RieszKernel& k,
                                   const DiagonalPolicy& diag, const SolveOptions& opts, double tol,
                                   double energy_tol = 1e-3) {
  if (k.alpha() > 2.0) throw InvalidArgument("duality needs alpha <= 2");
  if (sigma.size() != f_nodes.size()) throw InvalidArgument("sigma does not match the nodes");
  const double total = sigma.sum();
  if (!(total > 1.0)) throw InvalidArgument("duality needs sigma(F) > 1");

  Condenser cond({Plate{1, f_nodes}});
  SignedGram gram(cond, k, diag);
  DualityReport rep;
  rep.q = 1.0 / (total - 1.0);

  ProblemSpec cap_spec = ProblemSpec::standard(cond);
  cap_spec.caps[0] = sigma;
  const std::vector<Eigen::VectorXd> zero{Eigen::VectorXd::Zero(f_nodes.size())};
  SolveReport lam = solve_constrained(cond, cap_spec, gram, zero, opts);
  if (!lam.converged) throw ConvergenceError("capped problem did not converge");
  rep.lambda = lam.minimizer.components[0];
  rep.theta = (rep.q * (sigma - rep.lambda)).cwiseMax(0.0);
  rep.theta_mass = rep.theta.sum();

  ProblemSpec free_spec = ProblemSpec::standard(cond);
  const Eigen::VectorXd f = -rep.q * (gram.matrix() * sigma);
  free_spec.field = NodeField{{f}};
  const std::vector<Eigen::VectorXd> field{f};
  DiscreteVectorMeasure theta{{rep.theta / rep.theta_mass}};
  rep.kkt = kkt_check(cond, free_spec, theta, gram, field, tol, opts.seed);

  const Eigen::VectorXd w = gram.matrix() * theta.components[0] + f;
  const double eps = weight_floor(1.0, f_nodes.size());
  double lo = kInf, hi = -kInf, sum = 0.0;
  int count = 0;
  for (Eigen::Index j = 0; j < w.size(); ++j)
    if (theta.components[0](j) > eps) {
      lo = std::min(lo, w(j));
      hi = std::max(hi, w(j));
      sum += w(j);
      ++count;
    }
  rep.potential_level = count ? sum / count : 0.0;
  rep.spread = count ? hi - lo : 0.0;
  rep.theta_energy = gauss_energy(gram, cond, theta, field);

  SolveReport direct = solve_unconstrained(cond, free_spec, gram, field, opts);
  if (!direct.converged) throw ConvergenceError("direct unconstrained solve did not converge");
  rep.direct_energy = direct.energy;
  rep.relative_gap = std::abs(rep.theta_energy - rep.direct_energy) / std::max(std::abs(rep.direct_energy), 1e-300);
  rep.pass = rep.kkt.pass && rep.spread <= tol * rep.kkt.scale && rep.relative_gap <= energy_tol;
  return rep;
}

// ||R mu - R nu|| for measures on possibly different condensers.
inline double resultant_distance(const Condenser& ca, const DiscreteVectorMeasure& mu, const Condenser& cb,
                                 const DiscreteVectorMeasure& nu, const RieszKernel& k, const DiagonalPolicy& diag) {
  SignedDiscreteMeasure a = resultant(ca, mu);
  SignedDiscreteMeasure b = resultant(cb, nu);
  b.weights = -b.weights;
  const SignedDiscreteMeasure d = combine(a, b);
  const double e2 = energy(k, d, diag);
  const double ref = std::max(energy(k, a, diag), 1e-300);
  if (e2 < -1e-10 * ref) throw NotPositiveDefinite(e2);
  return std::sqrt(std::max(0.0, e2));
}

struct ContinuityLevel {
  Condenser cond;
  ProblemSpec spec;
};

struct ContinuityReport {
  std::vector<double> energies;
  double limit_energy = 0.0;
  std::vector<double> step_distances;  // between successive minimisers
  bool nondecreasing = false;
  bool distances_shrink = false;
  double final_gap = 0.0;              // |G_last - G_limit| / |G_limit|
  bool pass = false;
};

namespace detail {

// Every node of `inner` must be a node of `outer` with no larger cap.
inline void check_nested(const ContinuityLevel& outer, const ContinuityLevel& inner) {
  if (outer.cond.plate_count() != inner.cond.plate_count()) throw InvalidArgument("levels differ in plate count");
  for (std::size_t i = 0; i < outer.cond.plate_count(); ++i) {
    const auto& po = outer.cond.plate(i).nodes.points;
    const auto& pi = inner.cond.plate(i).nodes.points;
    for (Eigen::Index j = 0; j < pi.cols(); ++j) {
      Eigen::Index hit;
      const double d = (po.colwise() - pi.col(j)).colwise().squaredNorm().minCoeff(&hit);
      if (std::sqrt(d) > kCoincidenceTol) throw InvalidArgument("level node sets are not nested");
      const auto& co = outer.spec.caps[i];
      const auto& ci = inner.spec.caps[i];
      if (ci && co && (*ci)(j) > (*co)(hit) * (1.0 + 1e-12)) throw InvalidArgument("level caps are not decreasing");
      if (!ci && co) throw InvalidArgument("level caps are not decreasing");
    }
  }
}

}  // namespace detail

inline ContinuityReport continuity_check(const std::vector<ContinuityLevel>& levels, const ContinuityLevel& limit,
                                         const RieszKernel& k, const DiagonalPolicy& diag, const SolveOptions& opts,
                                         double tol) {
  if (levels.empty()) throw InvalidArgument("continuity check needs at least one level");
  for (std::size_t l = 0; l + 1 < levels.size(); ++l) detail::check_nested(levels[l], levels[l + 1]);
  detail::check_nested(levels.back(), limit);

  auto solve = [&](const ContinuityLevel& lv) {
    SignedGram gram(lv.cond, k, diag);
    SolveReport r = solve_constrained(lv.cond, lv.spec, gram, resolve_field(lv.cond, lv.spec.field, k, diag), opts);
    if (!r.converged) throw ConvergenceError("continuity level did not converge");
    return r;
  };

  ContinuityReport rep;
  std::vector<DiscreteVectorMeasure> mins;
  for (const auto& lv : levels) {
    SolveReport r = solve(lv);
    rep.energies.push_back(r.energy);
    mins.push_back(std::move(r.minimizer));
  }
  rep.limit_energy = solve(limit).energy;

  rep.nondecreasing = true;
  for (std::size_t l = 0; l + 1 < rep.energies.size(); ++l)
    if (rep.energies[l + 1] < rep.energies[l] - 1e-9 * std::abs(rep.energies[l])) rep.nondecreasing = false;
  for (std::size_t l = 0; l + 1 < mins.size(); ++l)
    rep.step_distances.push_back(resultant_distance(levels[l].cond, mins[l], levels[l + 1].cond, mins[l + 1], k, diag));
  rep.distances_shrink = true;
  if (rep.step_distances.size() >= 2) {
    const double first = rep.step_distances.front(), last = rep.step_distances.back();
    rep.distances_shrink = last <= first + 1e-12;
  }
  rep.final_gap = std::abs(rep.energies.back() - rep.limit_energy) / std::max(std::abs(rep.limit_energy), 1e-300);
  rep.pass = rep.nondecreasing && rep.final_gap <= tol;
  return rep;
}

}  // namespace riesz
