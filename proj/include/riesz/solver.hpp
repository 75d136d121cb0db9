#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "riesz/kkt.hpp"
#include "riesz/measures.hpp"
#include "riesz/simplex.hpp"

namespace riesz {

enum class StepRule { FixedFromLipschitz, BacktrackingArmijo };

struct SolveOptions {
  int max_iters = 20000;
  double grad_tol = 1e-8;
  StepRule step_rule = StepRule::BacktrackingArmijo;
  int restart_count = 1;  // total number of starts, the first one deterministic
  std::uint64_t seed = kDefaultSeed;
  bool random_start = false;  // first start drawn at random as well

  void validate() const {
    if (max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
    if (!(grad_tol > 0.0)) throw InvalidArgument("grad_tol must be positive");
    if (restart_count < 1) throw InvalidArgument("restart_count must be at least 1");
  }
};

struct SolveReport {
  DiscreteVectorMeasure minimizer;
  double energy = 0.0;
  std::vector<double> multipliers;
  double kkt_max_violation = 0.0;  // relative to the potential scale
  double tolerance = 0.0;
  int iterations = 0;
  bool converged = false;
  double min_cross_sign_distance = kInf;
  std::vector<double> trace;
};

namespace detail {

inline constexpr int kPolishEvery = 500;
inline constexpr Eigen::Index kPolishMaxFree = 3000;

struct QpResult {
  Eigen::VectorXd x;
  double energy = 0.0;
  double residual = kInf;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

// Accelerated projected gradient on x'Qx + 2 f'x with monotone safeguard and
// function-value restart. residual(x, Qx + f) must be scale free.
// `decrease(dx, h)` returns dx.h with any component along the equality
// constraints of the feasible set removed from h.
inline QpResult accelerated_descent(const Eigen::MatrixXd& q, const Eigen::VectorXd& f,
                                    const std::function<void(Eigen::VectorXd&)>& project,
                                    const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& residual,
                                    const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& decrease,
                                    Eigen::VectorXd x0, const SolveOptions& opts,
                                    const std::function<bool(Eigen::VectorXd&)>& polish = {}) {
  auto value = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& qx) { return x.dot(qx) + 2.0 * f.dot(x); };
  const double lip = 2.0 * q.cwiseAbs().rowwise().sum().maxCoeff();
  double step_l = opts.step_rule == StepRule::FixedFromLipschitz ? lip : lip / 16.0;
  if (!(step_l > 0.0)) step_l = 1.0;

  QpResult out;
  project(x0);
  Eigen::VectorXd x = x0, qx = q * x;
  double gx = value(x, qx);
  out.trace.push_back(gx);
  out.residual = residual(x, qx + f);
  if (out.residual <= opts.grad_tol) {
    out.x = x;
    out.energy = gx;
    out.converged = true;
    out.iterations = 1;
    return out;
  }

  Eigen::VectorXd y = x, qy = qx, z, qz, x_prev = x, qx_prev = qx;
  double t = 1.0;
  for (int it = 1; it <= opts.max_iters; ++it) {
    const Eigen::VectorXd grad = 2.0 * (qy + f);
    for (;;) {
      z = y - grad / step_l;
      project(z);
      qz = q * z;
      if (opts.step_rule == StepRule::FixedFromLipschitz) break;
      // for a quadratic the sufficient decrease test is exactly
      // dz'Q dz <= (L/2) |dz|^2, evaluated without cancellation
      const Eigen::VectorXd dz = z - y;
      const double curv = dz.dot(qz - qy);
      if (curv <= 0.5 * step_l * dz.squaredNorm() || step_l >= lip) break;
      step_l = std::min(2.0 * step_l, lip);
    }

    x_prev = x;
    qx_prev = qx;
    // G(z) - G(x) from differences, so that tiny decreases are not lost;
    // the constraint directions are removed first since the projection
    // only restores <g, x> = a to rounding
    const double delta = decrease(z - x, qz + qx + 2.0 * f);
    const bool decreased = delta <= 0.0;
    if (decreased) {
      x = z;
      qx = qz;
      gx += delta;
    }
    if (!decreased) {
      t = 1.0;
      y = x;
      qy = qx;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double c1 = t / t_next, c2 = (t - 1.0) / t_next;
      y = x + c1 * (z - x) + c2 * (x - x_prev);
      qy = qx + c1 * (qz - qx) + c2 * (qx - qx_prev);
      t = t_next;
    }
    out.iterations = it;
    out.residual = residual(x, qx + f);
    // stalled on a settled active set: try the exact solve on the free nodes
    if (polish && out.residual > opts.grad_tol && it % kPolishEvery == 0) {
      Eigen::VectorXd xp = x;
      if (polish(xp)) {
        const Eigen::VectorXd qp = q * xp;
        const double delta = decrease(xp - x, qp + qx + 2.0 * f);
        const double rp = residual(xp, qp + f);
        if (delta <= 1e-14 * std::abs(gx) && rp < out.residual) {
          x = xp;
          qx = qp;
          gx += std::min(delta, 0.0);
          y = x;
          qy = qx;
          t = 1.0;
          out.residual = rp;
        }
      }
    }
    out.trace.push_back(gx);
    if (out.residual <= opts.grad_tol) {
      out.converged = true;
      break;
    }
  }
  out.x = x;
  out.energy = value(x, q * x);
  return out;
}

}  // namespace detail

namespace detail {

inline void project_blocks(const Condenser& cond, const ProblemSpec& spec, const Eigen::VectorXd& caps,
                           Eigen::VectorXd& x) {
  for (std::size_t i = 0; i < cond.plate_count(); ++i) {
    const Eigen::Index o = cond.offset(i), n = cond.plate(i).size();
    std::optional<Eigen::VectorXd> c;
    Eigen::VectorXd ci = caps.segment(o, n);
    if (spec.caps[i] || !ci.array().isInf().all()) c = ci;
    x.segment(o, n) = project_capped_simplex(x.segment(o, n), c, spec.gauge[i], spec.mass[i], i);
  }
}

inline Eigen::VectorXd proportional_start(const Condenser& cond, const ProblemSpec& spec, const Eigen::VectorXd& caps) {
  Eigen::VectorXd x(cond.total_nodes());
  for (std::size_t i = 0; i < cond.plate_count(); ++i) {
    const Eigen::Index o = cond.offset(i), n = cond.plate(i).size();
    Eigen::VectorXd base(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double c = caps(o + j);
      base(j) = std::isfinite(c) ? c : (c == 0.0 ? 0.0 : 1.0);
    }
    x.segment(o, n) = spec.mass[i] * base / spec.gauge[i].dot(base);
  }
  return x;
}

// Feasible start from a Dirichlet draw mixed with the proportional start.
inline Eigen::VectorXd perturbed_start(const Condenser& cond, const ProblemSpec& spec, const Eigen::VectorXd& caps,
                                       std::mt19937_64& rng) {
  Eigen::VectorXd x = proportional_start(cond, spec, caps);
  std::exponential_distribution<double> e(1.0);
  for (std::size_t i = 0; i < cond.plate_count(); ++i) {
    const Eigen::Index o = cond.offset(i), n = cond.plate(i).size();
    Eigen::VectorXd d(n);
    for (Eigen::Index j = 0; j < n; ++j) d(j) = caps(o + j) == 0.0 ? 0.0 : e(rng);
    d *= spec.mass[i] / spec.gauge[i].dot(d);
    x.segment(o, n) = 0.5 * x.segment(o, n) + 0.5 * d;
  }
  project_blocks(cond, spec, caps, x);
  return x;
}

}  // namespace detail

// Minimises the Gauss functional over the capped weighted simplices.
inline SolveReport solve_constrained(const Condenser& cond, const ProblemSpec& spec, const SignedGram& gram,
                                     const std::vector<Eigen::VectorXd>& field, const SolveOptions& opts) {
  opts.validate();
  validate(cond, spec, &field);
  if (gram.size() != cond.total_nodes()) throw InvalidArgument("Gram matrix does not match condenser");
  const Eigen::VectorXd fx = flatten_field(cond, field);
  const Eigen::VectorXd caps = flat_caps(cond, spec, fx);
  Eigen::VectorXd f_fin = fx;
  for (Eigen::Index j = 0; j < f_fin.size(); ++j)
    if (!std::isfinite(f_fin(j))) f_fin(j) = 0.0;

  auto project = [&](Eigen::VectorXd& x) { detail::project_blocks(cond, spec, caps, x); };
  auto residual = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& w) {
    Eigen::VectorXd wf = w;
    for (Eigen::Index j = 0; j < wf.size(); ++j)
      if (!std::isfinite(fx(j))) wf(j) = kInf;
    return kkt_residual(cond, spec, x, wf).relative();
  };

  auto decrease = [&](const Eigen::VectorXd& dx, const Eigen::VectorXd& h) {
    double total = 0.0;
    for (std::size_t i = 0; i < cond.plate_count(); ++i) {
      const Eigen::Index o = cond.offset(i), n = cond.plate(i).size();
      const auto g = spec.gauge[i];
      const double shift = h.segment(o, n).dot(g) / g.squaredNorm();
      total += dx.segment(o, n).dot(h.segment(o, n) - shift * g);
    }
    return total;
  };

  // Fix nodes at 0 or at their cap, solve the stationarity system for the
  // rest with one multiplier per plate. Rejected if it leaves the box.
  const Eigen::MatrixXd& qm = gram.matrix();
  auto polish = [&](Eigen::VectorXd& x) {
    std::vector<Eigen::Index> fr;
    std::vector<Eigen::Index> plate_of;
    for (std::size_t i = 0; i < cond.plate_count(); ++i) {
      const Eigen::Index o = cond.offset(i), n = cond.plate(i).size();
      const double eps = weight_floor(spec.mass[i], n);
      for (Eigen::Index j = 0; j < n; ++j)
        if (x(o + j) > eps && x(o + j) < caps(o + j) - eps) {
          fr.push_back(o + j);
          plate_of.push_back(static_cast<Eigen::Index>(i));
        }
    }
    const Eigen::Index nf = static_cast<Eigen::Index>(fr.size());
    const Eigen::Index nb = static_cast<Eigen::Index>(cond.plate_count());
    if (nf == 0 || nf > detail::kPolishMaxFree) return false;
    Eigen::VectorXd xf = x;
    for (Eigen::Index r = 0; r < nf; ++r) xf(fr[r]) = 0.0;
    const Eigen::VectorXd rest = qm * xf + f_fin;
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(nf + nb, nf + nb);
    Eigen::VectorXd rhs(nf + nb);
    for (Eigen::Index r = 0; r < nf; ++r) {
      for (Eigen::Index c = 0; c < nf; ++c) sys(r, c) = qm(fr[r], fr[c]);
      const std::size_t i = static_cast<std::size_t>(plate_of[r]);
      const double g = spec.gauge[i](fr[r] - cond.offset(i));
      sys(r, nf + plate_of[r]) = -g;
      sys(nf + plate_of[r], r) = g;
      rhs(r) = -rest(fr[r]);
    }
    for (Eigen::Index b = 0; b < nb; ++b) {
      const std::size_t i = static_cast<std::size_t>(b);
      rhs(nf + b) = spec.mass[i] - spec.gauge[i].dot(xf.segment(cond.offset(i), cond.plate(i).size()));
    }
    const Eigen::VectorXd sol = sys.partialPivLu().solve(rhs);
    if (!sol.allFinite()) return false;
    for (Eigen::Index r = 0; r < nf; ++r)
      if (sol(r) < 0.0 || sol(r) > caps(fr[r])) return false;
    for (Eigen::Index r = 0; r < nf; ++r) x(fr[r]) = sol(r);
    return true;
  };

  std::mt19937_64 rng(opts.seed);
  detail::QpResult best;
  bool have = false;
  for (int run = 0; run < opts.restart_count; ++run) {
    Eigen::VectorXd x0 = (run == 0 && !opts.random_start) ? detail::proportional_start(cond, spec, caps)
                                  : detail::perturbed_start(cond, spec, caps, rng);
    detail::QpResult r = detail::accelerated_descent(gram.matrix(), f_fin, project, residual, decrease, x0, opts, polish);
    if (!have || (r.converged && !best.converged) || (r.converged == best.converged && r.energy < best.energy)) {
      best = std::move(r);
      have = true;
    }
  }

  SolveReport rep;
  rep.minimizer = DiscreteVectorMeasure::unflatten(cond, best.x);
  rep.energy = best.energy;
  Eigen::VectorXd w = gram.matrix() * best.x + f_fin;
  for (Eigen::Index j = 0; j < w.size(); ++j)
    if (!std::isfinite(fx(j))) w(j) = kInf;
  const KktResidual k = kkt_residual(cond, spec, best.x, w);
  rep.multipliers = k.multipliers;
  rep.kkt_max_violation = k.relative();
  rep.tolerance = opts.grad_tol;
  rep.iterations = best.iterations;
  rep.converged = best.converged;
  rep.min_cross_sign_distance = cond.min_cross_sign_distance();
  rep.trace = std::move(best.trace);
  return rep;
}

inline SolveReport solve_constrained(const Condenser& cond, const ProblemSpec& spec, const RieszKernel& k,
                                     const DiagonalPolicy& diag, const SolveOptions& opts) {
  SignedGram gram(cond, k, diag);
  return solve_constrained(cond, spec, gram, resolve_field(cond, spec.field, k, diag), opts);
}

namespace detail {

// Aborts when nearly all mass of two opposite plates sits on one pair of
// almost coincident nodes.
inline void short_circuit_diagnostic(const Condenser& cond, const ProblemSpec& spec, const SolveReport& rep) {
  if (!(cond.min_cross_sign_distance() < 1e-9)) return;
  for (std::size_t i = 0; i < cond.plate_count(); ++i)
    for (std::size_t j = i + 1; j < cond.plate_count(); ++j) {
      if (cond.plate(i).sign == cond.plate(j).sign) continue;
      Eigen::Index bi, bj;
      const double mi = rep.minimizer.components[i].maxCoeff(&bi);
      const double mj = rep.minimizer.components[j].maxCoeff(&bj);
      const double d = (cond.plate(i).nodes.point(bi) - cond.plate(j).nodes.point(bj)).norm();
      if (d < 1e-9 && mi * spec.gauge[i](bi) > 0.5 * spec.mass[i] && mj * spec.gauge[j](bj) > 0.5 * spec.mass[j])
        throw ShortCircuitError("mass of plates " + std::to_string(i) + " and " + std::to_string(j) +
                                " collapsed onto a node pair at distance " + std::to_string(d));
    }
}

}  // namespace detail

inline SolveReport solve_unconstrained(const Condenser& cond, const ProblemSpec& spec, const SignedGram& gram,
                                       const std::vector<Eigen::VectorXd>& field, const SolveOptions& opts) {
  if (!spec.unconstrained()) throw InvalidArgument("unconstrained solve given caps");
  SolveReport rep = solve_constrained(cond, spec, gram, field, opts);
  detail::short_circuit_diagnostic(cond, spec, rep);
  return rep;
}

inline SolveReport solve_unconstrained(const Condenser& cond, const ProblemSpec& spec, const RieszKernel& k,
                                       const DiagonalPolicy& diag, const SolveOptions& opts) {
  SignedGram gram(cond, k, diag);
  return solve_unconstrained(cond, spec, gram, resolve_field(cond, spec.field, k, diag), opts);
}

struct CapacityResult {
  double capacity = 0.0;
  Eigen::VectorXd weights;  // minimising probability weights
  SolveReport report;
};

inline CapacityResult capacity_solve(const RieszKernel& k, const NodeSet& nodes, const DiagonalPolicy& diag,
                                     const SolveOptions& opts) {
  if (nodes.size() < 2) {
    if (nodes.size() == 1 && diag.mode == DiagonalPolicy::Mode::Zero)
      throw DegenerateError("a single node has zero energy under the Zero diagonal");
    throw InvalidArgument("capacity needs at least 2 nodes");
  }
  Condenser cond({Plate{1, nodes}});
  ProblemSpec spec = ProblemSpec::standard(cond);
  CapacityResult out;
  out.report = solve_unconstrained(cond, spec, k, diag, opts);
  if (!(out.report.energy > 0.0)) throw DegenerateError("minimum energy is not positive");
  out.capacity = 1.0 / out.report.energy;
  out.weights = out.report.minimizer.components[0];
  return out;
}

inline double capacity(const RieszKernel& k, const NodeSet& nodes, const DiagonalPolicy& diag = {},
                       const SolveOptions& opts = {}) {
  return capacity_solve(k, nodes, diag, opts).capacity;
}

// Energy-norm projection of zeta onto nonnegative measures on the target nodes.
inline DiscreteMeasure balayage(const RieszKernel& k, const DiscreteMeasure& zeta, const NodeSet& target,
                                const DiagonalPolicy& diag = {}, const SolveOptions& opts = {}) {
  opts.validate();
  check_points(target.points, k.dim());
  if (zeta.weights.size() != zeta.points.cols()) throw InvalidArgument("measure is malformed");
  if ((zeta.weights.array() < 0.0).any()) throw InvalidArgument("balayage needs a positive measure");
  const Eigen::MatrixXd q = kernel_matrix(k, target, diag);
  if (!q.allFinite()) throw InvalidArgument("target Gram matrix has infinite entries");
  const Eigen::VectorXd b = kernel_matrix(k, target, zeta.nodes(), diag) * zeta.weights;
  if (!b.allFinite()) throw InvalidArgument("zeta sits on a target node without a finite self term");
  const Eigen::VectorXd f = -b;
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  auto project = [](Eigen::VectorXd& x) { x = x.cwiseMax(0.0); };
  auto residual = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& w) {
    double v = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) v = std::max(v, x(j) > 0.0 ? std::abs(w(j)) : -w(j));
    return v / scale;
  };
  // start from the unconstrained least-squares scale of the field
  Eigen::VectorXd x0 = b / q.diagonal().maxCoeff();
  auto decrease = [](const Eigen::VectorXd& dx, const Eigen::VectorXd& h) { return dx.dot(h); };
  detail::QpResult r = detail::accelerated_descent(q, f, project, residual, decrease, x0, opts);
  if (!r.converged) throw ConvergenceError("balayage did not converge, residual " + std::to_string(r.residual));
  return DiscreteMeasure(target, r.x);
}

}  // namespace riesz
