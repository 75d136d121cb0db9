#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "riesz/measures.hpp"

namespace riesz {

// Node-level optimality data for a feasible candidate.
struct KktResidual {
  std::vector<double> multipliers;
  std::vector<double> b1;  // max (w g - W) over nodes below their cap
  std::vector<double> b2;  // max (W - w g) over nodes carrying mass
  double scale = 1.0;      // max |W| over finite entries

  double max_violation() const {
    double v = 0.0;
    for (double x : b1) v = std::max(v, x);
    for (double x : b2) v = std::max(v, x);
    return v;
  }
  double relative() const { return max_violation() / scale; }
};

namespace detail {

inline double weighted_median(std::vector<std::pair<double, double>>& vals) {
  std::sort(vals.begin(), vals.end());
  double total = 0.0;
  for (const auto& v : vals) total += v.second;
  double acc = 0.0;
  for (const auto& v : vals) {
    acc += v.second;
    if (acc >= 0.5 * total) return v.first;
  }
  return vals.back().first;
}

}  // namespace detail

inline double weight_floor(double a, Eigen::Index n) { return 1e-12 * a / static_cast<double>(n); }

// w_i is the g-weighted median of W/g over strictly interior nodes; without
// interior nodes it is the midpoint of the interval allowed by the active ones.
inline KktResidual kkt_residual(const Condenser& cond, const ProblemSpec& spec, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& w_pot) {
  KktResidual r;
  double scale = 0.0;
  for (Eigen::Index j = 0; j < w_pot.size(); ++j)
    if (std::isfinite(w_pot(j))) scale = std::max(scale, std::abs(w_pot(j)));
  r.scale = scale > 0.0 ? scale : 1.0;

  for (std::size_t i = 0; i < cond.plate_count(); ++i) {
    const Eigen::Index o = cond.offset(i), n = cond.plate(i).size();
    const double eps = weight_floor(spec.mass[i], n);
    const Eigen::VectorXd& g = spec.gauge[i];
    auto cap = [&](Eigen::Index j) { return spec.caps[i] ? (*spec.caps[i])(j) : kInf; };
    auto below = [&](Eigen::Index j) { return x(o + j) < cap(j) - eps && std::isfinite(w_pot(o + j)); };
    auto above = [&](Eigen::Index j) { return x(o + j) > eps; };

    std::vector<std::pair<double, double>> interior;
    double lo = -kInf, hi = kInf;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double ratio = w_pot(o + j) / g(j);
      const bool b = below(j), u = above(j);
      if (b && u) interior.emplace_back(ratio, g(j));
      else if (u) lo = std::max(lo, ratio);   // at cap: needs W <= w g
      else if (b) hi = std::min(hi, ratio);   // empty: needs W >= w g
    }
    double w;
    if (!interior.empty()) w = detail::weighted_median(interior);
    else if (std::isfinite(lo) && std::isfinite(hi)) w = 0.5 * (lo + hi);
    else if (std::isfinite(lo)) w = lo;
    else if (std::isfinite(hi)) w = hi;
    else w = 0.0;

    double v1 = 0.0, v2 = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = w_pot(o + j) - w * g(j);
      if (below(j)) v1 = std::max(v1, -d);
      if (above(j)) v2 = std::max(v2, d);
    }
    r.multipliers.push_back(w);
    r.b1.push_back(v1);
    r.b2.push_back(v2);
  }
  return r;
}

// Caps as one flat vector, +inf where unbounded, 0 where the field is +inf.
inline Eigen::VectorXd flat_caps(const Condenser& cond, const ProblemSpec& spec, const Eigen::VectorXd& field) {
  Eigen::VectorXd c(cond.total_nodes());
  for (std::size_t i = 0; i < cond.plate_count(); ++i) {
    const Eigen::Index o = cond.offset(i), n = cond.plate(i).size();
    if (spec.caps[i]) c.segment(o, n) = *spec.caps[i];
    else c.segment(o, n).setConstant(kInf);
  }
  for (Eigen::Index j = 0; j < c.size(); ++j)
    if (!std::isfinite(field(j))) c(j) = 0.0;
  return c;
}

}  // namespace riesz
