#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "riesz/kernel.hpp"
#include "riesz/measures.hpp"

namespace riesz {

// Inversion in the unit sphere about x0: |x - x0| |x* - x0| = 1.
template <class A>
Point invert_point(const Eigen::MatrixBase<A>& x, const Point& x0) {
  if (x.size() != x0.size()) throw InvalidArgument("inversion centre has wrong dimension");
  const Point d = x - x0;
  const double r2 = d.squaredNorm();
  if (r2 < kCoincidenceTol * kCoincidenceTol) throw InvalidArgument("cannot invert the centre itself");
  return x0 + d / r2;
}

// Points inverted, weights scaled by |x - x0|^(alpha - n). Cells are dropped.
template <bool S>
BasicMeasure<S> kelvin_transform(const BasicMeasure<S>& mu, const Point& x0, const RieszKernel& k) {
  check_points(mu.points, k.dim());
  if (x0.size() != k.dim() || !x0.allFinite()) throw InvalidArgument("inversion centre is invalid");
  BasicMeasure<S> out;
  out.points.resize(mu.points.rows(), mu.points.cols());
  out.weights.resize(mu.size());
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    const double r = (mu.points.col(j) - x0).norm();
    if (r < kCoincidenceTol) throw InvalidArgument("measure has a node at the inversion centre");
    out.points.col(j) = invert_point(mu.points.col(j), x0);
    out.weights(j) = mu.weights(j) * std::pow(r, k.alpha() - k.dim());
  }
  return out;
}

// Plate-wise transform of a condenser and a vector measure on it.
inline std::pair<Condenser, DiscreteVectorMeasure> kelvin_transform(const Condenser& cond,
                                                                    const DiscreteVectorMeasure& mu,
                                                                    const Point& x0, const RieszKernel& k) {
  mu.check(cond);
  std::vector<Plate> plates;
  DiscreteVectorMeasure out;
  for (std::size_t i = 0; i < cond.plate_count(); ++i) {
    const auto& p = cond.plate(i);
    DiscreteMeasure m = kelvin_transform(DiscreteMeasure(p.nodes.points, mu.components[i]), x0, k);
    plates.push_back(Plate{p.sign, NodeSet{m.points, std::nullopt}});
    out.components.push_back(m.weights);
  }
  return {Condenser(std::move(plates)), std::move(out)};
}

}  // namespace riesz
