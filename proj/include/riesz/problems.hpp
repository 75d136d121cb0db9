#pragma once

#include <cmath>

#include "riesz/geometry.hpp"
#include "riesz/measures.hpp"

namespace riesz {

inline Point point3(double x, double y = 0.0, double z = 0.0) { return Eigen::Vector3d(x, y, z); }

// Positive S(0, r1) inside negative S(0, r2).
inline Condenser concentric_spheres(double r1, double r2, Eigen::Index n1, Eigen::Index n2,
                                    std::uint64_t seed = kDefaultSeed) {
  return build_condenser({PlateSpec{SphereShape{point3(0), r1}, 1, n1, {}},
                          PlateSpec{SphereShape{point3(0), r2}, -1, n2, {}}},
                         seed);
}

// Pair k of the short-circuit sequence in R^3: positive S(x_k, r1) inside
// negative S(x_k, r2) with 1/r2 = k^2 and 1/r1 = k^2 + k^-q, so the pair's
// condenser energy is k^-q.
inline std::pair<double, double> short_circuit_radii(int k, double q) {
  const double kk = static_cast<double>(k);
  return {1.0 / (kk * kk + std::pow(kk, -q)), 1.0 / (kk * kk)};
}

inline Condenser short_circuit_pair(int k, double q, Eigen::Index n, std::uint64_t seed = kDefaultSeed) {
  const auto [r1, r2] = short_circuit_radii(k, q);
  return build_condenser({PlateSpec{SphereShape{point3(k), r1}, 1, n, {}},
                          PlateSpec{SphereShape{point3(k), r2}, -1, n, {}}},
                         seed);
}

// Pairs 2..kmax merged into one positive and one negative plate.
inline Condenser short_circuit_joint(int kmax, double q, Eigen::Index n, std::uint64_t seed = kDefaultSeed) {
  std::vector<NodeSet> inner, outer;
  for (int k = 2; k <= kmax; ++k) {
    const auto [r1, r2] = short_circuit_radii(k, q);
    inner.push_back(sample_sphere(point3(k), r1, n, seed + 2 * k));
    outer.push_back(sample_sphere(point3(k), r2, n, seed + 2 * k + 1));
  }
  auto merge = [](const std::vector<NodeSet>& parts) {
    NodeSet out;
    const Eigen::Index total = static_cast<Eigen::Index>(parts.size()) * parts.front().size();
    out.points.resize(3, total);
    out.cells = SurfaceCells{Eigen::VectorXd(total), PointSet(3, total), 2};
    Eigen::Index o = 0;
    for (const auto& p : parts) {
      out.points.middleCols(o, p.size()) = p.points;
      out.cells->area.segment(o, p.size()) = p.cells->area;
      out.cells->normal.middleCols(o, p.size()) = p.cells->normal;
      o += p.size();
    }
    return out;
  };
  return Condenser({Plate{1, merge(inner)}, Plate{-1, merge(outer)}});
}

// Four balls touching at (+-1, 0, 0): B(0,1)+, B((2,0,0),1)-, B((3,0,0),2)-,
// B((-2,0,0),1)-, each represented by its bounding sphere. Node counts
// follow surface area.
inline Condenser touching_balls(Eigen::Index n_unit, std::uint64_t seed = kDefaultSeed) {
  return build_condenser({PlateSpec{SphereShape{point3(0), 1.0}, 1, n_unit, {}},
                          PlateSpec{SphereShape{point3(2), 1.0}, -1, n_unit, {}},
                          PlateSpec{SphereShape{point3(3), 2.0}, -1, 4 * n_unit, {}},
                          PlateSpec{SphereShape{point3(-2), 1.0}, -1, n_unit, {}}},
                         seed);
}

// Nested cusp tubes x2^2 + x3^2 = exp(-2 x1^r): positive with r1 over
// x1 >= 1, negative with r2 > r1 over x1 >= 2, both cut at x1_max.
inline Condenser cusp_surfaces(double r1, double r2, double x1_max, Eigen::Index n,
                               std::uint64_t seed = kDefaultSeed) {
  return build_condenser({PlateSpec{RevolutionShape{r1, 1.0, x1_max}, 1, n, {}},
                          PlateSpec{RevolutionShape{r2, 2.0, x1_max}, -1, n, {}}},
                         seed);
}

// Caps proportional to 1 + tilt * x3/|x| around `center`, total mass `total`.
inline Eigen::VectorXd tilted_caps(const NodeSet& nodes, const Point& center, double total, double tilt = 0.8) {
  Eigen::VectorXd c(nodes.size());
  for (Eigen::Index j = 0; j < nodes.size(); ++j) {
    const Point d = nodes.point(j) - center;
    c(j) = 1.0 + tilt * d(d.size() - 1) / d.norm();
  }
  return c * (total / c.sum());
}

}  // namespace riesz
