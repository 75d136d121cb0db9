#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "riesz/error.hpp"

namespace riesz {

// Euclidean projection of x onto {y : 0 <= y <= caps, <g, y> = a}.
// The solution is y_j = clip(x_j - t g_j, 0, caps_j); the shift t is located
// between two breakpoints of the piecewise linear mass curve and then solved
// exactly on that segment.
inline Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& x, const std::optional<Eigen::VectorXd>& caps,
                                              const Eigen::VectorXd& g, double a, std::size_t plate = 0) {
  const Eigen::Index n = x.size();
  if (g.size() != n || (caps && caps->size() != n)) throw InvalidArgument("projection inputs differ in length");
  if (!(a > 0.0)) throw InvalidArgument("projection target mass must be positive");
  if (n == 0) throw InfeasibleError(plate, a);
  if (!(g.minCoeff() > 0.0)) throw InvalidArgument("projection gauge must be positive");
  if (!x.allFinite()) throw InvalidArgument("projection input is not finite");

  auto cap = [&](Eigen::Index j) { return caps ? (*caps)(j) : std::numeric_limits<double>::infinity(); };
  if (caps) {
    if ((caps->array() < 0.0).any()) throw InvalidArgument("caps must be nonnegative");
    const double room = g.dot(*caps);
    if (room < a * (1.0 - 1e-12)) throw InfeasibleError(plate, a - room);
  }

  auto clip = [&](double t, Eigen::Index j) { return std::clamp(x(j) - t * g(j), 0.0, cap(j)); };
  auto mass = [&](double t) {
    double m = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) m += g(j) * clip(t, j);
    return m;
  };

  std::vector<double> br;
  br.reserve(static_cast<std::size_t>(2 * n));
  for (Eigen::Index j = 0; j < n; ++j) {
    br.push_back(x(j) / g(j));
    if (std::isfinite(cap(j))) br.push_back((x(j) - cap(j)) / g(j));
  }
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());

  double t;
  const double m_front = mass(br.front());
  if (m_front < a) {
    // below every breakpoint: capped nodes are full, uncapped ones linear in t
    double fixed = 0.0, lin0 = 0.0, slope = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::isfinite(cap(j))) {
        fixed += g(j) * cap(j);
      } else {
        lin0 += g(j) * x(j);
        slope += g(j) * g(j);
      }
    }
    if (slope == 0.0) {
      // all capped: the caps carry exactly a up to rounding
      Eigen::VectorXd out = *caps;
      return out * (a / g.dot(out));
    }
    t = (fixed + lin0 - a) / slope;
  } else {
    // largest breakpoint index with mass >= a; mass is nonincreasing in t
    std::size_t lo = 0, hi = br.size() - 1;
    if (mass(br[hi]) >= a) {
      lo = hi;
    } else {
      while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        (mass(br[mid]) >= a ? lo : hi) = mid;
      }
    }
    if (lo == br.size() - 1) {
      t = br[lo];
    } else {
      const double m_lo = mass(br[lo]), m_hi = mass(br[lo + 1]);
      t = (m_lo == m_hi) ? br[lo] : br[lo] + (m_lo - a) / (m_lo - m_hi) * (br[lo + 1] - br[lo]);
    }
  }
  Eigen::VectorXd out(n);
  for (Eigen::Index j = 0; j < n; ++j) out(j) = clip(t, j);
  return out;
}

}  // namespace riesz
