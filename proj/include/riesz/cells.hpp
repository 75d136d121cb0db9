#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace riesz::detail {

// Mean of |d + Z|^(-s) for Z ~ N(0, Sigma), 0 < s. Sigma is given through its
// eigenvalues lam[k] and d through its components c[k] in the eigenbasis.
//
// With |x|^-s = Gamma(s/2)^-1 int u^(s/2-1) exp(-u |x|^2) du and the Gaussian
// integral taken inside,
//   E|d+Z|^-s = Gamma(s/2)^-1 int u^(s/2-1) prod_k (1+2u lam_k)^(-1/2)
//                                exp(-u c_k^2 / (1+2u lam_k)) du.
// In y = ln u the integrand is analytic in a strip of half-width pi/2, so the
// trapezoid rule on the whole line with h = 1/4 is accurate far beyond double
// precision. Both ends behave like exponentials in y, so the grid is continued
// to +-infinity by geometric sums (integrating them instead would leave an
// O(h^2) endpoint error).
// Returns +inf when the mean diverges (rank of Sigma <= s and no offset
// along its null space).
inline double gaussian_mean(double s, const double* lam_in, const double* c, int n) {
  double lam_max = 0.0, spread = 0.0;
  for (int k = 0; k < n; ++k) {
    lam_max = std::max(lam_max, lam_in[k]);
    spread += c[k] * c[k] + std::max(lam_in[k], 0.0);
  }
  if (!(spread > 0.0)) return std::numeric_limits<double>::infinity();
  double lam[16];
  std::vector<double> heap;
  double* lm = lam;
  if (n > 16) {
    heap.resize(static_cast<std::size_t>(n));
    lm = heap.data();
  }
  int rank = 0;
  double null_offset = 0.0;
  const double floor = 1e-14 * lam_max;
  for (int k = 0; k < n; ++k) {
    lm[k] = lam_in[k] > floor ? lam_in[k] : 0.0;
    if (lm[k] > 0.0) ++rank;
    else null_offset += c[k] * c[k];
  }
  if (rank <= s && null_offset == 0.0) return std::numeric_limits<double>::infinity();

  constexpr double h = 0.25;
  constexpr int max_steps = 4000;
  // below u = 1e-8/spread the integrand is u^(s/2) to relative 1e-8
  const double y_lo = std::log(1e-8 / spread);
  const double grow = std::exp(h);
  double u = std::exp(y_lo);
  double sum = 0.0, tail = 0.0;
  for (int step = 0; step < max_steps; ++step) {
    double prod = 1.0, expo = 0.0;
    bool asymptotic = true;
    for (int k = 0; k < n; ++k) {
      const double a = 1.0 + 2.0 * u * lm[k];
      prod *= a;
      expo += u * c[k] * c[k] / a;
      if (lm[k] > 0.0 && a < 1e8) asymptotic = false;
    }
    const double val = std::pow(u, 0.5 * s) * std::exp(-expo) / std::sqrt(prod);
    if (step == 0) sum += val / (1.0 - std::exp(-0.5 * s * h));  // u^(s/2) below
    else sum += val;
    if (expo > 50.0) break;
    // every direction saturated: the integrand decays like u^((s-rank)/2)
    if (asymptotic && u * null_offset < 1e-6) {
      const double r = std::exp(-0.5 * (rank - s) * h);
      tail = val * r / (1.0 - r);
      break;
    }
    u *= grow;
  }
  return h * (sum + tail) / std::tgamma(0.5 * s);
}

// Moment expansion of the same mean for |d|^2 >> |Sigma|:
//   F + (1/2) Sigma:D^2F + (1/8) (Sigma x Sigma):D^4F,  F = |x|^-s,
// in terms of T = tr Sigma, T2 = tr Sigma^2, q = d'Sigma d, q2 = d'Sigma^2 d.
inline double gaussian_far(double s, double d2, double trace, double trace2, double q, double q2) {
  const double p = 0.5 * s;
  const double id = 1.0 / d2;
  // phi(r) = r^-p and its derivatives over phi(d2)
  const double f1 = -p * id;
  const double f2 = p * (p + 1.0) * id * id;
  const double f3 = -p * (p + 1.0) * (p + 2.0) * id * id * id;
  const double f4 = p * (p + 1.0) * (p + 2.0) * (p + 3.0) * id * id * id * id;
  const double second = 2.0 * f2 * q + f1 * trace;
  const double fourth = 2.0 * f4 * q * q + f3 * (2.0 * trace * q + 4.0 * q2) + 0.5 * f2 * (trace * trace + 2.0 * trace2);
  return std::pow(d2, -p) * (1.0 + second + fourth);
}

// Isotropic blob N(0, v I_m) in an m-plane; e tangential and t normal offset.
inline double gaussian_cell_mean(double s, int m, double e, double t, double v) {
  std::vector<double> lam(static_cast<std::size_t>(m + 1), v), c(static_cast<std::size_t>(m + 1), 0.0);
  lam[static_cast<std::size_t>(m)] = 0.0;
  c[0] = e;
  c[static_cast<std::size_t>(m)] = t;
  if (e == 0.0 && t == 0.0)
    return std::pow(2.0 * v, -0.5 * s) * std::tgamma(0.5 * (m - s)) / std::tgamma(0.5 * m);
  return gaussian_mean(s, lam.data(), c.data(), m + 1);
}

inline double gaussian_cell_far(double s, int m, double e2, double t2, double v) {
  return gaussian_far(s, e2 + t2, m * v, m * v * v, v * e2, v * v * e2);
}

// Beyond this many standard deviations the expansion is used.
inline constexpr double kCellNearRadius = 10.0;

}  // namespace riesz::detail
