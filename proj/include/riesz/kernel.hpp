#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "riesz/cells.hpp"
#include "riesz/error.hpp"
#include "riesz/parallel.hpp"

namespace riesz {

using Point = Eigen::VectorXd;
// Nodes are stored one per column.
using PointSet = Eigen::MatrixXd;

inline constexpr double kCoincidenceTol = 1e-12;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

class RieszKernel {
 public:
  RieszKernel(double alpha, int dim) : alpha_(alpha), dim_(dim) {
    if (dim < 2) throw InvalidArgument("kernel dimension must be at least 2");
    if (!(alpha > 0.0) || !(alpha < dim)) throw InvalidArgument("alpha must lie in (0, n)");
  }

  double alpha() const { return alpha_; }
  int dim() const { return dim_; }
  // Decay exponent s with k(r) = r^(-s).
  double decay() const { return dim_ - alpha_; }

  double of_distance(double r) const {
    if (r == 0.0) return kInf;
    return of_squared(r * r);
  }
  double of_squared(double r2) const {
    if (r2 == 0.0) return kInf;
    const double s = decay();
    if (s == 1.0) return 1.0 / std::sqrt(r2);
    if (s == 2.0) return 1.0 / r2;
    return std::pow(r2, -0.5 * s);
  }

  template <class A, class B>
  double operator()(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
    check_point(x);
    check_point(y);
    return of_squared((x - y).squaredNorm());
  }

  template <class A>
  void check_point(const Eigen::MatrixBase<A>& x) const {
    if (x.size() != dim_) throw InvalidArgument("point dimension does not match kernel");
    if (!x.allFinite()) throw InvalidArgument("point has non-finite coordinates");
  }

 private:
  double alpha_;
  int dim_;
};

template <class A, class B>
double eval(const RieszKernel& k, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  return k(x, y);
}

// Geometry attached to surface nodes: patch measure and unit normal.
struct SurfaceCells {
  Eigen::VectorXd area;
  PointSet normal;
  int manifold_dim = 2;
};

struct NodeSet {
  PointSet points;
  std::optional<SurfaceCells> cells;

  Eigen::Index size() const { return points.cols(); }
  int dim() const { return static_cast<int>(points.rows()); }
  auto point(Eigen::Index i) const { return points.col(i); }
};

// Value used for k(x_i, x_i) and for coincident nodes of different sets.
struct DiagonalPolicy {
  enum class Mode { Zero, NearestNeighbor, SurfaceCell };
  Mode mode = Mode::SurfaceCell;
  double nn_scale = 1.0;
  double smoothing = 0.45;
  // SurfaceCell pairs: spread both blobs in one shared plane (keeps thin
  // gaps between parallel sheets intact) or each in its own tangent plane
  // (an exact Gram matrix, positive definite by construction).
  bool aligned = true;

  static DiagonalPolicy zero() { return {Mode::Zero, 1.0, 0.45}; }
  static DiagonalPolicy nearest_neighbor(double scale = 1.0) {
    if (!(scale > 0.0)) throw InvalidArgument("nn_scale must be positive");
    return {Mode::NearestNeighbor, scale, 0.45};
  }
  static DiagonalPolicy surface_cell(double smoothing = 0.45, bool aligned = true) {
    if (!(smoothing > 0.0)) throw InvalidArgument("smoothing must be positive");
    return {Mode::SurfaceCell, 1.0, smoothing, aligned};
  }
};

inline std::string to_string(DiagonalPolicy::Mode m) {
  switch (m) {
    case DiagonalPolicy::Mode::Zero: return "zero";
    case DiagonalPolicy::Mode::NearestNeighbor: return "nearest_neighbor";
    case DiagonalPolicy::Mode::SurfaceCell: return "surface_cell";
  }
  return "?";
}

inline void check_points(const PointSet& pts, int dim) {
  if (pts.rows() != dim) throw InvalidArgument("point dimension does not match kernel");
  if (!pts.allFinite()) throw InvalidArgument("point set has non-finite coordinates");
}

// Distance from each node to its nearest other node.
inline Eigen::VectorXd nearest_neighbor_spacing(const PointSet& pts) {
  const Eigen::Index n = pts.cols();
  if (n < 2) throw InvalidArgument("nearest-neighbour spacing needs at least 2 nodes");
  if (!pts.allFinite()) throw InvalidArgument("point set has non-finite coordinates");
  Eigen::VectorXd out(n);
  parallel_for(n, [&](Eigen::Index b, Eigen::Index e) {
    for (Eigen::Index i = b; i < e; ++i) {
      double best = kInf;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        best = std::min(best, (pts.col(i) - pts.col(j)).squaredNorm());
      }
      out(i) = std::sqrt(best);
    }
  });
  return out;
}

// Rejects distinct indices closer than the coincidence tolerance.
inline void check_distinct(const PointSet& pts) {
  const Eigen::Index n = pts.cols();
  const double tol2 = kCoincidenceTol * kCoincidenceTol;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if ((pts.col(i) - pts.col(j)).squaredNorm() < tol2)
        throw CoincidenceError("nodes " + std::to_string(i) + " and " + std::to_string(j) +
                               " coincide");
}

namespace detail {

// Per-node data needed to evaluate a matrix entry.
struct Site {
  const double* x = nullptr;
  double nn = 0.0;          // nearest-neighbour spacing (NN mode)
  double var = 0.0;         // blob variance (SurfaceCell mode), 0 for a bare point
  const double* normal = nullptr;
};

class EntryRule {
 public:
  EntryRule(const RieszKernel& k, const DiagonalPolicy& p) : k_(k), p_(p), s_(k.decay()), m_(k.dim() - 1) {}

  const DiagonalPolicy& policy() const { return p_; }

  std::vector<Site> sites(const PointSet& pts, const std::optional<SurfaceCells>& cells) const {
    const Eigen::Index n = pts.cols();
    std::vector<Site> out(static_cast<std::size_t>(n));
    Eigen::VectorXd nn;
    if (p_.mode == DiagonalPolicy::Mode::NearestNeighbor && n >= 2) nn = nearest_neighbor_spacing(pts);
    if (p_.mode == DiagonalPolicy::Mode::SurfaceCell && cells) {
      if (!(s_ < m_))
        throw InvalidArgument("surface cells need alpha > 1 so that surfaces carry finite energy");
      if (cells->area.size() != n || cells->normal.cols() != n || cells->normal.rows() != pts.rows())
        throw InvalidArgument("cell data does not match node count");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      Site& st = out[static_cast<std::size_t>(i)];
      st.x = pts.col(i).data();
      if (nn.size()) st.nn = nn(i);
      if (p_.mode == DiagonalPolicy::Mode::SurfaceCell && cells) {
        const double sd = p_.smoothing * std::pow(cells->area(i), 1.0 / cells->manifold_dim);
        st.var = sd * sd;
        st.normal = cells->normal.col(i).data();
      }
    }
    return out;
  }

  double operator()(const Site& a, const Site& b) const {
    const int n = k_.dim();
    double d2 = 0.0;
    for (int c = 0; c < n; ++c) {
      const double d = a.x[c] - b.x[c];
      d2 += d * d;
    }
    const bool coincide = d2 < kCoincidenceTol * kCoincidenceTol;
    const double v = a.var + b.var;
    if (p_.mode == DiagonalPolicy::Mode::SurfaceCell && v > 0.0) return blob(a, b, d2, v);
    if (!coincide) return k_.of_squared(d2);
    switch (p_.mode) {
      case DiagonalPolicy::Mode::Zero: return 0.0;
      case DiagonalPolicy::Mode::NearestNeighbor: {
        const double h = (a.nn > 0 && b.nn > 0) ? 0.5 * (a.nn + b.nn) : std::max(a.nn, b.nn);
        if (!(h > 0.0)) throw InvalidArgument("nearest-neighbour diagonal needs at least 2 nodes");
        return p_.nn_scale * k_.of_distance(h);
      }
      case DiagonalPolicy::Mode::SurfaceCell: return kInf;
    }
    return 0.0;
  }

 private:
  double blob(const Site& a, const Site& b, double d2, double v) const {
    return p_.aligned ? aligned_blob(a, b, d2, v) : tangent_blob(a, b, d2, v);
  }

  // Both blobs in the plane normal to the averaged (co-oriented) normal:
  // isotropic variance v there, offset split into tangential e and normal t.
  double aligned_blob(const Site& a, const Site& b, double d2, double v) const {
    const int n = k_.dim();
    double dot = 0.0;
    if (a.normal && b.normal)
      for (int c = 0; c < n; ++c) dot += a.normal[c] * b.normal[c];
    const double sgn = dot < 0.0 ? -1.0 : 1.0;
    double len2 = 0.0, proj = 0.0;
    for (int c = 0; c < n; ++c) {
      const double x = (a.normal ? a.normal[c] : 0.0) + (b.normal ? sgn * b.normal[c] : 0.0);
      len2 += x * x;
      proj += (a.x[c] - b.x[c]) * x;
    }
    const double t2 = len2 > 0.0 ? std::min(proj * proj / len2, d2) : 0.0;
    const double e2 = d2 - t2;
    if (d2 > kCellNearRadius * kCellNearRadius * v) return gaussian_cell_far(s_, m_, e2, t2, v);
    return gaussian_cell_mean(s_, m_, std::sqrt(e2), std::sqrt(t2), v);
  }

  // Each node a Gaussian in its own tangent plane, covariance var (I - n n'),
  // so an entry is E k(x_a + Z_a - x_b - Z_b).
  double tangent_blob(const Site& a, const Site& b, double d2, double v) const {
    const int n = k_.dim();
    Eigen::MatrixXd sig = Eigen::MatrixXd::Zero(n, n);
    for (const Site* st : {&a, &b}) {
      if (!(st->var > 0.0)) continue;
      const Eigen::Map<const Eigen::VectorXd> nu(st->normal, n);
      sig.diagonal().array() += st->var;
      sig.noalias() -= st->var * nu * nu.transpose();
    }
    Eigen::VectorXd d(n);
    for (int c = 0; c < n; ++c) d(c) = a.x[c] - b.x[c];
    if (d2 > kCellNearRadius * kCellNearRadius * v) {
      const Eigen::VectorXd sd = sig * d;
      return gaussian_far(s_, d2, sig.trace(), sig.squaredNorm(), d.dot(sd), sd.squaredNorm());
    }
    if (n == 3) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es{Eigen::Matrix3d(sig)};
      const Eigen::Vector3d lam = es.eigenvalues();
      const Eigen::Vector3d c = es.eigenvectors().transpose() * Eigen::Vector3d(d);
      return gaussian_mean(s_, lam.data(), c.data(), 3);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sig);
    const Eigen::VectorXd lam = es.eigenvalues();
    const Eigen::VectorXd c = es.eigenvectors().transpose() * d;
    return gaussian_mean(s_, lam.data(), c.data(), n);
  }

  const RieszKernel& k_;
  DiagonalPolicy p_;
  double s_;
  int m_;
};

}  // namespace detail

// Gram matrix between two node sets. Coincident pairs get the policy value.
inline Eigen::MatrixXd kernel_matrix(const RieszKernel& k, const NodeSet& a, const NodeSet& b,
                                     const DiagonalPolicy& diag) {
  check_points(a.points, k.dim());
  check_points(b.points, k.dim());
  detail::EntryRule rule(k, diag);
  const auto sa = rule.sites(a.points, a.cells);
  const auto sb = rule.sites(b.points, b.cells);
  Eigen::MatrixXd out(a.size(), b.size());
  parallel_for(b.size(), [&](Eigen::Index lo, Eigen::Index hi) {
    for (Eigen::Index j = lo; j < hi; ++j)
      for (Eigen::Index i = 0; i < a.size(); ++i)
        out(i, j) = rule(sa[static_cast<std::size_t>(i)], sb[static_cast<std::size_t>(j)]);
  });
  return out;
}

// Symmetric Gram matrix of one node set; the diagonal follows the policy.
inline Eigen::MatrixXd kernel_matrix(const RieszKernel& k, const NodeSet& a, const DiagonalPolicy& diag) {
  check_points(a.points, k.dim());
  check_distinct(a.points);
  detail::EntryRule rule(k, diag);
  const auto sa = rule.sites(a.points, a.cells);
  const Eigen::Index n = a.size();
  Eigen::MatrixXd out(n, n);
  parallel_for(n, [&](Eigen::Index lo, Eigen::Index hi) {
    for (Eigen::Index j = lo; j < hi; ++j)
      for (Eigen::Index i = 0; i <= j; ++i)
        out(i, j) = rule(sa[static_cast<std::size_t>(i)], sa[static_cast<std::size_t>(j)]);
  });
  out.triangularView<Eigen::StrictlyLower>() = out.transpose();
  return out;
}

inline Eigen::MatrixXd kernel_matrix(const RieszKernel& k, const PointSet& a, const DiagonalPolicy& diag) {
  return kernel_matrix(k, NodeSet{a, std::nullopt}, diag);
}
inline Eigen::MatrixXd kernel_matrix(const RieszKernel& k, const PointSet& a, const PointSet& b,
                                     const DiagonalPolicy& diag) {
  return kernel_matrix(k, NodeSet{a, std::nullopt}, NodeSet{b, std::nullopt}, diag);
}

// Discrete measure sum_j w_j delta_{x_j}. Signed measures allow negative weights.
template <bool Signed>
struct BasicMeasure {
  PointSet points;
  Eigen::VectorXd weights;
  std::optional<SurfaceCells> cells;

  BasicMeasure() = default;
  BasicMeasure(PointSet p, Eigen::VectorXd w, std::optional<SurfaceCells> c = std::nullopt)
      : points(std::move(p)), weights(std::move(w)), cells(std::move(c)) {}
  BasicMeasure(const NodeSet& nodes, Eigen::VectorXd w) : points(nodes.points), weights(std::move(w)), cells(nodes.cells) {}

  template <bool Other>
    requires(Signed && !Other)
  BasicMeasure(const BasicMeasure<Other>& m) : points(m.points), weights(m.weights), cells(m.cells) {}

  Eigen::Index size() const { return points.cols(); }
  int dim() const { return static_cast<int>(points.rows()); }
  double mass() const { return weights.sum(); }
  NodeSet nodes() const { return {points, cells}; }

  void validate() const {
    if (weights.size() != points.cols()) throw InvalidArgument("weights and points differ in length");
    if (!weights.allFinite() || !points.allFinite()) throw InvalidArgument("measure has non-finite data");
    if constexpr (!Signed)
      if ((weights.array() < 0.0).any()) throw InvalidArgument("positive measure has a negative weight");
    check_distinct(points);
  }
};

using DiscreteMeasure = BasicMeasure<false>;
using SignedDiscreteMeasure = BasicMeasure<true>;

template <bool S>
BasicMeasure<S> dirac(const Point& x, double w = 1.0) {
  return BasicMeasure<S>(PointSet(x), Eigen::VectorXd::Constant(1, w));
}

// Sum of two measures; coincident nodes are merged.
template <bool S>
BasicMeasure<S> combine(const BasicMeasure<S>& a, const BasicMeasure<S>& b) {
  if (a.size() && b.size() && a.dim() != b.dim()) throw InvalidArgument("dimension mismatch");
  const int dim = a.size() ? a.dim() : b.dim();
  std::vector<Eigen::Index> where(static_cast<std::size_t>(b.size()), -1);
  Eigen::Index extra = 0;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if ((a.points.col(i) - b.points.col(j)).norm() < kCoincidenceTol) {
        where[static_cast<std::size_t>(j)] = i;
        break;
      }
    if (where[static_cast<std::size_t>(j)] < 0) ++extra;
  }
  BasicMeasure<S> out;
  out.points.resize(dim, a.size() + extra);
  out.weights.resize(a.size() + extra);
  out.points.leftCols(a.size()) = a.points;
  out.weights.head(a.size()) = a.weights;
  const bool keep_cells = a.cells.has_value() && b.cells.has_value();
  if (keep_cells) {
    out.cells = SurfaceCells{Eigen::VectorXd(a.size() + extra), PointSet(dim, a.size() + extra), a.cells->manifold_dim};
    out.cells->area.head(a.size()) = a.cells->area;
    out.cells->normal.leftCols(a.size()) = a.cells->normal;
  }
  Eigen::Index next = a.size();
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    const Eigen::Index w = where[static_cast<std::size_t>(j)];
    if (w >= 0) {
      out.weights(w) += b.weights(j);
      continue;
    }
    out.points.col(next) = b.points.col(j);
    out.weights(next) = b.weights(j);
    if (keep_cells) {
      out.cells->area(next) = b.cells->area(j);
      out.cells->normal.col(next) = b.cells->normal.col(j);
    }
    ++next;
  }
  return out;
}

// Pointwise potential sum_j w_j k(x, x_j) with the bare kernel.
template <bool S>
Eigen::VectorXd potential(const RieszKernel& k, const BasicMeasure<S>& mu, const PointSet& eval_points) {
  check_points(mu.points, k.dim());
  check_points(eval_points, k.dim());
  if (mu.weights.size() != mu.points.cols()) throw InvalidArgument("weights and points differ in length");
  Eigen::VectorXd out(eval_points.cols());
  parallel_for(eval_points.cols(), [&](Eigen::Index lo, Eigen::Index hi) {
    for (Eigen::Index i = lo; i < hi; ++i) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < mu.size(); ++j) {
        if (mu.weights(j) == 0.0) continue;
        acc += mu.weights(j) * k.of_squared((eval_points.col(i) - mu.points.col(j)).squaredNorm());
      }
      out(i) = acc;
    }
  });
  return out;
}

// sum_{j,l} w_j v_l k(x_j, y_l), coincident pairs priced by the policy.
template <bool S1, bool S2>
double mutual_energy(const RieszKernel& k, const BasicMeasure<S1>& mu, const BasicMeasure<S2>& nu,
                     const DiagonalPolicy& diag) {
  check_points(mu.points, k.dim());
  check_points(nu.points, k.dim());
  detail::EntryRule rule(k, diag);
  const auto sa = rule.sites(mu.points, mu.cells);
  const auto sb = rule.sites(nu.points, nu.cells);
  std::vector<double> partial(static_cast<std::size_t>(mu.size()), 0.0);
  parallel_for(mu.size(), [&](Eigen::Index lo, Eigen::Index hi) {
    for (Eigen::Index i = lo; i < hi; ++i) {
      if (mu.weights(i) == 0.0) continue;
      double acc = 0.0;
      for (Eigen::Index j = 0; j < nu.size(); ++j) {
        if (nu.weights(j) == 0.0) continue;
        acc += nu.weights(j) * rule(sa[static_cast<std::size_t>(i)], sb[static_cast<std::size_t>(j)]);
      }
      partial[static_cast<std::size_t>(i)] = mu.weights(i) * acc;
    }
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

template <bool S>
double energy(const RieszKernel& k, const BasicMeasure<S>& mu, const DiagonalPolicy& diag) {
  return mutual_energy(k, mu, mu, diag);
}

}  // namespace riesz
