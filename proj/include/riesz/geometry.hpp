#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "riesz/kernel.hpp"

namespace riesz {

inline constexpr std::uint64_t kDefaultSeed = 42;

namespace detail {

// Uniformly random rotation of R^3 from a unit quaternion.
inline Eigen::Matrix3d random_rotation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline double unit_sphere_area(int dim) {
  // |S^{dim-1}| = 2 pi^{dim/2} / Gamma(dim/2)
  return 2.0 * std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim);
}

}  // namespace detail

// N nodes on the sphere S(center, radius): Fibonacci lattice in 3-d,
// equispaced on circles, normalised Gaussians above 3-d.
inline NodeSet sample_sphere(const Point& center, double radius, Eigen::Index n,
                             std::uint64_t seed = kDefaultSeed) {
  const int dim = static_cast<int>(center.size());
  if (dim < 2) throw InvalidArgument("sphere needs dimension at least 2");
  if (!center.allFinite()) throw InvalidArgument("sphere centre is not finite");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("sphere radius must be positive");
  if (n < 2) throw InvalidArgument("sphere sampling needs at least 2 nodes");

  PointSet dirs(dim, n);
  if (dim == 2) {
    std::mt19937_64 rng(seed);
    const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = phase + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      dirs.col(i) << std::cos(a), std::sin(a);
    }
  } else if (dim == 3) {
    if (n == 2) {
      dirs.col(0) << 0, 0, 1;
      dirs.col(1) << 0, 0, -1;
    } else {
      const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
      for (Eigen::Index i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double a = golden * static_cast<double>(i);
        dirs.col(i) << rho * std::cos(a), rho * std::sin(a), z;
      }
    }
    dirs = detail::random_rotation(seed) * dirs;
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd v(dim);
      do {
        for (int c = 0; c < dim; ++c) v(c) = g(rng);
      } while (v.norm() < 1e-8);
      dirs.col(i) = v / v.norm();
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) dirs.col(i).normalize();

  NodeSet out;
  out.points = (radius * dirs).colwise() + center;
  const double area = detail::unit_sphere_area(dim) * std::pow(radius, dim - 1) / static_cast<double>(n);
  out.cells = SurfaceCells{Eigen::VectorXd::Constant(n, area), dirs, dim - 1};
  return out;
}

// Surface of revolution x2^2 + x3^2 = exp(-2 x1^r) over x1 in [x1_min, x1_max].
// Nodes follow a spiral that is uniform in meridian arc length and angle.
inline NodeSet sample_revolution_surface(double r_exponent, double x1_min, double x1_max, Eigen::Index n,
                                         std::uint64_t seed = kDefaultSeed) {
  if (!(r_exponent > 1.0)) throw InvalidArgument("revolution surface needs r_exponent > 1");
  if (!(x1_min >= 1.0)) throw InvalidArgument("revolution surface needs x1_min >= 1");
  if (!(x1_max > x1_min) || !std::isfinite(x1_max)) throw InvalidArgument("revolution surface needs x1_max > x1_min");
  if (n < 2) throw InvalidArgument("revolution surface needs at least 2 nodes");

  auto rho = [&](double x) { return std::exp(-std::pow(x, r_exponent)); };
  auto drho = [&](double x) { return -r_exponent * std::pow(x, r_exponent - 1.0) * rho(x); };

  // cumulative meridian arc length on a fine grid
  const int grid = 20000;
  std::vector<double> xs(grid + 1), arc(grid + 1, 0.0);
  for (int k = 0; k <= grid; ++k) xs[k] = x1_min + (x1_max - x1_min) * k / grid;
  for (int k = 1; k <= grid; ++k) {
    const double a = std::hypot(1.0, drho(xs[k - 1])), b = std::hypot(1.0, drho(xs[k]));
    arc[k] = arc[k - 1] + 0.5 * (a + b) * (xs[k] - xs[k - 1]);
  }
  const double length = arc[grid];

  std::mt19937_64 rng(seed);
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));

  NodeSet out;
  out.points.resize(3, n);
  SurfaceCells cells{Eigen::VectorXd(n), PointSet(3, n), 2};
  int seg = 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double target = length * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    while (seg < grid && arc[seg] < target) ++seg;
    const double f = (target - arc[seg - 1]) / (arc[seg] - arc[seg - 1]);
    const double x = std::clamp(xs[seg - 1] + f * (xs[seg] - xs[seg - 1]), x1_min, x1_max);
    const double r = rho(x);
    const double a = phase + golden * static_cast<double>(i);
    out.points.col(i) << x, r * std::cos(a), r * std::sin(a);
    Eigen::Vector3d nrm(-drho(x), std::cos(a), std::sin(a));
    cells.normal.col(i) = nrm.normalized();
    cells.area(i) = 2.0 * std::numbers::pi * r * length / static_cast<double>(n);
  }
  out.cells = std::move(cells);
  return out;
}

// Whitespace separated coordinates, one node per line, '#' starts a comment.
inline PointSet read_point_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open point cloud " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
      }
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": inconsistent dimension");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidArgument("point cloud " + path.string() + " is empty");
  PointSet pts(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t c = 0; c < rows[j].size(); ++c) pts(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = rows[j][c];
  if (!pts.allFinite()) throw InvalidArgument("point cloud has non-finite coordinates");
  return pts;
}

// Cell area from the 6th neighbour distance, normal from a local PCA
// oriented away from the centroid.
inline SurfaceCells estimate_cells(const PointSet& pts) {
  const int dim = static_cast<int>(pts.rows());
  const Eigen::Index n = pts.cols();
  const int m = dim - 1;
  if (n < dim + 1) throw InvalidArgument("too few nodes to estimate surface cells");
  const Eigen::Index k_area = std::min<Eigen::Index>(6, n - 1);
  const Eigen::Index k_pca = std::min<Eigen::Index>(std::max(8, dim + 2), n - 1);
  const Eigen::VectorXd centroid = pts.rowwise().mean();
  SurfaceCells cells{Eigen::VectorXd(n), PointSet(dim, n), m};
  parallel_for(n, [&](Eigen::Index lo, Eigen::Index hi) {
    std::vector<std::pair<double, Eigen::Index>> d(static_cast<std::size_t>(n));
    for (Eigen::Index i = lo; i < hi; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) d[static_cast<std::size_t>(j)] = {(pts.col(i) - pts.col(j)).squaredNorm(), j};
      std::partial_sort(d.begin(), d.begin() + k_pca + 1, d.end());
      const double rk = std::sqrt(d[static_cast<std::size_t>(k_area)].first);
      // ball volume in m dimensions holding k_area nodes
      const double ball = std::pow(std::numbers::pi, 0.5 * m) / std::tgamma(0.5 * m + 1.0) * std::pow(rk, m);
      cells.area(i) = ball / static_cast<double>(k_area);
      Eigen::MatrixXd local(dim, k_pca + 1);
      for (Eigen::Index q = 0; q <= k_pca; ++q) local.col(q) = pts.col(d[static_cast<std::size_t>(q)].second);
      Eigen::MatrixXd centred = local.colwise() - local.rowwise().mean();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(centred * centred.transpose());
      Eigen::VectorXd nrm = es.eigenvectors().col(0);
      if (nrm.dot(pts.col(i) - centroid) < 0) nrm = -nrm;
      cells.normal.col(i) = nrm;
    }
  });
  return cells;
}

struct SphereShape {
  Point center;
  double radius = 1.0;
};
struct RevolutionShape {
  double r_exponent = 2.0;
  double x1_min = 1.0;
  double x1_max = 4.0;
};
struct PointCloudShape {
  std::filesystem::path path;
};

struct PlateSpec {
  std::variant<SphereShape, RevolutionShape, PointCloudShape> shape;
  int sign = 1;
  Eigen::Index node_count = 0;
  std::optional<std::uint64_t> seed;
};

struct Plate {
  int sign = 1;
  NodeSet nodes;

  Eigen::Index size() const { return nodes.size(); }
};

class Condenser {
 public:
  Condenser() = default;
  explicit Condenser(std::vector<Plate> plates) : plates_(std::move(plates)) { validate(); }

  const std::vector<Plate>& plates() const { return plates_; }
  const Plate& plate(std::size_t i) const { return plates_.at(i); }
  std::size_t plate_count() const { return plates_.size(); }
  int dim() const { return plates_.empty() ? 0 : plates_.front().nodes.dim(); }
  Eigen::Index total_nodes() const {
    Eigen::Index t = 0;
    for (const auto& p : plates_) t += p.size();
    return t;
  }
  Eigen::Index offset(std::size_t i) const {
    Eigen::Index t = 0;
    for (std::size_t q = 0; q < i; ++q) t += plates_[q].size();
    return t;
  }
  // Smallest distance between nodes of oppositely signed plates.
  double min_cross_sign_distance() const { return min_cross_; }

 private:
  void validate() {
    if (plates_.empty()) throw InvalidArgument("condenser needs at least one plate");
    const int dim = plates_.front().nodes.dim();
    for (std::size_t i = 0; i < plates_.size(); ++i) {
      const Plate& p = plates_[i];
      if (p.sign != 1 && p.sign != -1) throw InvalidArgument("plate sign must be +1 or -1");
      if (p.size() < 1) throw InvalidArgument("plate " + std::to_string(i) + " has no nodes");
      if (p.nodes.dim() != dim) throw InvalidArgument("plates have different dimensions");
      if (!p.nodes.points.allFinite()) throw InvalidArgument("plate has non-finite coordinates");
      check_distinct(p.nodes.points);
    }
    min_cross_ = kInf;
    for (std::size_t i = 0; i < plates_.size(); ++i)
      for (std::size_t j = i + 1; j < plates_.size(); ++j) {
        if (plates_[i].sign == plates_[j].sign) continue;
        const PointSet& a = plates_[i].nodes.points;
        const PointSet& b = plates_[j].nodes.points;
        for (Eigen::Index q = 0; q < b.cols(); ++q) {
          const double d = std::sqrt((a.colwise() - b.col(q)).colwise().squaredNorm().minCoeff());
          if (d < kCoincidenceTol)
            throw CoincidenceError("plates " + std::to_string(i) + " and " + std::to_string(j) +
                                   " have opposite signs but share a node");
          min_cross_ = std::min(min_cross_, d);
        }
      }
  }

  std::vector<Plate> plates_;
  double min_cross_ = kInf;
};

inline NodeSet sample_plate(const PlateSpec& spec, std::uint64_t seed) {
  return std::visit(
      [&](const auto& s) -> NodeSet {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SphereShape>) {
          return sample_sphere(s.center, s.radius, spec.node_count, seed);
        } else if constexpr (std::is_same_v<T, RevolutionShape>) {
          return sample_revolution_surface(s.r_exponent, s.x1_min, s.x1_max, spec.node_count, seed);
        } else {
          NodeSet ns;
          ns.points = read_point_cloud(s.path);
          if (spec.node_count > 0 && spec.node_count != ns.size())
            throw InvalidArgument("point cloud " + s.path.string() + " has " + std::to_string(ns.size()) +
                                  " nodes, expected " + std::to_string(spec.node_count));
          ns.cells = estimate_cells(ns.points);
          return ns;
        }
      },
      spec.shape);
}

// Plate i is sampled with seed + i unless it carries its own seed.
inline Condenser build_condenser(const std::vector<PlateSpec>& specs, std::uint64_t seed = kDefaultSeed) {
  std::vector<Plate> plates;
  plates.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    plates.push_back(Plate{s.sign, sample_plate(s, s.seed.value_or(seed + i))});
  }
  return Condenser(std::move(plates));
}

}  // namespace riesz
