#include <gtest/gtest.h>

#include <random>

#include "riesz/kelvin.hpp"
#include "riesz/problems.hpp"

using namespace riesz;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

Point random_point(std::mt19937_64& rng, double spread = 2.0) {
  std::normal_distribution<double> g(0.0, spread);
  return point3(g(rng), g(rng), g(rng));
}

SignedDiscreteMeasure random_measure(std::mt19937_64& rng, int n, bool positive) {
  std::normal_distribution<double> g;
  SignedDiscreteMeasure m(PointSet(3, n), Eigen::VectorXd(n));
  for (int j = 0; j < n; ++j) {
    m.points.col(j) = random_point(rng);
    m.weights(j) = positive ? std::abs(g(rng)) : g(rng);
  }
  return m;
}

}  // namespace

TEST(Inversion, Examples) {
  EXPECT_TRUE(invert_point(point3(2), point3(0)).isApprox(point3(0.5)));
  const Point x0 = point3(1, -2, 0.5);
  const Point on = x0 + Eigen::Vector3d(0.6, 0.0, 0.8);
  EXPECT_LE((invert_point(on, x0) - on).norm(), 1e-15);
  EXPECT_THROW(invert_point(x0, x0), InvalidArgument);
}

TEST(Inversion, DistanceIdentity) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const Point x0 = random_point(rng), x = random_point(rng), y = random_point(rng);
    const double lhs = (invert_point(x, x0) - invert_point(y, x0)).norm();
    const double rhs = (x - y).norm() / ((x - x0).norm() * (y - x0).norm());
    EXPECT_LE(rel(lhs, rhs), 1e-12);
  }
}

TEST(Kelvin, DiracExample) {
  RieszKernel k(2.0, 3);
  const auto m = kelvin_transform(dirac<false>(point3(2)), point3(0), k);
  EXPECT_TRUE(m.points.col(0).isApprox(point3(0.5)));
  EXPECT_DOUBLE_EQ(m.weights(0), 0.5);
  EXPECT_THROW(kelvin_transform(dirac<false>(point3(0)), point3(0), k), InvalidArgument);
}

TEST(Kelvin, InvolutionAndEnergy) {
  std::mt19937_64 rng(2);
  for (double alpha : {0.5, 1.5, 2.0, 2.7}) {
    RieszKernel k(alpha, 3);
    for (int t = 0; t < 25; ++t) {
      const Point x0 = random_point(rng);
      const auto mu = random_measure(rng, 7, false), nu = random_measure(rng, 5, false);
      const auto back = kelvin_transform(kelvin_transform(mu, x0, k), x0, k);
      EXPECT_LE((back.points - mu.points).norm(), 1e-12 * mu.points.norm());
      EXPECT_LE((back.weights - mu.weights).norm(), 1e-12 * mu.weights.norm());
      const double e = mutual_energy(k, mu, nu, DiagonalPolicy::zero());
      const double es = mutual_energy(k, kelvin_transform(mu, x0, k), kelvin_transform(nu, x0, k), DiagonalPolicy::zero());
      EXPECT_LE(std::abs(e - es), 1e-10 * std::max(1.0, std::abs(e)));
    }
  }
}

TEST(Kelvin, Additivity) {
  RieszKernel k(1.5, 3);
  std::mt19937_64 rng(3);
  const auto a = random_measure(rng, 6, true), b = random_measure(rng, 4, true);
  SignedDiscreteMeasure shared = b;
  shared.points.col(0) = a.points.col(2);  // one common node
  const Point x0 = point3(0.1, 0.2, 0.3);
  const auto lhs = kelvin_transform(combine(a, shared), x0, k);
  const auto rhs = combine(kelvin_transform(a, x0, k), kelvin_transform(shared, x0, k));
  ASSERT_EQ(lhs.size(), rhs.size());
  EXPECT_LE((lhs.points - rhs.points).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((lhs.weights - rhs.weights).cwiseAbs().maxCoeff(), 1e-13 * lhs.weights.cwiseAbs().maxCoeff());
}

TEST(Kelvin, CondenserIsometry) {
  RieszKernel k(2.0, 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Condenser c = build_condenser({PlateSpec{SphereShape{point3(0), 1.0}, 1, 30, {}},
                                       PlateSpec{SphereShape{point3(0.3), 2.0}, -1, 40, {}},
                                       PlateSpec{SphereShape{point3(5), 1.0}, 1, 20, {}}});
  auto random_vm = [&] {
    DiscreteVectorMeasure m;
    for (const auto& p : c.plates()) m.components.push_back(Eigen::VectorXd::NullaryExpr(p.size(), [&] { return u(rng); }));
    return m;
  };
  for (int t = 0; t < 20; ++t) {
    const auto mu = random_vm(), nu = random_vm();
    const Point x0 = point3(3, 1.5 * u(rng), u(rng));
    const auto [cs, mus] = kelvin_transform(c, mu, x0, k);
    const auto [cs2, nus] = kelvin_transform(c, nu, x0, k);
    const SignedGram q(c, k, DiagonalPolicy::zero()), qs(cs, k, DiagonalPolicy::zero());
    const double before = quadratic(q, mu.flatten() - nu.flatten());
    const double after = quadratic(qs, mus.flatten() - nus.flatten());
    EXPECT_LE(std::abs(before - after), 1e-10 * std::max(1.0, std::abs(before)));
    EXPECT_EQ(cs.plate(1).sign, -1);
  }
}
