#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <variant>
#include <vector>

#include "riesz/geometry.hpp"

namespace riesz {

// One nonnegative weight vector per plate, in plate node order.
struct DiscreteVectorMeasure {
  std::vector<Eigen::VectorXd> components;

  std::size_t plate_count() const { return components.size(); }
  Eigen::VectorXd flatten() const {
    Eigen::Index n = 0;
    for (const auto& c : components) n += c.size();
    Eigen::VectorXd out(n);
    Eigen::Index o = 0;
    for (const auto& c : components) {
      out.segment(o, c.size()) = c;
      o += c.size();
    }
    return out;
  }
  static DiscreteVectorMeasure unflatten(const Condenser& cond, const Eigen::VectorXd& x) {
    if (x.size() != cond.total_nodes()) throw InvalidArgument("vector length does not match condenser");
    DiscreteVectorMeasure out;
    Eigen::Index o = 0;
    for (const auto& p : cond.plates()) {
      out.components.push_back(x.segment(o, p.size()));
      o += p.size();
    }
    return out;
  }
  void check(const Condenser& cond) const {
    if (components.size() != cond.plate_count()) throw InvalidArgument("measure has wrong plate count");
    for (std::size_t i = 0; i < components.size(); ++i) {
      if (components[i].size() != cond.plate(i).size()) throw InvalidArgument("measure component has wrong length");
      if (!components[i].allFinite()) throw InvalidArgument("measure has non-finite weights");
      if ((components[i].array() < 0.0).any()) throw InvalidArgument("measure component has a negative weight");
    }
  }
};

// Field given by values on the condenser nodes (+inf allowed).
struct NodeField {
  std::vector<Eigen::VectorXd> values;
};
// Field f_i = s_i k * zeta for a signed measure zeta.
struct RieszField {
  SignedDiscreteMeasure zeta;
};
using ExternalField = std::variant<std::monostate, NodeField, RieszField>;

struct ProblemSpec {
  std::vector<double> mass;                            // a_i
  std::vector<Eigen::VectorXd> gauge;                  // g_i
  std::vector<std::optional<Eigen::VectorXd>> caps;    // sigma^i, empty = unbounded
  ExternalField field;

  // a_i = 1, g_i = 1, no caps, no field.
  static ProblemSpec standard(const Condenser& cond) {
    ProblemSpec s;
    for (const auto& p : cond.plates()) {
      s.mass.push_back(1.0);
      s.gauge.push_back(Eigen::VectorXd::Ones(p.size()));
      s.caps.emplace_back();
    }
    return s;
  }
  bool unconstrained() const {
    for (const auto& c : caps)
      if (c) return false;
    return true;
  }
};

// Checks shapes and signs; throws InfeasibleError if caps cannot carry the mass.
inline void validate(const Condenser& cond, const ProblemSpec& spec, const std::vector<Eigen::VectorXd>* f = nullptr) {
  const std::size_t m = cond.plate_count();
  if (spec.mass.size() != m || spec.gauge.size() != m || spec.caps.size() != m)
    throw InvalidArgument("problem spec does not match plate count");
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::Index n = cond.plate(i).size();
    if (!(spec.mass[i] > 0.0) || !std::isfinite(spec.mass[i])) throw InvalidArgument("plate mass must be positive");
    if (spec.gauge[i].size() != n) throw InvalidArgument("gauge has wrong length");
    if (!spec.gauge[i].allFinite() || !(spec.gauge[i].minCoeff() > 0.0))
      throw InvalidArgument("gauge must be positive and finite");
    if (spec.caps[i]) {
      const auto& c = *spec.caps[i];
      if (c.size() != n) throw InvalidArgument("caps have wrong length");
      if (!c.allFinite() || !(c.minCoeff() > 0.0)) throw InvalidArgument("caps must be positive and finite");
      double room = 0.0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (!f || std::isfinite((*f)[i](j))) room += spec.gauge[i](j) * c(j);
      if (room < spec.mass[i] * (1.0 - 1e-12)) throw InfeasibleError(i, spec.mass[i] - room);
    } else if (f) {
      if (!((*f)[i].array().isFinite()).any()) throw InfeasibleError(i, spec.mass[i]);
    }
  }
}

// Q = S K S over all condenser nodes, S the plate signs.
class SignedGram {
 public:
  SignedGram(const Condenser& cond, const RieszKernel& k, const DiagonalPolicy& diag) : diag_(diag) {
    if (cond.dim() != k.dim()) throw InvalidArgument("condenser and kernel dimensions differ");
    const Eigen::Index n = cond.total_nodes();
    detail::EntryRule rule(k, diag);
    std::vector<detail::Site> sites;
    sign_.resize(n);
    for (std::size_t i = 0; i < cond.plate_count(); ++i) {
      const auto& p = cond.plate(i);
      auto s = rule.sites(p.nodes.points, p.nodes.cells);
      sign_.segment(cond.offset(i), p.size()).setConstant(p.sign);
      sites.insert(sites.end(), s.begin(), s.end());
    }
    q_.resize(n, n);
    parallel_for(n, [&](Eigen::Index lo, Eigen::Index hi) {
      for (Eigen::Index j = lo; j < hi; ++j)
        for (Eigen::Index i = 0; i <= j; ++i)
          q_(i, j) = sign_(i) * sign_(j) * rule(sites[static_cast<std::size_t>(i)], sites[static_cast<std::size_t>(j)]);
    });
    q_.triangularView<Eigen::StrictlyLower>() = q_.transpose();
    if (!q_.allFinite()) throw InvalidArgument("Gram matrix has infinite entries; the diagonal policy needs cells");
  }

  const Eigen::MatrixXd& matrix() const { return q_; }
  const Eigen::VectorXd& signs() const { return sign_; }
  const DiagonalPolicy& policy() const { return diag_; }
  Eigen::Index size() const { return q_.rows(); }

 private:
  Eigen::MatrixXd q_;
  Eigen::VectorXd sign_;
  DiagonalPolicy diag_;
};

// Field values on every plate node. +inf marks nodes that must stay empty.
inline std::vector<Eigen::VectorXd> resolve_field(const Condenser& cond, const ExternalField& field,
                                                  const RieszKernel& k, const DiagonalPolicy& diag) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t i = 0; i < cond.plate_count(); ++i) {
    const auto& p = cond.plate(i);
    if (std::holds_alternative<std::monostate>(field)) {
      out.push_back(Eigen::VectorXd::Zero(p.size()));
    } else if (const auto* nf = std::get_if<NodeField>(&field)) {
      if (nf->values.size() != cond.plate_count() || nf->values[i].size() != p.size())
        throw InvalidArgument("node field has wrong shape");
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        const double v = nf->values[i](j);
        if (std::isnan(v) || v == -kInf) throw InvalidArgument("node field must be finite or +inf");
      }
      out.push_back(nf->values[i]);
    } else {
      const auto& z = std::get<RieszField>(field).zeta;
      if (z.weights.size() != z.points.cols()) throw InvalidArgument("field measure is malformed");
      Eigen::MatrixXd kz = kernel_matrix(k, p.nodes, z.nodes(), diag);
      Eigen::VectorXd v(p.size());
      for (Eigen::Index r = 0; r < p.size(); ++r) {
        double acc = 0.0;
        for (Eigen::Index c = 0; c < z.size(); ++c)
          if (z.weights(c) != 0.0) acc += kz(r, c) * z.weights(c);
        v(r) = p.sign * acc;
      }
      if (v.array().isNaN().any() || (v.array() == -kInf).any())
        throw InvalidArgument("field measure puts negative mass on a plate node");
      out.push_back(v);
    }
  }
  return out;
}

// Plate fields stacked in node order; W = Q x + f.
inline Eigen::VectorXd flatten_field(const Condenser& cond, const std::vector<Eigen::VectorXd>& f) {
  Eigen::VectorXd out(cond.total_nodes());
  for (std::size_t i = 0; i < cond.plate_count(); ++i) out.segment(cond.offset(i), f[i].size()) = f[i];
  return out;
}

// R mu = sum_i s_i mu^i, merging coincident nodes of like-signed plates.
inline SignedDiscreteMeasure resultant(const Condenser& cond, const DiscreteVectorMeasure& mu) {
  mu.check(cond);
  SignedDiscreteMeasure out;
  for (std::size_t i = 0; i < cond.plate_count(); ++i) {
    const auto& p = cond.plate(i);
    SignedDiscreteMeasure part(p.nodes, cond.plate(i).sign * mu.components[i]);
    out = (i == 0) ? part : combine(out, part);
  }
  return out;
}

inline double quadratic(const SignedGram& q, const Eigen::VectorXd& x) { return x.dot(q.matrix() * x); }

inline double vector_energy(const SignedGram& q, const Condenser& cond, const DiscreteVectorMeasure& mu) {
  mu.check(cond);
  return quadratic(q, mu.flatten());
}
inline double vector_energy(const Condenser& cond, const DiscreteVectorMeasure& mu, const RieszKernel& k,
                            const DiagonalPolicy& diag = {}) {
  return vector_energy(SignedGram(cond, k, diag), cond, mu);
}

// ||R mu - R nu||; the squared form may be slightly negative from rounding only.
inline double semimetric(const SignedGram& q, const Condenser& cond, const DiscreteVectorMeasure& mu,
                         const DiscreteVectorMeasure& nu) {
  mu.check(cond);
  nu.check(cond);
  const double r = quadratic(q, mu.flatten() - nu.flatten());
  if (r < -1e-10) throw NotPositiveDefinite(r);
  return std::sqrt(std::max(0.0, r));
}
inline double semimetric(const Condenser& cond, const DiscreteVectorMeasure& mu, const DiscreteVectorMeasure& nu,
                         const RieszKernel& k, const DiagonalPolicy& diag = {}) {
  return semimetric(SignedGram(cond, k, diag), cond, mu, nu);
}

// ||zeta||^2 under the same entry rule; used for the Case II lower bound.
inline double field_self_energy(const ExternalField& field, const RieszKernel& k, const DiagonalPolicy& diag) {
  if (const auto* rf = std::get_if<RieszField>(&field)) return energy(k, rf->zeta, diag);
  return 0.0;
}

inline double gauss_energy(const SignedGram& q, const Condenser& cond, const DiscreteVectorMeasure& mu,
                           const std::vector<Eigen::VectorXd>& f) {
  mu.check(cond);
  const Eigen::VectorXd x = mu.flatten();
  const Eigen::VectorXd fx = flatten_field(cond, f);
  double lin = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) == 0.0) continue;
    if (!std::isfinite(fx(j))) return kInf;
    lin += fx(j) * x(j);
  }
  return x.dot(q.matrix() * x) + 2.0 * lin;
}
inline double gauss_energy(const Condenser& cond, const DiscreteVectorMeasure& mu, const ProblemSpec& spec,
                           const RieszKernel& k, const DiagonalPolicy& diag = {}) {
  SignedGram q(cond, k, diag);
  return gauss_energy(q, cond, mu, resolve_field(cond, spec.field, k, diag));
}

// Weighted potential W^i = s_i k * R mu + f_i on plate i.
inline Eigen::VectorXd weighted_potential(const SignedGram& q, const Condenser& cond, const DiscreteVectorMeasure& mu,
                                          const std::vector<Eigen::VectorXd>& f, std::size_t plate) {
  mu.check(cond);
  if (plate >= cond.plate_count()) throw InvalidArgument("plate index out of range");
  const Eigen::Index o = cond.offset(plate), n = cond.plate(plate).size();
  const Eigen::VectorXd qx = q.matrix().middleRows(o, n) * mu.flatten();
  return qx + f[plate];
}
inline Eigen::VectorXd weighted_potential(const Condenser& cond, const DiscreteVectorMeasure& mu,
                                          const ProblemSpec& spec, const RieszKernel& k, std::size_t plate,
                                          const DiagonalPolicy& diag = {}) {
  SignedGram q(cond, k, diag);
  return weighted_potential(q, cond, mu, resolve_field(cond, spec.field, k, diag), plate);
}

}  // namespace riesz
