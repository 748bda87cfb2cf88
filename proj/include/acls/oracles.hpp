#ifndef ACLS_ORACLES_HPP
#define ACLS_ORACLES_HPP

#include "acls/numeric.hpp"
#include "acls/problem.hpp"

#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace acls {

enum class OracleKind { Sgd, MiniBatch, Exact, ExactAdditive, RunningAverage };

inline const char* to_string(OracleKind k) {
  switch (k) {
    case OracleKind::Sgd: return "sgd";
    case OracleKind::MiniBatch: return "minibatch";
    case OracleKind::Exact: return "exact";
    case OracleKind::ExactAdditive: return "exact_additive";
    case OracleKind::RunningAverage: return "running_average";
  }
  return "unknown";
}

inline OracleKind oracle_kind_from_string(const std::string& s) {
  if (s == "sgd") return OracleKind::Sgd;
  if (s == "minibatch") return OracleKind::MiniBatch;
  if (s == "exact") return OracleKind::Exact;
  if (s == "exact_additive") return OracleKind::ExactAdditive;
  if (s == "running_average") return OracleKind::RunningAverage;
  throw std::invalid_argument("unknown oracle kind '" + s + "'");
}

struct OracleSpec {
  OracleKind kind = OracleKind::Sgd;
  int batch_size = 1;       // MiniBatch only
  double noise_std = 0.0;   // ExactAdditive only
};

/// Rank-one stochastic gradient a (<a, x> - b).
inline void sgd_gradient(const Sample& s, const Vector& x, Vector& out) {
  require_dimension(x.size(), s.features.size(), "sgd_gradient");
  out.noalias() = (s.features.dot(x) - s.response) * s.features;
}

inline Vector sgd_gradient(const Sample& s, const Vector& x) {
  Vector g(x.size());
  sgd_gradient(s, x, g);
  return g;
}

/// Mean of per-sample rank-one gradients over a non-empty batch.
inline void minibatch_gradient(std::span<const Sample> batch, const Vector& x, Vector& out) {
  if (batch.empty()) throw std::invalid_argument("minibatch_gradient: empty batch");
  out.setZero(x.size());
  for (const Sample& s : batch) {
    require_dimension(x.size(), s.features.size(), "minibatch_gradient");
    out.noalias() += (s.features.dot(x) - s.response) * s.features;
  }
  out /= static_cast<double>(batch.size());
}

inline Vector minibatch_gradient(std::span<const Sample> batch, const Vector& x) {
  Vector g;
  minibatch_gradient(batch, x, g);
  return g;
}

/// H (x - x*) + zeta with zeta ~ N(0, noise_std^2 I).
inline Vector exact_gradient(const LeastSquaresProblem& problem, const Vector& x, double additive_noise_std, Rng& rng) {
  require_dimension(x.size(), problem.dimension(), "exact_gradient");
  if (!(additive_noise_std >= 0.0)) throw std::invalid_argument("exact_gradient: noise std must be >= 0");
  Vector g = problem.covariance() * (x - problem.optimum());
  if (additive_noise_std > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) += additive_noise_std * normal(rng);
  }
  return g;
}

/// Gradient estimate (1/(t+1)) sum_{i<=t} a_i (<a_i, x> - b_i) over every
/// sample seen so far, kept as the O(d^2) sufficient statistics
/// H_hat = mean a a^T and g_hat = mean b a. Single writer.
class RunningAverageOracle {
 public:
  explicit RunningAverageOracle(int d) : second_moment_(Matrix::Zero(d, d)), cross_moment_(Vector::Zero(d)) {}

  void ingest(const Sample& s) {
    require_dimension(s.features.size(), second_moment_.rows(), "RunningAverageOracle::ingest");
    ++count_;
    const double w = 1.0 / static_cast<double>(count_);
    second_moment_ *= (1.0 - w);
    second_moment_.selfadjointView<Eigen::Lower>().rankUpdate(s.features, w);
    cross_moment_ += w * (s.response * s.features - cross_moment_);
  }

  void gradient(const Vector& x, Vector& out) const {
    out.noalias() = second_moment_.selfadjointView<Eigen::Lower>() * x;
    out -= cross_moment_;
  }

  /// Ingests new_sample, then returns the running-average gradient at x.
  Vector gradient(const Sample& new_sample, const Vector& x) {
    ingest(new_sample);
    Vector g(x.size());
    gradient(x, g);
    return g;
  }

  long long count() const { return count_; }
  Matrix second_moment() const { return second_moment_.selfadjointView<Eigen::Lower>(); }
  const Vector& cross_moment() const { return cross_moment_; }

 private:
  Matrix second_moment_;  // lower triangle is authoritative
  Vector cross_moment_;
  long long count_ = 0;
};

}  // namespace acls

#endif  // ACLS_ORACLES_HPP
