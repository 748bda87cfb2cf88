#ifndef ACLS_PROBLEM_HPP
#define ACLS_PROBLEM_HPP

#include "acls/numeric.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace acls {

using Rng = std::mt19937_64;

enum class FeatureKind { Gaussian, OneHot };

inline const char* to_string(FeatureKind k) { return k == FeatureKind::Gaussian ? "gaussian" : "one_hot"; }

struct Sample {
  Vector features;
  double response = 0.0;
};

/// Streaming least-squares problem: features a with E[a a^T] = H, responses
/// b = <a, x*> + sigma * eta with eta standard normal and independent of a.
///
/// Immutable after construction. Two feature laws are supported because both
/// have closed-form moment constants: centred Gaussian with covariance H, and
/// the one-hot law a = e_i with probability p_i.
class LeastSquaresProblem {
 public:
  FeatureKind kind() const { return kind_; }
  int dimension() const { return static_cast<int>(optimum_.size()); }
  const Matrix& covariance() const { return covariance_; }
  const Vector& optimum() const { return optimum_; }
  const Vector& start() const { return start_; }
  double noise_std() const { return noise_std_; }
  /// Eigenvalues of H; column i of eigenvectors() is the matching unit eigenvector.
  const Vector& eigenvalues() const { return eigenvalues_; }
  const Matrix& eigenvectors() const { return eigenvectors_; }
  /// One-hot atom probabilities (empty for Gaussian problems).
  const Vector& probabilities() const { return probabilities_; }
  /// E * diag(sqrt(lambda)); a Gaussian feature is sampling_factor() * g.
  const Matrix& sampling_factor() const { return sampling_factor_; }

  double trace() const { return covariance_.trace(); }
  double largest_eigenvalue() const { return eigenvalues_.maxCoeff(); }

  friend LeastSquaresProblem make_gaussian_problem(int, double, double, double, std::uint64_t);
  friend LeastSquaresProblem make_one_hot_problem(const Vector&, const Vector&, double);

 private:
  FeatureKind kind_ = FeatureKind::Gaussian;
  Matrix covariance_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
  Matrix sampling_factor_;
  Vector optimum_;
  Vector start_;
  Vector probabilities_;
  double noise_std_ = 0.0;
};

/// Gaussian features with spectrum lambda_i = scale / i^decay in a seeded
/// Haar-random eigenbasis. x* projects equally on every eigenvector and sits at
/// unit distance from the zero start.
inline LeastSquaresProblem make_gaussian_problem(int d, double decay_exponent, double scale, double sigma,
                                                 std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("make_gaussian_problem: dimension must be >= 1");
  if (!(decay_exponent >= 0.0)) throw std::invalid_argument("make_gaussian_problem: decay_exponent must be >= 0");
  if (!(scale > 0.0)) throw std::invalid_argument("make_gaussian_problem: scale must be > 0");
  if (!(sigma >= 0.0)) throw std::invalid_argument("make_gaussian_problem: sigma must be >= 0");

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) g(i, j) = normal(rng);

  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  // Column signs do not change H; orient them so x* below is well defined.
  for (int j = 0; j < d; ++j) {
    if (q.col(j).sum() < 0.0) q.col(j) *= -1.0;
  }

  Vector lambda(d);
  for (int i = 0; i < d; ++i) lambda(i) = scale / std::pow(static_cast<double>(i + 1), decay_exponent);

  LeastSquaresProblem p;
  p.kind_ = FeatureKind::Gaussian;
  p.eigenvalues_ = lambda;
  p.eigenvectors_ = q;
  p.covariance_ = q * lambda.asDiagonal() * q.transpose();
  p.covariance_ = 0.5 * (p.covariance_ + p.covariance_.transpose());
  p.sampling_factor_ = q * lambda.cwiseSqrt().asDiagonal();
  p.start_ = Vector::Zero(d);
  p.optimum_ = q * Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  p.noise_std_ = sigma;
  return p;
}

/// One-hot features a = e_i with probability p_i. x* = start + (1/sqrt d) * 1,
/// so ||x* - start||^2 = 1. sigma defaults to 0 (noiseless).
inline LeastSquaresProblem make_one_hot_problem(const Vector& probabilities, const Vector& start, double sigma = 0.0) {
  const Eigen::Index d = probabilities.size();
  if (d < 1) throw std::invalid_argument("make_one_hot_problem: dimension must be >= 1");
  require_dimension(start.size(), d, "make_one_hot_problem(start)");
  if (!(probabilities.array() > 0.0).all())
    throw std::invalid_argument("make_one_hot_problem: probabilities must be strictly positive");
  if (std::abs(probabilities.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("make_one_hot_problem: probabilities must sum to 1");
  if (!(sigma >= 0.0)) throw std::invalid_argument("make_one_hot_problem: sigma must be >= 0");

  LeastSquaresProblem p;
  p.kind_ = FeatureKind::OneHot;
  p.probabilities_ = probabilities;
  p.eigenvalues_ = probabilities;
  p.eigenvectors_ = Matrix::Identity(d, d);
  p.covariance_ = probabilities.asDiagonal();
  p.sampling_factor_ = probabilities.cwiseSqrt().asDiagonal();
  p.start_ = start;
  p.optimum_ = start + Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  p.noise_std_ = sigma;
  return p;
}

inline LeastSquaresProblem make_uniform_one_hot_problem(int d, double sigma = 0.0) {
  if (d < 1) throw std::invalid_argument("make_uniform_one_hot_problem: dimension must be >= 1");
  return make_one_hot_problem(Vector::Constant(d, 1.0 / d), Vector::Zero(d), sigma);
}

/// Stateful sampler over a problem. Holds the random stream plus scratch
/// buffers so the hot loop does not allocate. Deterministic given the seed.
class SampleStream {
 public:
  SampleStream(const LeastSquaresProblem& problem, std::uint64_t seed)
      : problem_(&problem), rng_(seed), scratch_(problem.dimension()) {
    if (problem.kind() == FeatureKind::OneHot) {
      const Vector& p = problem.probabilities();
      atoms_ = std::discrete_distribution<int>(p.data(), p.data() + p.size());
    }
  }

  void next(Sample& out) {
    const int d = problem_->dimension();
    if (problem_->kind() == FeatureKind::Gaussian) {
      for (int i = 0; i < d; ++i) scratch_(i) = normal_(rng_);
      out.features.noalias() = problem_->sampling_factor() * scratch_;
    } else {
      out.features.setZero(d);
      last_atom_ = atoms_(rng_);
      out.features(last_atom_) = 1.0;
    }
    out.response = out.features.dot(problem_->optimum());
    if (problem_->noise_std() > 0.0) out.response += problem_->noise_std() * normal_(rng_);
  }

  Sample next() {
    Sample s;
    next(s);
    return s;
  }

  /// Index of the last one-hot atom drawn (-1 for Gaussian streams).
  int last_atom() const { return last_atom_; }
  Rng& rng() { return rng_; }

 private:
  const LeastSquaresProblem* problem_;
  Rng rng_;
  Vector scratch_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::discrete_distribution<int> atoms_;
  int last_atom_ = -1;
};

/// Draws one sample using a caller-owned stream.
inline Sample sample(const LeastSquaresProblem& problem, Rng& rng) {
  const int d = problem.dimension();
  std::normal_distribution<double> normal(0.0, 1.0);
  Sample s;
  if (problem.kind() == FeatureKind::Gaussian) {
    Vector g(d);
    for (int i = 0; i < d; ++i) g(i) = normal(rng);
    s.features = problem.sampling_factor() * g;
  } else {
    const Vector& p = problem.probabilities();
    std::discrete_distribution<int> atoms(p.data(), p.data() + p.size());
    s.features = Vector::Zero(d);
    s.features(atoms(rng)) = 1.0;
  }
  s.response = s.features.dot(problem.optimum());
  if (problem.noise_std() > 0.0) s.response += problem.noise_std() * normal(rng);
  return s;
}

/// R(x) - R(x*) = 1/2 (x - x*)^T H (x - x*).
inline double excess_risk(const LeastSquaresProblem& problem, const Vector& x) {
  require_dimension(x.size(), problem.dimension(), "excess_risk");
  const Vector diff = x - problem.optimum();
  if (problem.kind() == FeatureKind::OneHot)
    return 0.5 * (diff.array().square() * problem.probabilities().array()).sum();
  return 0.5 * diff.dot(problem.covariance() * diff);
}

struct ProblemConstants {
  double r_squared = 0.0;       // E[|a|^2 a a^T] <= R^2 H
  double stat_condition = 0.0;  // E[|a|^2_{H^-1} a a^T] <= kappa_tilde H
  double kurtosis = 0.0;        // E[<a, M a> a a^T] <= kappa tr(M H) H
  double l_smooth = 0.0;
  double trace_h = 0.0;
  double noise_var = 0.0;
  int dimension = 0;
};

inline ProblemConstants constants(const LeastSquaresProblem& problem) {
  ProblemConstants c;
  c.dimension = problem.dimension();
  c.l_smooth = problem.largest_eigenvalue();
  c.trace_h = problem.trace();
  c.noise_var = problem.noise_std() * problem.noise_std();
  if (problem.kind() == FeatureKind::Gaussian) {
    // Isserlis: E[a a^T M a a^T] = H M H + H M^T H + tr(M H) H.
    c.r_squared = c.trace_h + 2.0 * c.l_smooth;
    c.stat_condition = static_cast<double>(c.dimension) + 2.0;
    c.kurtosis = 3.0;
  } else {
    const double p_min = problem.probabilities().minCoeff();
    c.r_squared = 1.0;
    c.stat_condition = 1.0 / p_min;
    c.kurtosis = 1.0 / p_min;
  }
  return c;
}

}  // namespace acls

#endif  // ACLS_PROBLEM_HPP
