#ifndef ACLS_OPERATOR_LAB_HPP
#define ACLS_OPERATOR_LAB_HPP

#include "acls/algorithms.hpp"
#include "acls/numeric.hpp"
#include "acls/oracles.hpp"
#include "acls/problem.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace acls {

using Matrix2 = Eigen::Matrix2d;
using Complex = std::complex<double>;

/// Dimension cap for the dense 2d x 2d routines below.
constexpr int kOperatorLabMaxDimension = 16;

/// 2d x 2d matrix viewed as a 2 x 2 grid of d x d blocks. Used for the
/// transition mean A, the noise and coefficient matrices and covariances of
/// the stacked rescaled iterates theta = (v, w).
class BlockMatrix2d {
 public:
  BlockMatrix2d() = default;
  explicit BlockMatrix2d(int d) : m_(Matrix::Zero(2 * d, 2 * d)) {}
  explicit BlockMatrix2d(Matrix full) : m_(std::move(full)) {
    if (m_.rows() != m_.cols() || m_.rows() % 2 != 0)
      throw std::invalid_argument("BlockMatrix2d: matrix must be square with even size");
  }

  static BlockMatrix2d from_blocks(const Matrix& tl, const Matrix& tr, const Matrix& bl, const Matrix& br) {
    const Eigen::Index d = tl.rows();
    for (const Matrix* b : {&tl, &tr, &bl, &br}) {
      if (b->rows() != d || b->cols() != d) throw std::invalid_argument("BlockMatrix2d: blocks must be d x d");
    }
    Matrix m(2 * d, 2 * d);
    m << tl, tr, bl, br;
    return BlockMatrix2d(std::move(m));
  }

  /// [[c00 X, c01 X], [c10 X, c11 X]].
  static BlockMatrix2d kron(const Matrix2& c, const Matrix& x) {
    return from_blocks(c(0, 0) * x, c(0, 1) * x, c(1, 0) * x, c(1, 1) * x);
  }

  static BlockMatrix2d identity(int d) { return BlockMatrix2d(Matrix(Matrix::Identity(2 * d, 2 * d))); }

  int d() const { return static_cast<int>(m_.rows() / 2); }
  const Matrix& full() const { return m_; }
  Matrix& full() { return m_; }

  auto block(int i, int j) const { return m_.block(i * d(), j * d(), d(), d()); }
  auto block(int i, int j) { return m_.block(i * d(), j * d(), d(), d()); }
  Matrix top_left() const { return block(0, 0); }
  Matrix top_right() const { return block(0, 1); }
  Matrix bottom_left() const { return block(1, 0); }
  Matrix bottom_right() const { return block(1, 1); }

  bool is_symmetric(double tol = 1e-12) const { return (m_ - m_.transpose()).cwiseAbs().maxCoeff() <= tol; }

  BlockMatrix2d transpose() const { return BlockMatrix2d(Matrix(m_.transpose())); }

  friend BlockMatrix2d operator+(const BlockMatrix2d& a, const BlockMatrix2d& b) {
    require_dimension(a.m_.rows(), b.m_.rows(), "BlockMatrix2d::operator+");
    return BlockMatrix2d(Matrix(a.m_ + b.m_));
  }
  friend BlockMatrix2d operator-(const BlockMatrix2d& a, const BlockMatrix2d& b) {
    require_dimension(a.m_.rows(), b.m_.rows(), "BlockMatrix2d::operator-");
    return BlockMatrix2d(Matrix(a.m_ - b.m_));
  }
  friend BlockMatrix2d operator*(double s, const BlockMatrix2d& a) { return BlockMatrix2d(Matrix(s * a.m_)); }

 private:
  Matrix m_;
};

/// Frobenius inner product <X, Y> = tr(X^T Y).
inline double inner(const BlockMatrix2d& x, const BlockMatrix2d& y) {
  require_dimension(x.full().rows(), y.full().rows(), "inner");
  return (x.full().array() * y.full().array()).sum();
}

inline double min_eigenvalue(const BlockMatrix2d& m) { return min_symmetric_eigenvalue(m.full()); }

/// The 2 x 2 transition Gamma(a, b) = [[1-b, 1-b], [-a, 1-a]] obtained by
/// restricting A to one eigen-direction of H, with a = alpha lambda and
/// b = beta lambda.
class ScalarPairSystem {
 public:
  ScalarPairSystem(double a, double b) : a_(a), b_(b) {
    const Complex half(0.5 * (a + b), 0.0);
    const Complex root = std::sqrt(half * half - Complex(a, 0.0));
    rho_plus_ = 1.0 - half + root;
    rho_minus_ = 1.0 - half - root;
  }

  double a() const { return a_; }
  double b() const { return b_; }

  Matrix2 gamma() const {
    Matrix2 g;
    g << 1.0 - b_, 1.0 - b_, -a_, 1.0 - a_;
    return g;
  }

  /// [[b^2, ab], [ab, a^2]].
  Matrix2 aleph() const {
    Matrix2 m;
    m << b_ * b_, a_ * b_, a_ * b_, a_ * a_;
    return m;
  }

  Complex rho_plus() const { return rho_plus_; }
  Complex rho_minus() const { return rho_minus_; }
  Complex delta() const { return rho_plus_ - rho_minus_; }

  /// True when the discriminant ((a+b)/2)^2 - a is negative.
  bool complex_regime() const {
    const double h = 0.5 * (a_ + b_);
    return h * h - a_ < 0.0;
  }

  double spectral_radius() const { return std::max(std::abs(rho_plus_), std::abs(rho_minus_)); }

  /// nu(t) = [((1 - rho+)^2 rho+^t - (1 - rho-)^2 rho-^t) / delta]^2, evaluated
  /// in complex arithmetic. The imaginary part is returned through residue.
  Complex nu(long long t) const {
    const Complex c_plus = (1.0 - rho_plus_) * (1.0 - rho_plus_);
    const Complex c_minus = (1.0 - rho_minus_) * (1.0 - rho_minus_);
    const double tt = static_cast<double>(t);
    const Complex s = (c_plus * std::pow(rho_plus_, tt) - c_minus * std::pow(rho_minus_, tt)) / delta();
    return s * s;
  }

 private:
  double a_;
  double b_;
  Complex rho_plus_;
  Complex rho_minus_;
};

namespace detail {

inline void require_unit_interval(double a, double b, const char* what) {
  if (!(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0))
    throw std::domain_error(std::string(what) + ": requires 0 < a, b < 1");
}

inline void require_lab_dimension(Eigen::Index d, const char* what) {
  if (d < 1 || d > kOperatorLabMaxDimension)
    throw std::invalid_argument(std::string(what) + ": dimension must be in [1, " +
                                std::to_string(kOperatorLabMaxDimension) + "]");
}

inline void require_one_hot(const LeastSquaresProblem& p, const char* what) {
  if (p.kind() != FeatureKind::OneHot)
    throw std::invalid_argument(std::string(what) + ": exact expectations need a one-hot problem");
  require_lab_dimension(p.dimension(), what);
}

}  // namespace detail

/// Solves X = G X G^T + C for a small square G with spectral radius < 1.
inline Matrix stein_solve(const Matrix& g, const Matrix& c) {
  const Eigen::Index n = g.rows();
  if (g.cols() != n || c.rows() != n || c.cols() != n) throw std::invalid_argument("stein_solve: shape mismatch");
  // vec(G X G^T) = (G kron G) vec(X) with column-major vec.
  Matrix k(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) k.block(i * n, j * n, n, n) = g(i, j) * g;
  const Matrix lhs = Matrix::Identity(n * n, n * n) - k;
  const Vector rhs = Eigen::Map<const Vector>(c.data(), n * n);
  const Vector x = lhs.partialPivLu().solve(rhs);
  return Eigen::Map<const Matrix>(x.data(), n, n);
}

/// sum_{t>=0} Gamma^t aleph (Gamma^t)^T in closed form:
/// 1/(b(4 - (a+2b))) [[2a + b(2b - 3a), a(2b - a)], [a(2b - a), 2a^2]].
inline Matrix2 geometric_series_closed_form(double a, double b) {
  detail::require_unit_interval(a, b, "geometric_series_closed_form");
  const double scale = 1.0 / (b * (4.0 - (a + 2.0 * b)));
  Matrix2 m;
  m << 2.0 * a + b * (2.0 * b - 3.0 * a), a * (2.0 * b - a), a * (2.0 * b - a), 2.0 * a * a;
  return scale * m;
}

/// sum_{t>=0} nu(t) = 2a/(b(4 - (a+2b))) + (a+2b)/(4 - (a+2b)).
inline double geometric_series_bias_coefficient(double a, double b) {
  detail::require_unit_interval(a, b, "geometric_series_bias_coefficient");
  const double q = 4.0 - (a + 2.0 * b);
  return 2.0 * a / (b * q) + (a + 2.0 * b) / q;
}

struct ComplexEvaluation {
  double value = 0.0;
  double imaginary_residue = 0.0;
};

/// sum_t nu(t) summed through the eigenvalues of Gamma in complex arithmetic:
/// each geometric series sum_t (rho_i rho_j)^t collapses to 1/(1 - rho_i rho_j).
/// Independent of the closed form; fails when rho+ and rho- nearly coincide.
inline ComplexEvaluation bias_coefficient_spectral(double a, double b) {
  detail::require_unit_interval(a, b, "bias_coefficient_spectral");
  const ScalarPairSystem s(a, b);
  const Complex rp = s.rho_plus(), rm = s.rho_minus();
  if (std::abs(rp - rm) < 1e-6) throw std::domain_error("bias_coefficient_spectral: repeated eigenvalue");
  const Complex cp = (1.0 - rp) * (1.0 - rp), cm = (1.0 - rm) * (1.0 - rm);
  const Complex total =
      (cp * cp / (1.0 - rp * rp) - 2.0 * cp * cm / (1.0 - rp * rm) + cm * cm / (1.0 - rm * rm)) / (s.delta() * s.delta());
  return {total.real(), std::abs(total.imag())};
}

struct ComplexMatrixEvaluation {
  Matrix2 value;
  double imaginary_residue = 0.0;
};

/// sum_t Gamma^t aleph (Gamma^t)^T through the complex eigendecomposition
/// Gamma = V diag(rho) V^-1.
inline ComplexMatrixEvaluation geometric_series_spectral(double a, double b) {
  detail::require_unit_interval(a, b, "geometric_series_spectral");
  const ScalarPairSystem s(a, b);
  if (std::abs(s.delta()) < 1e-6) throw std::domain_error("geometric_series_spectral: repeated eigenvalue");
  Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(s.gamma().cast<Complex>());
  const Eigen::Matrix2cd v = es.eigenvectors();
  const Eigen::Matrix2cd vinv = v.inverse();
  const Eigen::Vector2cd rho = es.eigenvalues();
  Eigen::Matrix2cd inner_m = vinv * s.aleph().cast<Complex>() * vinv.transpose();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) inner_m(i, j) /= (1.0 - rho(i) * rho(j));
  const Eigen::Matrix2cd total = v * inner_m * v.transpose();
  return {total.real(), total.imag().cwiseAbs().maxCoeff()};
}

/// sum_t (Gamma^t)^T [[1,1],[1,1]] Gamma^t via a Stein solve.
inline Matrix2 geometric_series_upsilon(double a, double b) {
  detail::require_unit_interval(a, b, "geometric_series_upsilon");
  const ScalarPairSystem s(a, b);
  return stein_solve(s.gamma().transpose(), Matrix2::Ones());
}

/// A = [[I - beta H, I - beta H], [-alpha H, I - alpha H]].
inline BlockMatrix2d build_A(const Matrix& h, const StepSizes& steps) {
  detail::require_lab_dimension(h.rows(), "build_A");
  const Matrix id = Matrix::Identity(h.rows(), h.cols());
  const Matrix top = id - steps.beta * h;
  return BlockMatrix2d::from_blocks(top, top, -steps.alpha * h, id - steps.alpha * h);
}

/// [[beta^2 H, alpha beta H], [alpha beta H, alpha^2 H]]; the per-step noise
/// covariance in rescaled coordinates divided by (t+1)^2 sigma^2.
inline BlockMatrix2d noise_matrix(const Matrix& h, const StepSizes& steps) {
  Matrix2 c;
  c << steps.beta * steps.beta, steps.alpha * steps.beta, steps.alpha * steps.beta, steps.alpha * steps.alpha;
  return BlockMatrix2d::kron(c, h);
}

/// [[H, H], [H, H]]: <Upsilon, theta theta^T> = u^T H u with u = v + w.
inline BlockMatrix2d upsilon_matrix(const Matrix& h) { return BlockMatrix2d::kron(Matrix2::Ones(), h); }

/// T~ o Theta = A Theta A^T.
inline BlockMatrix2d apply_T_tilde(const BlockMatrix2d& a, const BlockMatrix2d& theta) {
  require_dimension(theta.full().rows(), a.full().rows(), "apply_T_tilde");
  return BlockMatrix2d(Matrix(a.full() * theta.full() * a.full().transpose()));
}

/// T~^T o Theta = A^T Theta A.
inline BlockMatrix2d apply_T_tilde_transpose(const BlockMatrix2d& a, const BlockMatrix2d& theta) {
  require_dimension(theta.full().rows(), a.full().rows(), "apply_T_tilde_transpose");
  return BlockMatrix2d(Matrix(a.full().transpose() * theta.full() * a.full()));
}

/// Random transition J for the feature a.
inline BlockMatrix2d build_J(const Vector& a, const StepSizes& steps) {
  const Eigen::Index d = a.size();
  const Matrix id = Matrix::Identity(d, d);
  const Matrix aat = a * a.transpose();
  const Matrix top = id - steps.beta * aat;
  return BlockMatrix2d::from_blocks(top, top, -steps.alpha * aat, id - steps.alpha * aat);
}

namespace detail {

// sum_i p_i f(J_i) over the one-hot atoms a = e_i.
template <class F>
BlockMatrix2d one_hot_expectation(const LeastSquaresProblem& problem, F&& f) {
  const int d = problem.dimension();
  BlockMatrix2d acc(d);
  Vector e = Vector::Zero(d);
  for (int i = 0; i < d; ++i) {
    e.setZero();
    e(i) = 1.0;
    acc.full() += problem.probabilities()(i) * f(e).full();
  }
  return acc;
}

}  // namespace detail

/// T o Theta = E[J Theta J^T], exact for one-hot features.
inline BlockMatrix2d apply_T_exact(const LeastSquaresProblem& problem, const BlockMatrix2d& theta,
                                   const StepSizes& steps) {
  detail::require_one_hot(problem, "apply_T_exact");
  require_dimension(theta.d(), problem.dimension(), "apply_T_exact");
  return detail::one_hot_expectation(problem, [&](const Vector& e) {
    const Matrix j = build_J(e, steps).full();
    return BlockMatrix2d(Matrix(j * theta.full() * j.transpose()));
  });
}

/// M o Theta = E[(J - A) Theta (J - A)^T], exact for one-hot features.
inline BlockMatrix2d apply_M_exact(const LeastSquaresProblem& problem, const BlockMatrix2d& theta,
                                   const StepSizes& steps) {
  detail::require_one_hot(problem, "apply_M_exact");
  require_dimension(theta.d(), problem.dimension(), "apply_M_exact");
  const Matrix a = build_A(problem.covariance(), steps).full();
  return detail::one_hot_expectation(problem, [&](const Vector& e) {
    const Matrix k = build_J(e, steps).full() - a;
    return BlockMatrix2d(Matrix(k * theta.full() * k.transpose()));
  });
}

/// M^T o Theta = E[(J - A)^T Theta (J - A)].
inline BlockMatrix2d apply_M_transpose_exact(const LeastSquaresProblem& problem, const BlockMatrix2d& theta,
                                             const StepSizes& steps) {
  detail::require_one_hot(problem, "apply_M_transpose_exact");
  require_dimension(theta.d(), problem.dimension(), "apply_M_transpose_exact");
  const Matrix a = build_A(problem.covariance(), steps).full();
  return detail::one_hot_expectation(problem, [&](const Vector& e) {
    const Matrix k = build_J(e, steps).full() - a;
    return BlockMatrix2d(Matrix(k.transpose() * theta.full() * k));
  });
}

/// M o [[P, Q], [R, S]] = [[beta^2, alpha beta], [alpha beta, alpha^2]] kron
/// E[(H - a a^T)(P + Q + R + S)(H - a a^T)].
inline BlockMatrix2d apply_M_kronecker(const LeastSquaresProblem& problem, const BlockMatrix2d& theta,
                                       const StepSizes& steps) {
  detail::require_one_hot(problem, "apply_M_kronecker");
  require_dimension(theta.d(), problem.dimension(), "apply_M_kronecker");
  const int d = problem.dimension();
  const Matrix sum = theta.top_left() + theta.top_right() + theta.bottom_left() + theta.bottom_right();
  Matrix inner_m = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    Matrix dev = problem.covariance();
    dev(i, i) -= 1.0;
    inner_m += problem.probabilities()(i) * dev * sum * dev;
  }
  Matrix2 c;
  c << steps.beta * steps.beta, steps.alpha * steps.beta, steps.alpha * steps.beta, steps.alpha * steps.alpha;
  return BlockMatrix2d::kron(c, inner_m);
}

namespace detail {

inline void require_inverse_domain(const Matrix& h, const StepSizes& steps, const char* what) {
  require_lab_dimension(h.rows(), what);
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  const double l = es.eigenvalues().maxCoeff();
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw std::domain_error(std::string(what) + ": H must be positive definite");
  if (!(steps.alpha > 0.0 && steps.beta > 0.0 && steps.alpha * l < 1.0 && steps.beta * l < 1.0))
    throw std::domain_error(std::string(what) + ": requires 0 < alpha, beta < 1/L");
}

// Assembles [[E diag(c00) E^T, ...]] from per-eigenvalue 2 x 2 blocks.
inline BlockMatrix2d assemble_eigen_blocks(const Matrix& basis, const std::vector<Matrix2>& blocks) {
  const Eigen::Index d = basis.rows();
  Matrix out[2][2];
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      Vector diag(d);
      for (Eigen::Index i = 0; i < d; ++i) diag(i) = blocks[static_cast<std::size_t>(i)](r, c);
      out[r][c] = basis * diag.asDiagonal() * basis.transpose();
    }
  return BlockMatrix2d::from_blocks(out[0][0], out[0][1], out[1][0], out[1][1]);
}

}  // namespace detail

struct InverseNoiseResult {
  BlockMatrix2d exact;        // (1 - T~)^-1 o noise_matrix
  BlockMatrix2d upper_bound;  // (1/3)[[2 alpha (beta H)^-1 + (2 beta - 3 alpha) I, ...]]
  bool bound_applicable = false;  // (alpha + 2 beta) L <= 1
  double bound_margin = 0.0;      // min eig(upper_bound - exact)
};

/// Exact (1 - T~)^-1 o noise_matrix(H), built per eigenvalue of H from the
/// closed-form series at (a, b) = (alpha lambda, beta lambda), plus the
/// explicit upper-bound matrix.
inline InverseNoiseResult inv_one_minus_T_tilde_noise(const Matrix& h, const StepSizes& steps) {
  detail::require_inverse_domain(h, steps, "inv_one_minus_T_tilde_noise");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
  const Vector lambda = es.eigenvalues();
  const Matrix basis = es.eigenvectors();
  const Eigen::Index d = h.rows();
  const double alpha = steps.alpha, beta = steps.beta;

  std::vector<Matrix2> exact_blocks(static_cast<std::size_t>(d)), bound_blocks(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    const double l = lambda(i);
    exact_blocks[static_cast<std::size_t>(i)] = geometric_series_closed_form(alpha * l, beta * l) / l;
    Matrix2 bnd;
    const double off = alpha / beta * (2.0 * beta - alpha);
    bnd << 2.0 * alpha / (beta * l) + (2.0 * beta - 3.0 * alpha), off, off, 2.0 * alpha * alpha / beta;
    bound_blocks[static_cast<std::size_t>(i)] = bnd / 3.0;
  }

  InverseNoiseResult r;
  r.exact = detail::assemble_eigen_blocks(basis, exact_blocks);
  r.upper_bound = detail::assemble_eigen_blocks(basis, bound_blocks);
  r.bound_applicable = (alpha + 2.0 * beta) * lambda.maxCoeff() <= 1.0;
  r.bound_margin = min_eigenvalue(r.upper_bound - r.exact);
  return r;
}

/// Exact (1 - T~^T)^-1 o Upsilon(H) = sum_t (A^t)^T Upsilon A^t, per eigenvalue.
inline BlockMatrix2d inv_one_minus_T_tilde_transpose_upsilon(const Matrix& h, const StepSizes& steps) {
  detail::require_inverse_domain(h, steps, "inv_one_minus_T_tilde_transpose_upsilon");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
  const Vector lambda = es.eigenvalues();
  std::vector<Matrix2> blocks(static_cast<std::size_t>(h.rows()));
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    const double l = lambda(i);
    blocks[static_cast<std::size_t>(i)] = l * geometric_series_upsilon(steps.alpha * l, steps.beta * l);
  }
  return detail::assemble_eigen_blocks(es.eigenvectors(), blocks);
}

struct AlmostEigenvectorReport {
  double noise_margin = 0.0;    // min eig((2/3) noise - M o (1 - T~)^-1 o noise)
  double upsilon_margin = 0.0;  // min eig((2/3) Upsilon - M^T o (1 - T~^T)^-1 o Upsilon)
  bool conditions_hold = false;
  BlockMatrix2d noise_lhs;
  BlockMatrix2d upsilon_lhs;

  bool passed(double floor = -1e-10) const { return noise_margin >= floor && upsilon_margin >= floor; }
};

/// Evaluates both almost-eigenvector inequalities exactly on a one-hot
/// problem. Violated step conditions are reported, not rejected.
inline AlmostEigenvectorReport verify_almost_eigenvector(const LeastSquaresProblem& problem, const StepSizes& steps) {
  detail::require_one_hot(problem, "verify_almost_eigenvector");
  const Matrix& h = problem.covariance();
  AlmostEigenvectorReport r;
  r.conditions_hold = satisfies_averaged_conditions(steps, constants(problem));

  const BlockMatrix2d noise = noise_matrix(h, steps);
  const BlockMatrix2d x = inv_one_minus_T_tilde_noise(h, steps).exact;
  r.noise_lhs = apply_M_exact(problem, x, steps);
  r.noise_margin = min_eigenvalue((2.0 / 3.0) * noise - r.noise_lhs);

  const BlockMatrix2d ups = upsilon_matrix(h);
  const BlockMatrix2d y = inv_one_minus_T_tilde_transpose_upsilon(h, steps);
  r.upsilon_lhs = apply_M_transpose_exact(problem, y, steps);
  r.upsilon_margin = min_eigenvalue((2.0 / 3.0) * ups - r.upsilon_lhs);
  return r;
}

/// theta = (t (y - x*), z - x*).
inline Vector rescaled_theta(long long t, const Vector& y, const Vector& z, const Vector& optimum) {
  const Eigen::Index d = optimum.size();
  Vector theta(2 * d);
  theta.head(d) = static_cast<double>(t) * (y - optimum);
  theta.tail(d) = z - optimum;
  return theta;
}

/// theta <- J theta for the feature a: v' = (I - beta a a^T) u,
/// w' = w - alpha a a^T u with u = v + w.
inline void apply_J(const Vector& a, const StepSizes& steps, Vector& theta) {
  const Eigen::Index d = a.size();
  const Vector u = theta.head(d) + theta.tail(d);
  const double au = a.dot(u);
  theta.head(d) = u - (steps.beta * au) * a;
  theta.tail(d) -= (steps.alpha * au) * a;
}

struct BiasVarianceReport {
  int seeds = 0;
  long long iterations = 0;
  double max_identity_error = 0.0;  // max relative |theta - theta_b - theta_v|
  BlockMatrix2d full_cov;           // E[theta_bar theta_bar^T]
  BlockMatrix2d bias_cov;
  BlockMatrix2d variance_cov;
  double min_eigenvalue_full = 0.0;       // of 2(C_b + C_v) - C on the 2d space
  double min_eigenvalue_projected = 0.0;  // after projecting onto u = v + w in the H-norm
  double projected_stderr = 0.0;          // jackknife SE along the minimising direction
  double upsilon_gap = 0.0;               // <Upsilon, 2(C_b + C_v) - C>
  double upsilon_gap_stderr = 0.0;
};

/// Runs the full, bias and variance processes on shared sample streams, in
/// rescaled coordinates, and estimates the second moments of the summed
/// iterates theta_bar = sum_{t=0}^{T} theta_t. The full process comes from the
/// actual three-sequence iterates, so the identity check is end to end.
inline BiasVarianceReport simulate_bias_variance(const LeastSquaresProblem& problem, const StepSizes& steps,
                                                 long long iterations, int seeds, std::uint64_t base_seed = 0) {
  detail::require_lab_dimension(problem.dimension(), "simulate_bias_variance");
  if (iterations < 1 || seeds < 2) throw std::invalid_argument("simulate_bias_variance: need T >= 1 and seeds >= 2");
  const int d = problem.dimension();
  const Vector& xs = problem.optimum();

  // Projection onto H^{1/2} u: <Upsilon, C> = tr(P C P^T).
  Eigen::SelfAdjointEigenSolver<Matrix> es(problem.covariance());
  const Matrix h_half = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                        es.eigenvectors().transpose();
  Matrix proj(d, 2 * d);
  proj << h_half, h_half;

  BiasVarianceReport r;
  r.seeds = seeds;
  r.iterations = iterations;
  Matrix c_full = Matrix::Zero(2 * d, 2 * d), c_bias = c_full, c_var = c_full;
  std::vector<Vector> bias_bars, var_bars;
  bias_bars.reserve(static_cast<std::size_t>(seeds));
  var_bars.reserve(static_cast<std::size_t>(seeds));

  Sample s;
  Vector g(d);
  for (int k = 0; k < seeds; ++k) {
    SampleStream stream(problem, base_seed + static_cast<std::uint64_t>(k));
    AcsgdState st = AcsgdState::initial(problem.start());
    Vector theta_b = rescaled_theta(0, st.y, st.z, xs);
    Vector theta_v = Vector::Zero(2 * d);
    Vector bar_full = theta_b, bar_b = theta_b, bar_v = theta_v;
    for (long long t = 0; t < iterations; ++t) {
      stream.next(s);
      const double eta = s.response - s.features.dot(xs);
      sgd_gradient(s, st.x, g);
      acsgd_step(st, g, steps);

      apply_J(s.features, steps, theta_b);
      apply_J(s.features, steps, theta_v);
      const double scale = static_cast<double>(t + 1) * eta;
      theta_v.head(d) += (scale * steps.beta) * s.features;
      theta_v.tail(d) += (scale * steps.alpha) * s.features;

      const Vector theta = rescaled_theta(st.t, st.y, st.z, xs);
      const double err = (theta - theta_b - theta_v).norm() / (1.0 + theta.norm());
      r.max_identity_error = std::max(r.max_identity_error, err);
      bar_full += theta;
      bar_b += theta_b;
      bar_v += theta_v;
    }
    c_full.noalias() += bar_full * bar_full.transpose();
    c_bias.noalias() += bar_b * bar_b.transpose();
    c_var.noalias() += bar_v * bar_v.transpose();
    bias_bars.push_back(bar_b);
    var_bars.push_back(bar_v);
  }
  const double n = static_cast<double>(seeds);
  r.full_cov = BlockMatrix2d(Matrix(c_full / n));
  r.bias_cov = BlockMatrix2d(Matrix(c_bias / n));
  r.variance_cov = BlockMatrix2d(Matrix(c_var / n));
  const BlockMatrix2d gap = 2.0 * (r.bias_cov + r.variance_cov) - r.full_cov;
  r.min_eigenvalue_full = min_eigenvalue(gap);

  const Matrix gap_proj = proj * gap.full() * proj.transpose();
  r.min_eigenvalue_projected = min_symmetric_eigenvalue(gap_proj);
  const Vector dir = min_symmetric_eigenvector(gap_proj);
  const Matrix ups = upsilon_matrix(problem.covariance()).full();

  // Per-seed contributions 2(b b^T + v v^T) - (b+v)(b+v)^T, using that the
  // full bar equals bias + variance bars up to the checked identity error.
  std::vector<double> along(static_cast<std::size_t>(seeds)), ups_vals(static_cast<std::size_t>(seeds));
  for (std::size_t k = 0; k < bias_bars.size(); ++k) {
    const Vector& b = bias_bars[k];
    const Vector& v = var_bars[k];
    const Vector f = b + v;
    const double pb = dir.dot(proj * b), pv = dir.dot(proj * v), pf = dir.dot(proj * f);
    along[k] = 2.0 * (pb * pb + pv * pv) - pf * pf;
    ups_vals[k] = 2.0 * (b.dot(ups * b) + v.dot(ups * v)) - f.dot(ups * f);
  }
  r.projected_stderr = jackknife_stderr(along);
  r.upsilon_gap = inner(upsilon_matrix(problem.covariance()), gap);
  r.upsilon_gap_stderr = jackknife_stderr(ups_vals);
  return r;
}

struct VarianceBoundReport {
  long long t = 0;
  int seeds = 0;
  BlockMatrix2d covariance;  // Monte-Carlo E[theta_v theta_v^T]
  BlockMatrix2d bound;       // t^2 sigma^2 * 3 * upper_bound
  double min_gap = 0.0;      // min eig(bound - covariance)
  double gap_stderr = 0.0;   // jackknife SE along the minimising direction
};

/// Monte-Carlo check of E[theta_v,t theta_v,t^T] <= t^2 sigma^2 times the
/// explicit matrix [[2 alpha (beta H)^-1 + (2 beta - 3 alpha) I, ...]].
inline VarianceBoundReport variance_covariance_bound_check(const LeastSquaresProblem& problem, const StepSizes& steps,
                                                           long long t, int seeds, std::uint64_t base_seed = 0) {
  detail::require_lab_dimension(problem.dimension(), "variance_covariance_bound_check");
  if (t < 0 || seeds < 2) throw std::invalid_argument("variance_covariance_bound_check: need t >= 0 and seeds >= 2");
  const int d = problem.dimension();
  const Vector& xs = problem.optimum();
  const double sigma2 = problem.noise_std() * problem.noise_std();

  VarianceBoundReport r;
  r.t = t;
  r.seeds = seeds;
  const InverseNoiseResult inv = inv_one_minus_T_tilde_noise(problem.covariance(), steps);
  r.bound = (static_cast<double>(t) * static_cast<double>(t) * sigma2 * 3.0) * inv.upper_bound;

  std::vector<Vector> finals;
  finals.reserve(static_cast<std::size_t>(seeds));
  Matrix acc = Matrix::Zero(2 * d, 2 * d);
  Sample s;
  for (int k = 0; k < seeds; ++k) {
    SampleStream stream(problem, base_seed + static_cast<std::uint64_t>(k));
    Vector theta = Vector::Zero(2 * d);
    for (long long i = 0; i < t; ++i) {
      stream.next(s);
      const double eta = s.response - s.features.dot(xs);
      apply_J(s.features, steps, theta);
      const double scale = static_cast<double>(i + 1) * eta;
      theta.head(d) += (scale * steps.beta) * s.features;
      theta.tail(d) += (scale * steps.alpha) * s.features;
    }
    acc.noalias() += theta * theta.transpose();
    finals.push_back(theta);
  }
  r.covariance = BlockMatrix2d(Matrix(acc / static_cast<double>(seeds)));
  const Matrix gap = r.bound.full() - r.covariance.full();
  r.min_gap = min_symmetric_eigenvalue(gap);
  const Vector dir = min_symmetric_eigenvector(gap);
  std::vector<double> along(finals.size());
  for (std::size_t k = 0; k < finals.size(); ++k) {
    const double p = dir.dot(finals[k]);
    along[k] = p * p;
  }
  r.gap_stderr = jackknife_stderr(along);
  return r;
}

}  // namespace acls

#endif  // ACLS_OPERATOR_LAB_HPP
