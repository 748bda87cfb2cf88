#ifndef ACLS_NUMERIC_HPP
#define ACLS_NUMERIC_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace acls {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Smallest eigenvalue of the symmetric part of m.
inline double min_symmetric_eigenvalue(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("min_symmetric_eigenvalue: matrix must be square");
  if (m.rows() == 0) return 0.0;
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// Eigenvector of the smallest eigenvalue of the symmetric part of m.
inline Vector min_symmetric_eigenvector(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  return es.eigenvectors().col(0);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_dimension(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " + std::to_string(got) +
                                ", expected " + std::to_string(want) + ")");
  }
}

// Across-sample mean and standard error (sample std / sqrt(n)).
struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

inline MeanStderr mean_stderr(const std::vector<double>& xs) {
  MeanStderr out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    const double var = ss / static_cast<double>(xs.size() - 1);
    out.stderr_ = std::sqrt(var / static_cast<double>(xs.size()));
  }
  return out;
}

// Leave-one-out jackknife standard error of the sample mean.
inline double jackknife_stderr(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (double x : xs) sum += x;
  std::vector<double> loo(n);
  double loo_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loo[i] = (sum - xs[i]) / static_cast<double>(n - 1);
    loo_mean += loo[i];
  }
  loo_mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
  return std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n) * ss);
}

}  // namespace acls

#endif  // ACLS_NUMERIC_HPP
