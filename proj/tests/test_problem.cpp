#include "acls/problem.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace acls;

TEST(GaussianProblem, SpectrumAndOptimumNorm) {
  const LeastSquaresProblem p = make_gaussian_problem(50, 4.0, 1.0, 0.02, 7);
  EXPECT_EQ(p.dimension(), 50);
  EXPECT_EQ(p.kind(), FeatureKind::Gaussian);
  for (int i = 0; i < 50; ++i) EXPECT_DOUBLE_EQ(p.eigenvalues()(i), 1.0 / std::pow(i + 1.0, 4.0));
  EXPECT_NEAR(p.optimum().norm(), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(p.noise_std(), 0.02);

  // H is recovered from the stored eigenpairs and x* has equal projections.
  Eigen::SelfAdjointEigenSolver<Matrix> es(p.covariance());
  Vector sorted = p.eigenvalues();
  std::sort(sorted.data(), sorted.data() + sorted.size());
  EXPECT_LE((es.eigenvalues() - sorted).cwiseAbs().maxCoeff(), 1e-14);
  const Vector proj = p.eigenvectors().transpose() * p.optimum();
  EXPECT_LE((proj.cwiseAbs().array() - 1.0 / std::sqrt(50.0)).abs().maxCoeff(), 1e-12);
  EXPECT_LE((p.eigenvectors().transpose() * p.eigenvectors() - Matrix::Identity(50, 50)).norm(), 1e-12);
}

TEST(GaussianProblem, OneDimensionalIdentity) {
  const LeastSquaresProblem p = make_gaussian_problem(1, 0.0, 1.0, 0.0, 0);
  EXPECT_NEAR(p.covariance()(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(p.optimum()(0), 1.0, 1e-15);
}

TEST(GaussianProblem, TraceOfThreeDimensionalDecay) {
  const LeastSquaresProblem p = make_gaussian_problem(3, 4.0, 1.0, 0.0, 1);
  EXPECT_NEAR(p.trace(), 1.0 + 1.0 / 16.0 + 1.0 / 81.0, 1e-14);
  EXPECT_NEAR(p.trace(), 1.07485, 1e-5);
}

TEST(GaussianProblem, RejectsInvalidArguments) {
  EXPECT_THROW(make_gaussian_problem(0, 4.0, 1.0, 0.0, 0), std::invalid_argument);
  EXPECT_THROW(make_gaussian_problem(3, -1.0, 1.0, 0.0, 0), std::invalid_argument);
  EXPECT_THROW(make_gaussian_problem(3, 4.0, 0.0, 0.0, 0), std::invalid_argument);
  EXPECT_THROW(make_gaussian_problem(3, 4.0, 1.0, -0.1, 0), std::invalid_argument);
}

TEST(GaussianProblem, SeedDeterminesBasis) {
  const LeastSquaresProblem a = make_gaussian_problem(5, 2.0, 1.0, 0.0, 3);
  const LeastSquaresProblem b = make_gaussian_problem(5, 2.0, 1.0, 0.0, 3);
  const LeastSquaresProblem c = make_gaussian_problem(5, 2.0, 1.0, 0.0, 4);
  EXPECT_EQ(a.covariance(), b.covariance());
  EXPECT_GT((a.covariance() - c.covariance()).norm(), 1e-6);
}

TEST(OneHotProblem, UniformFour) {
  const LeastSquaresProblem p = make_one_hot_problem(Vector::Constant(4, 0.25), Vector::Zero(4));
  EXPECT_LE((p.covariance() - 0.25 * Matrix::Identity(4, 4)).norm(), 1e-15);
  EXPECT_LE((p.optimum() - Vector::Constant(4, 0.5)).norm(), 1e-15);
  EXPECT_NEAR(p.optimum().squaredNorm(), 1.0, 1e-15);
}

TEST(OneHotProblem, SingleAtom) {
  const LeastSquaresProblem p = make_one_hot_problem(Vector::Ones(1), Vector::Zero(1));
  EXPECT_DOUBLE_EQ(p.covariance()(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(p.optimum()(0), 1.0);
}

TEST(OneHotProblem, StatConditionIsInverseMinProbability) {
  Vector probs(2);
  probs << 0.9, 0.1;
  const ProblemConstants c = constants(make_one_hot_problem(probs, Vector::Zero(2)));
  EXPECT_NEAR(c.stat_condition, 10.0, 1e-12);
  EXPECT_NEAR(c.kurtosis, 10.0, 1e-12);
}

TEST(OneHotProblem, NonzeroStartShiftsOptimum) {
  Vector start(3);
  start << 1.0, -2.0, 0.5;
  const LeastSquaresProblem p = make_one_hot_problem(Vector::Constant(3, 1.0 / 3.0), start);
  EXPECT_NEAR((p.optimum() - p.start()).squaredNorm(), 1.0, 1e-14);
}

TEST(OneHotProblem, RejectsInvalidProbabilities) {
  Vector bad(2);
  bad << 0.6, 0.6;
  EXPECT_THROW(make_one_hot_problem(bad, Vector::Zero(2)), std::invalid_argument);
  bad << 1.0, 0.0;
  EXPECT_THROW(make_one_hot_problem(bad, Vector::Zero(2)), std::invalid_argument);
  EXPECT_THROW(make_one_hot_problem(Vector::Constant(2, 0.5), Vector::Zero(3)), std::invalid_argument);
  EXPECT_THROW(make_one_hot_problem(Vector(0), Vector(0)), std::invalid_argument);
}

TEST(Sampling, OneHotEmpiricalCovariance) {
  const LeastSquaresProblem p = make_uniform_one_hot_problem(3);
  SampleStream stream(p, 11);
  Matrix acc = Matrix::Zero(3, 3);
  Sample s;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    stream.next(s);
    acc += s.features * s.features.transpose();
  }
  acc /= n;
  EXPECT_LE((acc - Matrix::Identity(3, 3) / 3.0).cwiseAbs().maxCoeff(), 5e-3);
}

TEST(Sampling, GaussianEmpiricalCovarianceAndNoise) {
  const LeastSquaresProblem p = make_gaussian_problem(4, 1.0, 1.0, 0.5, 2);
  SampleStream stream(p, 5);
  Matrix acc = Matrix::Zero(4, 4);
  double noise2 = 0.0;
  Sample s;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    stream.next(s);
    acc += s.features * s.features.transpose();
    const double eta = s.response - s.features.dot(p.optimum());
    noise2 += eta * eta;
  }
  acc /= n;
  EXPECT_LE((acc - p.covariance()).cwiseAbs().maxCoeff(), 2e-2);
  EXPECT_NEAR(noise2 / n, 0.25, 5e-3);
}

TEST(Sampling, NoiselessResponsesInterpolate) {
  const LeastSquaresProblem p = make_gaussian_problem(6, 2.0, 1.0, 0.0, 1);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Sample s = sample(p, rng);
    EXPECT_NEAR(s.response, s.features.dot(p.optimum()), 1e-15);
  }
}

TEST(Sampling, StreamIsDeterministic) {
  const LeastSquaresProblem p = make_gaussian_problem(5, 2.0, 1.0, 0.1, 1);
  SampleStream a(p, 42), b(p, 42);
  for (int i = 0; i < 100; ++i) {
    const Sample sa = a.next(), sb = b.next();
    EXPECT_EQ(sa.features, sb.features);
    EXPECT_EQ(sa.response, sb.response);
  }
}

TEST(ExcessRisk, ZeroAtOptimum) {
  const LeastSquaresProblem p = make_gaussian_problem(5, 2.0, 1.0, 0.0, 1);
  EXPECT_EQ(excess_risk(p, p.optimum()), 0.0);
}

TEST(ExcessRisk, DiagonalTwoDimensional) {
  // Spectrum (1, 1/16); x - x* = (1, 1) in the eigenbasis.
  const LeastSquaresProblem g = make_gaussian_problem(2, 4.0, 1.0, 0.0, 0);
  const Vector x = g.optimum() + g.eigenvectors() * Vector::Ones(2);
  EXPECT_NEAR(excess_risk(g, x), 0.5 * (1.0 + 1.0 / 16.0), 1e-14);
  EXPECT_NEAR(excess_risk(g, x), 0.53125, 1e-14);
}

TEST(ExcessRisk, OneHotStart) {
  const LeastSquaresProblem p = make_uniform_one_hot_problem(4);
  EXPECT_NEAR(excess_risk(p, p.start()), 0.125, 1e-15);
}

TEST(ExcessRisk, DimensionMismatch) {
  const LeastSquaresProblem p = make_uniform_one_hot_problem(4);
  EXPECT_THROW(excess_risk(p, Vector::Zero(3)), std::invalid_argument);
}

TEST(Constants, OneHotUniform) {
  const ProblemConstants c = constants(make_uniform_one_hot_problem(7));
  EXPECT_DOUBLE_EQ(c.r_squared, 1.0);
  EXPECT_NEAR(c.stat_condition, 7.0, 1e-12);
  EXPECT_NEAR(c.kurtosis, 7.0, 1e-12);
  EXPECT_NEAR(c.l_smooth, 1.0 / 7.0, 1e-15);
}

TEST(Constants, GaussianIdentityAndDecay) {
  const ProblemConstants iso = constants(make_gaussian_problem(5, 0.0, 1.0, 0.0, 0));
  EXPECT_NEAR(iso.r_squared, 7.0, 1e-12);
  EXPECT_DOUBLE_EQ(iso.kurtosis, 3.0);
  EXPECT_DOUBLE_EQ(iso.stat_condition, 7.0);
  const ProblemConstants dec = constants(make_gaussian_problem(3, 4.0, 1.0, 0.0, 1));
  EXPECT_NEAR(dec.r_squared, 3.07485, 1e-5);
}

// Monte-Carlo check of E[|a|^2 a a^T] = (tr H) H + 2 H^2 for Gaussian features,
// whose top eigenvalue is the R^2 reported by constants().
TEST(Constants, GaussianFourthMomentMonteCarlo) {
  const LeastSquaresProblem p = make_gaussian_problem(3, 1.0, 1.0, 0.0, 4);
  SampleStream stream(p, 9);
  Matrix acc = Matrix::Zero(3, 3);
  const int n = 400000;
  Sample s;
  for (int i = 0; i < n; ++i) {
    stream.next(s);
    acc += s.features.squaredNorm() * s.features * s.features.transpose();
  }
  acc /= n;
  const Matrix& h = p.covariance();
  const Matrix expected = h.trace() * h + 2.0 * h * h;
  EXPECT_LE((acc - expected).cwiseAbs().maxCoeff(), 0.05 * expected.cwiseAbs().maxCoeff());
  // R^2 H dominates the fourth moment.
  const ProblemConstants c = constants(p);
  EXPECT_GE(min_symmetric_eigenvalue(c.r_squared * h - expected), -1e-12);
}
