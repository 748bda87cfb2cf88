#include "acls/oracles.hpp"

#include <gtest/gtest.h>

#include <vector>

using namespace acls;

namespace {

Sample make_sample(const Vector& a, double b) {
  Sample s;
  s.features = a;
  s.response = b;
  return s;
}

}  // namespace

TEST(SgdGradient, ZeroAtOptimumWithoutNoise) {
  const LeastSquaresProblem p = make_gaussian_problem(6, 2.0, 1.0, 0.0, 1);
  SampleStream stream(p, 3);
  for (int i = 0; i < 20; ++i) EXPECT_LE(sgd_gradient(stream.next(), p.optimum()).norm(), 1e-14);
}

TEST(SgdGradient, DirectEvaluation) {
  Vector a = Vector::Zero(4);
  a(0) = 1.0;
  Vector x = Vector::Zero(4);
  x(0) = 2.0;
  const Vector g = sgd_gradient(make_sample(a, 0.0), x);
  Vector want = Vector::Zero(4);
  want(0) = 2.0;
  EXPECT_EQ(g, want);
}

TEST(SgdGradient, MultiplicativeAdditiveSplit) {
  const LeastSquaresProblem p = make_gaussian_problem(5, 1.0, 1.0, 0.3, 2);
  SampleStream stream(p, 8);
  Rng rng(1);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 200; ++i) {
    const Sample s = stream.next();
    Vector x(5);
    for (int k = 0; k < 5; ++k) x(k) = normal(rng);
    const double eta = s.response - s.features.dot(p.optimum());
    const Vector split = s.features * s.features.dot(x - p.optimum()) - eta * s.features;
    EXPECT_LE((sgd_gradient(s, x) - split).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(SgdGradient, UnbiasedMonteCarlo) {
  const LeastSquaresProblem p = make_uniform_one_hot_problem(4, 0.1);
  SampleStream stream(p, 12);
  Vector x(4);
  x << 0.3, -0.2, 1.0, 0.0;
  Vector acc = Vector::Zero(4);
  const int n = 1000000;
  Vector g(4);
  Sample s;
  for (int i = 0; i < n; ++i) {
    stream.next(s);
    sgd_gradient(s, x, g);
    acc += g;
  }
  acc /= n;
  EXPECT_LE((acc - p.covariance() * (x - p.optimum())).cwiseAbs().maxCoeff(), 5e-3);
}

TEST(SgdGradient, DimensionMismatch) {
  EXPECT_THROW(sgd_gradient(make_sample(Vector::Ones(3), 0.0), Vector::Zero(2)), std::invalid_argument);
}

TEST(MinibatchGradient, SingleSampleIsBitIdentical) {
  const LeastSquaresProblem p = make_gaussian_problem(7, 2.0, 1.0, 0.1, 3);
  SampleStream stream(p, 4);
  const Vector x = Vector::LinSpaced(7, -1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const std::vector<Sample> batch{stream.next()};
    const Vector a = minibatch_gradient(batch, x);
    const Vector b = sgd_gradient(batch[0], x);
    EXPECT_EQ(a, b);
  }
}

TEST(MinibatchGradient, MeanOfTwo) {
  const LeastSquaresProblem p = make_gaussian_problem(4, 1.0, 1.0, 0.2, 3);
  SampleStream stream(p, 5);
  const std::vector<Sample> batch{stream.next(), stream.next()};
  const Vector x = Vector::Ones(4);
  const Vector want = 0.5 * (sgd_gradient(batch[0], x) + sgd_gradient(batch[1], x));
  EXPECT_LE((minibatch_gradient(batch, x) - want).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MinibatchGradient, LargeBatchConcentrates) {
  const LeastSquaresProblem p = make_uniform_one_hot_problem(4);
  SampleStream stream(p, 6);
  std::vector<Sample> batch(10000);
  for (Sample& s : batch) stream.next(s);
  Vector x(4);
  x << 1.0, 0.0, -1.0, 2.0;
  const Vector want = p.covariance() * (x - p.optimum());
  EXPECT_LE((minibatch_gradient(batch, x) - want).cwiseAbs().maxCoeff(), 5e-2);
}

TEST(MinibatchGradient, EmptyBatchThrows) {
  const std::vector<Sample> batch;
  EXPECT_THROW(minibatch_gradient(batch, Vector::Zero(2)), std::invalid_argument);
}

TEST(MinibatchGradient, UnbiasedMonteCarlo) {
  const LeastSquaresProblem p = make_gaussian_problem(3, 1.0, 1.0, 0.2, 1);
  SampleStream stream(p, 2);
  std::vector<Sample> batch(4);
  const Vector x = Vector::Constant(3, 0.5);
  Vector acc = Vector::Zero(3);
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    for (Sample& s : batch) stream.next(s);
    acc += minibatch_gradient(batch, x);
  }
  acc /= n;
  EXPECT_LE((acc - p.covariance() * (x - p.optimum())).cwiseAbs().maxCoeff(), 10.0 / std::sqrt(n));
}

TEST(ExactGradient, ZeroAtOptimum) {
  const LeastSquaresProblem p = make_gaussian_problem(3, 2.0, 1.0, 0.0, 1);
  Rng rng(0);
  EXPECT_LE(exact_gradient(p, p.optimum(), 0.0, rng).norm(), 1e-15);
}

TEST(ExactGradient, DiagonalEvaluation) {
  Vector probs(2);
  probs << 2.0 / 3.0, 1.0 / 3.0;  // H = diag(2/3, 1/3) = (2/3) diag(1, 0.5)
  const LeastSquaresProblem p = make_one_hot_problem(probs, Vector::Zero(2));
  Rng rng(0);
  const Vector x = p.optimum() + Vector::Ones(2);
  const Vector g = exact_gradient(p, x, 0.0, rng) * 1.5;
  EXPECT_NEAR(g(0), 1.0, 1e-15);
  EXPECT_NEAR(g(1), 0.5, 1e-15);
}

TEST(ExactGradient, AdditiveNoiseIsUnbiased) {
  const LeastSquaresProblem p = make_uniform_one_hot_problem(3);
  Rng rng(17);
  const Vector x = Vector::Constant(3, 2.0);
  const Vector want = p.covariance() * (x - p.optimum());
  Vector acc = Vector::Zero(3);
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += exact_gradient(p, x, 0.1, rng);
  acc /= n;
  EXPECT_LE((acc - want).cwiseAbs().maxCoeff(), 3e-3);
}

TEST(ExactGradient, NegativeNoiseRejected) {
  const LeastSquaresProblem p = make_uniform_one_hot_problem(3);
  Rng rng(0);
  EXPECT_THROW(exact_gradient(p, p.start(), -1.0, rng), std::invalid_argument);
}

TEST(RunningAverage, FirstSampleMatchesSgd) {
  const LeastSquaresProblem p = make_gaussian_problem(5, 2.0, 1.0, 0.1, 2);
  SampleStream stream(p, 3);
  RunningAverageOracle oracle(5);
  const Sample s = stream.next();
  const Vector x = Vector::LinSpaced(5, 0.0, 1.0);
  EXPECT_LE((oracle.gradient(s, x) - sgd_gradient(s, x)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(oracle.count(), 1);
}

TEST(RunningAverage, SufficientStatisticsMatchNaiveSum) {
  const LeastSquaresProblem p = make_gaussian_problem(6, 1.0, 1.0, 0.3, 4);
  SampleStream stream(p, 10);
  RunningAverageOracle oracle(6);
  std::vector<Sample> seen;
  Rng rng(2);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    seen.push_back(stream.next());
    Vector x(6);
    for (int k = 0; k < 6; ++k) x(k) = normal(rng);
    const Vector fast = oracle.gradient(seen.back(), x);
    Vector naive = Vector::Zero(6);
    for (const Sample& s : seen) naive += s.features * (s.features.dot(x) - s.response);
    naive /= static_cast<double>(seen.size());
    worst = std::max(worst, (fast - naive).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(RunningAverage, ConvergesToPopulationGradient) {
  const LeastSquaresProblem p = make_gaussian_problem(4, 1.0, 1.0, 0.0, 5);
  SampleStream stream(p, 6);
  RunningAverageOracle oracle(4);
  Sample s;
  for (int t = 0; t < 100000; ++t) {
    stream.next(s);
    oracle.ingest(s);
  }
  const Vector x = Vector::Ones(4);
  Vector g(4);
  oracle.gradient(x, g);
  EXPECT_LE((g - p.covariance() * (x - p.optimum())).cwiseAbs().maxCoeff(), 1e-2);
  EXPECT_EQ(oracle.second_moment().rows(), 4);
}

TEST(OracleKind, StringRoundTrip) {
  for (OracleKind k : {OracleKind::Sgd, OracleKind::MiniBatch, OracleKind::Exact, OracleKind::ExactAdditive,
                       OracleKind::RunningAverage})
    EXPECT_EQ(oracle_kind_from_string(to_string(k)), k);
  EXPECT_THROW(oracle_kind_from_string("adam"), std::invalid_argument);
}
