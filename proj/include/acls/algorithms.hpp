#ifndef ACLS_ALGORITHMS_HPP
#define ACLS_ALGORITHMS_HPP

#include "acls/numeric.hpp"
#include "acls/oracles.hpp"
#include "acls/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace acls {

enum class Algorithm { AcSGD, SGD };

inline const char* to_string(Algorithm a) { return a == Algorithm::AcSGD ? "acsgd" : "sgd"; }

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "acsgd") return Algorithm::AcSGD;
  if (s == "sgd") return Algorithm::SGD;
  throw std::invalid_argument("unknown algorithm '" + s + "'");
}

enum class AveragingKind { LastIterate, Weighted, Polyak, Tail };

struct Averaging {
  AveragingKind kind = AveragingKind::LastIterate;
  double tail_fraction = 0.5;  // Tail only
};

inline const char* to_string(AveragingKind k) {
  switch (k) {
    case AveragingKind::LastIterate: return "last";
    case AveragingKind::Weighted: return "weighted";
    case AveragingKind::Polyak: return "polyak";
    case AveragingKind::Tail: return "tail";
  }
  return "unknown";
}

inline AveragingKind averaging_kind_from_string(const std::string& s) {
  if (s == "last") return AveragingKind::LastIterate;
  if (s == "weighted") return AveragingKind::Weighted;
  if (s == "polyak") return AveragingKind::Polyak;
  if (s == "tail") return AveragingKind::Tail;
  throw std::invalid_argument("unknown averaging '" + s + "'");
}

/// (alpha, beta): beta drives the plain gradient step on y, alpha the
/// aggressive step on z. alpha = 0 gives averaged gradient descent, beta = 0 a
/// heavy-ball variant, alpha = beta plain Nesterov.
struct StepSizes {
  double alpha = 0.0;
  double beta = 0.0;

  bool operator==(const StepSizes&) const = default;
};

// (alpha + 2 beta) R^2 <= 1 and alpha <= beta / (2 kappa_tilde).
inline bool satisfies_averaged_conditions(const StepSizes& s, const ProblemConstants& c) {
  return (s.alpha + 2.0 * s.beta) * c.r_squared <= 1.0 * (1.0 + 1e-12) &&
         s.alpha <= s.beta / (2.0 * c.stat_condition) * (1.0 + 1e-12);
}

// kappa (alpha + 2 beta) tr H <= 1 and alpha <= beta / (2 kappa d).
inline bool satisfies_last_iterate_conditions(const StepSizes& s, const ProblemConstants& c) {
  return c.kurtosis * (s.alpha + 2.0 * s.beta) * c.trace_h <= 1.0 * (1.0 + 1e-12) &&
         s.alpha <= s.beta / (2.0 * c.kurtosis * c.dimension) * (1.0 + 1e-12);
}

// (alpha + 2 beta) R^2 <= b, alpha <= b beta / (2 kappa_tilde), alpha, beta <= 1/L.
inline bool satisfies_minibatch_conditions(const StepSizes& s, const ProblemConstants& c, int batch) {
  const double tol = 1.0 + 1e-12;
  return (s.alpha + 2.0 * s.beta) * c.r_squared <= batch * tol &&
         s.alpha <= batch * s.beta / (2.0 * c.stat_condition) * tol && s.alpha <= tol / c.l_smooth &&
         s.beta <= tol / c.l_smooth;
}

/// beta = 1/(3 R^2), alpha = 1/(6 kappa_tilde R^2).
inline StepSizes default_step_sizes_averaged(const ProblemConstants& c) {
  return {1.0 / (6.0 * c.stat_condition * c.r_squared), 1.0 / (3.0 * c.r_squared)};
}

/// beta = 1/(3 kappa tr H), alpha = 1/(6 d kappa^2 tr H).
inline StepSizes default_step_sizes_last_iterate(const ProblemConstants& c) {
  return {1.0 / (6.0 * c.dimension * c.kurtosis * c.kurtosis * c.trace_h), 1.0 / (3.0 * c.kurtosis * c.trace_h)};
}

/// Step sizes used for the synthetic Gaussian experiments:
/// beta = 1/(3 tr H), alpha = 1/(3 d tr H).
inline StepSizes experiment_step_sizes(const ProblemConstants& c) {
  return {1.0 / (3.0 * c.dimension * c.trace_h), 1.0 / (3.0 * c.trace_h)};
}

/// Mini-batch scaling of the averaged defaults: beta grows linearly in b until
/// it hits 1/L, alpha takes the largest value the mini-batch conditions allow
/// up to b beta / (2 kappa_tilde). Reduces to the b = 1 defaults.
inline StepSizes default_step_sizes_minibatch(const ProblemConstants& c, int batch) {
  if (batch < 1) throw std::invalid_argument("default_step_sizes_minibatch: batch must be >= 1");
  if (batch == 1) return default_step_sizes_averaged(c);
  const double b = batch;
  const double beta = std::min(b / (3.0 * c.r_squared), 1.0 / c.l_smooth);
  double alpha = b * beta / (2.0 * c.stat_condition);
  alpha = std::min(alpha, b / c.r_squared - 2.0 * beta);
  alpha = std::min(alpha, 1.0 / c.l_smooth);
  return {alpha, beta};
}

/// SGD step used when the caller does not override it.
inline double default_sgd_step(const LeastSquaresProblem& problem) {
  const ProblemConstants c = constants(problem);
  if (problem.kind() == FeatureKind::Gaussian) return 1.0 / (3.0 * c.trace_h);
  return 1.0 / (3.0 * c.r_squared);
}

/// Iterates of the three-sequence recursion plus the online weighted average
/// sum_{tau<=t} (tau+1) x_tau / sum_{tau<=t} (tau+1).
struct AcsgdState {
  Vector x;
  Vector y;
  Vector z;
  long long t = 0;
  Vector weighted_sum;
  double weight_total = 0.0;

  static AcsgdState initial(const Vector& x0) {
    AcsgdState s;
    s.x = x0;
    s.y = x0;
    s.z = x0;
    s.t = 0;
    s.weighted_sum = x0;
    s.weight_total = 1.0;
    return s;
  }

  Vector weighted_average() const { return weighted_sum / weight_total; }
};

/// One step with a gradient evaluated at state.x:
///   y+ = x - beta g,  z+ = z - alpha (t+1) g,  (t+2) x+ = (t+1) y+ + z+.
inline void acsgd_step(AcsgdState& s, const Vector& g, const StepSizes& steps) {
  const double tp1 = static_cast<double>(s.t + 1);
  s.y.noalias() = s.x - steps.beta * g;
  s.z.noalias() -= (steps.alpha * tp1) * g;
  s.x.noalias() = (tp1 * s.y + s.z) / (tp1 + 1.0);
  s.t += 1;
  const double w = static_cast<double>(s.t + 1);
  s.weighted_sum.noalias() += w * s.x;
  s.weight_total += w;
}

inline AcsgdState acsgd_step(const AcsgdState& s, const Vector& g, const StepSizes& steps, std::nullptr_t) {
  AcsgdState next = s;
  acsgd_step(next, g, steps);
  return next;
}

/// Sorted, de-duplicated log points in [0, T]: 0, T and round(10^(k/ppd)).
inline std::vector<long long> geometric_schedule(long long iterations, int points_per_decade = 50) {
  if (iterations < 0) throw std::invalid_argument("geometric_schedule: negative horizon");
  if (points_per_decade < 1) throw std::invalid_argument("geometric_schedule: points_per_decade must be >= 1");
  std::set<long long> pts{0, iterations};
  for (int k = 0;; ++k) {
    const double v = std::pow(10.0, static_cast<double>(k) / points_per_decade);
    const long long t = std::llround(v);
    if (t > iterations) break;
    pts.insert(t);
  }
  return {pts.begin(), pts.end()};
}

struct LogEntry {
  long long t = 0;
  long long samples = 0;
  double last_risk = 0.0;
  double averaged_risk = 0.0;
};

struct RunRecord {
  std::vector<LogEntry> log;
  Algorithm algorithm = Algorithm::AcSGD;
  OracleSpec oracle;
  Averaging averaging;
  StepSizes steps;
  std::uint64_t seed = 0;
  long long iterations = 0;
  int samples_per_iteration = 1;
  std::string problem_descriptor;
  bool diverged = false;
  long long diverged_at = -1;
  std::vector<std::string> warnings;

  /// Risk of the configured estimator: last iterate or the average.
  double risk(const LogEntry& e) const {
    return averaging.kind == AveragingKind::LastIterate ? e.last_risk : e.averaged_risk;
  }
};

/// Read-only view passed to a per-step observer (y and z are the SGD iterate
/// for the SGD baseline).
struct IterateView {
  long long t;
  const Vector& x;
  const Vector& y;
  const Vector& z;
  const Sample* sample;  // null for the exact oracles and mini-batches
};

struct RunConfig {
  Algorithm algorithm = Algorithm::AcSGD;
  OracleSpec oracle;
  StepSizes steps;
  long long iterations = 1;
  Averaging averaging;
  int points_per_decade = 50;
  std::vector<long long> schedule;  // overrides points_per_decade when non-empty
  std::uint64_t seed = 0;
  std::function<void(const IterateView&)> observer;
};

inline std::string describe(const LeastSquaresProblem& p) {
  std::ostringstream os;
  os << to_string(p.kind()) << "(d=" << p.dimension() << ", trH=" << p.trace() << ", L=" << p.largest_eigenvalue()
     << ", sigma=" << p.noise_std() << ")";
  return os.str();
}

namespace detail {

class Averager {
 public:
  Averager(const Averaging& a, long long iterations, Eigen::Index d) : averaging_(a), sum_(Vector::Zero(d)) {
    if (a.kind == AveragingKind::Tail) {
      if (!(a.tail_fraction > 0.0 && a.tail_fraction <= 1.0))
        throw std::invalid_argument("tail averaging fraction must be in (0, 1]");
      const long long len = static_cast<long long>(std::ceil(a.tail_fraction * static_cast<double>(iterations)));
      tail_start_ = std::max<long long>(0, iterations + 1 - std::max<long long>(len, 1));
    }
  }

  void add(long long t, const Vector& x) {
    switch (averaging_.kind) {
      case AveragingKind::LastIterate: return;
      case AveragingKind::Weighted: {
        const double w = static_cast<double>(t + 1);
        sum_.noalias() += w * x;
        weight_ += w;
        return;
      }
      case AveragingKind::Polyak:
        sum_ += x;
        weight_ += 1.0;
        return;
      case AveragingKind::Tail:
        if (t >= tail_start_) {
          sum_ += x;
          weight_ += 1.0;
        }
        return;
    }
  }

  // Before the tail window opens the tail average falls back to the iterate.
  Vector value(const Vector& current) const {
    if (averaging_.kind == AveragingKind::LastIterate || weight_ == 0.0) return current;
    return sum_ / weight_;
  }

 private:
  Averaging averaging_;
  Vector sum_;
  double weight_ = 0.0;
  long long tail_start_ = 0;
};

constexpr double kDivergenceRisk = 1e12;

}  // namespace detail

/// Streams samples from the problem, applies AcSGD or SGD with the configured
/// oracle and logs the excess risk of the last and averaged iterates on the
/// schedule. Divergence truncates the record and sets the flag.
inline RunRecord run(const LeastSquaresProblem& problem, const RunConfig& cfg) {
  if (cfg.iterations < 1) throw std::invalid_argument("run: iterations must be >= 1");
  if (cfg.oracle.kind == OracleKind::MiniBatch && cfg.oracle.batch_size < 1)
    throw std::invalid_argument("run: batch size must be >= 1");

  const int d = problem.dimension();
  const ProblemConstants c = constants(problem);

  RunRecord rec;
  rec.algorithm = cfg.algorithm;
  rec.oracle = cfg.oracle;
  rec.averaging = cfg.averaging;
  rec.steps = cfg.steps;
  rec.seed = cfg.seed;
  rec.iterations = cfg.iterations;
  rec.problem_descriptor = describe(problem);
  rec.samples_per_iteration = cfg.oracle.kind == OracleKind::MiniBatch ? cfg.oracle.batch_size
                              : (cfg.oracle.kind == OracleKind::Exact || cfg.oracle.kind == OracleKind::ExactAdditive)
                                  ? 0
                                  : 1;

  if (cfg.algorithm == Algorithm::AcSGD) {
    if (cfg.oracle.kind == OracleKind::MiniBatch) {
      if (!satisfies_minibatch_conditions(cfg.steps, c, cfg.oracle.batch_size))
        rec.warnings.emplace_back("step sizes violate the mini-batch conditions");
    } else if (cfg.oracle.kind == OracleKind::Sgd) {
      if (cfg.averaging.kind == AveragingKind::LastIterate) {
        if (!satisfies_last_iterate_conditions(cfg.steps, c))
          rec.warnings.emplace_back("step sizes violate the last-iterate conditions");
      } else if (!satisfies_averaged_conditions(cfg.steps, c)) {
        rec.warnings.emplace_back("step sizes violate the averaged-iterate conditions");
      }
    }
  }

  std::vector<long long> schedule =
      cfg.schedule.empty() ? geometric_schedule(cfg.iterations, cfg.points_per_decade) : cfg.schedule;
  std::sort(schedule.begin(), schedule.end());
  schedule.erase(std::unique(schedule.begin(), schedule.end()), schedule.end());
  std::size_t next_log = 0;

  SampleStream stream(problem, cfg.seed);
  Sample sample;
  std::vector<Sample> batch(cfg.oracle.kind == OracleKind::MiniBatch ? cfg.oracle.batch_size : 0);
  RunningAverageOracle running(cfg.oracle.kind == OracleKind::RunningAverage ? d : 0);
  std::normal_distribution<double> normal(0.0, 1.0);

  AcsgdState state = AcsgdState::initial(problem.start());
  detail::Averager averager(cfg.averaging, cfg.iterations, d);
  averager.add(0, state.x);
  Vector g(d);

  auto log_point = [&](long long t) -> bool {
    const double last = excess_risk(problem, state.x);
    const double avg =
        cfg.averaging.kind == AveragingKind::LastIterate ? last : excess_risk(problem, averager.value(state.x));
    if (!std::isfinite(last) || !std::isfinite(avg) || last > detail::kDivergenceRisk ||
        avg > detail::kDivergenceRisk) {
      rec.diverged = true;
      rec.diverged_at = t;
      return false;
    }
    rec.log.push_back({t, t * rec.samples_per_iteration, last, avg});
    return true;
  };

  while (next_log < schedule.size() && schedule[next_log] < 0) ++next_log;
  if (next_log < schedule.size() && schedule[next_log] == 0) {
    log_point(0);
    ++next_log;
  }

  for (long long t = 0; t < cfg.iterations; ++t) {
    const Sample* seen = nullptr;
    switch (cfg.oracle.kind) {
      case OracleKind::Sgd:
        stream.next(sample);
        sgd_gradient(sample, state.x, g);
        seen = &sample;
        break;
      case OracleKind::MiniBatch:
        for (Sample& s : batch) stream.next(s);
        minibatch_gradient(batch, state.x, g);
        break;
      case OracleKind::Exact:
        g.noalias() = problem.covariance() * (state.x - problem.optimum());
        break;
      case OracleKind::ExactAdditive:
        g.noalias() = problem.covariance() * (state.x - problem.optimum());
        for (int i = 0; i < d; ++i) g(i) += cfg.oracle.noise_std * normal(stream.rng());
        break;
      case OracleKind::RunningAverage:
        stream.next(sample);
        running.ingest(sample);
        running.gradient(state.x, g);
        seen = &sample;
        break;
    }

    if (cfg.algorithm == Algorithm::AcSGD) {
      acsgd_step(state, g, cfg.steps);
    } else {
      state.x.noalias() -= cfg.steps.beta * g;
      state.t += 1;
    }
    averager.add(state.t, state.x);

    if (cfg.observer) {
      if (cfg.algorithm == Algorithm::AcSGD)
        cfg.observer(IterateView{state.t, state.x, state.y, state.z, seen});
      else
        cfg.observer(IterateView{state.t, state.x, state.x, state.x, seen});
    }

    if (!state.x.allFinite()) {
      rec.diverged = true;
      rec.diverged_at = state.t;
      break;
    }
    if (next_log < schedule.size() && schedule[next_log] == state.t) {
      ++next_log;
      if (!log_point(state.t)) break;
    }
  }
  return rec;
}

/// Same loop with the mini-batch oracle (b samples per iteration).
inline RunRecord run_minibatch(const LeastSquaresProblem& problem, int batch_size, const StepSizes& steps,
                               long long iterations, const Averaging& averaging, std::uint64_t seed,
                               int points_per_decade = 50) {
  RunConfig cfg;
  cfg.algorithm = Algorithm::AcSGD;
  cfg.oracle.kind = OracleKind::MiniBatch;
  cfg.oracle.batch_size = batch_size;
  cfg.steps = steps;
  cfg.iterations = iterations;
  cfg.averaging = averaging;
  cfg.seed = seed;
  cfg.points_per_decade = points_per_decade;
  return run(problem, cfg);
}

}  // namespace acls

#endif  // ACLS_ALGORITHMS_HPP
