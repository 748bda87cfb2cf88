#ifndef ACLS_EXPERIMENTS_HPP
#define ACLS_EXPERIMENTS_HPP

#include "acls/algorithms.hpp"
#include "acls/numeric.hpp"
#include "acls/operator_lab.hpp"
#include "acls/oracles.hpp"
#include "acls/problem.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace acls {

using Json = nlohmann::json;

/// Raised for invalid configuration content; the message names the key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ExperimentKind { LastIterateNoiseless, AveragedNoisy, MemoryTradeoff, LowerBound, OperatorVerify, Custom };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::LastIterateNoiseless: return "last_iterate_noiseless";
    case ExperimentKind::AveragedNoisy: return "averaged_noisy";
    case ExperimentKind::MemoryTradeoff: return "memory_tradeoff";
    case ExperimentKind::LowerBound: return "lower_bound";
    case ExperimentKind::OperatorVerify: return "operator_verify";
    case ExperimentKind::Custom: return "custom";
  }
  return "unknown";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (ExperimentKind k : {ExperimentKind::LastIterateNoiseless, ExperimentKind::AveragedNoisy,
                           ExperimentKind::MemoryTradeoff, ExperimentKind::LowerBound, ExperimentKind::OperatorVerify,
                           ExperimentKind::Custom}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("experiment: unknown value '" + s + "'");
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "gaussian") return FeatureKind::Gaussian;
  if (s == "one_hot") return FeatureKind::OneHot;
  throw ConfigError("problem.kind: unknown value '" + s + "'");
}

struct ProblemSpec {
  FeatureKind kind = FeatureKind::Gaussian;
  int d = 50;
  double decay = 4.0;  // Gaussian only
  double scale = 1.0;  // Gaussian only
  double sigma = 0.0;
  std::uint64_t seed = 7;  // Gaussian eigenbasis

  bool operator==(const ProblemSpec&) const = default;
};

/// Named step-size rules; explicit alpha/beta override them.
enum class StepRule { Auto, Averaged, LastIterate, Experiment, Minibatch, Unscaled };

inline const char* to_string(StepRule r) {
  switch (r) {
    case StepRule::Auto: return "auto";
    case StepRule::Averaged: return "averaged";
    case StepRule::LastIterate: return "last_iterate";
    case StepRule::Experiment: return "experiment";
    case StepRule::Minibatch: return "minibatch";
    case StepRule::Unscaled: return "unscaled";
  }
  return "unknown";
}

inline StepRule step_rule_from_string(const std::string& s) {
  for (StepRule r : {StepRule::Auto, StepRule::Averaged, StepRule::LastIterate, StepRule::Experiment,
                     StepRule::Minibatch, StepRule::Unscaled}) {
    if (s == to_string(r)) return r;
  }
  throw ConfigError("step_rule: unknown value '" + s + "'");
}

struct AlgorithmSpec {
  std::string label;
  Algorithm algorithm = Algorithm::AcSGD;
  OracleSpec oracle;
  Averaging averaging;
  StepRule step_rule = StepRule::Auto;
  std::optional<double> alpha;
  std::optional<double> beta;  // also the SGD step

  bool operator==(const AlgorithmSpec& o) const {
    return label == o.label && algorithm == o.algorithm && oracle.kind == o.oracle.kind &&
           oracle.batch_size == o.oracle.batch_size && oracle.noise_std == o.oracle.noise_std &&
           averaging.kind == o.averaging.kind && averaging.tail_fraction == o.averaging.tail_fraction &&
           step_rule == o.step_rule && alpha == o.alpha && beta == o.beta;
  }
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Custom;
  ProblemSpec problem;
  std::vector<AlgorithmSpec> algorithms;
  long long iterations = 1000000;
  int repetitions = 10;
  std::uint64_t base_seed = 0;
  std::string output;  // path prefix for <output>.csv and <output>.json; empty = no files
  int points_per_decade = 50;
  std::optional<std::pair<double, double>> slope_window;
  StepRule operator_steps = StepRule::Averaged;  // OperatorVerify only

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline AlgorithmSpec make_algorithm(std::string label, Algorithm a, OracleKind o, AveragingKind avg,
                                    StepRule rule = StepRule::Auto) {
  AlgorithmSpec s;
  s.label = std::move(label);
  s.algorithm = a;
  s.oracle.kind = o;
  s.averaging.kind = avg;
  s.step_rule = rule;
  return s;
}

}  // namespace detail

/// Defaults for each experiment: Gaussian d = 50 with lambda_i = 1/i^4 for the
/// synthetic runs, one-hot uniform d = 50 for the lower bound.
inline ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  switch (kind) {
    case ExperimentKind::LastIterateNoiseless:
      c.algorithms = {detail::make_algorithm("acsgd", Algorithm::AcSGD, OracleKind::Sgd, AveragingKind::LastIterate),
                      detail::make_algorithm("sgd", Algorithm::SGD, OracleKind::Sgd, AveragingKind::LastIterate)};
      break;
    case ExperimentKind::AveragedNoisy:
      c.problem.sigma = 0.02;
      c.algorithms = {detail::make_algorithm("acsgd", Algorithm::AcSGD, OracleKind::Sgd, AveragingKind::Weighted),
                      detail::make_algorithm("sgd", Algorithm::SGD, OracleKind::Sgd, AveragingKind::Polyak)};
      break;
    case ExperimentKind::MemoryTradeoff:
      c.algorithms = {
          detail::make_algorithm("acsgd", Algorithm::AcSGD, OracleKind::Sgd, AveragingKind::LastIterate),
          detail::make_algorithm("acsgd_running_average", Algorithm::AcSGD, OracleKind::RunningAverage,
                                 AveragingKind::LastIterate, StepRule::Unscaled)};
      break;
    case ExperimentKind::LowerBound:
      c.problem = {FeatureKind::OneHot, 50, 0.0, 1.0, 0.0, 0};
      c.iterations = 25;
      c.repetitions = 20;
      c.algorithms = {detail::make_algorithm("acsgd", Algorithm::AcSGD, OracleKind::Sgd, AveragingKind::LastIterate),
                      detail::make_algorithm("sgd", Algorithm::SGD, OracleKind::Sgd, AveragingKind::LastIterate)};
      break;
    case ExperimentKind::OperatorVerify:
      c.problem = {FeatureKind::OneHot, 8, 0.0, 1.0, 0.0, 0};
      c.iterations = 1;
      c.repetitions = 1;
      break;
    case ExperimentKind::Custom:
      break;
  }
  return c;
}

// ---- JSON ----------------------------------------------------------------

namespace detail {

inline void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where.empty() ? "config must be a JSON object" : where + ": must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
  }
}

template <class T>
T get_field(const Json& j, const std::string& key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + ": invalid value type");
  }
}

inline Json optional_to_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline std::optional<double> optional_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace detail

inline Json to_json(const AlgorithmSpec& a) {
  Json j;
  j["label"] = a.label;
  j["algorithm"] = to_string(a.algorithm);
  j["oracle"] = to_string(a.oracle.kind);
  j["batch_size"] = a.oracle.batch_size;
  j["oracle_noise_std"] = a.oracle.noise_std;
  j["averaging"] = to_string(a.averaging.kind);
  j["tail_fraction"] = a.averaging.tail_fraction;
  j["step_rule"] = to_string(a.step_rule);
  j["alpha"] = detail::optional_to_json(a.alpha);
  j["beta"] = detail::optional_to_json(a.beta);
  return j;
}

inline AlgorithmSpec algorithm_spec_from_json(const Json& j, const std::string& path) {
  detail::reject_unknown(j, {"label", "algorithm", "oracle", "batch_size", "oracle_noise_std", "averaging",
                             "tail_fraction", "step_rule", "alpha", "beta"},
                         path);
  AlgorithmSpec a;
  try {
    if (j.contains("algorithm")) a.algorithm = algorithm_from_string(detail::get_field<std::string>(j, "algorithm", path + ".algorithm"));
    if (j.contains("oracle")) a.oracle.kind = oracle_kind_from_string(detail::get_field<std::string>(j, "oracle", path + ".oracle"));
    if (j.contains("averaging"))
      a.averaging.kind = averaging_kind_from_string(detail::get_field<std::string>(j, "averaging", path + ".averaging"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  a.label = j.contains("label") ? detail::get_field<std::string>(j, "label", path + ".label") : to_string(a.algorithm);
  if (j.contains("batch_size")) a.oracle.batch_size = detail::get_field<int>(j, "batch_size", path + ".batch_size");
  if (j.contains("oracle_noise_std"))
    a.oracle.noise_std = detail::get_field<double>(j, "oracle_noise_std", path + ".oracle_noise_std");
  if (j.contains("tail_fraction"))
    a.averaging.tail_fraction = detail::get_field<double>(j, "tail_fraction", path + ".tail_fraction");
  if (j.contains("step_rule")) {
    try {
      a.step_rule = step_rule_from_string(detail::get_field<std::string>(j, "step_rule", path + ".step_rule"));
    } catch (const ConfigError& e) {
      throw ConfigError(path + "." + e.what());
    }
  }
  try {
    if (j.contains("alpha")) a.alpha = detail::optional_from_json(j.at("alpha"));
    if (j.contains("beta")) a.beta = detail::optional_from_json(j.at("beta"));
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + ": alpha/beta must be numbers");
  }
  if (a.oracle.batch_size < 1) throw ConfigError(path + ".batch_size: must be >= 1");
  if (a.oracle.noise_std < 0.0) throw ConfigError(path + ".oracle_noise_std: must be >= 0");
  if (!(a.averaging.tail_fraction > 0.0 && a.averaging.tail_fraction <= 1.0))
    throw ConfigError(path + ".tail_fraction: must be in (0, 1]");
  if (a.alpha && *a.alpha < 0.0) throw ConfigError(path + ".alpha: must be >= 0");
  if (a.beta && *a.beta < 0.0) throw ConfigError(path + ".beta: must be >= 0");
  return a;
}

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["experiment"] = to_string(c.experiment);
  j["problem"] = {{"kind", to_string(c.problem.kind)}, {"d", c.problem.d},       {"decay", c.problem.decay},
                  {"scale", c.problem.scale},          {"sigma", c.problem.sigma}, {"seed", c.problem.seed}};
  j["algorithms"] = Json::array();
  for (const AlgorithmSpec& a : c.algorithms) j["algorithms"].push_back(to_json(a));
  j["iterations"] = c.iterations;
  j["repetitions"] = c.repetitions;
  j["base_seed"] = c.base_seed;
  j["output"] = c.output;
  j["points_per_decade"] = c.points_per_decade;
  j["slope_window"] = c.slope_window ? Json::array({c.slope_window->first, c.slope_window->second}) : Json(nullptr);
  j["operator_steps"] = to_string(c.operator_steps);
  return j;
}

/// Parses a config document. Missing fields take the experiment defaults;
/// unknown keys and invalid values raise ConfigError naming the key.
inline ExperimentConfig config_from_json(const Json& j) {
  detail::reject_unknown(j, {"experiment", "problem", "algorithms", "iterations", "repetitions", "base_seed", "output",
                             "points_per_decade", "slope_window", "operator_steps"},
                         "");
  ExperimentKind kind = ExperimentKind::Custom;
  if (j.contains("experiment")) kind = experiment_kind_from_string(detail::get_field<std::string>(j, "experiment", "experiment"));
  ExperimentConfig c = default_config(kind);

  if (j.contains("problem")) {
    const Json& p = j.at("problem");
    detail::reject_unknown(p, {"kind", "d", "decay", "scale", "sigma", "seed"}, "problem");
    if (p.contains("kind")) c.problem.kind = feature_kind_from_string(detail::get_field<std::string>(p, "kind", "problem.kind"));
    if (p.contains("d")) c.problem.d = detail::get_field<int>(p, "d", "problem.d");
    if (p.contains("decay")) c.problem.decay = detail::get_field<double>(p, "decay", "problem.decay");
    if (p.contains("scale")) c.problem.scale = detail::get_field<double>(p, "scale", "problem.scale");
    if (p.contains("sigma")) c.problem.sigma = detail::get_field<double>(p, "sigma", "problem.sigma");
    if (p.contains("seed")) c.problem.seed = detail::get_field<std::uint64_t>(p, "seed", "problem.seed");
  }
  if (c.problem.d < 1) throw ConfigError("problem.d: must be >= 1");
  if (c.problem.sigma < 0.0) throw ConfigError("problem.sigma: must be >= 0");
  if (c.problem.decay < 0.0) throw ConfigError("problem.decay: must be >= 0");
  if (!(c.problem.scale > 0.0)) throw ConfigError("problem.scale: must be > 0");

  if (j.contains("algorithms")) {
    const Json& arr = j.at("algorithms");
    if (!arr.is_array()) throw ConfigError("algorithms: must be an array");
    c.algorithms.clear();
    for (std::size_t i = 0; i < arr.size(); ++i)
      c.algorithms.push_back(algorithm_spec_from_json(arr[i], "algorithms[" + std::to_string(i) + "]"));
  }
  std::set<std::string> labels;
  for (const AlgorithmSpec& a : c.algorithms) {
    if (!labels.insert(a.label).second) throw ConfigError("algorithms: duplicate label '" + a.label + "'");
  }
  if (c.experiment == ExperimentKind::Custom && c.algorithms.empty())
    throw ConfigError("algorithms: required for custom experiments");

  if (j.contains("iterations")) c.iterations = detail::get_field<long long>(j, "iterations", "iterations");
  if (j.contains("repetitions")) c.repetitions = detail::get_field<int>(j, "repetitions", "repetitions");
  if (j.contains("base_seed")) c.base_seed = detail::get_field<std::uint64_t>(j, "base_seed", "base_seed");
  if (j.contains("output")) c.output = detail::get_field<std::string>(j, "output", "output");
  if (j.contains("points_per_decade"))
    c.points_per_decade = detail::get_field<int>(j, "points_per_decade", "points_per_decade");
  if (j.contains("slope_window") && !j.at("slope_window").is_null()) {
    const Json& w = j.at("slope_window");
    if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number())
      throw ConfigError("slope_window: must be [t_lo, t_hi]");
    c.slope_window = std::make_pair(w[0].get<double>(), w[1].get<double>());
    if (!(c.slope_window->first > 0.0 && c.slope_window->first < c.slope_window->second))
      throw ConfigError("slope_window: need 0 < t_lo < t_hi");
  }
  if (j.contains("operator_steps"))
    c.operator_steps = step_rule_from_string(detail::get_field<std::string>(j, "operator_steps", "operator_steps"));

  if (c.iterations < 1) throw ConfigError("iterations: must be >= 1");
  if (c.repetitions < 1) throw ConfigError("repetitions: must be >= 1");
  if (c.points_per_decade < 1) throw ConfigError("points_per_decade: must be >= 1");
  return c;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

/// Applies ACLS_SEED (an unsigned integer) to base_seed when set.
inline void apply_environment(ExperimentConfig& c) {
  const char* env = std::getenv("ACLS_SEED");
  if (env == nullptr || *env == '\0') return;
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0' || env[0] == '-')
    throw ConfigError(std::string("ACLS_SEED: not an unsigned integer: '") + env + "'");
  c.base_seed = v;
}

// ---- problems and step sizes ----------------------------------------------

inline LeastSquaresProblem build_problem(const ProblemSpec& p) {
  if (p.kind == FeatureKind::Gaussian) return make_gaussian_problem(p.d, p.decay, p.scale, p.sigma, p.seed);
  return make_uniform_one_hot_problem(p.d, p.sigma);
}

/// Step sizes for an algorithm entry. Auto picks: the experiment rule on
/// Gaussian problems, the averaged rule on one-hot problems, the mini-batch
/// rule for mini-batch oracles, and 1/(3 tr H) for both steps with the
/// running-average oracle.
inline StepSizes resolve_step_sizes(const AlgorithmSpec& a, const LeastSquaresProblem& problem) {
  const ProblemConstants c = constants(problem);
  StepSizes s;
  if (a.algorithm == Algorithm::SGD) {
    s = {0.0, default_sgd_step(problem)};
  } else {
    StepRule rule = a.step_rule;
    if (rule == StepRule::Auto) {
      if (a.oracle.kind == OracleKind::RunningAverage)
        rule = StepRule::Unscaled;
      else if (a.oracle.kind == OracleKind::MiniBatch)
        rule = StepRule::Minibatch;
      else
        rule = problem.kind() == FeatureKind::Gaussian ? StepRule::Experiment : StepRule::Averaged;
    }
    switch (rule) {
      case StepRule::Averaged: s = default_step_sizes_averaged(c); break;
      case StepRule::LastIterate: s = default_step_sizes_last_iterate(c); break;
      case StepRule::Experiment: s = experiment_step_sizes(c); break;
      case StepRule::Minibatch: s = default_step_sizes_minibatch(c, a.oracle.batch_size); break;
      case StepRule::Unscaled: s = {1.0 / (3.0 * c.trace_h), 1.0 / (3.0 * c.trace_h)}; break;
      case StepRule::Auto: break;
    }
  }
  if (a.alpha) s.alpha = *a.alpha;
  if (a.beta) s.beta = *a.beta;
  return s;
}

inline StepSizes operator_step_sizes(StepRule rule, const LeastSquaresProblem& problem) {
  const ProblemConstants c = constants(problem);
  switch (rule) {
    case StepRule::LastIterate: return default_step_sizes_last_iterate(c);
    case StepRule::Experiment: return experiment_step_sizes(c);
    default: return default_step_sizes_averaged(c);
  }
}

// ---- curves and slopes -----------------------------------------------------

struct CurvePoint {
  long long t = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  int n_seeds = 0;

  bool operator==(const CurvePoint&) const = default;
};

struct Curve {
  std::string label;
  Algorithm algorithm = Algorithm::AcSGD;
  OracleKind oracle = OracleKind::Sgd;
  AveragingKind averaging = AveragingKind::LastIterate;
  StepSizes steps;
  std::vector<CurvePoint> points;
  int diverged_seeds = 0;

  /// Mean risk at the last logged point not after t.
  double at(long long t) const {
    double v = std::numeric_limits<double>::quiet_NaN();
    for (const CurvePoint& p : points) {
      if (p.t > t) break;
      v = p.mean;
    }
    return v;
  }
};

/// Runs one algorithm over seeds base_seed .. base_seed + reps - 1 and
/// averages the configured risk per schedule point in seed order.
inline Curve run_curve(const LeastSquaresProblem& problem, const AlgorithmSpec& spec, long long iterations,
                       int repetitions, std::uint64_t base_seed, int points_per_decade = 50) {
  RunConfig rc;
  rc.algorithm = spec.algorithm;
  rc.oracle = spec.oracle;
  rc.averaging = spec.averaging;
  rc.steps = resolve_step_sizes(spec, problem);
  rc.iterations = iterations;
  rc.points_per_decade = points_per_decade;

  Curve curve;
  curve.label = spec.label;
  curve.algorithm = spec.algorithm;
  curve.oracle = spec.oracle.kind;
  curve.averaging = spec.averaging.kind;
  curve.steps = rc.steps;

  std::map<long long, std::vector<double>> by_t;
  for (int r = 0; r < repetitions; ++r) {
    rc.seed = base_seed + static_cast<std::uint64_t>(r);
    const RunRecord rec = run(problem, rc);
    if (rec.diverged) ++curve.diverged_seeds;
    for (const LogEntry& e : rec.log) by_t[e.t].push_back(rec.risk(e));
  }
  for (const auto& [t, values] : by_t) {
    const MeanStderr ms = mean_stderr(values);
    curve.points.push_back({t, ms.mean, ms.stderr_, static_cast<int>(ms.n)});
  }
  return curve;
}

struct SlopeEstimate {
  double t_lo = 0.0;
  double t_hi = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared_fit = 0.0;
  int points = 0;

  bool operator==(const SlopeEstimate&) const = default;
};

/// Least squares of log(risk) on log(t) over points with t in [t_lo, t_hi].
inline SlopeEstimate fit_slope(const std::vector<std::pair<double, double>>& curve, double t_lo, double t_hi) {
  std::vector<double> xs, ys;
  for (const auto& [t, risk] : curve) {
    if (t < t_lo || t > t_hi) continue;
    if (!(risk > 0.0)) throw std::invalid_argument("fit_slope: nonpositive risk in window");
    xs.push_back(std::log(t));
    ys.push_back(std::log(risk));
  }
  if (xs.empty()) throw std::invalid_argument("fit_slope: empty window");
  if (xs.size() < 5) throw std::invalid_argument("fit_slope: fewer than 5 points in window");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_slope: window holds a single abscissa");
  SlopeEstimate s;
  s.t_lo = t_lo;
  s.t_hi = t_hi;
  s.slope = sxy / sxx;
  s.intercept = my - s.slope * mx;
  s.r_squared_fit = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  s.points = static_cast<int>(xs.size());
  return s;
}

inline SlopeEstimate fit_slope(const Curve& curve, double t_lo, double t_hi) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(curve.points.size());
  for (const CurvePoint& p : curve.points) pts.emplace_back(static_cast<double>(p.t), p.mean);
  return fit_slope(pts, t_lo, t_hi);
}

// ---- reports ---------------------------------------------------------------

struct Verdict {
  std::string name;
  double value = 0.0;
  std::optional<double> lo;
  std::optional<double> hi;
  bool pass = false;

  bool operator==(const Verdict&) const = default;
};

inline Verdict make_verdict(std::string name, double value, std::optional<double> lo, std::optional<double> hi) {
  const bool ok = std::isfinite(value) && (!lo || value >= *lo) && (!hi || value <= *hi);
  return {std::move(name), value, lo, hi, ok};
}

struct SlopeRecord {
  std::string label;
  SlopeEstimate estimate;

  bool operator==(const SlopeRecord&) const = default;
};

struct ExperimentSummary {
  Json config;
  Json constants;
  std::vector<SlopeRecord> slopes;
  std::vector<Verdict> verdicts;

  bool all_pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
  }
  bool operator==(const ExperimentSummary&) const = default;
};

inline Json constants_to_json(const ProblemConstants& c) {
  return {{"r_squared", c.r_squared}, {"stat_condition", c.stat_condition}, {"kurtosis", c.kurtosis},
          {"l_smooth", c.l_smooth},   {"trace_h", c.trace_h},               {"noise_var", c.noise_var},
          {"dimension", c.dimension}};
}

inline Json to_json(const ExperimentSummary& s) {
  Json j;
  j["config"] = s.config;
  j["constants"] = s.constants;
  j["slopes"] = Json::array();
  for (const SlopeRecord& r : s.slopes) {
    j["slopes"].push_back({{"label", r.label},
                           {"t_lo", r.estimate.t_lo},
                           {"t_hi", r.estimate.t_hi},
                           {"slope", r.estimate.slope},
                           {"intercept", r.estimate.intercept},
                           {"r_squared_fit", r.estimate.r_squared_fit},
                           {"points", r.estimate.points}});
  }
  j["verdicts"] = Json::array();
  for (const Verdict& v : s.verdicts) {
    j["verdicts"].push_back({{"name", v.name},
                             {"value", v.value},
                             {"lo", detail::optional_to_json(v.lo)},
                             {"hi", detail::optional_to_json(v.hi)},
                             {"pass", v.pass}});
  }
  return j;
}

inline ExperimentSummary summary_from_json(const Json& j) {
  ExperimentSummary s;
  s.config = j.at("config");
  s.constants = j.at("constants");
  for (const Json& r : j.at("slopes")) {
    SlopeRecord rec;
    rec.label = r.at("label").get<std::string>();
    rec.estimate.t_lo = r.at("t_lo").get<double>();
    rec.estimate.t_hi = r.at("t_hi").get<double>();
    rec.estimate.slope = r.at("slope").get<double>();
    rec.estimate.intercept = r.at("intercept").get<double>();
    rec.estimate.r_squared_fit = r.at("r_squared_fit").get<double>();
    rec.estimate.points = r.at("points").get<int>();
    s.slopes.push_back(rec);
  }
  for (const Json& v : j.at("verdicts")) {
    s.verdicts.push_back({v.at("name").get<std::string>(), v.at("value").get<double>(),
                          detail::optional_from_json(v.at("lo")), detail::optional_from_json(v.at("hi")),
                          v.at("pass").get<bool>()});
  }
  return s;
}

// ---- CSV -------------------------------------------------------------------

inline constexpr const char* kCsvHeader = "t,algorithm,oracle,averaging,mean_excess_risk,stderr,n_seeds";

/// Rows sorted by (algorithm label, t) with fixed formatting.
inline std::string curves_to_csv(std::vector<Curve> curves) {
  std::sort(curves.begin(), curves.end(), [](const Curve& a, const Curve& b) { return a.label < b.label; });
  std::string out = std::string(kCsvHeader) + "\n";
  char buf[256];
  for (const Curve& c : curves) {
    for (const CurvePoint& p : c.points) {
      std::snprintf(buf, sizeof buf, "%lld,%s,%s,%s,%.9e,%.9e,%d\n", p.t, c.label.c_str(), to_string(c.oracle),
                    to_string(c.averaging), p.mean, p.stderr_, p.n_seeds);
      out += buf;
    }
  }
  return out;
}

struct CsvRow {
  long long t = 0;
  std::string algorithm;
  std::string oracle;
  std::string averaging;
  double mean = 0.0;
  double stderr_ = 0.0;
  int n_seeds = 0;
};

inline std::vector<CsvRow> parse_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("curve csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw std::invalid_argument("curve csv: unexpected header '" + line + "'");
  std::vector<CsvRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw std::invalid_argument("curve csv: line " + std::to_string(lineno) + " has wrong arity");
    try {
      rows.push_back({std::stoll(f[0]), f[1], f[2], f[3], std::stod(f[4]), std::stod(f[5]), std::stoi(f[6])});
    } catch (const std::exception&) {
      throw std::invalid_argument("curve csv: line " + std::to_string(lineno) + " is malformed");
    }
  }
  return rows;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

// ---- named experiments -----------------------------------------------------

struct LowerBoundAlgorithmReport {
  std::string label;
  double mean_risk = 0.0;  // at t = d/2
  double stderr_ = 0.0;
  double max_span_residual = 0.0;
  bool counting_bound_holds = true;  // per seed, every t: risk >= (d - #seen)/(2 d^2)
};

struct LowerBoundReport {
  int d = 0;
  long long t_check = 0;
  double reference = 0.0;  // 1/(4d)
  std::vector<LowerBoundAlgorithmReport> algorithms;
};

/// Noiseless one-hot uniform problem; measures the risk at t = d/2 and checks
/// that x_t - x_0 stays in the span of the observed features.
inline LowerBoundReport lower_bound_experiment(int d, const std::vector<AlgorithmSpec>& algorithms, int reps,
                                               std::uint64_t seed) {
  if (d < 2 || d % 2 != 0) throw std::invalid_argument("lower_bound_experiment: d must be even and >= 2");
  if (reps < 1) throw std::invalid_argument("lower_bound_experiment: reps must be >= 1");
  const LeastSquaresProblem problem = make_uniform_one_hot_problem(d, 0.0);
  LowerBoundReport report;
  report.d = d;
  report.t_check = d / 2;
  report.reference = 1.0 / (4.0 * d);

  for (const AlgorithmSpec& spec : algorithms) {
    LowerBoundAlgorithmReport ar;
    ar.label = spec.label;
    std::vector<double> risks;
    for (int r = 0; r < reps; ++r) {
      RunConfig rc;
      rc.algorithm = spec.algorithm;
      rc.oracle = spec.oracle;
      rc.averaging = spec.averaging;
      rc.steps = resolve_step_sizes(spec, problem);
      rc.iterations = report.t_check;
      rc.schedule = {report.t_check};
      rc.seed = seed + static_cast<std::uint64_t>(r);

      Matrix basis(d, 0);  // orthonormal basis of the observed features
      std::vector<bool> seen(static_cast<std::size_t>(d), false);
      int n_seen = 0;
      const Vector x0 = problem.start();
      rc.observer = [&](const IterateView& v) {
        if (v.sample != nullptr) {
          Vector q = v.sample->features;
          q -= basis * (basis.transpose() * q);
          const double nq = q.norm();
          if (nq > 1e-12) {
            basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
            basis.col(basis.cols() - 1) = q / nq;
          }
          for (int i = 0; i < d; ++i) {
            if (v.sample->features(i) != 0.0 && !seen[static_cast<std::size_t>(i)]) {
              seen[static_cast<std::size_t>(i)] = true;
              ++n_seen;
            }
          }
        }
        const Vector diff = v.x - x0;
        const double res = (diff - basis * (basis.transpose() * diff)).norm();
        ar.max_span_residual = std::max(ar.max_span_residual, res);
        const double floor = static_cast<double>(d - n_seen) / (2.0 * d * d);
        if (excess_risk(problem, v.x) < floor * (1.0 - 1e-12)) ar.counting_bound_holds = false;
      };
      const RunRecord rec = run(problem, rc);
      risks.push_back(rec.risk(rec.log.back()));
    }
    const MeanStderr ms = mean_stderr(risks);
    ar.mean_risk = ms.mean;
    ar.stderr_ = ms.stderr_;
    report.algorithms.push_back(ar);
  }
  return report;
}

struct MemoryTradeoffReport {
  Curve linear_memory;     // SGD oracle, alpha = 1/(3 d tr H)
  Curve quadratic_memory;  // running-average oracle, alpha = beta = 1/(3 tr H)
  SlopeEstimate quadratic_slope;
  long long reference_t = 0;
  double reference_risk = 0.0;
  long long linear_crossing_t = -1;  // -1 when not reached within T
  double iteration_ratio = 0.0;      // lower bound T/reference_t when not reached
  bool ratio_censored = false;
};

inline MemoryTradeoffReport memory_tradeoff_experiment(int d, long long iterations, int reps, std::uint64_t seed,
                                                       double decay = 4.0, long long reference_t = -1,
                                                       std::pair<double, double> window = {-1.0, -1.0},
                                                       int points_per_decade = 50) {
  const LeastSquaresProblem problem = make_gaussian_problem(d, decay, 1.0, 0.0, 7);
  const ExperimentConfig defaults = default_config(ExperimentKind::MemoryTradeoff);
  MemoryTradeoffReport r;
  r.linear_memory = run_curve(problem, defaults.algorithms[0], iterations, reps, seed, points_per_decade);
  r.quadratic_memory = run_curve(problem, defaults.algorithms[1], iterations, reps, seed, points_per_decade);
  if (window.first <= 0.0) window = {10.0 * d, std::min<double>(100.0 * d, static_cast<double>(iterations))};
  r.quadratic_slope = fit_slope(r.quadratic_memory, window.first, window.second);

  r.reference_t = reference_t > 0 ? reference_t : 100LL * d;
  r.reference_risk = r.quadratic_memory.at(r.reference_t);
  for (const CurvePoint& p : r.linear_memory.points) {
    if (p.mean <= r.reference_risk) {
      r.linear_crossing_t = p.t;
      break;
    }
  }
  if (r.linear_crossing_t < 0) {
    r.ratio_censored = true;
    r.iteration_ratio = static_cast<double>(iterations) / static_cast<double>(r.reference_t);
  } else {
    r.iteration_ratio = static_cast<double>(r.linear_crossing_t) / static_cast<double>(r.reference_t);
  }
  return r;
}

// ---- driver ----------------------------------------------------------------

struct ExperimentResult {
  std::vector<Curve> curves;
  ExperimentSummary summary;
  std::string csv;
};

namespace detail {

inline const Curve& find_curve(const std::vector<Curve>& curves, const std::string& label) {
  for (const Curve& c : curves)
    if (c.label == label) return c;
  throw std::invalid_argument("experiment: no algorithm labelled '" + label + "'");
}

}  // namespace detail

/// Executes a configured experiment; writes <output>.csv and <output>.json
/// when output is non-empty.
inline ExperimentResult run_experiment(ExperimentConfig cfg) {
  apply_environment(cfg);
  ExperimentResult res;
  const LeastSquaresProblem problem = build_problem(cfg.problem);
  const double d = cfg.problem.d;
  const double t_final = static_cast<double>(cfg.iterations);
  ExperimentSummary& sum = res.summary;
  sum.constants = constants_to_json(constants(problem));

  auto add_slope = [&](const std::string& label, double lo, double hi) -> SlopeEstimate {
    const SlopeEstimate s = fit_slope(detail::find_curve(res.curves, label), lo, hi);
    sum.slopes.push_back({label, s});
    return s;
  };

  switch (cfg.experiment) {
    case ExperimentKind::LowerBound: {
      const LowerBoundReport lb = lower_bound_experiment(cfg.problem.d, cfg.algorithms, cfg.repetitions, cfg.base_seed);
      for (const LowerBoundAlgorithmReport& a : lb.algorithms) {
        sum.verdicts.push_back(make_verdict(a.label + ".risk_at_half_d", a.mean_risk, 0.8 * lb.reference, std::nullopt));
        sum.verdicts.push_back(make_verdict(a.label + ".span_residual", a.max_span_residual, std::nullopt, 1e-10));
        sum.verdicts.push_back(make_verdict(a.label + ".counting_bound", a.counting_bound_holds ? 1.0 : 0.0, 1.0, std::nullopt));
      }
      for (const AlgorithmSpec& a : cfg.algorithms)
        res.curves.push_back(run_curve(problem, a, cfg.iterations, cfg.repetitions, cfg.base_seed, cfg.points_per_decade));
      break;
    }
    case ExperimentKind::OperatorVerify: {
      const StepSizes steps = operator_step_sizes(cfg.operator_steps, problem);
      const AlmostEigenvectorReport r = verify_almost_eigenvector(problem, steps);
      sum.verdicts.push_back(make_verdict("noise_margin", r.noise_margin, -1e-10, std::nullopt));
      sum.verdicts.push_back(make_verdict("upsilon_margin", r.upsilon_margin, -1e-10, std::nullopt));
      sum.verdicts.push_back(make_verdict("step_conditions", r.conditions_hold ? 1.0 : 0.0, 1.0, std::nullopt));
      break;
    }
    default: {
      for (const AlgorithmSpec& a : cfg.algorithms)
        res.curves.push_back(run_curve(problem, a, cfg.iterations, cfg.repetitions, cfg.base_seed, cfg.points_per_decade));
      break;
    }
  }

  switch (cfg.experiment) {
    case ExperimentKind::LastIterateNoiseless: {
      const auto w = cfg.slope_window.value_or(std::make_pair(10.0 * d, std::min(100.0 * d, t_final)));
      const SlopeEstimate a = add_slope("acsgd", w.first, w.second);
      const SlopeEstimate s = add_slope("sgd", w.first, w.second);
      sum.verdicts.push_back(make_verdict("acsgd.slope", a.slope, -2.3, -1.6));
      sum.verdicts.push_back(make_verdict("sgd.slope", s.slope, -1.3, -0.7));
      const double ratio = detail::find_curve(res.curves, "sgd").points.back().mean /
                           detail::find_curve(res.curves, "acsgd").points.back().mean;
      sum.verdicts.push_back(make_verdict("sgd_over_acsgd_final_risk", ratio, 10.0, std::nullopt));
      break;
    }
    case ExperimentKind::AveragedNoisy: {
      const auto w = cfg.slope_window.value_or(std::make_pair(t_final / 10.0, t_final));
      const SlopeEstimate a = add_slope("acsgd", w.first, w.second);
      add_slope("sgd", w.first, w.second);
      sum.verdicts.push_back(make_verdict("acsgd.slope", a.slope, -1.4, -0.7));
      const double ratio = detail::find_curve(res.curves, "acsgd").points.back().mean /
                           detail::find_curve(res.curves, "sgd").points.back().mean;
      sum.verdicts.push_back(make_verdict("acsgd_over_sgd_final_risk", ratio, std::nullopt, 1.5));
      break;
    }
    case ExperimentKind::MemoryTradeoff: {
      const auto w = cfg.slope_window.value_or(std::make_pair(10.0 * d, std::min(100.0 * d, t_final)));
      const Curve& lin = detail::find_curve(res.curves, "acsgd");
      const Curve& quad = detail::find_curve(res.curves, "acsgd_running_average");
      add_slope("acsgd", w.first, w.second);
      const SlopeEstimate q = add_slope("acsgd_running_average", w.first, w.second);
      sum.verdicts.push_back(make_verdict("acsgd_running_average.slope", q.slope, -2.3, -1.6));
      const long long ref_t = 100LL * cfg.problem.d;
      const double target = quad.at(ref_t);
      long long cross = -1;
      for (const CurvePoint& p : lin.points)
        if (p.mean <= target) {
          cross = p.t;
          break;
        }
      const double ratio =
          static_cast<double>(cross < 0 ? cfg.iterations : cross) / static_cast<double>(ref_t);
      sum.verdicts.push_back(make_verdict("iteration_ratio", ratio, 3.0, std::nullopt));
      break;
    }
    default:
      break;
  }

  sum.config = to_json(cfg);
  res.csv = curves_to_csv(res.curves);
  if (!cfg.output.empty()) {
    write_text_file(cfg.output + ".csv", res.csv);
    write_text_file(cfg.output + ".json", to_json(sum).dump(2) + "\n");
  }
  return res;
}

}  // namespace acls

#endif  // ACLS_EXPERIMENTS_HPP
