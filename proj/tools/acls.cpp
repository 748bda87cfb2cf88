// Command-line front end: experiments, operator checks, lower bound, slopes.

#include "acls/acls.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitAcceptance = 2;

void print_verdicts(const acls::ExperimentSummary& s) {
  for (const acls::Verdict& v : s.verdicts) {
    std::printf("%-4s %s = %.6g", v.pass ? "PASS" : "FAIL", v.name.c_str(), v.value);
    if (v.lo) std::printf("  (>= %.6g)", *v.lo);
    if (v.hi) std::printf("  (<= %.6g)", *v.hi);
    std::printf("\n");
  }
}

int cmd_run(const std::string& path) {
  acls::ExperimentConfig cfg = acls::load_config_file(path);
  const acls::ExperimentResult res = acls::run_experiment(cfg);
  if (cfg.output.empty()) std::fputs(res.csv.c_str(), stdout);
  for (const acls::SlopeRecord& r : res.summary.slopes)
    std::printf("slope %s [%g, %g] = %.4f (R^2 %.4f)\n", r.label.c_str(), r.estimate.t_lo, r.estimate.t_hi,
                r.estimate.slope, r.estimate.r_squared_fit);
  print_verdicts(res.summary);
  return res.summary.all_pass() ? kExitOk : kExitAcceptance;
}

int cmd_verify(int d, const std::string& rule) {
  const acls::LeastSquaresProblem p = acls::make_uniform_one_hot_problem(d);
  const acls::ProblemConstants c = acls::constants(p);
  const acls::StepSizes steps =
      rule == "thm2" || rule == "last_iterate" ? acls::default_step_sizes_last_iterate(c)
                                               : acls::default_step_sizes_averaged(c);
  const acls::AlmostEigenvectorReport r = acls::verify_almost_eigenvector(p, steps);
  std::printf("d=%d alpha=%.6g beta=%.6g conditions=%s\n", d, steps.alpha, steps.beta,
              r.conditions_hold ? "hold" : "violated");
  std::printf("noise margin   %.3e\n", r.noise_margin);
  std::printf("upsilon margin %.3e\n", r.upsilon_margin);
  if (!r.conditions_hold) return kExitOk;  // report only
  return r.passed() ? kExitOk : kExitAcceptance;
}

int cmd_lower_bound(int d, int reps, std::uint64_t seed) {
  const acls::ExperimentConfig defaults = acls::default_config(acls::ExperimentKind::LowerBound);
  const acls::LowerBoundReport r = acls::lower_bound_experiment(d, defaults.algorithms, reps, seed);
  bool ok = true;
  std::printf("d=%d t=%lld threshold=%.6g (0.8/(4d))\n", r.d, r.t_check, 0.8 * r.reference);
  for (const acls::LowerBoundAlgorithmReport& a : r.algorithms) {
    const bool pass = a.mean_risk >= 0.8 * r.reference && a.max_span_residual <= 1e-10 && a.counting_bound_holds;
    ok = ok && pass;
    std::printf("%-4s %-6s mean risk %.6g +- %.2g, span residual %.2e, counting bound %s\n", pass ? "PASS" : "FAIL",
                a.label.c_str(), a.mean_risk, a.stderr_, a.max_span_residual, a.counting_bound_holds ? "ok" : "broken");
  }
  return ok ? kExitOk : kExitAcceptance;
}

int cmd_slope(const std::string& path, double from, double to, const std::string& only) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::map<std::string, std::vector<std::pair<double, double>>> curves;
  for (const acls::CsvRow& row : acls::parse_curve_csv(in))
    curves[row.algorithm].emplace_back(static_cast<double>(row.t), row.mean);
  if (!only.empty() && !curves.count(only)) throw std::invalid_argument("no algorithm '" + only + "' in " + path);
  for (const auto& [label, pts] : curves) {
    if (!only.empty() && label != only) continue;
    const acls::SlopeEstimate s = acls::fit_slope(pts, from, to);
    std::printf("%s slope %.4f intercept %.4f r2 %.4f points %d\n", label.c_str(), s.slope, s.intercept,
                s.r_squared_fit, s.points);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Accelerated SGD for streaming least squares"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  int verify_d = 8;
  std::string verify_steps = "cor1";
  auto* verify = app.add_subcommand("verify-operators", "Check the almost-eigenvector inequalities exactly");
  verify->add_option("--d", verify_d, "Dimension of the uniform one-hot problem")->check(CLI::Range(1, 16));
  verify
      ->add_option("--steps", verify_steps,
                   "Step-size rule: cor1 (alias averaged) or thm2 (alias last_iterate)")
      ->check(CLI::IsMember({"cor1", "thm2", "averaged", "last_iterate"}));

  int lb_d = 50, lb_reps = 20;
  std::uint64_t lb_seed = 0;
  auto* lower = app.add_subcommand("lower-bound", "Risk at t = d/2 on the hard one-hot problem");
  lower->add_option("--d", lb_d, "Even dimension")->check(CLI::Range(2, 100000));
  lower->add_option("--reps", lb_reps, "Repetitions")->check(CLI::PositiveNumber);
  lower->add_option("--seed", lb_seed, "Base seed");

  std::string csv_path, only;
  double from = 0.0, to = 0.0;
  auto* slope = app.add_subcommand("slope", "Fit log-log slopes on a curve CSV");
  slope->add_option("curve", csv_path, "Curve CSV")->required()->check(CLI::ExistingFile);
  slope->add_option("--from", from, "Window start")->required();
  slope->add_option("--to", to, "Window end")->required();
  slope->add_option("--algorithm", only, "Only this algorithm label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return cmd_run(config_path);
    if (*verify) return cmd_verify(verify_d, verify_steps);
    if (*lower) {
      if (lb_d % 2 != 0) throw std::invalid_argument("--d must be even");
      return cmd_lower_bound(lb_d, lb_reps, lb_seed);
    }
    if (*slope) return cmd_slope(csv_path, from, to, only);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
