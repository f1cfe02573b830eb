// Command-line front end: simulation plus the verification harnesses, each as
// a subcommand. Exit codes: 0 = pass, 1 = a mathematical check failed,
// 2 = usage/config error. Every subcommand takes --seed and --json; --json
// prints a single JSON document on stdout.

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ballast/analysis.hpp"
#include "ballast/experiment.hpp"
#include "ballast/potential.hpp"
#include "ballast/process.hpp"

namespace {

using nlohmann::json;

constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ballast::config_error({"cannot read file '" + path + "'"});
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ballast::WeightDistribution weights_by_name(const std::string& name) {
  if (name == "const1") return ballast::WeightDistribution::constant_one();
  if (name == "uniform12") return ballast::WeightDistribution::uniform_two(1.0, 2.0);
  if (name == "exp") return ballast::WeightDistribution::exponential();
  throw ballast::config_error({"unknown weight distribution '" + name +
                               "' (expected const1|uniform12|exp)"});
}

ballast::ProcessSpec spec_by_name(const std::string& process, double d,
                                  const ballast::WeightDistribution& w) {
  if (process == "one_choice" || process == "one-choice") {
    return ballast::ProcessSpec::one_choice(w);
  }
  if (process == "greedy") return ballast::ProcessSpec::greedy(d, w);
  if (process == "left") {
    if (d < 2.0 || d != std::floor(d)) {
      throw ballast::config_error({"left process needs integer d >= 2"});
    }
    return ballast::ProcessSpec::left(static_cast<int>(d), w);
  }
  throw ballast::config_error({"unknown process '" + process +
                               "' (expected greedy|one_choice|left)"});
}

struct SimulateArgs {
  std::string config_path;
  int n = 0;
  double d = 2.0;
  std::string process = "greedy";
  std::string weights = "const1";
  std::int64_t balls = 0;
  std::vector<std::int64_t> checkpoints;
  int trials = 1;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  std::vector<std::string> measurements;
  std::string output;
  std::string format = "csv";
  bool json_out = false;
};

int run_simulate(const SimulateArgs& a) {
  ballast::ExperimentConfig cfg;
  if (!a.config_path.empty()) {
    cfg = ballast::load_config(read_file(a.config_path));
  } else {
    std::vector<std::string> issues;
    if (a.n < 2) issues.push_back("--n must be >= 2");
    if (a.balls <= 0 && a.checkpoints.empty()) {
      issues.push_back("need --balls or --checkpoints");
    }
    if (a.balls > 0 && !a.checkpoints.empty()) {
      issues.push_back("--balls and --checkpoints are mutually exclusive");
    }
    if (a.trials < 1) issues.push_back("--trials must be >= 1");
    if (!issues.empty()) throw ballast::config_error(issues);
    cfg.process = spec_by_name(a.process, a.d, weights_by_name(a.weights));
    cfg.n = a.n;
    cfg.checkpoints = a.balls > 0 ? std::vector<std::int64_t>{a.balls} : a.checkpoints;
    for (std::size_t i = 1; i < cfg.checkpoints.size(); ++i) {
      if (cfg.checkpoints[i] <= cfg.checkpoints[i - 1]) {
        throw ballast::config_error({"checkpoints not strictly increasing"});
      }
    }
    cfg.trials = a.trials;
    cfg.seed = a.seed;
    if (a.alpha > 0.0) cfg.alpha_override = a.alpha;
    if (a.measurements.empty()) {
      cfg.measurements.gap = true;
    } else {
      for (const auto& m : a.measurements) {
        if (m == "gap") cfg.measurements.gap = true;
        else if (m == "potentials") cfg.measurements.potentials = true;
        else if (m == "nu") cfg.measurements.nu = true;
        else if (m == "left_layers") cfg.measurements.left_layers = true;
        else throw ballast::config_error({"unknown measurement '" + m + "'"});
      }
    }
    if (cfg.measurements.potentials && !cfg.alpha_override &&
        !(cfg.process.rule != ballast::Rule::OneChoice && cfg.process.d > 1.0)) {
      throw ballast::config_error({"potentials measurement needs d > 1 or --alpha"});
    }
    cfg.format = a.format == "json" ? ballast::OutputFormat::Json : ballast::OutputFormat::Csv;
    if (a.format != "json" && a.format != "csv") {
      throw ballast::config_error({"--format must be csv or json"});
    }
    cfg.path = a.output.empty() ? "-" : a.output;
  }

  const auto results = ballast::run_experiment(cfg);
  if (cfg.path != "-") ballast::emit(results, cfg.format, cfg.path);

  // summary: mean gap per checkpoint
  json summary = json::array();
  for (std::size_t c = 0; c < cfg.checkpoints.size(); ++c) {
    double sum = 0.0;
    int count = 0;
    for (const auto& tr : results) {
      if (tr.records[c].gap) {
        sum += *tr.records[c].gap;
        ++count;
      }
    }
    json row;
    row["balls"] = cfg.checkpoints[c];
    if (count > 0) row["mean_gap"] = sum / count;
    summary.push_back(row);
  }
  if (a.json_out) {
    json doc;
    doc["trials"] = cfg.trials;
    doc["n"] = cfg.n;
    doc["summary"] = summary;
    std::cout << doc.dump(2) << "\n";
  } else {
    if (cfg.path == "-") {
      ballast::emit(results, cfg.format, cfg.path);
    }
    for (const auto& row : summary) {
      std::cout << "balls=" << row["balls"].get<std::int64_t>();
      if (row.contains("mean_gap")) std::cout << " mean_gap=" << row["mean_gap"].get<double>();
      std::cout << "\n";
    }
  }
  return kExitPass;
}

struct DriftArgs {
  int n = 64;
  double d = 2.0;
  std::string alpha = "auto";
  std::string states = "random:1000";
  std::string weights = "const1";
  std::uint64_t seed = 0;
  bool json_out = false;
};

int run_drift(const DriftArgs& a) {
  const auto w = weights_by_name(a.weights);
  ballast::ProcessSpec spec =
      a.d == 1.0 ? ballast::ProcessSpec::one_choice(w) : ballast::ProcessSpec::greedy(a.d, w);

  ballast::PotentialParams params;
  if (a.alpha == "auto") {
    if (!(a.d > 1.0)) {
      throw ballast::config_error({"auto alpha needs d > 1; pass --alpha VALUE for d = 1"});
    }
    params = ballast::PotentialParams::derive(spec);
  } else {
    double v = 0.0;
    try {
      v = std::stod(a.alpha);
    } catch (const std::exception&) {
      throw ballast::config_error({"--alpha must be 'auto' or a positive number"});
    }
    if (!(v > 0.0)) throw ballast::config_error({"--alpha must be positive"});
    params = ballast::PotentialParams::with_alpha(spec, v);
  }

  std::vector<std::vector<double>> states;
  if (a.states.rfind("random:", 0) == 0) {
    const int count = std::atoi(a.states.c_str() + 7);
    if (count < 1) throw ballast::config_error({"--states random:N needs N >= 1"});
    auto rng = ballast::make_trial_rng(a.seed, 0);
    for (int i = 0; i < count; ++i) {
      states.push_back(ballast::random_zero_sum_sorted_state(a.n, rng));
    }
  } else if (a.states.rfind("file:", 0) == 0) {
    json doc;
    try {
      doc = json::parse(read_file(a.states.substr(5)));
    } catch (const std::exception& e) {
      throw ballast::config_error({std::string("state file: ") + e.what()});
    }
    if (!doc.is_array()) throw ballast::config_error({"state file must be a JSON array of arrays"});
    for (const auto& row : doc) {
      if (!row.is_array() || row.empty()) {
        throw ballast::config_error({"state file rows must be nonempty arrays"});
      }
      std::vector<double> x;
      for (const auto& v : row) {
        if (!v.is_number()) throw ballast::config_error({"state entries must be numbers"});
        x.push_back(v.get<double>());
      }
      double sum = 0.0, scale = 1.0;
      for (double v : x) {
        sum += v;
        scale = std::max(scale, std::abs(v));
      }
      if (std::abs(sum) > 1e-9 * scale * static_cast<double>(x.size())) {
        throw ballast::config_error({"state file contains a non-zero-sum vector"});
      }
      std::sort(x.begin(), x.end(), std::greater<double>());
      states.push_back(std::move(x));
    }
  } else {
    throw ballast::config_error({"--states must be random:N or file:PATH"});
  }

  int failures = 0;
  int phi_checked = 0, psi_checked = 0;
  json rows = json::array();
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto v = ballast::check_drift_lemmas(states[i], spec, params);
    if (!v.all_passed()) ++failures;
    phi_checked += v.phi_decrease_applicable ? 1 : 0;
    psi_checked += v.psi_decrease_applicable ? 1 : 0;
    if (a.json_out && (states.size() <= 64 || !v.all_passed())) {
      json r;
      r["state"] = i;
      r["phi"] = v.phi;
      r["psi"] = v.psi;
      r["drift_phi"] = v.drift_phi;
      r["drift_psi"] = v.drift_psi;
      r["growth_ok"] = v.phi_growth_ok && v.psi_growth_ok;
      r["phi_decrease"] = v.phi_decrease_applicable ? (v.phi_decrease_ok ? "pass" : "fail")
                                                    : "skipped";
      r["psi_decrease"] = v.psi_decrease_applicable ? (v.psi_decrease_ok ? "pass" : "fail")
                                                    : "skipped";
      rows.push_back(r);
    }
  }
  const bool flagged = params.manual_alpha || !params.unit_mean_weights;
  if (a.json_out) {
    json doc;
    doc["states"] = states.size();
    doc["failures"] = failures;
    doc["phi_decrease_checked"] = phi_checked;
    doc["psi_decrease_checked"] = psi_checked;
    doc["alpha"] = params.alpha;
    doc["epsilon"] = params.epsilon;
    doc["guaranteed"] = params.guarantees_apply();
    if (flagged) {
      doc["flag"] = params.manual_alpha ? "manual alpha: lemma preconditions not guaranteed"
                                        : "weights not mean-1: lemma preconditions not guaranteed";
    }
    doc["verdicts"] = rows;
    std::cout << doc.dump(2) << "\n";
  } else {
    std::printf("states=%zu alpha=%.10g epsilon=%.10g\n", states.size(), params.alpha,
                params.epsilon);
    std::printf("growth bounds + decrease conditions: %d failure(s), phi checked on %d, "
                "psi on %d states\n",
                failures, phi_checked, psi_checked);
    if (flagged) {
      std::printf("flag: %s: lemma preconditions not guaranteed\n",
                  params.manual_alpha ? "manual alpha" : "weights not mean-1");
    }
  }
  return failures == 0 ? kExitPass : kExitCheckFailed;
}

struct DominanceArgs {
  int n = 256;
  double d = 2.0;
  std::int64_t t_early = 0;
  std::int64_t t_late = 0;
  int trials = 1000;
  std::uint64_t seed = 0;
  bool json_out = false;
};

int run_dominance(const DominanceArgs& a) {
  if (a.t_early > a.t_late) {
    throw ballast::config_error({"--t-early must be <= --t-late"});
  }
  if (a.trials < 1) throw ballast::config_error({"--trials must be >= 1"});
  const auto spec = a.d == 1.0 ? ballast::ProcessSpec::one_choice()
                               : ballast::ProcessSpec::greedy(a.d);
  std::vector<double> early(static_cast<std::size_t>(a.trials));
  std::vector<double> late(static_cast<std::size_t>(a.trials));
  ballast::detail::parallel_trials(a.trials, [&](int t) {
    ballast::ProcessRunner runner(spec, a.n,
                                  ballast::make_trial_rng(a.seed, static_cast<std::uint64_t>(t)));
    runner.advance_to(a.t_early);
    early[static_cast<std::size_t>(t)] = ballast::gap(runner.state());
    runner.advance_to(a.t_late);
    late[static_cast<std::size_t>(t)] = ballast::gap(runner.state());
  });
  const auto v = ballast::dominance_test(early, late);
  if (a.json_out) {
    json doc;
    doc["pass"] = v.pass;
    doc["band"] = v.band;
    doc["worst_excess"] = v.worst_excess;
    doc["margin"] = v.margin;
    doc["trials"] = a.trials;
    std::cout << doc.dump(2) << "\n";
  } else {
    std::printf("dominance %s: worst CDF excess %.6g vs DKW band %.6g (margin %.6g)\n",
                v.pass ? "PASS" : "FAIL", v.worst_excess, v.band, v.margin);
  }
  return v.pass ? kExitPass : kExitCheckFailed;
}

struct InductionArgs {
  int n = 64;
  double d = 2.0;
  int t = 16;
  double L = 2.0;
  int ell = 1;
  double c_prime = 6.0;
  int trials = 100;
  std::uint64_t seed = 0;
  bool json_out = false;
};

int run_induction(const InductionArgs& a) {
  ballast::BetaSchedule schedule;
  try {
    schedule = ballast::beta_schedule(a.L, a.ell, a.c_prime, a.n, a.d);
  } catch (const std::invalid_argument& e) {
    throw ballast::config_error({e.what()});
  }
  if (a.trials < 1 || a.t < 0) throw ballast::config_error({"need --trials >= 1, --t >= 0"});
  const int L_steps = static_cast<int>(a.L);
  if (L_steps < 1 || static_cast<double>(L_steps) != a.L) {
    throw ballast::config_error({"--L must be a positive integer number of chain steps"});
  }
  const auto spec = ballast::ProcessSpec::greedy(a.d);

  std::vector<int> violations(static_cast<std::size_t>(a.trials), 0);
  std::vector<int> applicable(static_cast<std::size_t>(a.trials), 0);
  ballast::detail::parallel_trials(a.trials, [&](int trial) {
    auto rng = ballast::make_trial_rng(a.seed, static_cast<std::uint64_t>(trial));
    const auto r = ballast::two_phase_experiment(spec, a.n, a.t, L_steps, rng);
    violations[static_cast<std::size_t>(trial)] = r.violations;
    applicable[static_cast<std::size_t>(trial)] = r.applicable ? 1 : 0;
  });
  int total_violations = 0, total_applicable = 0;
  for (int t = 0; t < a.trials; ++t) {
    total_violations += violations[static_cast<std::size_t>(t)];
    total_applicable += applicable[static_cast<std::size_t>(t)];
  }

  if (a.json_out) {
    json doc;
    doc["beta"] = json::array();
    for (int i = schedule.i_L; i <= schedule.i_H; ++i) {
      doc["beta"].push_back({{"i", i}, {"value", schedule.at(i)}});
    }
    doc["i_L"] = schedule.i_L;
    doc["i_H"] = schedule.i_H;
    doc["floor"] = schedule.floor_value;
    doc["trials"] = a.trials;
    doc["applicable_trials"] = total_applicable;
    doc["violations"] = total_violations;
    std::cout << doc.dump(2) << "\n";
  } else {
    std::printf("beta schedule (i_L=%d, i_H=%d, floor=%.10g):\n", schedule.i_L, schedule.i_H,
                schedule.floor_value);
    for (int i = schedule.i_L; i <= schedule.i_H; ++i) {
      std::printf("  beta_%d = %.10g\n", i, schedule.at(i));
    }
    std::printf("trials=%d applicable=%d nu*n<=mu violations=%d\n", a.trials, total_applicable,
                total_violations);
  }
  return total_violations == 0 ? kExitPass : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"balanced-allocation chain simulator and verification harness"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "run trials and emit gap/potential records");
  simulate->add_option("--config", sim.config_path, "JSON config file");
  simulate->add_option("--n", sim.n, "number of bins");
  simulate->add_option("--d", sim.d, "choice parameter d");
  simulate->add_option("--process", sim.process, "greedy|one_choice|left");
  simulate->add_option("--weights", sim.weights, "const1|uniform12|exp");
  simulate->add_option("--balls", sim.balls, "single checkpoint in balls");
  simulate->add_option("--checkpoints", sim.checkpoints, "checkpoint list in balls")
      ->delimiter(',');
  simulate->add_option("--trials", sim.trials, "independent trials");
  simulate->add_option("--seed", sim.seed, "base seed");
  simulate->add_option("--alpha", sim.alpha, "potential alpha override");
  simulate->add_option("--measurements", sim.measurements, "gap,potentials,nu,left_layers")
      ->delimiter(',');
  simulate->add_option("--output", sim.output, "result file path");
  simulate->add_option("--format", sim.format, "csv|json");
  simulate->add_flag("--json", sim.json_out, "JSON summary on stdout");

  DriftArgs drift;
  auto* driftc = app.add_subcommand("drift", "check one-ball drift bounds on gap vectors");
  driftc->add_option("--n", drift.n, "bins (for random states)");
  driftc->add_option("--d", drift.d, "choice parameter d");
  driftc->add_option("--alpha", drift.alpha, "'auto' or a value");
  driftc->add_option("--states", drift.states, "random:N or file:PATH");
  driftc->add_option("--weights", drift.weights, "const1|uniform12|exp");
  driftc->add_option("--seed", drift.seed, "base seed");
  driftc->add_flag("--json", drift.json_out, "JSON verdicts on stdout");

  DominanceArgs dom;
  auto* domc = app.add_subcommand("dominance", "one-sided CDF dominance of the gap in time");
  domc->add_option("--n", dom.n, "bins");
  domc->add_option("--d", dom.d, "choice parameter d");
  domc->add_option("--t-early", dom.t_early, "early checkpoint in balls")->required();
  domc->add_option("--t-late", dom.t_late, "late checkpoint in balls")->required();
  domc->add_option("--trials", dom.trials, "trials per checkpoint");
  domc->add_option("--seed", dom.seed, "base seed");
  domc->add_flag("--json", dom.json_out, "JSON verdict on stdout");

  InductionArgs ind;
  auto* indc = app.add_subcommand("induction", "layered-induction schedule and nu/mu identity");
  indc->add_option("--n", ind.n, "bins");
  indc->add_option("--d", ind.d, "choice parameter d");
  indc->add_option("--t", ind.t, "phase-one chain steps");
  indc->add_option("--L", ind.L, "phase-two chain steps (also the schedule's L)");
  indc->add_option("--ell", ind.ell, "base level (i_L)");
  indc->add_option("--c-prime", ind.c_prime, "floor constant c'");
  indc->add_option("--trials", ind.trials, "trials");
  indc->add_option("--seed", ind.seed, "base seed");
  indc->add_flag("--json", ind.json_out, "JSON output");

  int fib_d = 2;
  std::uint64_t fib_seed = 0;
  bool fib_json = false;
  auto* fibc = app.add_subcommand("fib-base", "growth base of the order-d Fibonacci sequence");
  fibc->add_option("--d", fib_d, "order")->required();
  fibc->add_option("--seed", fib_seed, "unused; accepted for interface uniformity");
  fibc->add_flag("--json", fib_json, "JSON output");

  std::string q_dist = "const1";
  double q_s = 1.0;
  int q_n = 1024;
  std::uint64_t q_seed = 0;
  bool q_json = false;
  auto* quantc = app.add_subcommand("quantile", "weight threshold M_s for the weighted model");
  quantc->add_option("--dist", q_dist, "const1|uniform12|exp")->required();
  quantc->add_option("--s", q_s, "scale s in the tail target")->required();
  quantc->add_option("--n", q_n, "bins (enters the target via ln ln n)")->required();
  quantc->add_option("--seed", q_seed, "unused; accepted for interface uniformity");
  quantc->add_flag("--json", q_json, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) return run_simulate(sim);
    if (driftc->parsed()) return run_drift(drift);
    if (domc->parsed()) return run_dominance(dom);
    if (indc->parsed()) return run_induction(ind);
    if (fibc->parsed()) {
      const double phi = ballast::fibonacci_base(fib_d);
      if (fib_json) {
        json doc;
        doc["d"] = fib_d;
        doc["phi_d"] = phi;
        std::cout << doc.dump(2) << "\n";
      } else {
        std::printf("%.9f\n", phi);
      }
      return kExitPass;
    }
    if (quantc->parsed()) {
      const double m = ballast::weight_quantile_M(weights_by_name(q_dist), q_s, q_n);
      if (q_json) {
        json doc;
        doc["dist"] = q_dist;
        doc["s"] = q_s;
        doc["n"] = q_n;
        doc["M_s"] = m;
        std::cout << doc.dump(2) << "\n";
      } else {
        std::printf("%.17g\n", m);
      }
      return kExitPass;
    }
  } catch (const ballast::config_error& e) {
    for (const auto& issue : e.issues()) std::cerr << "error: " << issue << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
