#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ballast/analysis.hpp"
#include "ballast/load_state.hpp"
#include "ballast/potential.hpp"
#include "ballast/process.hpp"
#include "ballast/rng.hpp"

namespace ballast {

// Config/usage failure with one message per violation.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::vector<std::string>& issues)
      : std::runtime_error(join(issues)), issues_(issues) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

struct MeasurementSet {
  bool gap = false;
  bool potentials = false;
  bool nu = false;
  bool left_layers = false;

  bool any() const { return gap || potentials || nu || left_layers; }
};

enum class OutputFormat { Csv, Json };

struct ExperimentConfig {
  ProcessSpec process;
  int n = 0;
  std::vector<std::int64_t> checkpoints;
  int trials = 1;
  std::uint64_t seed = 0;
  MeasurementSet measurements;
  std::optional<double> alpha_override;
  OutputFormat format = OutputFormat::Csv;
  std::string path = "-";  // "-" = stdout
};

// One measured checkpoint. Optional fields mirror the measurement set;
// nu/left_layers ride along for library callers and are not part of the
// emitted row schema.
struct CheckpointRecord {
  std::int64_t balls = 0;
  std::optional<double> gap;
  std::optional<double> max_load;
  std::optional<PotentialReport> potentials;
  std::optional<std::vector<double>> nu;
  std::optional<std::vector<double>> left_layers;
};

struct TrialResult {
  int trial = 0;
  std::vector<CheckpointRecord> records;
};

namespace detail {

inline WeightDistribution parse_weights(const nlohmann::json& j,
                                        std::vector<std::string>& issues) {
  if (!j.is_object()) {
    issues.push_back("weights: must be an object");
    return WeightDistribution::constant_one();
  }
  static const std::vector<std::string> allowed = {"kind", "values", "probs"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      issues.push_back("weights: unknown key '" + it.key() + "'");
    }
  }
  const std::string kind = j.value("kind", "constant");
  try {
    if (kind == "constant") return WeightDistribution::constant_one();
    if (kind == "uniform_two") {
      std::vector<double> v = j.value("values", std::vector<double>{1.0, 2.0});
      if (v.size() != 2) {
        issues.push_back("weights: uniform_two needs exactly two values");
        return WeightDistribution::constant_one();
      }
      return WeightDistribution::uniform_two(v[0], v[1]);
    }
    if (kind == "exponential") return WeightDistribution::exponential();
    if (kind == "bounded_empirical") {
      return WeightDistribution::bounded_empirical(
          j.value("values", std::vector<double>{}), j.value("probs", std::vector<double>{}));
    }
  } catch (const std::exception& e) {
    issues.push_back(std::string("weights: ") + e.what());
    return WeightDistribution::constant_one();
  }
  issues.push_back("weights: unknown kind '" + kind + "'");
  return WeightDistribution::constant_one();
}

}  // namespace detail

namespace detail {
inline ExperimentConfig load_config_checked(const nlohmann::json& j);
}

// Parse + validate a JSON config document. Unknown keys are rejected and all
// violations are reported together.
inline ExperimentConfig load_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw config_error({std::string("not valid JSON: ") + e.what()});
  }
  if (!j.is_object()) throw config_error({"top level must be an object"});

  try {
    return detail::load_config_checked(j);
  } catch (const nlohmann::json::exception& e) {
    throw config_error({std::string("malformed value: ") + e.what()});
  }
}

namespace detail {

inline ExperimentConfig load_config_checked(const nlohmann::json& j) {
  std::vector<std::string> issues;
  static const std::vector<std::string> allowed = {
      "process", "n", "checkpoints", "trials", "seed", "measurements", "alpha", "output"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      issues.push_back("unknown key '" + it.key() + "'");
    }
  }

  ExperimentConfig cfg;

  // process
  std::string rule = "greedy";
  double d = 2.0;
  WeightDistribution weights = WeightDistribution::constant_one();
  if (!j.contains("process") || !j["process"].is_object()) {
    issues.push_back("missing 'process' object");
  } else {
    const auto& p = j["process"];
    static const std::vector<std::string> pallowed = {"rule", "d", "weights"};
    for (auto it = p.begin(); it != p.end(); ++it) {
      if (std::find(pallowed.begin(), pallowed.end(), it.key()) == pallowed.end()) {
        issues.push_back("process: unknown key '" + it.key() + "'");
      }
    }
    rule = p.value("rule", "greedy");
    d = p.value("d", rule == "one_choice" ? 1.0 : 2.0);
    if (p.contains("weights")) weights = detail::parse_weights(p["weights"], issues);
  }

  cfg.n = j.value("n", 0);
  if (cfg.n < 2) issues.push_back("n must be >= 2");

  if (!j.contains("checkpoints") || !j["checkpoints"].is_array() ||
      j["checkpoints"].empty()) {
    issues.push_back("checkpoints must be a nonempty array");
  } else {
    for (const auto& c : j["checkpoints"]) {
      if (!c.is_number_integer() || c.get<std::int64_t>() < 0) {
        issues.push_back("checkpoints must be nonnegative integers");
        break;
      }
      cfg.checkpoints.push_back(c.get<std::int64_t>());
    }
    for (std::size_t i = 1; i < cfg.checkpoints.size(); ++i) {
      if (cfg.checkpoints[i] <= cfg.checkpoints[i - 1]) {
        issues.push_back("checkpoints not strictly increasing");
        break;
      }
    }
  }

  cfg.trials = j.value("trials", 1);
  if (cfg.trials < 1) issues.push_back("trials must be >= 1");
  if (j.contains("seed") && j["seed"].is_number_integer() &&
      j["seed"].is_number() && !j["seed"].is_number_unsigned() &&
      j["seed"].get<std::int64_t>() < 0) {
    issues.push_back("seed must be a nonnegative integer");
  } else {
    cfg.seed = j.value("seed", static_cast<std::uint64_t>(0));
  }

  if (j.contains("measurements")) {
    if (!j["measurements"].is_array()) {
      issues.push_back("measurements must be an array");
    } else {
      for (const auto& m : j["measurements"]) {
        const std::string name = m.is_string() ? m.get<std::string>() : "";
        if (name == "gap") cfg.measurements.gap = true;
        else if (name == "potentials") cfg.measurements.potentials = true;
        else if (name == "nu") cfg.measurements.nu = true;
        else if (name == "left_layers") cfg.measurements.left_layers = true;
        else issues.push_back("unknown measurement '" + name + "'");
      }
    }
  } else {
    cfg.measurements.gap = true;
  }
  if (!cfg.measurements.any()) issues.push_back("measurement set must be nonempty");

  if (j.contains("alpha")) {
    const double a = j["alpha"].is_number() ? j["alpha"].get<double>() : -1.0;
    if (!(a > 0.0)) issues.push_back("alpha must be a positive number");
    else cfg.alpha_override = a;
  }

  if (j.contains("output")) {
    const auto& o = j["output"];
    static const std::vector<std::string> oallowed = {"format", "path"};
    if (!o.is_object()) {
      issues.push_back("output must be an object");
    } else {
      for (auto it = o.begin(); it != o.end(); ++it) {
        if (std::find(oallowed.begin(), oallowed.end(), it.key()) == oallowed.end()) {
          issues.push_back("output: unknown key '" + it.key() + "'");
        }
      }
      const std::string f = o.value("format", "csv");
      if (f == "csv") cfg.format = OutputFormat::Csv;
      else if (f == "json") cfg.format = OutputFormat::Json;
      else issues.push_back("output format must be 'csv' or 'json'");
      cfg.path = o.value("path", "-");
    }
  }

  // rule-level validation
  if (rule == "one_choice") {
    cfg.process = ProcessSpec::one_choice(weights);
  } else if (rule == "greedy") {
    if (!(d >= 1.0)) issues.push_back("d must be >= 1");
    else cfg.process = ProcessSpec::greedy(d, weights);
  } else if (rule == "left") {
    if (d < 2.0 || d != std::floor(d)) {
      issues.push_back("left rule needs integer d >= 2");
    } else if (cfg.n >= 2 && cfg.n % static_cast<int>(d) != 0) {
      issues.push_back("left rule needs n divisible by d");
    } else {
      cfg.process = ProcessSpec::left(static_cast<int>(d), weights);
    }
  } else {
    issues.push_back("unknown rule '" + rule + "'");
  }

  if (cfg.measurements.left_layers && rule != "left") {
    issues.push_back("left_layers measurement requires the left rule");
  }
  if (cfg.measurements.potentials && !cfg.alpha_override && !(rule != "one_choice" && d > 1.0)) {
    issues.push_back("potentials measurement needs d > 1 or an explicit alpha");
  }

  if (!issues.empty()) throw config_error(issues);
  return cfg;
}

}  // namespace detail

namespace detail {

inline int worker_count(int trials) {
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BALLAST_WORKERS")) {
    workers = std::atoi(env);
  }
  if (workers < 1) workers = 1;
  return std::min(workers, trials);
}

// Deterministic trial-parallel map: trial k always runs on the stream derived
// from (seed, k) and lands in slot k, so results are identical for any
// worker count or completion order.
template <typename Fn>
void parallel_trials(int trials, Fn&& fn) {
  const int workers = worker_count(trials);
  if (workers <= 1) {
    for (int t = 0; t < trials; ++t) {
      try {
        fn(t);
      } catch (const std::exception& e) {
        throw std::runtime_error("trial " + std::to_string(t) + ": " + e.what());
      }
    }
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::string> errors(static_cast<std::size_t>(trials));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) {
        try {
          fn(t);
        } catch (const std::exception& e) {
          errors[static_cast<std::size_t>(t)] = e.what();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (int t = 0; t < trials; ++t) {
    if (!errors[static_cast<std::size_t>(t)].empty()) {
      throw std::runtime_error("trial " + std::to_string(t) + ": " +
                               errors[static_cast<std::size_t>(t)]);
    }
  }
}

}  // namespace detail

inline std::vector<TrialResult> run_experiment(const ExperimentConfig& cfg) {
  std::optional<PotentialParams> params;
  if (cfg.measurements.potentials) {
    params = cfg.alpha_override
                 ? PotentialParams::with_alpha(cfg.process, *cfg.alpha_override)
                 : PotentialParams::derive(cfg.process);
  }
  std::vector<TrialResult> results(static_cast<std::size_t>(cfg.trials));
  detail::parallel_trials(cfg.trials, [&](int t) {
    TrialResult tr;
    tr.trial = t;
    ProcessRunner runner(cfg.process, cfg.n, make_trial_rng(cfg.seed, static_cast<std::uint64_t>(t)));
    for (std::int64_t cp : cfg.checkpoints) {
      runner.advance_to(cp);
      const LoadState& s = runner.state();
      CheckpointRecord rec;
      rec.balls = cp;
      if (cfg.measurements.gap) {
        rec.gap = gap(s);
        rec.max_load = max_load(s);
      }
      if (cfg.measurements.potentials) {
        rec.potentials = potentials(normalized_sorted(s), *params);
      }
      if (cfg.measurements.nu) rec.nu = nu_fractions(s);
      if (cfg.measurements.left_layers) {
        rec.left_layers = left_layer_fractions(s, static_cast<int>(cfg.process.d));
      }
      tr.records.push_back(std::move(rec));
    }
    results[static_cast<std::size_t>(t)] = std::move(tr);
  });
  return results;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string opt_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

inline std::string opt_json(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("null");
}

}  // namespace detail

inline constexpr const char* kCsvHeader = "trial,balls,gap,phi,psi,gamma,max_load";

// Serialize results; CSV columns are exactly
//   trial,balls,gap,phi,psi,gamma,max_load
// with absent measurements left empty (null in JSON). Floats carry 17
// significant digits so emitted bytes round-trip the doubles exactly.
inline std::string render_results(const std::vector<TrialResult>& results,
                                  OutputFormat format) {
  if (results.empty()) throw std::invalid_argument("emit: no results");
  std::ostringstream out;
  const auto row_fields = [](const CheckpointRecord& r) {
    std::optional<double> phi, psi, gam;
    if (r.potentials) {
      phi = r.potentials->phi;
      psi = r.potentials->psi;
      gam = r.potentials->gamma;
    }
    return std::array<std::optional<double>, 5>{r.gap, phi, psi, gam, r.max_load};
  };
  if (format == OutputFormat::Csv) {
    out << kCsvHeader << "\n";
    for (const auto& tr : results) {
      for (const auto& rec : tr.records) {
        const auto f = row_fields(rec);
        out << tr.trial << ',' << rec.balls << ',' << detail::opt_field(f[0]) << ','
            << detail::opt_field(f[1]) << ',' << detail::opt_field(f[2]) << ','
            << detail::opt_field(f[3]) << ',' << detail::opt_field(f[4]) << "\n";
      }
    }
  } else {
    out << "[\n";
    bool first = true;
    for (const auto& tr : results) {
      for (const auto& rec : tr.records) {
        const auto f = row_fields(rec);
        if (!first) out << ",\n";
        first = false;
        out << "  {\"trial\": " << tr.trial << ", \"balls\": " << rec.balls
            << ", \"gap\": " << detail::opt_json(f[0]) << ", \"phi\": " << detail::opt_json(f[1])
            << ", \"psi\": " << detail::opt_json(f[2]) << ", \"gamma\": " << detail::opt_json(f[3])
            << ", \"max_load\": " << detail::opt_json(f[4]) << "}";
      }
    }
    out << "\n]\n";
  }
  return out.str();
}

inline void emit(const std::vector<TrialResult>& results, OutputFormat format,
                 const std::string& path) {
  const std::string body = render_results(results, format);
  if (path == "-") {
    std::fwrite(body.data(), 1, body.size(), stdout);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("emit: cannot open '" + path + "' for writing");
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!f) throw std::runtime_error("emit: write to '" + path + "' failed");
}

}  // namespace ballast
