#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tslab/data.hpp"
#include "tslab/samplers.hpp"
#include "tslab/theory.hpp"

namespace tslab {

struct ExperimentConfig {
  NetworkSpec teacher_spec = NetworkSpec::dlnn({2, 5, 1});
  NetworkSpec student_spec = NetworkSpec::dlnn({2, 10, 1});
  SamplerKind sampler = SamplerKind::pattern_search;
  SamplerConfig sampler_cfg;
  std::vector<std::size_t> n_grid;
  std::size_t trials_per_n = 100;
  std::size_t n_test = kDefaultTestSamples;
  InputBox input_box;
  std::uint64_t master_seed = 0;
  std::string output_dir;
  /// Runtime knob only; never serialized so outputs do not depend on it.
  std::size_t workers = 1;
  /// Wall-clock columns are written as 0 unless enabled, keeping outputs byte-reproducible.
  bool record_wall_time = false;
  bool save_params = true;

  /// Throws InvalidConfig: n_grid nonempty, ascending and positive; trials_per_n ≥ 1; n_test ≥ 1.
  void validate() const;
};

/// Parses the JSON config document; unknown keys anywhere are rejected.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);
nlohmann::ordered_json to_json(const NetworkSpec& spec);
nlohmann::ordered_json to_json(const BoundReport& report);

/// Stream purposes inside one (n, trial) cell.
enum class StreamPurpose : std::uint64_t { dataset = 1, sampler = 2, test = 3, teacher = 4 };
std::uint64_t trial_stream(std::size_t n, std::size_t trial, StreamPurpose purpose);
Teacher experiment_teacher(const ExperimentConfig& cfg);

struct ExperimentRecord {
  std::size_t n = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string status;
  std::size_t iterations = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double wall_time_ms = 0.0;
  std::vector<double> params;

  bool success() const { return status == "success"; }
};

struct CurveRow {
  std::size_t n = 0;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
  double median = 0.0;
  std::size_t failed = 0;

  friend bool operator==(const CurveRow&, const CurveRow&) = default;
};

struct CurveSummary {
  std::vector<CurveRow> rows;
  std::optional<std::size_t> k_upper;
  double epsilon = 0.0;
  std::optional<double> q_hat;

  friend bool operator==(const CurveSummary&, const CurveSummary&) = default;
};

struct ExperimentResult {
  std::vector<ExperimentRecord> records;  // sorted by (n, trial)
  CurveSummary summary;
  std::optional<BoundReport> bound;
  std::vector<std::string> warnings;
};

/// Bound for the configured teacher/student pair, or nullopt with a warning
/// when its preconditions fail.
std::optional<BoundReport> experiment_bound(const ExperimentConfig& cfg, std::vector<std::string>* warnings);

/// Runs every (n, trial) cell on cfg.workers threads. Sampler failures are
/// recorded per trial and excluded from the summary.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Mean, population standard deviation and median of successful trials per n.
CurveSummary summarize(const std::vector<ExperimentRecord>& records, const std::vector<std::size_t>& n_grid,
                       double epsilon, std::optional<std::size_t> k_upper);

/// records.csv, summary.csv (+ plot script), manifest.json and params/ under dir.
void write_experiment_outputs(const ExperimentResult& result, const ExperimentConfig& cfg,
                              const std::filesystem::path& dir);
void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);

/// Writes the summary CSV (commented header carrying k_upper, epsilon, q_hat
/// and per-n failure counts, then columns n,count,mean,std,median) plus a
/// gnuplot script next to it. Idempotent.
void emit_plot_data(const CurveSummary& summary, const std::filesystem::path& path);
void write_summary_csv(std::ostream& out, const CurveSummary& summary);
CurveSummary parse_summary_csv(std::istream& in);

struct Proposition2Report {
  double q_hat = 0.0;
  double epsilon = 0.0;
  double safety = 2.0;
  double epsilon_effective = 0.0;  // √(2ε)·safety
  double threshold = 0.0;          // (q_hat·ε_eff)²
  std::size_t trials = 0;
  std::size_t satisfied = 0;
  double fraction = 0.0;
  std::optional<std::size_t> min_n;
  std::string caveat;
};

/// Fraction of successful trials (restricted to n ≥ k_upper when a bound is
/// known) whose test loss is within (q̂·√(2ε)·safety)². A heuristic diagnostic:
/// the samplers control training loss, not distance to the interpolating set.
Proposition2Report check_proposition2(const ExperimentResult& result, double epsilon, double q_hat,
                                      double safety = 2.0);
nlohmann::ordered_json to_json(const Proposition2Report& report);

/// One JSON object per sampler run for the sample subcommand.
nlohmann::ordered_json outcome_json(const SamplerOutcome& outcome, const std::string& params_file,
                                    bool record_wall_time);

/// Runs the configured sampler for every (n, trial) cell and writes
/// samples.jsonl plus params/ under dir.
void run_sampling(const ExperimentConfig& cfg, const std::filesystem::path& dir);

}  // namespace tslab
