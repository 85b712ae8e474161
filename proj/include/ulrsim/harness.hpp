#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ulrsim/analysis.hpp"
#include "ulrsim/learning.hpp"
#include "ulrsim/network.hpp"
#include "ulrsim/signals.hpp"

namespace ulr {

inline constexpr const char* kVersion = "0.1.0";

// Config / input problems: CLI exit code 1.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failures while executing a valid request: CLI exit code 2.
struct ExecutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TopologySpec {
  enum class Kind { Geometric, Complete, Ring, EdgeList };
  Kind kind = Kind::Geometric;
  double radius = 0.4;  // Geometric only
  std::string path;     // EdgeList only
};

// One experiment: everything needed to reproduce a Monte Carlo study.
struct ExperimentConfig {
  std::string name = "custom";
  int agents = 10;
  int categories = 2;
  std::vector<std::vector<double>> hypotheses;                         // shared S x K
  std::vector<std::vector<std::vector<double>>> per_agent_hypotheses;  // m x S x K alternative
  int ground_truth = 0;
  TopologySpec topology;
  std::string weights = "lazy_metropolis";  // or "uniform" (complete graphs only)
  EvidenceSpec evidence;
  std::vector<Rule> rules{Rule::LogLinear};
  long long horizon = 100000;
  long long record_stride = 1000;
  int runs = 10;
  std::uint64_t seed = 1;
  double upsilon = 2.0;
  std::vector<long long> checkpoints;  // defaulted to {T/100, T/10, T} when absent
  std::string output = "out";
  int threads = 0;  // 0 = hardware concurrency
  bool dump_signals = false;

  void validate() const;
  int num_hypotheses() const;
};

// Parsing and canonical serialization. The JSON grammar is documented in the
// README; unknown keys are rejected with the offending key named.
ExperimentConfig config_from_json_text(const std::string& text, const std::string& origin);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);  // canonical, sorted keys
std::string config_hash(const ExperimentConfig& config);

// Presets. figure1/figure2 are closed-form curve generators; the rest are full
// experiment configurations.
std::vector<std::string> preset_names();
bool is_figure_preset(const std::string& name);
ExperimentConfig preset_config(const std::string& name);

// Builders shared by the experiment driver and the test harness.
Topology build_topology(const ExperimentConfig& config);
MixingMatrix build_matrix(const ExperimentConfig& config, const Topology& topology);
WorldModel build_world(const ExperimentConfig& config);
EvidenceTable build_evidence(const ExperimentConfig& config, const WorldModel& world, int run);
// Asymptotic log likelihood ratios implied by an evidence table: finite
// closed form for finite evidence, +-inf for certain matched/mismatched.
std::vector<double> asymptote_table(const EvidenceTable& evidence, const WorldModel& world);

struct RunFailure {
  int run = 0;
  std::string rule;
  long long t = 0;
  int agent = 0;
  int hypothesis = 0;
  std::string message;
};

struct ExperimentResult {
  std::string output_dir;
  std::vector<RunFailure> failures;
};

// Executes the configured Monte Carlo study and writes the artifact tree:
// manifest.json, summary.json, evidence.csv, belief CSVs, ulr.csv,
// topology.edgelist, mixing.csv (plus signals.csv when requested).
ExperimentResult run_experiment(const ExperimentConfig& config);

// Closed-form figure presets: figure1 writes fig1_limits.csv, figure2 writes
// fig2_curves.csv, each with manifest.json and summary.json.
void write_figure_preset(const std::string& name, const std::string& out_dir);

// Recomputes summary.json from the artifacts in an output directory.
void analyze_directory(const std::string& dir);

// Writes figure CSVs for an output directory: fig5_beliefs.csv for experiment
// outputs, the corresponding curve grid for figure outputs.
void write_figures(const std::string& dir);

int run_cli(int argc, const char* const* argv);

}  // namespace ulr
