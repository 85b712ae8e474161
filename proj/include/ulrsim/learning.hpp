#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "ulrsim/network.hpp"
#include "ulrsim/signals.hpp"
#include "ulrsim/uncertain_models.hpp"

namespace ulr {

enum class Rule { LogLinear, DeGroot };

const char* rule_name(Rule rule);
Rule rule_from_name(const std::string& name);

struct EngineConfig {
  Rule rule = Rule::LogLinear;
  long long horizon = 100000;
  long long record_stride = 1000;
  std::vector<long long> extra_snapshots;  // additional rounds to record (e.g. checkpoints)

  void validate() const;  // horizon >= 0, stride >= 1, extras within [0, horizon]
};

// Log-domain beliefs (m x S) plus each agent's observation histogram. At t=0
// beliefs are all zero (uniform unnormalized start) and histograms are empty.
struct BeliefState {
  std::vector<double> log_mu;  // row-major m x S, -inf admitted
  std::vector<ObservationHistogram> histograms;
  long long t = 0;

  static BeliefState initial(int m, int S, int K);
  int agents() const { return static_cast<int>(histograms.size()); }
  double at(int i, int s, int S) const {
    return log_mu[static_cast<size_t>(i) * static_cast<size_t>(S) + static_cast<size_t>(s)];
  }
};

struct BeliefSnapshot {
  long long t = 0;
  std::vector<double> log_mu;   // m x S
  std::vector<double> log_ulr;  // m x S; NaN where the evidence is Certain
};

struct BeliefTrajectory {
  int m = 0, S = 0;
  std::vector<BeliefSnapshot> snapshots;
  BeliefState final_state;

  const BeliefSnapshot& at_time(long long t) const;  // throws naming t if absent
  bool has_time(long long t) const;
};

// Per-(agent, hypothesis) prior evidence, indexed [agent][hypothesis].
using EvidenceTable = std::vector<std::vector<EvidenceCounts>>;

// One generator per agent so that an agent's signal stream depends only on its
// own sub-seed, never on m, S or the update rule.
struct SignalStreams {
  std::vector<std::mt19937_64> gen;

  static SignalStreams from_master(std::uint64_t master, std::uint64_t run, int m);
  static SignalStreams from_seeds(const std::vector<std::uint64_t>& seeds);
};

// Raised when a freshly computed log belief is NaN; carries the location.
struct EngineNumericError : std::runtime_error {
  long long t;
  int agent, hypothesis;
  EngineNumericError(long long t_, int agent_, int hypothesis_);
};

// One synchronous round: every agent draws a private signal, computes its
// likelihood update for each hypothesis, then aggregates the neighbors'
// previous-round beliefs (weighted sum of logs for LogLinear, log-sum-exp of
// weighted beliefs for DeGroot).
BeliefState step(const BeliefState& state, const MixingMatrix& matrix, const WorldModel& world,
                 const EvidenceTable& evidence, Rule rule, SignalStreams& streams);

// Drives `step` for config.horizon rounds, recording a snapshot at t = 0, at
// every multiple of record_stride, at every extra snapshot time, and at the
// final round. Deterministic given the streams.
BeliefTrajectory run(const WorldModel& world, const MixingMatrix& matrix,
                     const EvidenceTable& evidence, const EngineConfig& config,
                     SignalStreams& streams);

}  // namespace ulr
