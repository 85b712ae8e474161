#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "ulrsim/uncertain_models.hpp"

namespace ulr {

// Per-agent ground truth plus each agent's hypothesis set (same K throughout).
struct WorldModel {
  std::vector<CategoricalParams> ground_truth;             // length m
  std::vector<std::vector<CategoricalParams>> hypotheses;  // m x S

  int agents() const { return static_cast<int>(ground_truth.size()); }
  int num_hypotheses() const { return hypotheses.empty() ? 0 : static_cast<int>(hypotheses[0].size()); }
  int categories() const { return ground_truth.empty() ? 0 : ground_truth[0].categories(); }
  void validate() const;

  // All agents share one hypothesis set; the ground truth is the indexed member.
  static WorldModel shared(int m, const std::vector<CategoricalParams>& hypothesis_set,
                           int ground_truth_index);
};

enum class EvidenceRegime { Low, High, Infinite, Explicit };
enum class EvidenceStyle { Sampled, Idealized };

// How much prior evidence each (agent, hypothesis) pair receives and whether
// the counts are multinomial draws or the exact expectation R * pi.
struct EvidenceSpec {
  EvidenceRegime regime = EvidenceRegime::Low;
  EvidenceStyle style = EvidenceStyle::Sampled;
  double lo = 0.0, hi = 0.0;  // Explicit regime only

  // Low -> [0, 100]; High -> [1000, 10000]; Explicit -> [lo, hi].
  std::pair<long long, long long> integer_range() const;
  void validate() const;
};

// Canonical 53-bit uniform draw in [0, 1); stable across standard libraries.
double uniform_unit(std::mt19937_64& rng);

// Returns k with probability pi_star.p[k] via inverse CDF over the cumulative
// probability vector.
int sample_signal(const CategoricalParams& pi_star, std::mt19937_64& rng);

// Draws prior evidence for one (agent, hypothesis) pair according to spec.
EvidenceCounts generate_evidence(const CategoricalParams& pi_theta, const EvidenceSpec& spec,
                                 std::mt19937_64& rng);

// Stream splitting: one master seed, stable per-(run, agent, purpose) sub-seeds
// so that scaling the number of runs, agents or hypotheses never perturbs the
// streams of unchanged (run, agent) pairs.
enum class StreamPurpose : std::uint64_t { Signals = 1, Evidence = 2, Topology = 3 };

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t run, std::uint64_t agent,
                          StreamPurpose purpose, std::uint64_t extra = 0);

std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t run, std::uint64_t agent,
                            StreamPurpose purpose, std::uint64_t extra = 0);

}  // namespace ulr
