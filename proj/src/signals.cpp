#include "ulrsim/signals.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ulr {

void WorldModel::validate() const {
  const int m = agents();
  if (m < 1) throw std::invalid_argument("WorldModel: need at least one agent");
  if (static_cast<int>(hypotheses.size()) != m) {
    throw std::invalid_argument("WorldModel: hypothesis rows must match agent count");
  }
  const int S = num_hypotheses();
  if (S < 1) throw std::invalid_argument("WorldModel: need at least one hypothesis");
  const int K = categories();
  for (int i = 0; i < m; ++i) {
    ground_truth[static_cast<size_t>(i)].validate();
    if (ground_truth[static_cast<size_t>(i)].categories() != K) {
      throw std::invalid_argument("WorldModel: inconsistent category count");
    }
    if (static_cast<int>(hypotheses[static_cast<size_t>(i)].size()) != S) {
      throw std::invalid_argument("WorldModel: agents must share the hypothesis count");
    }
    for (const auto& h : hypotheses[static_cast<size_t>(i)]) {
      h.validate();
      if (h.categories() != K) {
        throw std::invalid_argument("WorldModel: inconsistent category count");
      }
    }
  }
}

WorldModel WorldModel::shared(int m, const std::vector<CategoricalParams>& hypothesis_set,
                              int ground_truth_index) {
  if (ground_truth_index < 0 || ground_truth_index >= static_cast<int>(hypothesis_set.size())) {
    throw std::invalid_argument("WorldModel: ground-truth index out of range");
  }
  WorldModel w;
  w.ground_truth.assign(static_cast<size_t>(m), hypothesis_set[static_cast<size_t>(ground_truth_index)]);
  w.hypotheses.assign(static_cast<size_t>(m), hypothesis_set);
  w.validate();
  return w;
}

std::pair<long long, long long> EvidenceSpec::integer_range() const {
  switch (regime) {
    case EvidenceRegime::Low:
      return {0, 100};
    case EvidenceRegime::High:
      return {1000, 10000};
    case EvidenceRegime::Explicit:
      return {static_cast<long long>(lo), static_cast<long long>(hi)};
    case EvidenceRegime::Infinite:
      break;
  }
  throw std::domain_error("EvidenceSpec: infinite regime has no evidence range");
}

void EvidenceSpec::validate() const {
  if (regime == EvidenceRegime::Explicit) {
    if (!(lo >= 0.0) || !(hi >= lo)) {
      throw std::invalid_argument("EvidenceSpec: explicit range needs 0 <= lo <= hi");
    }
  }
}

double uniform_unit(std::mt19937_64& rng) {
  return std::ldexp(static_cast<double>(rng() >> 11), -53);
}

int sample_signal(const CategoricalParams& pi_star, std::mt19937_64& rng) {
  const double u = uniform_unit(rng);
  double cum = 0.0;
  const int K = pi_star.categories();
  for (int k = 0; k < K; ++k) {
    cum += pi_star.p[static_cast<size_t>(k)];
    if (u < cum) return k;
  }
  return K - 1;  // guard against the cumulative sum rounding below 1
}

namespace {

long long draw_integer(long long lo, long long hi, std::mt19937_64& rng) {
  const double u = uniform_unit(rng);
  const long long span = hi - lo + 1;
  long long v = lo + static_cast<long long>(u * static_cast<double>(span));
  if (v > hi) v = hi;
  return v;
}

}  // namespace

EvidenceCounts generate_evidence(const CategoricalParams& pi_theta, const EvidenceSpec& spec,
                                 std::mt19937_64& rng) {
  pi_theta.validate();
  spec.validate();
  if (spec.regime == EvidenceRegime::Infinite) {
    return EvidenceCounts::certain_model(pi_theta);
  }
  const auto [lo, hi] = spec.integer_range();
  const long long R = draw_integer(lo, hi, rng);
  const int K = pi_theta.categories();
  std::vector<double> r(static_cast<size_t>(K), 0.0);
  if (spec.style == EvidenceStyle::Idealized) {
    for (int k = 0; k < K; ++k) {
      r[static_cast<size_t>(k)] = static_cast<double>(R) * pi_theta.p[static_cast<size_t>(k)];
    }
  } else {
    for (long long draw = 0; draw < R; ++draw) {
      r[static_cast<size_t>(sample_signal(pi_theta, rng))] += 1.0;
    }
  }
  return EvidenceCounts::finite(std::move(r));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t run, std::uint64_t agent,
                          StreamPurpose purpose, std::uint64_t extra) {
  std::uint64_t h = splitmix64(master ^ 0xA0761D6478BD642FULL);
  h = splitmix64(h ^ run);
  h = splitmix64(h ^ agent);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = splitmix64(h ^ extra);
  return h;
}

std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t run, std::uint64_t agent,
                            StreamPurpose purpose, std::uint64_t extra) {
  return std::mt19937_64(derive_seed(master, run, agent, purpose, extra));
}

}  // namespace ulr
