#pragma once

#include <limits>
#include <vector>

namespace ulr {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

// A categorical distribution over K >= 2 signal categories.
struct CategoricalParams {
  std::vector<double> p;

  CategoricalParams() = default;
  explicit CategoricalParams(std::vector<double> probs);

  int categories() const { return static_cast<int>(p.size()); }
  // Entries >= 0 and finite, K >= 2, sum within 1e-12 of 1.
  void validate() const;

  bool operator==(const CategoricalParams&) const = default;
};

enum class EvidenceMode { Finite, Certain };

// Prior evidence backing one (agent, hypothesis) pair: pseudo-counts r with
// total R in Finite mode, or the exact category distribution in Certain mode
// (the infinite-evidence limit).
struct EvidenceCounts {
  EvidenceMode mode = EvidenceMode::Finite;
  std::vector<double> counts;  // r; Finite mode only, real-valued, >= 0
  double total = 0.0;          // R = sum of counts
  CategoricalParams certain;   // Certain mode only

  static EvidenceCounts finite(std::vector<double> r);
  static EvidenceCounts certain_model(CategoricalParams pi);

  int categories() const;
  void validate() const;
};

// Running histogram of one agent's private observations. time is the number
// of observations folded in so far and always equals the sum of counts.
struct ObservationHistogram {
  std::vector<long long> counts;
  long long time = 0;

  ObservationHistogram() = default;
  explicit ObservationHistogram(int k) : counts(static_cast<size_t>(k), 0) {}
  static ObservationHistogram from_counts(std::vector<long long> n);

  int categories() const { return static_cast<int>(counts.size()); }
  void observe(int k);  // category indices are 0-based everywhere
  void validate() const;
};

enum class UlrOutcome { Accept, Reject, Unsure };

struct UlrTestOutcome {
  UlrOutcome outcome = UlrOutcome::Unsure;
  double threshold = 2.0;  // upsilon, > 1
  double log_ratio = 0.0;
};

// log of the K-dimensional Beta function B(alpha).
double log_beta(const std::vector<double>& alpha);

// log density at pi of the Dirichlet posterior built from finite evidence r.
double dirichlet_log_pdf(const CategoricalParams& pi, const EvidenceCounts& evidence);

// log posterior-predictive probability of the observation sequence summarized
// by n, under the Dirichlet posterior for finite evidence r.
double log_posterior_predictive(const ObservationHistogram& n, const EvidenceCounts& evidence);

// log uncertain likelihood ratio: the posterior predictive normalized by the
// vacuous (zero-evidence) model.
double log_ulr(const ObservationHistogram& n, const EvidenceCounts& evidence);

// One-step log likelihood update for the t-th observation landing in category
// k, with n_prev holding the first t-1 observations. Finite evidence always
// yields a finite value; Certain evidence yields -inf when pi_k = 0.
double log_likelihood_update(const ObservationHistogram& n_prev, int k,
                             const EvidenceCounts& evidence, long long t);

// log of the almost-sure large-t limit of the uncertain likelihood ratio when
// observations are drawn i.i.d. from ground_truth. Finite evidence only.
double log_asymptotic_ulr(const EvidenceCounts& evidence, const CategoricalParams& ground_truth);

// Accept / Reject / Unsure against the symmetric thresholds +-log(upsilon).
UlrTestOutcome ulrt_classify(double log_ratio, double upsilon);

// Large-t limit of the evidence-normalized beliefs under uniform priors:
// the softmax of the hypotheses' asymptotic log likelihood ratios.
std::vector<double> normalized_belief_limits(const std::vector<EvidenceCounts>& hypotheses,
                                             const CategoricalParams& ground_truth);

}  // namespace ulr
