#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ulrsim/learning.hpp"
#include "ulrsim/uncertain_models.hpp"

namespace ulr {

// Sum_k p_k log(p_k / q_k); natural log; +inf when p puts mass where q has none.
double kl_divergence(const CategoricalParams& p, const CategoricalParams& q);

struct CaDivergence {
  double value = 0.0;
  double std_error = 0.0;  // 0 for exact enumeration
  long long samples = 0;   // 0 for exact
  bool exact = true;
};

// Centralized-average divergence between per-agent ground truths and a
// per-agent hypothesis: the expected negative log of the across-agent average
// likelihood ratio, under the product ground truth.
CaDivergence ca_divergence_exact(const std::vector<CategoricalParams>& ground_truths,
                                 const std::vector<CategoricalParams>& hypotheses);
CaDivergence ca_divergence_mc(const std::vector<CategoricalParams>& ground_truths,
                              const std::vector<CategoricalParams>& hypotheses,
                              long long samples, std::mt19937_64& rng);
// Exact when K^m <= 1e6, Monte Carlo otherwise.
CaDivergence ca_divergence(const std::vector<CategoricalParams>& ground_truths,
                           const std::vector<CategoricalParams>& hypotheses,
                           long long mc_samples, std::uint64_t mc_seed);

enum class FitModel { Linear, LinearPlusLog };

struct RateFitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;                // root-mean-square residual
  std::optional<double> poly_exponent;  // alpha, LinearPlusLog only
  std::optional<double> scale;          // C = exp(intercept), LinearPlusLog only
};

// Least squares of log belief against t (Linear) or against (log t, t)
// (LinearPlusLog, i.e. log y = log C + alpha log t + slope * t).
RateFitResult fit_rate(const std::vector<std::pair<double, double>>& points, FitModel model);

// One Monte Carlo run's recorded snapshots plus the evidence-implied
// asymptotic log likelihood ratios (+-inf admitted, NaN where undefined).
struct RunData {
  int m = 0, S = 0;
  std::vector<BeliefSnapshot> snapshots;
  std::vector<double> log_asymptotic_ulr;  // m x S

  const BeliefSnapshot& at_time(long long t) const;
};

struct ErrorStatEntry {
  long long checkpoint = 0;
  std::optional<double> e_lambda;  // empty when no finite reference exists
  std::optional<double> e_con;
  std::optional<double> e_cen;
  bool e_lambda_normalized = false;
  bool e_con_normalized = false;
  bool e_cen_normalized = false;
};

struct ErrorStats {
  std::vector<long long> checkpoints;
  std::vector<std::vector<ErrorStatEntry>> per_hypothesis;  // S rows, one entry per checkpoint
  std::string normalization_rule;
};

// Maximum-over-agents-and-runs error statistics at the requested checkpoints:
// e_lambda compares each agent's likelihood ratio against its own asymptote,
// e_con against the across-agent mean belief, e_cen against the geometric mean
// of the asymptotes. Each error is divided by its reference value when that
// reference exceeds 1 and reported raw otherwise.
ErrorStats error_stats(const std::vector<RunData>& runs, const std::vector<long long>& checkpoints);

}  // namespace ulr
