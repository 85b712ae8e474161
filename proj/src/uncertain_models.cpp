#include "ulrsim/uncertain_models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ulr {

namespace {

// lgamma without the global sign variable; all arguments here are positive.
double lgamma_pos(double x) {
#if defined(__GLIBC__) || defined(__APPLE__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

void check_same_size(size_t a, size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

CategoricalParams::CategoricalParams(std::vector<double> probs) : p(std::move(probs)) {
  validate();
}

void CategoricalParams::validate() const {
  if (p.size() < 2) {
    throw std::invalid_argument("CategoricalParams: need at least 2 categories");
  }
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("CategoricalParams: entries must be finite and >= 0");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("CategoricalParams: entries must sum to 1 (got " +
                                std::to_string(sum) + ")");
  }
}

EvidenceCounts EvidenceCounts::finite(std::vector<double> r) {
  EvidenceCounts e;
  e.mode = EvidenceMode::Finite;
  e.counts = std::move(r);
  e.total = 0.0;
  for (double v : e.counts) e.total += v;
  e.validate();
  return e;
}

EvidenceCounts EvidenceCounts::certain_model(CategoricalParams pi) {
  EvidenceCounts e;
  e.mode = EvidenceMode::Certain;
  e.certain = std::move(pi);
  e.certain.validate();
  return e;
}

int EvidenceCounts::categories() const {
  return mode == EvidenceMode::Finite ? static_cast<int>(counts.size())
                                      : certain.categories();
}

void EvidenceCounts::validate() const {
  if (mode == EvidenceMode::Certain) {
    certain.validate();
    return;
  }
  if (counts.size() < 2) {
    throw std::invalid_argument("EvidenceCounts: need at least 2 categories");
  }
  double sum = 0.0;
  for (double v : counts) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("EvidenceCounts: counts must be finite and >= 0");
    }
    sum += v;
  }
  if (std::abs(sum - total) > 1e-9) {
    throw std::invalid_argument("EvidenceCounts: total does not match sum of counts");
  }
}

ObservationHistogram ObservationHistogram::from_counts(std::vector<long long> n) {
  ObservationHistogram h;
  h.counts = std::move(n);
  h.time = 0;
  for (long long v : h.counts) h.time += v;
  h.validate();
  return h;
}

void ObservationHistogram::observe(int k) {
  if (k < 0 || k >= categories()) {
    throw std::invalid_argument("ObservationHistogram: category index out of range");
  }
  ++counts[static_cast<size_t>(k)];
  ++time;
}

void ObservationHistogram::validate() const {
  if (counts.empty()) {
    throw std::invalid_argument("ObservationHistogram: empty histogram");
  }
  long long sum = 0;
  for (long long v : counts) {
    if (v < 0) throw std::invalid_argument("ObservationHistogram: negative count");
    sum += v;
  }
  if (sum != time) {
    throw std::invalid_argument("ObservationHistogram: time does not match sum of counts");
  }
}

double log_beta(const std::vector<double>& alpha) {
  if (alpha.size() < 2) {
    throw std::domain_error("log_beta: need at least 2 components");
  }
  double sum = 0.0;
  double acc = 0.0;
  for (double a : alpha) {
    if (!std::isfinite(a) || a <= 0.0) {
      throw std::domain_error("log_beta: components must be positive and finite");
    }
    acc += lgamma_pos(a);
    sum += a;
  }
  return acc - lgamma_pos(sum);
}

double dirichlet_log_pdf(const CategoricalParams& pi, const EvidenceCounts& evidence) {
  if (evidence.mode != EvidenceMode::Finite) {
    throw std::domain_error("dirichlet_log_pdf: evidence must be in Finite mode");
  }
  pi.validate();
  evidence.validate();
  check_same_size(pi.p.size(), evidence.counts.size(), "dirichlet_log_pdf");
  const size_t K = pi.p.size();
  std::vector<double> alpha(K);
  double dot = 0.0;
  for (size_t k = 0; k < K; ++k) {
    const double r = evidence.counts[k];
    alpha[k] = r + 1.0;
    if (pi.p[k] == 0.0) {
      if (r > 0.0) return kNegInf;  // zero base with positive exponent: density 0
      continue;                     // 0 * log 0 contributes nothing
    }
    dot += r * std::log(pi.p[k]);
  }
  return dot - log_beta(alpha);
}

double log_posterior_predictive(const ObservationHistogram& n, const EvidenceCounts& evidence) {
  if (evidence.mode != EvidenceMode::Finite) {
    throw std::domain_error("log_posterior_predictive: evidence must be in Finite mode");
  }
  n.validate();
  evidence.validate();
  check_same_size(n.counts.size(), evidence.counts.size(), "log_posterior_predictive");
  const size_t K = n.counts.size();
  std::vector<double> post(K), prior(K);
  for (size_t k = 0; k < K; ++k) {
    post[k] = evidence.counts[k] + static_cast<double>(n.counts[k]) + 1.0;
    prior[k] = evidence.counts[k] + 1.0;
  }
  return log_beta(post) - log_beta(prior);
}

double log_ulr(const ObservationHistogram& n, const EvidenceCounts& evidence) {
  if (evidence.mode != EvidenceMode::Finite) {
    throw std::domain_error("log_ulr: evidence must be in Finite mode");
  }
  n.validate();
  evidence.validate();
  check_same_size(n.counts.size(), evidence.counts.size(), "log_ulr");
  const size_t K = n.counts.size();
  std::vector<double> joint(K), prior(K), vac(K);
  for (size_t k = 0; k < K; ++k) {
    const double nk = static_cast<double>(n.counts[k]);
    joint[k] = evidence.counts[k] + nk + 1.0;
    prior[k] = evidence.counts[k] + 1.0;
    vac[k] = nk + 1.0;
  }
  // log B(1,...,1) = -log Gamma(K)
  const double log_b_ones = -lgamma_pos(static_cast<double>(K));
  return log_beta(joint) + log_b_ones - log_beta(prior) - log_beta(vac);
}

double log_likelihood_update(const ObservationHistogram& n_prev, int k,
                             const EvidenceCounts& evidence, long long t) {
  n_prev.validate();
  evidence.validate();
  const int K = n_prev.categories();
  if (k < 0 || k >= K) {
    throw std::invalid_argument("log_likelihood_update: category index out of range");
  }
  if (t < 1) {
    throw std::invalid_argument("log_likelihood_update: t must be >= 1");
  }
  if (n_prev.time != t - 1) {
    throw std::invalid_argument("log_likelihood_update: histogram holds " +
                                std::to_string(n_prev.time) + " observations, expected " +
                                std::to_string(t - 1));
  }
  const double nk = static_cast<double>(n_prev.counts[static_cast<size_t>(k)]);
  const double tk = static_cast<double>(t + K - 1);
  if (evidence.mode == EvidenceMode::Certain) {
    check_same_size(static_cast<size_t>(K), evidence.certain.p.size(), "log_likelihood_update");
    const double pk = evidence.certain.p[static_cast<size_t>(k)];
    if (pk == 0.0) return kNegInf;  // impossible observation under a certain model
    return std::log(pk) + std::log(tk) - std::log(nk + 1.0);
  }
  check_same_size(static_cast<size_t>(K), evidence.counts.size(), "log_likelihood_update");
  const double rk = evidence.counts[static_cast<size_t>(k)];
  const double R = evidence.total;
  return std::log(rk + nk + 1.0) + std::log(tk) - std::log(R + tk) - std::log(nk + 1.0);
}

double log_asymptotic_ulr(const EvidenceCounts& evidence, const CategoricalParams& ground_truth) {
  if (evidence.mode != EvidenceMode::Finite) {
    throw std::domain_error("log_asymptotic_ulr: evidence must be in Finite mode");
  }
  evidence.validate();
  ground_truth.validate();
  check_same_size(evidence.counts.size(), ground_truth.p.size(), "log_asymptotic_ulr");
  const size_t K = evidence.counts.size();
  std::vector<double> prior(K);
  double dot = 0.0;
  for (size_t k = 0; k < K; ++k) {
    const double r = evidence.counts[k];
    prior[k] = r + 1.0;
    if (ground_truth.p[k] == 0.0) {
      if (r > 0.0) return kNegInf;
      continue;
    }
    dot += r * std::log(ground_truth.p[k]);
  }
  const double log_b_ones = -lgamma_pos(static_cast<double>(K));
  return log_b_ones - log_beta(prior) + dot;
}

UlrTestOutcome ulrt_classify(double log_ratio, double upsilon) {
  if (!(upsilon > 1.0)) {
    throw std::domain_error("ulrt_classify: upsilon must be > 1");
  }
  const double bar = std::log(upsilon);
  UlrTestOutcome out;
  out.threshold = upsilon;
  out.log_ratio = log_ratio;
  if (log_ratio >= bar) {
    out.outcome = UlrOutcome::Accept;
  } else if (log_ratio < -bar) {
    out.outcome = UlrOutcome::Reject;
  } else {
    out.outcome = UlrOutcome::Unsure;
  }
  return out;
}

std::vector<double> normalized_belief_limits(const std::vector<EvidenceCounts>& hypotheses,
                                             const CategoricalParams& ground_truth) {
  if (hypotheses.size() < 2) {
    throw std::invalid_argument("normalized_belief_limits: need at least 2 hypotheses");
  }
  std::vector<double> logl(hypotheses.size());
  double top = kNegInf;
  for (size_t s = 0; s < hypotheses.size(); ++s) {
    logl[s] = log_asymptotic_ulr(hypotheses[s], ground_truth);
    top = std::max(top, logl[s]);
  }
  if (top == kNegInf) {
    throw std::domain_error("normalized_belief_limits: every hypothesis has limit zero");
  }
  double z = 0.0;
  std::vector<double> out(logl.size());
  for (size_t s = 0; s < logl.size(); ++s) {
    out[s] = std::exp(logl[s] - top);
    z += out[s];
  }
  for (double& v : out) v /= z;
  return out;
}

}  // namespace ulr
