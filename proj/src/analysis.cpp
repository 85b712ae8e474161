#include "ulrsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ulr {

double kl_divergence(const CategoricalParams& p, const CategoricalParams& q) {
  p.validate();
  q.validate();
  if (p.p.size() != q.p.size()) {
    throw std::invalid_argument("kl_divergence: dimension mismatch");
  }
  double acc = 0.0;
  for (size_t k = 0; k < p.p.size(); ++k) {
    const double pk = p.p[k];
    if (pk == 0.0) continue;
    if (q.p[k] == 0.0) return kPosInf;
    acc += pk * std::log(pk / q.p[k]);
  }
  return acc;
}

namespace {

void check_ca_inputs(const std::vector<CategoricalParams>& ground_truths,
                     const std::vector<CategoricalParams>& hypotheses) {
  if (ground_truths.empty() || ground_truths.size() != hypotheses.size()) {
    throw std::invalid_argument("ca_divergence: need matching non-empty agent lists");
  }
  const int K = ground_truths[0].categories();
  for (size_t i = 0; i < ground_truths.size(); ++i) {
    ground_truths[i].validate();
    hypotheses[i].validate();
    if (ground_truths[i].categories() != K || hypotheses[i].categories() != K) {
      throw std::invalid_argument("ca_divergence: inconsistent category counts");
    }
  }
}

}  // namespace

CaDivergence ca_divergence_exact(const std::vector<CategoricalParams>& ground_truths,
                                 const std::vector<CategoricalParams>& hypotheses) {
  check_ca_inputs(ground_truths, hypotheses);
  const int m = static_cast<int>(ground_truths.size());
  const int K = ground_truths[0].categories();
  if (std::pow(static_cast<double>(K), static_cast<double>(m)) > 1e6) {
    throw std::invalid_argument("ca_divergence_exact: K^m exceeds 1e6, use Monte Carlo");
  }
  std::vector<int> idx(static_cast<size_t>(m), 0);
  double value = 0.0;
  while (true) {
    double weight = 1.0;
    for (int i = 0; i < m; ++i) {
      weight *= ground_truths[static_cast<size_t>(i)].p[static_cast<size_t>(idx[static_cast<size_t>(i)])];
    }
    if (weight > 0.0) {
      double avg = 0.0;
      for (int i = 0; i < m; ++i) {
        const size_t k = static_cast<size_t>(idx[static_cast<size_t>(i)]);
        avg += hypotheses[static_cast<size_t>(i)].p[k] / ground_truths[static_cast<size_t>(i)].p[k];
      }
      avg /= static_cast<double>(m);
      value -= weight * std::log(avg);  // log 0 -> value +inf, the divergent case
    }
    int pos = m - 1;
    while (pos >= 0 && ++idx[static_cast<size_t>(pos)] == K) {
      idx[static_cast<size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  CaDivergence out;
  out.value = value;
  out.exact = true;
  return out;
}

CaDivergence ca_divergence_mc(const std::vector<CategoricalParams>& ground_truths,
                              const std::vector<CategoricalParams>& hypotheses,
                              long long samples, std::mt19937_64& rng) {
  check_ca_inputs(ground_truths, hypotheses);
  if (samples < 2) throw std::invalid_argument("ca_divergence_mc: need at least 2 samples");
  const int m = static_cast<int>(ground_truths.size());
  double mean = 0.0, m2 = 0.0;
  for (long long n = 1; n <= samples; ++n) {
    double avg = 0.0;
    for (int i = 0; i < m; ++i) {
      const int k = sample_signal(ground_truths[static_cast<size_t>(i)], rng);
      avg += hypotheses[static_cast<size_t>(i)].p[static_cast<size_t>(k)] /
             ground_truths[static_cast<size_t>(i)].p[static_cast<size_t>(k)];
    }
    const double x = -std::log(avg / static_cast<double>(m));
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  CaDivergence out;
  out.value = mean;
  out.std_error = std::sqrt(m2 / static_cast<double>(samples - 1) / static_cast<double>(samples));
  out.samples = samples;
  out.exact = false;
  return out;
}

CaDivergence ca_divergence(const std::vector<CategoricalParams>& ground_truths,
                           const std::vector<CategoricalParams>& hypotheses,
                           long long mc_samples, std::uint64_t mc_seed) {
  check_ca_inputs(ground_truths, hypotheses);
  const double combos = std::pow(static_cast<double>(ground_truths[0].categories()),
                                 static_cast<double>(ground_truths.size()));
  if (combos <= 1e6) return ca_divergence_exact(ground_truths, hypotheses);
  std::mt19937_64 rng(mc_seed);
  return ca_divergence_mc(ground_truths, hypotheses, mc_samples, rng);
}

RateFitResult fit_rate(const std::vector<std::pair<double, double>>& points, FitModel model) {
  if (points.size() < 10) {
    throw std::invalid_argument("fit_rate: need at least 10 points");
  }
  for (size_t n = 1; n < points.size(); ++n) {
    if (!(points[n].first > points[n - 1].first)) {
      throw std::invalid_argument("fit_rate: t values must be strictly increasing");
    }
  }
  const double n = static_cast<double>(points.size());
  RateFitResult out;
  if (model == FitModel::Linear) {
    double mt = 0.0, my = 0.0;
    for (const auto& [t, y] : points) {
      mt += t;
      my += y;
    }
    mt /= n;
    my /= n;
    double stt = 0.0, sty = 0.0;
    for (const auto& [t, y] : points) {
      stt += (t - mt) * (t - mt);
      sty += (t - mt) * (y - my);
    }
    if (stt <= 0.0) throw std::runtime_error("fit_rate: singular design");
    out.slope = sty / stt;
    out.intercept = my - out.slope * mt;
    double sq = 0.0;
    for (const auto& [t, y] : points) {
      const double r = y - (out.intercept + out.slope * t);
      sq += r * r;
    }
    out.residual = std::sqrt(sq / n);
    return out;
  }

  // log y = log C + alpha log t + slope t, solved by centered least squares.
  double m1 = 0.0, m2 = 0.0, my = 0.0;
  for (const auto& [t, y] : points) {
    if (!(t > 0.0)) throw std::invalid_argument("fit_rate: t must be positive for the log model");
    m1 += std::log(t);
    m2 += t;
    my += y;
  }
  m1 /= n;
  m2 /= n;
  my /= n;
  double s11 = 0.0, s12 = 0.0, s22 = 0.0, s1y = 0.0, s2y = 0.0;
  for (const auto& [t, y] : points) {
    const double x1 = std::log(t) - m1;
    const double x2 = t - m2;
    const double dy = y - my;
    s11 += x1 * x1;
    s12 += x1 * x2;
    s22 += x2 * x2;
    s1y += x1 * dy;
    s2y += x2 * dy;
  }
  const double det = s11 * s22 - s12 * s12;
  if (!(det > 1e-12 * std::max(s11 * s22, 1e-300))) {
    throw std::runtime_error("fit_rate: singular design");
  }
  const double alpha = (s22 * s1y - s12 * s2y) / det;
  const double slope = (s11 * s2y - s12 * s1y) / det;
  const double intercept = my - alpha * m1 - slope * m2;
  out.slope = slope;
  out.intercept = intercept;
  out.poly_exponent = alpha;
  out.scale = std::exp(intercept);
  double sq = 0.0;
  for (const auto& [t, y] : points) {
    const double r = y - (intercept + alpha * std::log(t) + slope * t);
    sq += r * r;
  }
  out.residual = std::sqrt(sq / n);
  return out;
}

const BeliefSnapshot& RunData::at_time(long long t) const {
  for (const auto& snap : snapshots) {
    if (snap.t == t) return snap;
  }
  throw std::out_of_range("run data has no snapshot at t = " + std::to_string(t));
}

namespace {

struct MaxTracker {
  double value = -1.0;
  bool normalized = false;
  bool any = false;

  void offer(double err, bool norm) {
    if (!any || err > value) {
      value = err;
      normalized = norm;
      any = true;
    }
  }
};

}  // namespace

ErrorStats error_stats(const std::vector<RunData>& runs, const std::vector<long long>& checkpoints) {
  if (runs.empty()) throw std::invalid_argument("error_stats: need at least one run");
  const int m = runs[0].m;
  const int S = runs[0].S;
  for (const auto& run : runs) {
    if (run.m != m || run.S != S) {
      throw std::invalid_argument("error_stats: runs have inconsistent dimensions");
    }
    if (run.log_asymptotic_ulr.size() != static_cast<size_t>(m) * static_cast<size_t>(S)) {
      throw std::invalid_argument("error_stats: bad asymptote table size");
    }
  }

  ErrorStats stats;
  stats.checkpoints = checkpoints;
  stats.normalization_rule =
      "errors divided by the reference value when it exceeds 1, raw otherwise";
  stats.per_hypothesis.assign(static_cast<size_t>(S), {});

  for (int s = 0; s < S; ++s) {
    for (long long cp : checkpoints) {
      ErrorStatEntry entry;
      entry.checkpoint = cp;
      MaxTracker lambda_max, con_max, cen_max;

      for (const auto& run : runs) {
        const BeliefSnapshot& snap = run.at_time(cp);

        // Likelihood ratio vs its own asymptote, per agent.
        for (int i = 0; i < m; ++i) {
          const double lu = snap.log_ulr[static_cast<size_t>(i) * S + s];
          const double la = run.log_asymptotic_ulr[static_cast<size_t>(i) * S + s];
          if (std::isnan(lu) || std::isnan(la) || la == kPosInf) continue;
          const double lam = std::exp(lu);
          const double ref = std::exp(la);
          double err = std::abs(lam - ref);
          const bool norm = ref > 1.0;
          if (norm) err /= ref;
          lambda_max.offer(err, norm);
        }

        // Belief vs the across-agent mean belief.
        double mean = 0.0;
        for (int i = 0; i < m; ++i) {
          mean += std::exp(snap.log_mu[static_cast<size_t>(i) * S + s]);
        }
        mean /= static_cast<double>(m);
        if (std::isfinite(mean)) {
          const bool norm = mean > 1.0;
          for (int i = 0; i < m; ++i) {
            double err = std::abs(std::exp(snap.log_mu[static_cast<size_t>(i) * S + s]) - mean);
            if (norm) err /= mean;
            con_max.offer(err, norm);
          }
        }

        // Belief vs the geometric mean of the asymptotes.
        double ref_log = 0.0;
        bool ref_ok = true;
        for (int i = 0; i < m; ++i) {
          const double la = run.log_asymptotic_ulr[static_cast<size_t>(i) * S + s];
          if (std::isnan(la) || la == kPosInf) {
            ref_ok = false;
            break;
          }
          ref_log += la;
        }
        if (ref_ok) {
          const double ref = std::exp(ref_log / static_cast<double>(m));
          if (std::isfinite(ref)) {
            const bool norm = ref > 1.0;
            for (int i = 0; i < m; ++i) {
              double err = std::abs(std::exp(snap.log_mu[static_cast<size_t>(i) * S + s]) - ref);
              if (norm) err /= ref;
              cen_max.offer(err, norm);
            }
          }
        }
      }

      if (lambda_max.any) {
        entry.e_lambda = lambda_max.value;
        entry.e_lambda_normalized = lambda_max.normalized;
      }
      if (con_max.any) {
        entry.e_con = con_max.value;
        entry.e_con_normalized = con_max.normalized;
      }
      if (cen_max.any) {
        entry.e_cen = cen_max.value;
        entry.e_cen_normalized = cen_max.normalized;
      }
      stats.per_hypothesis[static_cast<size_t>(s)].push_back(entry);
    }
  }
  return stats;
}

}  // namespace ulr
