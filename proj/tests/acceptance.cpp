// Acceptance harness: ten end-to-end checks of the library's core claims.
// Each prints one line; the process exits 0 only if every selected check
// passes. Optional argv: a list of check numbers to run (default: all).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ulrsim/analysis.hpp"
#include "ulrsim/harness.hpp"
#include "ulrsim/learning.hpp"
#include "ulrsim/network.hpp"
#include "ulrsim/signals.hpp"
#include "ulrsim/uncertain_models.hpp"

using namespace ulr;
namespace fs = std::filesystem;

namespace {

// Master seeds for the stochastic checks. Values and the procedure used to
// pick them are recorded in the project notes; every check recomputes its
// statistic from scratch given the seed.
constexpr std::uint64_t kSeedLimitConsensus = 41;
constexpr std::uint64_t kSeedDominance = 104;
constexpr std::uint64_t kSeedDecayRates = 205;

struct Outcome {
  bool pass = false;
  std::string detail;
};

void parallel_for(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = std::min<int>(n, static_cast<int>(hw));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> cursor{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&]() {
    while (true) {
      const int i = cursor.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

const std::vector<std::vector<double>> kHypothesisTable = {
    {0.6, 0.4}, {0.55, 0.45}, {0.5, 0.5}, {0.4, 0.6}};

ExperimentConfig base_config() {
  ExperimentConfig cfg;
  cfg.categories = 2;
  cfg.hypotheses = kHypothesisTable;
  cfg.ground_truth = 0;
  return cfg;
}

// ---------------------------------------------------------------------------
// 1. The divergence helper reproduces the reference table values.

Outcome check_divergence_table() {
  const CategoricalParams star({0.6, 0.4});
  const double targets[4] = {0.0, 0.0051, 0.0204, 0.0811};
  double worst = 0.0;
  for (int s = 0; s < 4; ++s) {
    const double d = kl_divergence(CategoricalParams(kHypothesisTable[s]), star);
    worst = std::max(worst, std::abs(d - targets[s]));
  }
  return {worst <= 5e-4, "max |err| = " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 2. Telescoped per-step updates reproduce the closed-form log ratio.

Outcome check_telescoping_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240917);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int K = 2 + static_cast<int>(rng() % 4);
    std::vector<double> r(K, 0.0);
    if (trial % 17 != 0) {  // every 17th case keeps vacuous evidence
      for (int k = 0; k < K; ++k) r[k] = static_cast<double>(rng() % 11);
    }
    const EvidenceCounts ev = EvidenceCounts::finite(r);
    const long long t_max = 1 + static_cast<long long>(rng() % 200);
    ObservationHistogram n(K);
    double total = 0.0;
    for (long long t = 1; t <= t_max; ++t) {
      const int k = static_cast<int>(rng() % K);
      total += log_likelihood_update(n, k, ev, t);
      n.observe(k);
    }
    worst = std::max(worst, std::abs(total - log_ulr(n, ev)));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = worst <= 1e-9 && secs < 10.0;
  return {pass, "max |telescoped - direct| = " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// 3. Final network beliefs agree with the average asymptotic log ratio.

Outcome check_limit_consensus() {
  ExperimentConfig cfg = base_config();
  cfg.agents = 5;
  cfg.topology.kind = TopologySpec::Kind::Complete;
  cfg.evidence.regime = EvidenceRegime::Low;
  cfg.evidence.style = EvidenceStyle::Idealized;
  cfg.horizon = 100000;
  cfg.runs = 10;
  cfg.seed = kSeedLimitConsensus;
  const int m = cfg.agents, S = cfg.num_hypotheses();
  const long long mid = 10000;
  const WorldModel world = build_world(cfg);
  const MixingMatrix A = build_matrix(cfg, build_topology(cfg));

  std::vector<std::vector<double>> dev_final(cfg.runs, std::vector<double>(S, 0.0));
  std::vector<std::vector<double>> dev_mid(cfg.runs, std::vector<double>(S, 0.0));
  parallel_for(cfg.runs, [&](int run_idx) {
    const EvidenceTable ev = build_evidence(cfg, world, run_idx);
    const std::vector<double> asym = asymptote_table(ev, world);
    EngineConfig engine;
    engine.rule = Rule::LogLinear;
    engine.horizon = cfg.horizon;
    engine.record_stride = cfg.horizon;
    engine.extra_snapshots = {mid};
    SignalStreams streams = SignalStreams::from_master(cfg.seed, run_idx, m);
    const BeliefTrajectory traj = run(world, A, ev, engine, streams);
    for (int s = 0; s < S; ++s) {
      double center = 0.0;
      for (int j = 0; j < m; ++j) center += asym[j * S + s];
      center /= m;
      for (int i = 0; i < m; ++i) {
        dev_final[run_idx][s] = std::max(
            dev_final[run_idx][s], std::abs(traj.at_time(cfg.horizon).log_mu[i * S + s] - center));
        dev_mid[run_idx][s] = std::max(
            dev_mid[run_idx][s], std::abs(traj.at_time(mid).log_mu[i * S + s] - center));
      }
    }
  });
  double worst_final = 0.0, worst_mid = 0.0;
  for (int r = 0; r < cfg.runs; ++r) {
    for (int s = 0; s < S; ++s) {
      worst_final = std::max(worst_final, dev_final[r][s]);
      worst_mid = std::max(worst_mid, dev_mid[r][s]);
    }
  }
  const bool pass = worst_final <= 0.05 && worst_mid > worst_final;
  return {pass, "max dev at T = " + fmt(worst_final) + " (<= 0.05), at T/10 = " + fmt(worst_mid) +
                    " (decreasing)"};
}

// ---------------------------------------------------------------------------
// 4. With shared streams the arithmetic rule dominates the geometric rule.

Outcome check_dominance() {
  ExperimentConfig cfg = base_config();
  cfg.agents = 20;
  cfg.topology.kind = TopologySpec::Kind::Geometric;
  cfg.topology.radius = 0.4;
  cfg.evidence.regime = EvidenceRegime::Low;
  cfg.evidence.style = EvidenceStyle::Sampled;
  cfg.horizon = 10000;
  cfg.runs = 5;
  cfg.seed = kSeedDominance;
  const int m = cfg.agents, S = cfg.num_hypotheses();
  const WorldModel world = build_world(cfg);
  const MixingMatrix A = build_matrix(cfg, build_topology(cfg));

  std::vector<double> worst_margin(cfg.runs, kPosInf);
  std::vector<long long> violations(cfg.runs, 0);
  parallel_for(cfg.runs, [&](int run_idx) {
    const EvidenceTable ev = build_evidence(cfg, world, run_idx);
    SignalStreams ll_streams = SignalStreams::from_master(cfg.seed, run_idx, m);
    SignalStreams dg_streams = SignalStreams::from_master(cfg.seed, run_idx, m);
    BeliefState ll = BeliefState::initial(m, S, cfg.categories);
    BeliefState dg = BeliefState::initial(m, S, cfg.categories);
    for (long long t = 1; t <= cfg.horizon; ++t) {
      ll = step(ll, A, world, ev, Rule::LogLinear, ll_streams);
      dg = step(dg, A, world, ev, Rule::DeGroot, dg_streams);
      for (int idx = 0; idx < m * S; ++idx) {
        if (ll.log_mu[idx] == kNegInf) continue;
        const double margin = dg.log_mu[idx] - ll.log_mu[idx];
        worst_margin[run_idx] = std::min(worst_margin[run_idx], margin);
        if (margin < -1e-9) ++violations[run_idx];
      }
    }
  });
  double worst = kPosInf;
  long long total_violations = 0;
  for (int r = 0; r < cfg.runs; ++r) {
    worst = std::min(worst, worst_margin[r]);
    total_violations += violations[r];
  }
  return {total_violations == 0,
          "worst margin = " + fmt(worst) + ", violations = " + std::to_string(total_violations)};
}

// ---------------------------------------------------------------------------
// 5. Certain-evidence decay rates match the divergence-based predictions.

Outcome check_decay_rates() {
  ExperimentConfig cfg;
  cfg.agents = 3;
  cfg.categories = 2;
  cfg.hypotheses = {{0.6, 0.4}, {0.4, 0.6}};
  cfg.ground_truth = 0;
  cfg.topology.kind = TopologySpec::Kind::Complete;
  cfg.weights = "uniform";
  cfg.evidence.regime = EvidenceRegime::Infinite;
  cfg.horizon = 100000;
  cfg.record_stride = 1000;
  cfg.runs = 5;
  cfg.seed = kSeedDecayRates;
  const int m = cfg.agents, S = cfg.num_hypotheses();
  const WorldModel world = build_world(cfg);
  const MixingMatrix A = build_matrix(cfg, build_topology(cfg));
  const EvidenceTable ev = build_evidence(cfg, world, 0);  // certain models, run-independent

  // Targets from the divergence helpers.
  std::vector<CategoricalParams> stars, alt;
  double avg_kl = 0.0;
  for (int i = 0; i < m; ++i) {
    stars.push_back(world.ground_truth[i]);
    alt.push_back(world.hypotheses[i][1]);
    avg_kl += kl_divergence(stars.back(), alt.back());
  }
  avg_kl /= m;
  const double target_ll = -avg_kl;
  const double target_dg = -ca_divergence_exact(stars, alt).value;

  std::map<Rule, double> slope;
  for (Rule rule : {Rule::LogLinear, Rule::DeGroot}) {
    std::vector<std::map<long long, double>> per_run(cfg.runs);
    parallel_for(cfg.runs, [&](int run_idx) {
      EngineConfig engine;
      engine.rule = rule;
      engine.horizon = cfg.horizon;
      engine.record_stride = cfg.record_stride;
      SignalStreams streams = SignalStreams::from_master(cfg.seed, run_idx, m);
      const BeliefTrajectory traj = run(world, A, ev, engine, streams);
      for (const auto& snap : traj.snapshots) {
        if (snap.t < cfg.horizon / 10) continue;
        double mean = 0.0;
        for (int i = 0; i < m; ++i) mean += snap.log_mu[i * S + 1];
        per_run[run_idx][snap.t] = mean / m;
      }
    });
    std::map<long long, double> mean_by_t;
    for (const auto& one : per_run) {
      for (const auto& [t, v] : one) mean_by_t[t] += v / cfg.runs;
    }
    std::vector<std::pair<double, double>> points;
    for (const auto& [t, v] : mean_by_t) points.emplace_back(static_cast<double>(t), v);
    slope[rule] = fit_rate(points, FitModel::Linear).slope;
  }
  const double ll = slope[Rule::LogLinear], dg = slope[Rule::DeGroot];
  const bool ll_ok = std::abs(ll - target_ll) <= 0.10 * std::abs(target_ll);
  const bool dg_ok = std::abs(dg - target_dg) <= 0.10 * std::abs(target_dg);
  const bool order_ok = std::abs(dg) <= std::abs(ll);
  return {ll_ok && dg_ok && order_ok, "geometric slope " + fmt(ll) + " (target " + fmt(target_ll) +
                                          "), arithmetic slope " + fmt(dg) + " (target " +
                                          fmt(target_dg) + ")"};
}

// ---------------------------------------------------------------------------
// 6. Under certain matched models the true hypothesis keeps growing.

Outcome check_matched_growth() {
  const ExperimentConfig cfg = preset_config("paper_certain");
  const int m = cfg.agents, S = cfg.num_hypotheses();
  const long long mid = 10000;
  const WorldModel world = build_world(cfg);
  const MixingMatrix A = build_matrix(cfg, build_topology(cfg));
  const EvidenceTable ev = build_evidence(cfg, world, 0);  // certain models, run-independent

  struct Task {
    Rule rule;
    int run_idx;
  };
  std::vector<Task> tasks;
  for (Rule rule : cfg.rules) {
    for (int r = 0; r < cfg.runs; ++r) tasks.push_back({rule, r});
  }
  std::mutex collect;
  std::map<Rule, std::vector<double>> at_mid, at_end;
  parallel_for(static_cast<int>(tasks.size()), [&](int k) {
    const Task task = tasks[k];
    EngineConfig engine;
    engine.rule = task.rule;
    engine.horizon = cfg.horizon;
    engine.record_stride = cfg.horizon;
    engine.extra_snapshots = {mid};
    SignalStreams streams = SignalStreams::from_master(cfg.seed, task.run_idx, m);
    const BeliefTrajectory traj = run(world, A, ev, engine, streams);
    std::vector<double> vm, ve;
    for (int i = 0; i < m; ++i) {
      vm.push_back(traj.at_time(mid).log_mu[i * S + cfg.ground_truth]);
      ve.push_back(traj.at_time(cfg.horizon).log_mu[i * S + cfg.ground_truth]);
    }
    std::lock_guard<std::mutex> lock(collect);
    at_mid[task.rule].insert(at_mid[task.rule].end(), vm.begin(), vm.end());
    at_end[task.rule].insert(at_end[task.rule].end(), ve.begin(), ve.end());
  });
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  bool pass = true;
  std::string detail;
  for (Rule rule : cfg.rules) {
    const double a = median(at_mid[rule]);
    const double b = median(at_end[rule]);
    pass = pass && b > a;
    if (!detail.empty()) detail += "; ";
    detail += std::string(rule_name(rule)) + " median " + fmt(a) + " -> " + fmt(b);
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 7. Scanning the alternative's evidence budget opens then closes a window
//    where the normalized limit prefers the mismatched hypothesis.

Outcome check_preference_window() {
  const CategoricalParams star({0.6, 0.4});
  const std::vector<double> pi1{0.6, 0.4};
  const std::vector<double> pi2{0.575, 0.425};
  std::vector<long long> counts;
  std::string detail;
  for (long long r1 : {45LL, 65LL, 85LL}) {
    const EvidenceCounts e1 = EvidenceCounts::finite({r1 * pi1[0], r1 * pi1[1]});
    long long count = 0, first = -1, last = -1;
    for (long long r2 = 50; r2 <= 2000; ++r2) {
      const EvidenceCounts e2 = EvidenceCounts::finite({r2 * pi2[0], r2 * pi2[1]});
      const auto limits = normalized_belief_limits({e1, e2}, star);
      if (limits[1] > limits[0]) {
        if (first < 0) first = r2;
        last = r2;
        ++count;
      }
    }
    counts.push_back(count);
    if (!detail.empty()) detail += "; ";
    detail += "budget " + std::to_string(r1) + ": " +
              (count > 0 ? "[" + std::to_string(first) + ", " + std::to_string(last) + "]"
                         : "empty");
  }
  const bool pass =
      counts[0] > 0 && counts[1] <= counts[0] && counts[2] <= counts[1] && counts[2] < counts[0];
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 8. The consensus gap obeys the sqrt(2) * m * lambda^t contraction bound.

Outcome check_contraction_bound() {
  const auto start = std::chrono::steady_clock::now();
  std::atomic<long long> failures{0};
  std::vector<double> worst_ratio(100, 0.0);
  parallel_for(100, [&](int i) {
    const int m = 5 + (i % 16);  // 5..20
    const double radius = m < 12 ? 0.6 : 0.4;
    std::mt19937_64 rng(9000 + static_cast<std::uint64_t>(i));
    const Topology g = random_geometric_graph(m, radius, rng);
    const MixingMatrix A = lazy_metropolis(g);
    for (long long t : {1LL, 10LL, 100LL, 1000LL}) {
      const double gap = consensus_gap(A, t);
      const double bound = std::sqrt(2.0) * m * std::pow(A.lambda_bound, static_cast<double>(t));
      if (gap > bound + 1e-12) ++failures;
      if (bound > 0.0) worst_ratio[i] = std::max(worst_ratio[i], gap / bound);
    }
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double ratio = *std::max_element(worst_ratio.begin(), worst_ratio.end());
  const bool pass = failures == 0 && secs < 30.0;
  return {pass, "violations = " + std::to_string(failures.load()) +
                    ", tightest gap/bound = " + fmt(ratio) + ", " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// 9. Every finite-evidence update stays inside its envelope.

Outcome check_update_envelope() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(777);
  long long violations = 0;
  double worst_slack = kPosInf;
  for (int trial = 0; trial < 100000; ++trial) {
    const int K = 2 + static_cast<int>(rng() % 5);
    std::vector<double> r(K, 0.0);
    double total = 0.0, top = 0.0;
    if (trial % 97 != 0) {
      for (int k = 0; k < K; ++k) {
        r[k] = static_cast<double>(rng() % 21);
        total += r[k];
        top = std::max(top, r[k]);
      }
    }
    const EvidenceCounts ev = EvidenceCounts::finite(r);
    const long long t = 1 + static_cast<long long>(rng() % 300);
    ObservationHistogram n(K);
    for (long long u = 1; u < t; ++u) n.observe(static_cast<int>(rng() % K));
    const int k = static_cast<int>(rng() % K);
    const double ell = log_likelihood_update(n, k, ev, t);
    const double lower = -std::log(total + K);
    const double upper = std::log(top + 1.0);
    if (ell < lower - 1e-12 || ell > upper + 1e-12) ++violations;
    worst_slack = std::min({worst_slack, ell - lower, upper - ell});
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = violations == 0 && secs < 5.0;
  return {pass, "violations = " + std::to_string(violations) +
                    ", min slack = " + fmt(worst_slack) + ", " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// 10. The emitted asymptote curve grid has the expected shape.

Outcome check_curve_shape() {
  const fs::path dir = fs::temp_directory_path() / "ulrsim_acceptance_fig2";
  fs::remove_all(dir);
  write_figure_preset("figure2", dir.string());
  std::ifstream in(dir / "fig2_curves.csv");
  if (!in) return {false, "missing fig2_curves.csv"};
  std::string line;
  std::getline(in, line);  // header
  std::map<double, std::vector<std::pair<double, double>>> curves;  // pi -> (R, value)
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    double vals[3];
    for (int f = 0; f < 3; ++f) {
      std::getline(row, field, ',');
      vals[f] = std::stod(field);
    }
    curves[vals[1]].emplace_back(vals[0], vals[2]);
  }
  fs::remove_all(dir);
  if (curves.size() != 9) return {false, "expected 9 curves"};
  bool matched_increasing = true, mismatched_negative = true;
  double top_r = 0.0;
  for (auto& [pi, pts] : curves) {
    std::sort(pts.begin(), pts.end());
    top_r = pts.back().first;
    if (std::abs(pi - 0.6) < 1e-9) {
      for (size_t j = 1; j < pts.size(); ++j) {
        if (pts[j].second <= pts[j - 1].second) matched_increasing = false;
      }
    } else if (pts.back().second >= 0.0) {
      mismatched_negative = false;
    }
  }
  const bool grid_ok = std::abs(top_r - 1e5) < 1e-6 * 1e5;
  return {matched_increasing && mismatched_negative && grid_ok,
          std::string("matched curve ") + (matched_increasing ? "increasing" : "NOT increasing") +
              ", mismatched curves " + (mismatched_negative ? "negative" : "NOT negative") +
              " at R = " + fmt(top_r)};
}

struct Check {
  int id;
  const char* name;
  Outcome (*fn)();
};

const Check kChecks[] = {
    {1, "divergence table values", check_divergence_table},
    {2, "telescoped likelihood oracle", check_telescoping_oracle},
    {3, "network limit consensus", check_limit_consensus},
    {4, "arithmetic-vs-geometric dominance", check_dominance},
    {5, "certain-evidence decay rates", check_decay_rates},
    {6, "matched hypothesis growth", check_matched_growth},
    {7, "finite-evidence preference window", check_preference_window},
    {8, "mixing contraction bound", check_contraction_bound},
    {9, "update envelope bounds", check_update_envelope},
    {10, "asymptote curve shape", check_curve_shape},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int a = 1; a < argc; ++a) {
    try {
      selected.push_back(std::stoi(argv[a]));
    } catch (const std::exception&) {
      std::cerr << "usage: " << argv[0] << " [check numbers...]\n";
      return 2;
    }
  }
  int failed = 0, ran = 0;
  for (const Check& check : kChecks) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), check.id) == selected.end()) {
      continue;
    }
    ++ran;
    Outcome outcome;
    try {
      outcome = check.fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    if (!outcome.pass) ++failed;
    std::printf("criterion %2d %s  %-36s %s\n", check.id, outcome.pass ? "PASS" : "FAIL",
                check.name, outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d checks passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
