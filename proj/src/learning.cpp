#include "ulrsim/learning.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ulr {

const char* rule_name(Rule rule) {
  return rule == Rule::LogLinear ? "loglinear" : "degroot";
}

Rule rule_from_name(const std::string& name) {
  if (name == "loglinear") return Rule::LogLinear;
  if (name == "degroot") return Rule::DeGroot;
  throw std::invalid_argument("unknown rule '" + name + "' (expected loglinear or degroot)");
}

void EngineConfig::validate() const {
  if (horizon < 0) throw std::invalid_argument("EngineConfig: horizon must be >= 0");
  if (record_stride < 1) throw std::invalid_argument("EngineConfig: record_stride must be >= 1");
  for (long long t : extra_snapshots) {
    if (t < 0 || t > horizon) {
      throw std::invalid_argument("EngineConfig: snapshot time " + std::to_string(t) +
                                  " outside [0, horizon]");
    }
  }
}

BeliefState BeliefState::initial(int m, int S, int K) {
  BeliefState s;
  s.log_mu.assign(static_cast<size_t>(m) * static_cast<size_t>(S), 0.0);
  s.histograms.assign(static_cast<size_t>(m), ObservationHistogram(K));
  s.t = 0;
  return s;
}

const BeliefSnapshot& BeliefTrajectory::at_time(long long t) const {
  for (const auto& snap : snapshots) {
    if (snap.t == t) return snap;
  }
  throw std::out_of_range("trajectory has no snapshot at t = " + std::to_string(t));
}

bool BeliefTrajectory::has_time(long long t) const {
  for (const auto& snap : snapshots) {
    if (snap.t == t) return true;
  }
  return false;
}

SignalStreams SignalStreams::from_master(std::uint64_t master, std::uint64_t run, int m) {
  SignalStreams s;
  s.gen.reserve(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    s.gen.push_back(make_stream(master, run, static_cast<std::uint64_t>(i), StreamPurpose::Signals));
  }
  return s;
}

SignalStreams SignalStreams::from_seeds(const std::vector<std::uint64_t>& seeds) {
  SignalStreams s;
  s.gen.reserve(seeds.size());
  for (std::uint64_t seed : seeds) s.gen.emplace_back(seed);
  return s;
}

EngineNumericError::EngineNumericError(long long t_, int agent_, int hypothesis_)
    : std::runtime_error("non-finite belief update (NaN) at t=" + std::to_string(t_) +
                         ", agent=" + std::to_string(agent_) +
                         ", hypothesis=" + std::to_string(hypothesis_)),
      t(t_),
      agent(agent_),
      hypothesis(hypothesis_) {}

namespace {

struct Neighbor {
  int j;
  double w;
  double log_w;
};

std::vector<std::vector<Neighbor>> neighbor_lists(const MixingMatrix& matrix) {
  std::vector<std::vector<Neighbor>> lists(static_cast<size_t>(matrix.m));
  for (int i = 0; i < matrix.m; ++i) {
    for (int j = 0; j < matrix.m; ++j) {
      const double w = matrix.at(i, j);
      if (w > 0.0) {
        lists[static_cast<size_t>(i)].push_back({j, w, std::log(w)});
      }
    }
  }
  return lists;
}

void check_dimensions(const BeliefState& state, const MixingMatrix& matrix,
                      const WorldModel& world, const EvidenceTable& evidence) {
  const int m = world.agents();
  const int S = world.num_hypotheses();
  if (matrix.m != m) throw std::invalid_argument("step: matrix dimension does not match agents");
  if (state.agents() != m || state.log_mu.size() != static_cast<size_t>(m) * static_cast<size_t>(S)) {
    throw std::invalid_argument("step: belief state dimensions do not match the world model");
  }
  if (static_cast<int>(evidence.size()) != m) {
    throw std::invalid_argument("step: evidence table must have one row per agent");
  }
  for (const auto& row : evidence) {
    if (static_cast<int>(row.size()) != S) {
      throw std::invalid_argument("step: evidence table must have one column per hypothesis");
    }
  }
}

// One synchronous round, writing into next (pre-sized). Signals are drawn one
// per agent and shared across that agent's hypotheses.
void round_impl(const BeliefState& state, const std::vector<std::vector<Neighbor>>& nbrs,
                const WorldModel& world, const EvidenceTable& evidence, Rule rule,
                SignalStreams& streams, BeliefState& next, std::vector<double>& log_ell,
                std::vector<double>& shifted, std::vector<int>& drawn) {
  const int m = world.agents();
  const int S = world.num_hypotheses();
  const long long round = state.t + 1;

  for (int i = 0; i < m; ++i) {
    drawn[static_cast<size_t>(i)] =
        sample_signal(world.ground_truth[static_cast<size_t>(i)], streams.gen[static_cast<size_t>(i)]);
  }
  for (int i = 0; i < m; ++i) {
    for (int s = 0; s < S; ++s) {
      log_ell[static_cast<size_t>(i) * S + s] =
          log_likelihood_update(state.histograms[static_cast<size_t>(i)], drawn[static_cast<size_t>(i)],
                                evidence[static_cast<size_t>(i)][static_cast<size_t>(s)], round);
    }
  }

  if (rule == Rule::LogLinear) {
    for (int i = 0; i < m; ++i) {
      for (int s = 0; s < S; ++s) {
        double acc = 0.0;
        for (const Neighbor& nb : nbrs[static_cast<size_t>(i)]) {
          acc += nb.w * state.log_mu[static_cast<size_t>(nb.j) * S + s];
        }
        const double v = log_ell[static_cast<size_t>(i) * S + s] + acc;
        if (std::isnan(v)) throw EngineNumericError(round, i, s);
        next.log_mu[static_cast<size_t>(i) * S + s] = v;
      }
    }
  } else {
    for (int s = 0; s < S; ++s) {
      // Shared max shift across agents; cheap and safe because consensus keeps
      // the spread of log beliefs far below the exp underflow range.
      double shift = kNegInf;
      for (int j = 0; j < m; ++j) {
        shift = std::max(shift, state.log_mu[static_cast<size_t>(j) * S + s]);
      }
      if (shift == kNegInf) {
        for (int i = 0; i < m; ++i) {
          const double v = log_ell[static_cast<size_t>(i) * S + s] + kNegInf;
          if (std::isnan(v)) throw EngineNumericError(round, i, s);
          next.log_mu[static_cast<size_t>(i) * S + s] = v;
        }
        continue;
      }
      for (int j = 0; j < m; ++j) {
        shifted[static_cast<size_t>(j)] = std::exp(state.log_mu[static_cast<size_t>(j) * S + s] - shift);
      }
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        bool finite_neighbor = false;
        for (const Neighbor& nb : nbrs[static_cast<size_t>(i)]) {
          acc += nb.w * shifted[static_cast<size_t>(nb.j)];
          finite_neighbor |= state.log_mu[static_cast<size_t>(nb.j) * S + s] > kNegInf;
        }
        double mixed;
        if (acc > 0.0) {
          mixed = shift + std::log(acc);
        } else if (!finite_neighbor) {
          mixed = kNegInf;
        } else {
          // The whole row underflowed against the global shift; redo it with
          // the row's own max for an exact log-sum-exp.
          double row_shift = kNegInf;
          for (const Neighbor& nb : nbrs[static_cast<size_t>(i)]) {
            row_shift = std::max(row_shift, nb.log_w + state.log_mu[static_cast<size_t>(nb.j) * S + s]);
          }
          double row_acc = 0.0;
          for (const Neighbor& nb : nbrs[static_cast<size_t>(i)]) {
            const double term = nb.log_w + state.log_mu[static_cast<size_t>(nb.j) * S + s];
            if (term > kNegInf) row_acc += std::exp(term - row_shift);
          }
          mixed = row_shift + std::log(row_acc);
        }
        const double v = log_ell[static_cast<size_t>(i) * S + s] + mixed;
        if (std::isnan(v)) throw EngineNumericError(round, i, s);
        next.log_mu[static_cast<size_t>(i) * S + s] = v;
      }
    }
  }

  for (int i = 0; i < m; ++i) {
    next.histograms[static_cast<size_t>(i)] = state.histograms[static_cast<size_t>(i)];
    next.histograms[static_cast<size_t>(i)].observe(drawn[static_cast<size_t>(i)]);
  }
  next.t = round;
}

BeliefSnapshot take_snapshot(const BeliefState& state, const EvidenceTable& evidence, int S) {
  const int m = state.agents();
  BeliefSnapshot snap;
  snap.t = state.t;
  snap.log_mu = state.log_mu;
  snap.log_ulr.assign(static_cast<size_t>(m) * static_cast<size_t>(S),
                      std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < m; ++i) {
    for (int s = 0; s < S; ++s) {
      const EvidenceCounts& ev = evidence[static_cast<size_t>(i)][static_cast<size_t>(s)];
      if (ev.mode == EvidenceMode::Finite) {
        snap.log_ulr[static_cast<size_t>(i) * S + s] =
            log_ulr(state.histograms[static_cast<size_t>(i)], ev);
      }
    }
  }
  return snap;
}

}  // namespace

BeliefState step(const BeliefState& state, const MixingMatrix& matrix, const WorldModel& world,
                 const EvidenceTable& evidence, Rule rule, SignalStreams& streams) {
  world.validate();
  matrix.validate();
  check_dimensions(state, matrix, world, evidence);
  const int m = world.agents();
  const int S = world.num_hypotheses();
  const auto nbrs = neighbor_lists(matrix);
  BeliefState next = BeliefState::initial(m, S, world.categories());
  std::vector<double> log_ell(static_cast<size_t>(m) * static_cast<size_t>(S));
  std::vector<double> shifted(static_cast<size_t>(m));
  std::vector<int> drawn(static_cast<size_t>(m));
  round_impl(state, nbrs, world, evidence, rule, streams, next, log_ell, shifted, drawn);
  return next;
}

BeliefTrajectory run(const WorldModel& world, const MixingMatrix& matrix,
                     const EvidenceTable& evidence, const EngineConfig& config,
                     SignalStreams& streams) {
  world.validate();
  matrix.validate();
  config.validate();
  const int m = world.agents();
  const int S = world.num_hypotheses();
  const int K = world.categories();
  if (static_cast<int>(streams.gen.size()) != m) {
    throw std::invalid_argument("run: need one signal stream per agent");
  }
  BeliefState state = BeliefState::initial(m, S, K);
  check_dimensions(state, matrix, world, evidence);
  for (const auto& row : evidence) {
    for (const auto& ev : row) {
      ev.validate();
      if (ev.categories() != K) {
        throw std::invalid_argument("run: evidence category count does not match the world model");
      }
    }
  }

  std::vector<long long> extras = config.extra_snapshots;
  std::sort(extras.begin(), extras.end());
  extras.erase(std::unique(extras.begin(), extras.end()), extras.end());
  const auto want_snapshot = [&](long long t) {
    if (t == 0 || t == config.horizon) return true;
    if (config.record_stride > 0 && t % config.record_stride == 0) return true;
    return std::binary_search(extras.begin(), extras.end(), t);
  };

  const auto nbrs = neighbor_lists(matrix);
  BeliefState next = BeliefState::initial(m, S, K);
  std::vector<double> log_ell(static_cast<size_t>(m) * static_cast<size_t>(S));
  std::vector<double> shifted(static_cast<size_t>(m));
  std::vector<int> drawn(static_cast<size_t>(m));

  BeliefTrajectory traj;
  traj.m = m;
  traj.S = S;
  traj.snapshots.push_back(take_snapshot(state, evidence, S));
  for (long long t = 1; t <= config.horizon; ++t) {
    round_impl(state, nbrs, world, evidence, config.rule, streams, next, log_ell, shifted, drawn);
    std::swap(state, next);
    if (want_snapshot(t)) {
      traj.snapshots.push_back(take_snapshot(state, evidence, S));
    }
  }
  traj.final_state = std::move(state);
  return traj;
}

}  // namespace ulr
