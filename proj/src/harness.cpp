#include "ulrsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

namespace ulr {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Small utilities

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

json json_number(double v) {
  // JSON has no inf/nan; report those as null.
  if (!std::isfinite(v)) return json(nullptr);
  return json(v);
}

double median_of(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setfill('0') << std::setw(16) << h;
  return out.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ExecutionError("cannot write " + path.string());
  out << text;
  if (!out) throw ExecutionError("write failed for " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// Enum <-> string

std::string topology_kind_name(TopologySpec::Kind kind) {
  switch (kind) {
    case TopologySpec::Kind::Geometric: return "geometric";
    case TopologySpec::Kind::Complete: return "complete";
    case TopologySpec::Kind::Ring: return "ring";
    case TopologySpec::Kind::EdgeList: return "edge_list";
  }
  return "geometric";
}

TopologySpec::Kind topology_kind_from(const std::string& name) {
  if (name == "geometric") return TopologySpec::Kind::Geometric;
  if (name == "complete") return TopologySpec::Kind::Complete;
  if (name == "ring") return TopologySpec::Kind::Ring;
  if (name == "edge_list") return TopologySpec::Kind::EdgeList;
  throw ValidationError("unknown topology kind '" + name +
                        "' (expected geometric, complete, ring or edge_list)");
}

std::string regime_name(EvidenceRegime regime) {
  switch (regime) {
    case EvidenceRegime::Low: return "low";
    case EvidenceRegime::High: return "high";
    case EvidenceRegime::Infinite: return "infinite";
    case EvidenceRegime::Explicit: return "explicit";
  }
  return "low";
}

EvidenceRegime regime_from(const std::string& name) {
  if (name == "low") return EvidenceRegime::Low;
  if (name == "high") return EvidenceRegime::High;
  if (name == "infinite") return EvidenceRegime::Infinite;
  if (name == "explicit") return EvidenceRegime::Explicit;
  throw ValidationError("unknown evidence regime '" + name +
                        "' (expected low, high, infinite or explicit)");
}

std::string style_name(EvidenceStyle style) {
  return style == EvidenceStyle::Sampled ? "sampled" : "idealized";
}

EvidenceStyle style_from(const std::string& name) {
  if (name == "sampled") return EvidenceStyle::Sampled;
  if (name == "idealized") return EvidenceStyle::Idealized;
  throw ValidationError("unknown evidence style '" + name + "' (expected sampled or idealized)");
}

// ---------------------------------------------------------------------------
// JSON object reader with unknown-key rejection

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw ValidationError(context_ + ": expected a JSON object");
  }

  bool has(const std::string& key) {
    if (j_.contains(key)) {
      seen_.insert(key);
      return true;
    }
    return false;
  }

  const json& at(const std::string& key) {
    if (!j_.contains(key)) throw ValidationError(context_ + ": missing key '" + key + "'");
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key, const char* type_name) {
    const json& v = at(key);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ValidationError(context_ + ": key '" + key + "' must be " + type_name);
    }
  }

  template <typename T>
  T get_or(const std::string& key, T fallback, const char* type_name) {
    if (!j_.contains(key)) return fallback;
    return get<T>(key, type_name);
  }

  void finish() {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw ValidationError(context_ + ": unknown key '" + item.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

std::vector<long long> default_checkpoints(long long horizon) {
  std::vector<long long> cps{std::max<long long>(1, horizon / 100),
                             std::max<long long>(1, horizon / 10), horizon};
  std::sort(cps.begin(), cps.end());
  cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
  return cps;
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig

int ExperimentConfig::num_hypotheses() const {
  if (!hypotheses.empty()) return static_cast<int>(hypotheses.size());
  if (!per_agent_hypotheses.empty()) return static_cast<int>(per_agent_hypotheses[0].size());
  return 0;
}

void ExperimentConfig::validate() const {
  if (agents < 1) throw ValidationError("config: agents must be >= 1");
  if (categories < 2) throw ValidationError("config: categories must be >= 2");
  if (hypotheses.empty() == per_agent_hypotheses.empty()) {
    throw ValidationError("config: provide exactly one of 'hypotheses' or 'per_agent_hypotheses'");
  }
  const int S = num_hypotheses();
  if (S < 1) throw ValidationError("config: hypothesis list must not be empty");
  const auto check_dist = [&](const std::vector<double>& p, const std::string& where) {
    if (static_cast<int>(p.size()) != categories) {
      throw ValidationError("config: " + where + " must have " + std::to_string(categories) +
                            " entries");
    }
    try {
      CategoricalParams(p).validate();
    } catch (const std::exception& e) {
      throw ValidationError("config: " + where + ": " + e.what());
    }
  };
  if (!hypotheses.empty()) {
    for (size_t s = 0; s < hypotheses.size(); ++s) {
      check_dist(hypotheses[s], "hypotheses[" + std::to_string(s) + "]");
    }
  } else {
    if (static_cast<int>(per_agent_hypotheses.size()) != agents) {
      throw ValidationError("config: per_agent_hypotheses must have one row per agent");
    }
    for (size_t i = 0; i < per_agent_hypotheses.size(); ++i) {
      if (static_cast<int>(per_agent_hypotheses[i].size()) != S) {
        throw ValidationError("config: per_agent_hypotheses rows must share the hypothesis count");
      }
      for (size_t s = 0; s < per_agent_hypotheses[i].size(); ++s) {
        check_dist(per_agent_hypotheses[i][s], "per_agent_hypotheses[" + std::to_string(i) + "][" +
                                                   std::to_string(s) + "]");
      }
    }
  }
  if (ground_truth < 0 || ground_truth >= S) {
    throw ValidationError("config: ground_truth index out of range");
  }
  if (topology.kind == TopologySpec::Kind::Geometric) {
    if (!(topology.radius > 0.0) || topology.radius > std::sqrt(2.0)) {
      throw ValidationError("config: topology radius must be in (0, sqrt(2)]");
    }
  }
  if (topology.kind == TopologySpec::Kind::EdgeList && topology.path.empty()) {
    throw ValidationError("config: edge_list topology needs a 'path'");
  }
  if (weights != "lazy_metropolis" && weights != "uniform") {
    throw ValidationError("config: weights must be 'lazy_metropolis' or 'uniform'");
  }
  try {
    evidence.validate();
  } catch (const std::exception& e) {
    throw ValidationError(std::string("config: evidence: ") + e.what());
  }
  if (rules.empty()) throw ValidationError("config: need at least one rule");
  std::set<Rule> unique_rules(rules.begin(), rules.end());
  if (unique_rules.size() != rules.size()) throw ValidationError("config: duplicate rule");
  if (horizon < 1) throw ValidationError("config: horizon must be >= 1");
  if (record_stride < 1) throw ValidationError("config: record_stride must be >= 1");
  if (runs < 1) throw ValidationError("config: runs must be >= 1");
  if (!(upsilon > 1.0)) throw ValidationError("config: upsilon must be > 1");
  if (checkpoints.empty()) throw ValidationError("config: checkpoints must not be empty");
  for (long long cp : checkpoints) {
    if (cp < 1 || cp > horizon) {
      throw ValidationError("config: checkpoint " + std::to_string(cp) +
                            " outside [1, horizon]");
    }
  }
  if (threads < 0) throw ValidationError("config: threads must be >= 0");
}

ExperimentConfig config_from_json_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(origin + ": " + e.what());
  }
  ObjectReader top(j, origin);
  ExperimentConfig cfg;
  cfg.name = top.get_or<std::string>("name", "custom", "a string");
  cfg.agents = top.get_or<int>("agents", cfg.agents, "an integer");
  cfg.categories = top.get_or<int>("categories", cfg.categories, "an integer");
  if (top.has("hypotheses")) {
    try {
      cfg.hypotheses = top.at("hypotheses").get<std::vector<std::vector<double>>>();
    } catch (const json::exception&) {
      throw ValidationError(origin + ": 'hypotheses' must be an array of probability vectors");
    }
  }
  if (top.has("per_agent_hypotheses")) {
    try {
      cfg.per_agent_hypotheses =
          top.at("per_agent_hypotheses").get<std::vector<std::vector<std::vector<double>>>>();
    } catch (const json::exception&) {
      throw ValidationError(origin +
                            ": 'per_agent_hypotheses' must be an array of per-agent hypothesis lists");
    }
  }
  cfg.ground_truth = top.get_or<int>("ground_truth", 0, "an integer");
  if (top.has("topology")) {
    ObjectReader t(top.at("topology"), origin + ": topology");
    cfg.topology.kind = topology_kind_from(t.get<std::string>("kind", "a string"));
    if (cfg.topology.kind == TopologySpec::Kind::Geometric) {
      cfg.topology.radius = t.get_or<double>("radius", 0.4, "a number");
    }
    if (cfg.topology.kind == TopologySpec::Kind::EdgeList) {
      cfg.topology.path = t.get<std::string>("path", "a string");
    }
    t.finish();
  }
  cfg.weights = top.get_or<std::string>("weights", "lazy_metropolis", "a string");
  if (top.has("evidence")) {
    ObjectReader e(top.at("evidence"), origin + ": evidence");
    cfg.evidence.regime = regime_from(e.get<std::string>("regime", "a string"));
    cfg.evidence.style = style_from(e.get_or<std::string>("style", "sampled", "a string"));
    if (cfg.evidence.regime == EvidenceRegime::Explicit) {
      cfg.evidence.lo = e.get<double>("lo", "a number");
      cfg.evidence.hi = e.get<double>("hi", "a number");
    }
    e.finish();
  }
  if (top.has("rules")) {
    std::vector<std::string> names;
    try {
      names = top.at("rules").get<std::vector<std::string>>();
    } catch (const json::exception&) {
      throw ValidationError(origin + ": 'rules' must be an array of rule names");
    }
    cfg.rules.clear();
    for (const auto& n : names) {
      try {
        cfg.rules.push_back(rule_from_name(n));
      } catch (const std::exception& e) {
        throw ValidationError(origin + ": " + e.what());
      }
    }
  }
  cfg.horizon = top.get_or<long long>("horizon", cfg.horizon, "an integer");
  cfg.record_stride = top.get_or<long long>("record_stride", cfg.record_stride, "an integer");
  cfg.runs = top.get_or<int>("runs", cfg.runs, "an integer");
  cfg.seed = top.get_or<std::uint64_t>("seed", cfg.seed, "a non-negative integer");
  cfg.upsilon = top.get_or<double>("upsilon", cfg.upsilon, "a number");
  if (top.has("checkpoints")) {
    try {
      cfg.checkpoints = top.at("checkpoints").get<std::vector<long long>>();
    } catch (const json::exception&) {
      throw ValidationError(origin + ": 'checkpoints' must be an array of integers");
    }
  } else {
    cfg.checkpoints = default_checkpoints(cfg.horizon);
  }
  cfg.output = top.get_or<std::string>("output", cfg.output, "a string");
  cfg.threads = top.get_or<int>("threads", cfg.threads, "an integer");
  cfg.dump_signals = top.get_or<bool>("dump_signals", false, "a boolean");
  top.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return config_from_json_text(read_text_file(path), path);
}

std::string config_to_json(const ExperimentConfig& config) {
  json j;
  j["name"] = config.name;
  j["agents"] = config.agents;
  j["categories"] = config.categories;
  if (!config.hypotheses.empty()) {
    j["hypotheses"] = config.hypotheses;
  } else {
    j["per_agent_hypotheses"] = config.per_agent_hypotheses;
  }
  j["ground_truth"] = config.ground_truth;
  json topo;
  topo["kind"] = topology_kind_name(config.topology.kind);
  if (config.topology.kind == TopologySpec::Kind::Geometric) topo["radius"] = config.topology.radius;
  if (config.topology.kind == TopologySpec::Kind::EdgeList) topo["path"] = config.topology.path;
  j["topology"] = topo;
  j["weights"] = config.weights;
  json ev;
  ev["regime"] = regime_name(config.evidence.regime);
  ev["style"] = style_name(config.evidence.style);
  if (config.evidence.regime == EvidenceRegime::Explicit) {
    ev["lo"] = config.evidence.lo;
    ev["hi"] = config.evidence.hi;
  }
  j["evidence"] = ev;
  json rules = json::array();
  for (Rule r : config.rules) rules.push_back(rule_name(r));
  j["rules"] = rules;
  j["horizon"] = config.horizon;
  j["record_stride"] = config.record_stride;
  j["runs"] = config.runs;
  j["seed"] = config.seed;
  j["upsilon"] = config.upsilon;
  j["checkpoints"] = config.checkpoints;
  j["output"] = config.output;
  j["threads"] = config.threads;
  j["dump_signals"] = config.dump_signals;
  return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& config) {
  // Hash only what determines the results; execution knobs (output, threads,
  // dump_signals, name) are excluded.
  json j;
  j["agents"] = config.agents;
  j["categories"] = config.categories;
  if (!config.hypotheses.empty()) {
    j["hypotheses"] = config.hypotheses;
  } else {
    j["per_agent_hypotheses"] = config.per_agent_hypotheses;
  }
  j["ground_truth"] = config.ground_truth;
  j["topology_kind"] = topology_kind_name(config.topology.kind);
  j["topology_radius"] = config.topology.radius;
  j["topology_path"] = config.topology.path;
  j["weights"] = config.weights;
  j["regime"] = regime_name(config.evidence.regime);
  j["style"] = style_name(config.evidence.style);
  j["lo"] = config.evidence.lo;
  j["hi"] = config.evidence.hi;
  json rules = json::array();
  for (Rule r : config.rules) rules.push_back(rule_name(r));
  j["rules"] = rules;
  j["horizon"] = config.horizon;
  j["record_stride"] = config.record_stride;
  j["runs"] = config.runs;
  j["seed"] = config.seed;
  j["upsilon"] = config.upsilon;
  j["checkpoints"] = config.checkpoints;
  return fnv1a_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Presets

std::vector<std::string> preset_names() {
  return {"paper_low", "paper_high", "paper_certain", "figure1", "figure2"};
}

bool is_figure_preset(const std::string& name) {
  return name == "figure1" || name == "figure2";
}

namespace {

const std::vector<std::vector<double>> kStudyHypotheses = {
    {0.6, 0.4}, {0.55, 0.45}, {0.5, 0.5}, {0.4, 0.6}};

}  // namespace

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.agents = 20;
  cfg.categories = 2;
  cfg.hypotheses = kStudyHypotheses;
  cfg.ground_truth = 0;
  cfg.topology.kind = TopologySpec::Kind::Geometric;
  cfg.topology.radius = 0.4;
  cfg.weights = "lazy_metropolis";
  cfg.evidence.style = EvidenceStyle::Sampled;
  cfg.rules = {Rule::LogLinear, Rule::DeGroot};
  cfg.horizon = 100000;
  cfg.record_stride = 1000;
  cfg.runs = 10;
  cfg.upsilon = 2.0;
  cfg.checkpoints = default_checkpoints(cfg.horizon);
  cfg.output = "out_" + name;
  if (name == "paper_low") {
    cfg.evidence.regime = EvidenceRegime::Low;
    cfg.seed = 20;
  } else if (name == "paper_high") {
    cfg.evidence.regime = EvidenceRegime::High;
    cfg.seed = 21;
  } else if (name == "paper_certain") {
    cfg.evidence.regime = EvidenceRegime::Infinite;
    cfg.seed = 22;
  } else if (is_figure_preset(name)) {
    throw ValidationError("preset '" + name +
                          "' is a closed-form figure generator; it has no experiment config");
  } else {
    std::string all;
    for (const auto& n : preset_names()) all += (all.empty() ? "" : ", ") + n;
    throw ValidationError("unknown preset '" + name + "' (available: " + all + ")");
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Builders

Topology build_topology(const ExperimentConfig& config) {
  switch (config.topology.kind) {
    case TopologySpec::Kind::Complete:
      return Topology::complete(config.agents);
    case TopologySpec::Kind::Ring:
      return Topology::ring(config.agents);
    case TopologySpec::Kind::EdgeList: {
      Topology t = load_edge_list_file(config.topology.path);
      if (t.m != config.agents) {
        throw ValidationError("config: edge list has " + std::to_string(t.m) +
                              " agents but config says " + std::to_string(config.agents));
      }
      return t;
    }
    case TopologySpec::Kind::Geometric:
      break;
  }
  auto rng = make_stream(config.seed, 0, 0, StreamPurpose::Topology);
  return random_geometric_graph(config.agents, config.topology.radius, rng);
}

MixingMatrix build_matrix(const ExperimentConfig& config, const Topology& topology) {
  if (config.weights == "uniform") {
    if (!topology.is_complete()) {
      throw ValidationError("config: uniform weights require a complete topology");
    }
    return uniform_complete(topology);
  }
  return lazy_metropolis(topology);
}

WorldModel build_world(const ExperimentConfig& config) {
  if (!config.hypotheses.empty()) {
    std::vector<CategoricalParams> set;
    set.reserve(config.hypotheses.size());
    for (const auto& h : config.hypotheses) set.emplace_back(h);
    return WorldModel::shared(config.agents, set, config.ground_truth);
  }
  WorldModel w;
  w.hypotheses.reserve(config.per_agent_hypotheses.size());
  for (const auto& row : config.per_agent_hypotheses) {
    std::vector<CategoricalParams> set;
    set.reserve(row.size());
    for (const auto& h : row) set.emplace_back(h);
    w.hypotheses.push_back(std::move(set));
  }
  for (int i = 0; i < config.agents; ++i) {
    w.ground_truth.push_back(
        w.hypotheses[static_cast<size_t>(i)][static_cast<size_t>(config.ground_truth)]);
  }
  w.validate();
  return w;
}

EvidenceTable build_evidence(const ExperimentConfig& config, const WorldModel& world, int run) {
  const int m = world.agents();
  const int S = world.num_hypotheses();
  EvidenceTable table(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    table[static_cast<size_t>(i)].reserve(static_cast<size_t>(S));
    for (int s = 0; s < S; ++s) {
      auto rng = make_stream(config.seed, static_cast<std::uint64_t>(run),
                             static_cast<std::uint64_t>(i), StreamPurpose::Evidence,
                             static_cast<std::uint64_t>(s));
      table[static_cast<size_t>(i)].push_back(
          generate_evidence(world.hypotheses[static_cast<size_t>(i)][static_cast<size_t>(s)],
                            config.evidence, rng));
    }
  }
  return table;
}

std::vector<double> asymptote_table(const EvidenceTable& evidence, const WorldModel& world) {
  const int m = world.agents();
  const int S = world.num_hypotheses();
  std::vector<double> out(static_cast<size_t>(m) * static_cast<size_t>(S));
  for (int i = 0; i < m; ++i) {
    for (int s = 0; s < S; ++s) {
      const EvidenceCounts& ev = evidence[static_cast<size_t>(i)][static_cast<size_t>(s)];
      if (ev.mode == EvidenceMode::Finite) {
        out[static_cast<size_t>(i) * S + s] =
            log_asymptotic_ulr(ev, world.ground_truth[static_cast<size_t>(i)]);
      } else {
        // Certain models: the ratio diverges when the model matches the ground
        // truth and vanishes otherwise.
        bool matched = true;
        const auto& pi = ev.certain.p;
        const auto& star = world.ground_truth[static_cast<size_t>(i)].p;
        for (size_t k = 0; k < pi.size(); ++k) {
          if (std::abs(pi[k] - star[k]) > 1e-12) {
            matched = false;
            break;
          }
        }
        out[static_cast<size_t>(i) * S + s] = matched ? kPosInf : kNegInf;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment execution and summary

namespace {

struct RuleResults {
  Rule rule = Rule::LogLinear;
  // Indexed by run; nullopt when the run aborted.
  std::vector<std::optional<RunData>> runs;
  std::vector<RunFailure> failures;
};

std::string beliefs_file_name(const ExperimentConfig& config, Rule rule) {
  if (config.rules.size() == 1) return "beliefs.csv";
  return std::string("beliefs_") + rule_name(rule) + ".csv";
}

json error_stats_json(const ErrorStats& stats) {
  json out = json::array();
  for (size_t s = 0; s < stats.per_hypothesis.size(); ++s) {
    json row;
    row["hypothesis"] = s;
    json entries = json::array();
    for (const auto& e : stats.per_hypothesis[s]) {
      json item;
      item["checkpoint"] = e.checkpoint;
      item["e_lambda"] = e.e_lambda ? json_number(*e.e_lambda) : json(nullptr);
      item["e_lambda_normalized"] = e.e_lambda_normalized;
      item["e_con"] = e.e_con ? json_number(*e.e_con) : json(nullptr);
      item["e_con_normalized"] = e.e_con_normalized;
      item["e_cen"] = e.e_cen ? json_number(*e.e_cen) : json(nullptr);
      item["e_cen_normalized"] = e.e_cen_normalized;
      entries.push_back(item);
    }
    row["entries"] = entries;
    out.push_back(row);
  }
  return out;
}

// Mean over runs and agents of the recorded log beliefs, per hypothesis and
// recorded time. Used for rate fits and the figure export.
std::map<long long, std::vector<double>> mean_log_belief_by_time(
    const std::vector<std::optional<RunData>>& runs, int m, int S) {
  std::map<long long, std::vector<double>> by_time;  // t -> per-hypothesis mean
  std::map<long long, int> counts;
  for (const auto& maybe : runs) {
    if (!maybe) continue;
    for (const auto& snap : maybe->snapshots) {
      auto& acc = by_time[snap.t];
      acc.resize(static_cast<size_t>(S), 0.0);
      for (int s = 0; s < S; ++s) {
        double sum = 0.0;
        for (int i = 0; i < m; ++i) sum += snap.log_mu[static_cast<size_t>(i) * S + s];
        acc[static_cast<size_t>(s)] += sum / static_cast<double>(m);
      }
      counts[snap.t] += 1;
    }
  }
  for (auto& [t, acc] : by_time) {
    for (double& v : acc) v /= static_cast<double>(counts[t]);
  }
  return by_time;
}

json rate_fits_json(const ExperimentConfig& config, const RuleResults& results, int m, int S) {
  const auto by_time = mean_log_belief_by_time(results.runs, m, S);
  const long long burn_in = std::max<long long>(1, config.horizon / 10);
  const FitModel model =
      config.evidence.regime == EvidenceRegime::Infinite ? FitModel::Linear : FitModel::LinearPlusLog;
  json out = json::array();
  for (int s = 0; s < S; ++s) {
    json row;
    row["hypothesis"] = s;
    row["model"] = model == FitModel::Linear ? "linear" : "linear_plus_log";
    row["window"] = json::array({burn_in, config.horizon});
    std::vector<std::pair<double, double>> points;
    for (const auto& [t, means] : by_time) {
      if (t < burn_in) continue;
      const double y = means[static_cast<size_t>(s)];
      if (!std::isfinite(y)) continue;
      points.emplace_back(static_cast<double>(t), y);
    }
    row["points"] = points.size();
    try {
      const RateFitResult fit = fit_rate(points, model);
      row["slope"] = json_number(fit.slope);
      row["intercept"] = json_number(fit.intercept);
      row["residual"] = json_number(fit.residual);
      row["alpha"] = fit.poly_exponent ? json_number(*fit.poly_exponent) : json(nullptr);
      row["scale"] = fit.scale ? json_number(*fit.scale) : json(nullptr);
    } catch (const std::exception&) {
      row["slope"] = nullptr;
      row["intercept"] = nullptr;
      row["residual"] = nullptr;
      row["alpha"] = nullptr;
      row["scale"] = nullptr;
    }
    out.push_back(row);
  }
  return out;
}

json median_beliefs_json(const ExperimentConfig& config, const RuleResults& results, int m, int S) {
  json out = json::array();
  for (int s = 0; s < S; ++s) {
    json row;
    row["hypothesis"] = s;
    json values = json::array();
    for (long long cp : config.checkpoints) {
      std::vector<double> pool;
      for (const auto& maybe : results.runs) {
        if (!maybe) continue;
        const BeliefSnapshot& snap = maybe->at_time(cp);
        for (int i = 0; i < m; ++i) {
          pool.push_back(snap.log_mu[static_cast<size_t>(i) * S + s]);
        }
      }
      json item;
      item["checkpoint"] = cp;
      item["median"] = json_number(median_of(std::move(pool)));
      values.push_back(item);
    }
    row["values"] = values;
    out.push_back(row);
  }
  return out;
}

json checks_json(const ExperimentConfig& config, const std::vector<RuleResults>& all_results,
                 int m, int S) {
  json checks = json::array();
  const bool infinite = config.evidence.regime == EvidenceRegime::Infinite;

  for (const auto& results : all_results) {
    std::vector<RunData> valid;
    for (const auto& maybe : results.runs) {
      if (maybe) valid.push_back(*maybe);
    }
    if (valid.empty()) continue;
    const std::string rname = rule_name(results.rule);

    if (!infinite && config.checkpoints.size() >= 2) {
      const ErrorStats stats = error_stats(valid, config.checkpoints);
      for (int s = 0; s < S; ++s) {
        const auto& entries = stats.per_hypothesis[static_cast<size_t>(s)];
        if (entries.front().e_con && entries.back().e_con) {
          json c;
          c["name"] = "consensus_error_decreases";
          c["rule"] = rname;
          c["hypothesis"] = s;
          c["first"] = json_number(*entries.front().e_con);
          c["last"] = json_number(*entries.back().e_con);
          c["pass"] = *entries.back().e_con <= *entries.front().e_con;
          checks.push_back(c);
        }
      }
    }

    if (infinite) {
      const auto by_time = mean_log_belief_by_time(results.runs, m, S);
      const long long burn_in = std::max<long long>(1, config.horizon / 10);
      for (int s = 0; s < S; ++s) {
        std::vector<std::pair<double, double>> points;
        for (const auto& [t, means] : by_time) {
          if (t < burn_in) continue;
          if (std::isfinite(means[static_cast<size_t>(s)])) {
            points.emplace_back(static_cast<double>(t), means[static_cast<size_t>(s)]);
          }
        }
        if (points.size() < 10) continue;
        const double slope = fit_rate(points, FitModel::Linear).slope;
        json c;
        c["rule"] = rname;
        c["hypothesis"] = s;
        c["slope"] = json_number(slope);
        if (s == config.ground_truth) {
          c["name"] = "certain_matched_belief_grows";
          c["pass"] = points.back().second > points.front().second;
        } else {
          c["name"] = "certain_mismatched_belief_decays";
          c["pass"] = slope < 0.0;
        }
        checks.push_back(c);
      }
    }
  }

  // Pathwise dominance of the arithmetic rule over the geometric rule under
  // shared streams, checked on every recorded round.
  const RuleResults* ll = nullptr;
  const RuleResults* dg = nullptr;
  for (const auto& r : all_results) {
    if (r.rule == Rule::LogLinear) ll = &r;
    if (r.rule == Rule::DeGroot) dg = &r;
  }
  if (ll && dg) {
    double worst = kPosInf;
    long long violations = 0, compared = 0;
    for (size_t run = 0; run < ll->runs.size() && run < dg->runs.size(); ++run) {
      if (!ll->runs[run] || !dg->runs[run]) continue;
      const auto& a = ll->runs[run]->snapshots;
      const auto& b = dg->runs[run]->snapshots;
      for (size_t k = 0; k < a.size() && k < b.size(); ++k) {
        for (size_t idx = 0; idx < a[k].log_mu.size(); ++idx) {
          const double lo = a[k].log_mu[idx];
          const double hi = b[k].log_mu[idx];
          if (lo == kNegInf) continue;  // nothing to dominate
          const double diff = hi - lo;
          worst = std::min(worst, diff);
          ++compared;
          if (diff < -1e-9) ++violations;
        }
      }
    }
    if (compared > 0) {
      json c;
      c["name"] = "degroot_dominates_loglinear";
      c["rule"] = "both";
      c["worst_margin"] = json_number(worst);
      c["violations"] = violations;
      c["pass"] = violations == 0;
      checks.push_back(c);
    }
  }
  return checks;
}

json summary_json(const ExperimentConfig& config, const std::vector<RuleResults>& all_results) {
  const int m = config.agents;
  const int S = config.num_hypotheses();
  json summary;
  summary["experiment"] = config.name;
  summary["version"] = kVersion;
  summary["config_hash"] = config_hash(config);
  summary["seed"] = config.seed;
  summary["regime"] = regime_name(config.evidence.regime);
  summary["ground_truth"] = config.ground_truth;
  summary["checkpoints"] = config.checkpoints;
  json rules = json::array();
  for (Rule r : config.rules) rules.push_back(rule_name(r));
  summary["rules"] = rules;

  json results = json::array();
  for (const auto& rr : all_results) {
    json entry;
    entry["rule"] = rule_name(rr.rule);
    json failures = json::array();
    for (const auto& f : rr.failures) {
      json fj;
      fj["run"] = f.run;
      fj["t"] = f.t;
      fj["agent"] = f.agent;
      fj["hypothesis"] = f.hypothesis;
      fj["message"] = f.message;
      failures.push_back(fj);
    }
    entry["failures"] = failures;

    std::vector<RunData> valid;
    for (const auto& maybe : rr.runs) {
      if (maybe) valid.push_back(*maybe);
    }
    entry["completed_runs"] = valid.size();
    if (!valid.empty()) {
      const ErrorStats stats = error_stats(valid, config.checkpoints);
      entry["normalization"] = stats.normalization_rule;
      entry["error_stats"] = error_stats_json(stats);
      entry["rate_fits"] = rate_fits_json(config, rr, m, S);
      entry["median_log_belief"] = median_beliefs_json(config, rr, m, S);
      json finals = json::array();
      const auto by_time = mean_log_belief_by_time(rr.runs, m, S);
      const auto it = by_time.find(config.horizon);
      for (int s = 0; s < S; ++s) {
        finals.push_back(it == by_time.end() ? json(nullptr)
                                             : json_number(it->second[static_cast<size_t>(s)]));
      }
      entry["final_mean_log_belief"] = finals;
    } else {
      entry["normalization"] = nullptr;
      entry["error_stats"] = nullptr;
      entry["rate_fits"] = nullptr;
      entry["median_log_belief"] = nullptr;
      entry["final_mean_log_belief"] = nullptr;
    }
    results.push_back(entry);
  }
  summary["results"] = results;
  summary["checks"] = checks_json(config, all_results, m, S);
  return summary;
}

void write_fig5_csv(const fs::path& dir, const ExperimentConfig& config,
                    const std::vector<RuleResults>& all_results) {
  std::ostringstream out;
  out << "t,rule,regime,hypothesis,mean_log_belief\n";
  const std::string regime = regime_name(config.evidence.regime);
  for (const auto& rr : all_results) {
    const auto by_time = mean_log_belief_by_time(rr.runs, config.agents, config.num_hypotheses());
    for (const auto& [t, means] : by_time) {
      for (size_t s = 0; s < means.size(); ++s) {
        out << t << "," << rule_name(rr.rule) << "," << regime << "," << s << ","
            << format_double(means[s]) << "\n";
      }
    }
  }
  write_text_file(dir / "fig5_beliefs.csv", out.str());
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const fs::path dir(config.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ExecutionError("cannot create output directory " + dir.string());

  const Topology topology = build_topology(config);
  const MixingMatrix matrix = build_matrix(config, topology);
  const WorldModel world = build_world(config);
  const int m = config.agents;
  const int S = config.num_hypotheses();

  // Evidence is drawn per run and shared by every rule, so that rules see
  // identical sample paths.
  std::vector<EvidenceTable> evidence;
  evidence.reserve(static_cast<size_t>(config.runs));
  for (int run_idx = 0; run_idx < config.runs; ++run_idx) {
    evidence.push_back(build_evidence(config, world, run_idx));
  }

  struct Task {
    size_t rule_idx;
    int run_idx;
  };
  std::vector<Task> tasks;
  for (size_t r = 0; r < config.rules.size(); ++r) {
    for (int run_idx = 0; run_idx < config.runs; ++run_idx) {
      tasks.push_back({r, run_idx});
    }
  }

  std::vector<RuleResults> all_results(config.rules.size());
  for (size_t r = 0; r < config.rules.size(); ++r) {
    all_results[r].rule = config.rules[r];
    all_results[r].runs.assign(static_cast<size_t>(config.runs), std::nullopt);
  }
  std::vector<std::optional<RunFailure>> task_failures(tasks.size());

  const unsigned hardware = std::max(1u, std::thread::hardware_concurrency());
  const size_t workers =
      std::min<size_t>(tasks.size(), config.threads > 0 ? static_cast<size_t>(config.threads)
                                                        : static_cast<size_t>(hardware));
  std::atomic<size_t> cursor{0};
  const auto worker = [&]() {
    while (true) {
      const size_t k = cursor.fetch_add(1);
      if (k >= tasks.size()) break;
      const Task task = tasks[k];
      const Rule rule = config.rules[task.rule_idx];
      EngineConfig engine;
      engine.rule = rule;
      engine.horizon = config.horizon;
      engine.record_stride = config.record_stride;
      engine.extra_snapshots = config.checkpoints;
      SignalStreams streams =
          SignalStreams::from_master(config.seed, static_cast<std::uint64_t>(task.run_idx), m);
      try {
        BeliefTrajectory traj =
            run(world, matrix, evidence[static_cast<size_t>(task.run_idx)], engine, streams);
        RunData data;
        data.m = m;
        data.S = S;
        data.snapshots = std::move(traj.snapshots);
        data.log_asymptotic_ulr = asymptote_table(evidence[static_cast<size_t>(task.run_idx)], world);
        all_results[task.rule_idx].runs[static_cast<size_t>(task.run_idx)] = std::move(data);
      } catch (const EngineNumericError& e) {
        task_failures[k] = RunFailure{task.run_idx, rule_name(rule), e.t, e.agent, e.hypothesis,
                                      e.what()};
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (size_t k = 0; k < tasks.size(); ++k) {
    if (task_failures[k]) {
      all_results[tasks[k].rule_idx].failures.push_back(*task_failures[k]);
    }
  }
  for (auto& rr : all_results) {
    std::sort(rr.failures.begin(), rr.failures.end(),
              [](const RunFailure& a, const RunFailure& b) { return a.run < b.run; });
  }

  // ---- artifacts
  save_edge_list_file(topology, (dir / "topology.edgelist").string());
  save_matrix_csv(matrix, (dir / "mixing.csv").string());

  {
    std::ostringstream out;
    out << "run,agent,hypothesis,k,r_k\n";
    for (int run_idx = 0; run_idx < config.runs; ++run_idx) {
      for (int i = 0; i < m; ++i) {
        for (int s = 0; s < S; ++s) {
          const EvidenceCounts& ev = evidence[static_cast<size_t>(run_idx)][static_cast<size_t>(i)]
                                             [static_cast<size_t>(s)];
          for (int k = 0; k < config.categories; ++k) {
            // In the infinite regime the r_k column carries the exact category
            // probability of the certain model.
            const double v = ev.mode == EvidenceMode::Finite
                                 ? ev.counts[static_cast<size_t>(k)]
                                 : ev.certain.p[static_cast<size_t>(k)];
            out << run_idx << "," << i << "," << s << "," << k << "," << format_double(v) << "\n";
          }
        }
      }
    }
    write_text_file(dir / "evidence.csv", out.str());
  }

  for (size_t r = 0; r < config.rules.size(); ++r) {
    std::ostringstream out;
    out << "run,t,agent,hypothesis,log_belief\n";
    for (int run_idx = 0; run_idx < config.runs; ++run_idx) {
      const auto& maybe = all_results[r].runs[static_cast<size_t>(run_idx)];
      if (!maybe) continue;
      for (const auto& snap : maybe->snapshots) {
        for (int i = 0; i < m; ++i) {
          for (int s = 0; s < S; ++s) {
            out << run_idx << "," << snap.t << "," << i << "," << s << ","
                << format_double(snap.log_mu[static_cast<size_t>(i) * S + s]) << "\n";
          }
        }
      }
    }
    write_text_file(dir / beliefs_file_name(config, config.rules[r]), out.str());
  }

  if (config.evidence.regime != EvidenceRegime::Infinite && !all_results.empty()) {
    // Likelihood-ratio trajectories are rule-independent (signals are shared),
    // so export them once from the first rule with complete runs.
    std::ostringstream out;
    out << "run,t,agent,hypothesis,log_ulr\n";
    for (int run_idx = 0; run_idx < config.runs; ++run_idx) {
      const std::optional<RunData>* source = nullptr;
      for (const auto& rr : all_results) {
        if (rr.runs[static_cast<size_t>(run_idx)]) {
          source = &rr.runs[static_cast<size_t>(run_idx)];
          break;
        }
      }
      if (!source) continue;
      for (const auto& snap : (*source)->snapshots) {
        for (int i = 0; i < m; ++i) {
          for (int s = 0; s < S; ++s) {
            const double v = snap.log_ulr[static_cast<size_t>(i) * S + s];
            if (std::isnan(v)) continue;
            out << run_idx << "," << snap.t << "," << i << "," << s << "," << format_double(v)
                << "\n";
          }
        }
      }
    }
    write_text_file(dir / "ulr.csv", out.str());
  }

  if (config.dump_signals) {
    std::ostringstream out;
    out << "run,agent,t,omega\n";
    for (int run_idx = 0; run_idx < config.runs; ++run_idx) {
      SignalStreams streams =
          SignalStreams::from_master(config.seed, static_cast<std::uint64_t>(run_idx), m);
      std::vector<std::vector<int>> draws(static_cast<size_t>(m));
      for (long long t = 1; t <= config.horizon; ++t) {
        for (int i = 0; i < m; ++i) {
          draws[static_cast<size_t>(i)].push_back(
              sample_signal(world.ground_truth[static_cast<size_t>(i)],
                            streams.gen[static_cast<size_t>(i)]));
        }
      }
      for (int i = 0; i < m; ++i) {
        for (long long t = 1; t <= config.horizon; ++t) {
          out << run_idx << "," << i << "," << t << ","
              << draws[static_cast<size_t>(i)][static_cast<size_t>(t - 1)] << "\n";
        }
      }
    }
    write_text_file(dir / "signals.csv", out.str());
  }

  {
    json manifest;
    manifest["kind"] = "experiment";
    manifest["version"] = kVersion;
    manifest["seed"] = config.seed;
    manifest["config_hash"] = config_hash(config);
    manifest["config"] = json::parse(config_to_json(config));
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  }

  write_text_file(dir / "summary.json", summary_json(config, all_results).dump(2) + "\n");
  write_fig5_csv(dir, config, all_results);

  ExperimentResult result;
  result.output_dir = dir.string();
  for (const auto& rr : all_results) {
    result.failures.insert(result.failures.end(), rr.failures.begin(), rr.failures.end());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Figure presets (closed-form curve grids)

namespace {

struct Figure1Params {
  std::vector<double> pi_star{0.6, 0.4};
  std::vector<double> pi1{0.6, 0.4};
  std::vector<double> pi2{0.575, 0.425};
  std::vector<long long> r1_values{45, 65, 85};
  long long r2_lo = 50, r2_hi = 2000;
};

json figure1_run(const fs::path& dir) {
  const Figure1Params p;
  const CategoricalParams star{std::vector<double>(p.pi_star)};
  std::ostringstream out;
  out << "R1,R2,limit_theta1,limit_theta2\n";
  json intervals = json::array();
  for (long long r1 : p.r1_values) {
    std::vector<double> e1(p.pi1.size());
    for (size_t k = 0; k < p.pi1.size(); ++k) e1[k] = static_cast<double>(r1) * p.pi1[k];
    long long first = -1, last = -1, count = 0;
    for (long long r2 = p.r2_lo; r2 <= p.r2_hi; ++r2) {
      std::vector<double> e2(p.pi2.size());
      for (size_t k = 0; k < p.pi2.size(); ++k) e2[k] = static_cast<double>(r2) * p.pi2[k];
      const auto limits = normalized_belief_limits(
          {EvidenceCounts::finite(e1), EvidenceCounts::finite(e2)}, star);
      out << r1 << "," << r2 << "," << format_double(limits[0]) << ","
          << format_double(limits[1]) << "\n";
      if (limits[1] > limits[0]) {
        if (first < 0) first = r2;
        last = r2;
        ++count;
      }
    }
    json row;
    row["R1"] = r1;
    row["preferred_first"] = first;
    row["preferred_last"] = last;
    row["preferred_count"] = count;
    intervals.push_back(row);
  }
  write_text_file(dir / "fig1_limits.csv", out.str());

  json checks = json::array();
  {
    json c;
    c["name"] = "preference_window_nonempty_at_smallest_R1";
    c["pass"] = intervals[0]["preferred_count"].get<long long>() > 0;
    checks.push_back(c);
  }
  {
    bool shrinking = true;
    for (size_t i = 1; i < intervals.size(); ++i) {
      if (intervals[i]["preferred_count"].get<long long>() >
          intervals[i - 1]["preferred_count"].get<long long>()) {
        shrinking = false;
      }
    }
    json c;
    c["name"] = "preference_window_shrinks_with_R1";
    c["pass"] = shrinking;
    checks.push_back(c);
  }
  json summary;
  summary["experiment"] = "figure1";
  summary["version"] = kVersion;
  summary["intervals"] = intervals;
  summary["checks"] = checks;
  return summary;
}

json figure2_run(const fs::path& dir) {
  const CategoricalParams star{std::vector<double>{0.6, 0.4}};
  const int points_per_decade = 24;
  std::ostringstream out;
  out << "R,pi,log_lambda_tilde\n";
  bool matched_increasing = true;
  bool mismatched_negative = true;
  for (int tenth = 1; tenth <= 9; ++tenth) {
    const double pi = static_cast<double>(tenth) / 10.0;
    double prev = -kPosInf;
    double last_value = 0.0;
    const bool matched = std::abs(pi - star.p[0]) < 1e-12;
    for (int j = 0; j <= 5 * points_per_decade; ++j) {
      const double R = std::pow(10.0, static_cast<double>(j) / points_per_decade);
      const EvidenceCounts ev = EvidenceCounts::finite({R * pi, R * (1.0 - pi)});
      const double value = log_asymptotic_ulr(ev, star);
      out << format_double(R) << "," << format_double(pi) << "," << format_double(value) << "\n";
      if (matched && j > 0 && value <= prev) matched_increasing = false;
      prev = value;
      last_value = value;
    }
    if (!matched && last_value >= 0.0) mismatched_negative = false;
  }
  write_text_file(dir / "fig2_curves.csv", out.str());

  json checks = json::array();
  {
    json c;
    c["name"] = "matched_curve_increases_with_R";
    c["pass"] = matched_increasing;
    checks.push_back(c);
  }
  {
    json c;
    c["name"] = "mismatched_curves_negative_at_largest_R";
    c["pass"] = mismatched_negative;
    checks.push_back(c);
  }
  json summary;
  summary["experiment"] = "figure2";
  summary["version"] = kVersion;
  summary["checks"] = checks;
  return summary;
}

}  // namespace

void write_figure_preset(const std::string& name, const std::string& out_dir) {
  if (!is_figure_preset(name)) {
    throw ValidationError("'" + name + "' is not a figure preset");
  }
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ExecutionError("cannot create output directory " + dir.string());

  json summary = name == "figure1" ? figure1_run(dir) : figure2_run(dir);
  json manifest;
  manifest["kind"] = "figure";
  manifest["figure"] = name;
  manifest["version"] = kVersion;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Re-analysis of an output directory

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const std::string& origin) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ValidationError(origin + ": bad numeric field '" + s + "'");
  }
}

long long parse_int(const std::string& s, const std::string& origin) {
  try {
    return std::stoll(s);
  } catch (const std::exception&) {
    throw ValidationError(origin + ": bad integer field '" + s + "'");
  }
}

// run -> t -> m x S value grid
using GridMap = std::map<int, std::map<long long, std::vector<double>>>;

GridMap read_grid_csv(const fs::path& path, int m, int S, double fill) {
  GridMap grid;
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty file");
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string origin = path.string() + ":" + std::to_string(lineno);
    if (fields.size() != 5) throw ValidationError(origin + ": expected 5 fields");
    const int run_idx = static_cast<int>(parse_int(fields[0], origin));
    const long long t = parse_int(fields[1], origin);
    const int agent = static_cast<int>(parse_int(fields[2], origin));
    const int hyp = static_cast<int>(parse_int(fields[3], origin));
    if (agent < 0 || agent >= m || hyp < 0 || hyp >= S) {
      throw ValidationError(origin + ": agent/hypothesis out of range");
    }
    auto& cell = grid[run_idx][t];
    if (cell.empty()) cell.assign(static_cast<size_t>(m) * static_cast<size_t>(S), fill);
    cell[static_cast<size_t>(agent) * S + hyp] = parse_double(fields[4], origin);
  }
  return grid;
}

}  // namespace

void analyze_directory(const std::string& dir_in) {
  const fs::path dir(dir_in);
  const json manifest = [&] {
    try {
      return json::parse(read_text_file(dir / "manifest.json"));
    } catch (const json::parse_error& e) {
      throw ValidationError((dir / "manifest.json").string() + ": " + e.what());
    }
  }();
  if (!manifest.contains("kind")) {
    throw ValidationError(dir_in + ": manifest has no 'kind'");
  }
  if (manifest["kind"] == "figure") {
    throw ValidationError(dir_in +
                          ": figure outputs have no run data to analyze; use `figures` instead");
  }
  if (!manifest.contains("config")) {
    throw ValidationError(dir_in + ": manifest has no embedded config");
  }
  const ExperimentConfig config =
      config_from_json_text(manifest["config"].dump(), (dir / "manifest.json").string());
  const WorldModel world = build_world(config);
  const int m = config.agents;
  const int S = config.num_hypotheses();
  const int K = config.categories;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  // Rebuild the per-run evidence.
  std::vector<EvidenceTable> evidence(static_cast<size_t>(config.runs));
  if (config.evidence.regime == EvidenceRegime::Infinite) {
    for (int run_idx = 0; run_idx < config.runs; ++run_idx) {
      EvidenceTable table(static_cast<size_t>(m));
      for (int i = 0; i < m; ++i) {
        for (int s = 0; s < S; ++s) {
          table[static_cast<size_t>(i)].push_back(EvidenceCounts::certain_model(
              world.hypotheses[static_cast<size_t>(i)][static_cast<size_t>(s)]));
        }
      }
      evidence[static_cast<size_t>(run_idx)] = std::move(table);
    }
  } else {
    std::vector<std::vector<double>> raw(
        static_cast<size_t>(config.runs) * m * S,
        std::vector<double>(static_cast<size_t>(K), 0.0));
    const fs::path path = dir / "evidence.csv";
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto fields = split_csv_line(line);
      const std::string origin = path.string() + ":" + std::to_string(lineno);
      if (fields.size() != 5) throw ValidationError(origin + ": expected 5 fields");
      const long long run_idx = parse_int(fields[0], origin);
      const long long agent = parse_int(fields[1], origin);
      const long long hyp = parse_int(fields[2], origin);
      const long long k = parse_int(fields[3], origin);
      if (run_idx < 0 || run_idx >= config.runs || agent < 0 || agent >= m || hyp < 0 ||
          hyp >= S || k < 0 || k >= K) {
        throw ValidationError(origin + ": index out of range");
      }
      raw[static_cast<size_t>((run_idx * m + agent) * S + hyp)][static_cast<size_t>(k)] =
          parse_double(fields[4], origin);
    }
    for (int run_idx = 0; run_idx < config.runs; ++run_idx) {
      EvidenceTable table(static_cast<size_t>(m));
      for (int i = 0; i < m; ++i) {
        for (int s = 0; s < S; ++s) {
          table[static_cast<size_t>(i)].push_back(EvidenceCounts::finite(
              raw[static_cast<size_t>((static_cast<long long>(run_idx) * m + i) * S + s)]));
        }
      }
      evidence[static_cast<size_t>(run_idx)] = std::move(table);
    }
  }

  GridMap ulr_grid;
  if (fs::exists(dir / "ulr.csv")) {
    ulr_grid = read_grid_csv(dir / "ulr.csv", m, S, nan);
  }

  std::vector<RuleResults> all_results;
  for (Rule rule : config.rules) {
    RuleResults rr;
    rr.rule = rule;
    rr.runs.assign(static_cast<size_t>(config.runs), std::nullopt);
    const GridMap beliefs = read_grid_csv(dir / beliefs_file_name(config, rule), m, S, nan);
    for (const auto& [run_idx, by_time] : beliefs) {
      if (run_idx < 0 || run_idx >= config.runs) {
        throw ValidationError(dir_in + ": belief csv mentions run " + std::to_string(run_idx) +
                              " outside the configured range");
      }
      RunData data;
      data.m = m;
      data.S = S;
      for (const auto& [t, grid] : by_time) {
        BeliefSnapshot snap;
        snap.t = t;
        snap.log_mu = grid;
        snap.log_ulr.assign(static_cast<size_t>(m) * static_cast<size_t>(S), nan);
        const auto rit = ulr_grid.find(run_idx);
        if (rit != ulr_grid.end()) {
          const auto tit = rit->second.find(t);
          if (tit != rit->second.end()) snap.log_ulr = tit->second;
        }
        data.snapshots.push_back(std::move(snap));
      }
      data.log_asymptotic_ulr = asymptote_table(evidence[static_cast<size_t>(run_idx)], world);
      rr.runs[static_cast<size_t>(run_idx)] = std::move(data);
    }
    all_results.push_back(std::move(rr));
  }

  write_text_file(dir / "summary.json", summary_json(config, all_results).dump(2) + "\n");
  write_fig5_csv(dir, config, all_results);
}

void write_figures(const std::string& dir_in) {
  const fs::path dir(dir_in);
  const json manifest = [&] {
    try {
      return json::parse(read_text_file(dir / "manifest.json"));
    } catch (const json::parse_error& e) {
      throw ValidationError((dir / "manifest.json").string() + ": " + e.what());
    }
  }();
  if (manifest.contains("kind") && manifest["kind"] == "figure") {
    write_figure_preset(manifest["figure"].get<std::string>(), dir_in);
    return;
  }
  // Experiment output: regenerate the belief-trajectory figure data.
  analyze_directory(dir_in);
}

// ---------------------------------------------------------------------------
// CLI

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"ulrsim: multi-agent social learning with uncertain likelihood models"};
  app.footer("Presets: paper_low, paper_high, paper_certain, figure1, figure2");
  app.require_subcommand(1);

  std::string config_path, out_override;
  int threads_override = -1;

  auto* cmd_run = app.add_subcommand("run", "Run an experiment from a JSON config file");
  cmd_run->add_option("config", config_path, "Path to the JSON experiment config")->required();
  cmd_run->add_option("--out", out_override, "Override the output directory");
  cmd_run->add_option("--threads", threads_override, "Worker threads (0 = all cores)");

  std::string preset_name, preset_rule;
  std::uint64_t preset_seed = 0;
  long long preset_horizon = 0;
  int preset_runs = 0, preset_agents = 0;
  auto* cmd_preset = app.add_subcommand("preset", "Run a named preset");
  cmd_preset->add_option("name", preset_name, "Preset name (see --help footer)")->required();
  cmd_preset->add_option("--out", out_override, "Override the output directory");
  auto* opt_seed = cmd_preset->add_option("--seed", preset_seed, "Override the master seed");
  auto* opt_horizon = cmd_preset->add_option("--horizon", preset_horizon, "Override the horizon T");
  auto* opt_runs = cmd_preset->add_option("--runs", preset_runs, "Override the Monte Carlo run count");
  auto* opt_agents = cmd_preset->add_option("--agents", preset_agents, "Override the agent count");
  auto* opt_rule =
      cmd_preset->add_option("--rule", preset_rule, "Restrict to one rule: loglinear, degroot or both");
  cmd_preset->add_option("--threads", threads_override, "Worker threads (0 = all cores)");

  std::string analyze_dir;
  auto* cmd_analyze = app.add_subcommand("analyze", "Recompute summary.json for an output directory");
  cmd_analyze->add_option("dir", analyze_dir, "Output directory to analyze")->required();

  std::string figures_dir;
  auto* cmd_figures = app.add_subcommand("figures", "Write figure CSVs for an output directory");
  cmd_figures->add_option("dir", figures_dir, "Output directory")->required();

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cmd_run->parsed()) {
      ExperimentConfig config = load_config(config_path);
      if (!out_override.empty()) config.output = out_override;
      if (threads_override >= 0) config.threads = threads_override;
      const ExperimentResult result = run_experiment(config);
      std::cout << "wrote " << result.output_dir << "\n";
      if (!result.failures.empty()) {
        std::cerr << result.failures.size() << " run(s) aborted; see summary.json\n";
        return 2;
      }
      return 0;
    }
    if (cmd_preset->parsed()) {
      if (is_figure_preset(preset_name)) {
        if (*opt_seed || *opt_horizon || *opt_runs || *opt_agents || *opt_rule) {
          std::cerr << "note: figure presets ignore engine flags\n";
        }
        const std::string out = out_override.empty() ? "out_" + preset_name : out_override;
        write_figure_preset(preset_name, out);
        std::cout << "wrote " << out << "\n";
        return 0;
      }
      ExperimentConfig config = preset_config(preset_name);
      if (*opt_seed) config.seed = preset_seed;
      if (*opt_horizon) {
        config.horizon = preset_horizon;
        config.checkpoints = default_checkpoints(config.horizon);
      }
      if (*opt_runs) config.runs = preset_runs;
      if (*opt_agents) config.agents = preset_agents;
      if (*opt_rule) {
        if (preset_rule == "both") {
          config.rules = {Rule::LogLinear, Rule::DeGroot};
        } else {
          config.rules = {rule_from_name(preset_rule)};
        }
      }
      if (!out_override.empty()) config.output = out_override;
      if (threads_override >= 0) config.threads = threads_override;
      const ExperimentResult result = run_experiment(config);
      std::cout << "wrote " << result.output_dir << "\n";
      if (!result.failures.empty()) {
        std::cerr << result.failures.size() << " run(s) aborted; see summary.json\n";
        return 2;
      }
      return 0;
    }
    if (cmd_analyze->parsed()) {
      analyze_directory(analyze_dir);
      std::cout << "wrote " << (fs::path(analyze_dir) / "summary.json").string() << "\n";
      return 0;
    }
    if (cmd_figures->parsed()) {
      write_figures(figures_dir);
      std::cout << "wrote figure data in " << figures_dir << "\n";
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace ulr
