#pragma once

#include "qdata/config.hpp"
#include "qdata/control.hpp"
#include "qdata/detector.hpp"
#include "qdata/flow_table.hpp"
#include "qdata/qlearning.hpp"
#include "qdata/svm.hpp"
#include "qdata/traffic.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdata {

// A run-time invariant of the simulation failed.
class InvariantViolation : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

// Per-scenario traffic streams get independent seeds derived from the
// scenario seed, so overriding the seed reshuffles every stream.
inline std::vector<TrafficSpec> seeded_traffic(const ScenarioConfig& cfg)
{
  std::vector<TrafficSpec> out = cfg.traffic;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].seed = mix64(cfg.seed, out[i].seed, i);
  return out;
}

// Drives one flow table through a merged packet trace, one observation
// period at a time. Entries expire continuously, before every packet.
class Simulator
{
public:
  Simulator(const ScenarioConfig& cfg, SchemeId default_scheme)
      : table_(cfg.f_cap, cfg.idle_timeout, default_scheme), period_(cfg.observation_period), end_(cfg.duration)
  {
    const auto specs = seeded_traffic(cfg);
    for (const auto& spec : specs) {
      auto pkts = generate(spec, 0, cfg.duration);
      trace_.insert(trace_.end(), pkts.begin(), pkts.end());
    }
    std::stable_sort(trace_.begin(), trace_.end(),
                     [](const TimedPacket& a, const TimedPacket& b) { return a.ts < b.ts; });
  }

  FlowTable& table() noexcept { return table_; }
  const FlowTable& table() const noexcept { return table_; }
  Millis now() const noexcept { return now_; }
  Millis period() const noexcept { return period_; }
  bool done() const noexcept { return now_ >= end_; }
  std::size_t trace_size() const noexcept { return trace_.size(); }

  // Plays the next period and closes it with expire + observe.
  Observation advance()
  {
    const Millis until = now_ + period_;
    while (next_ < trace_.size() && trace_[next_].ts < until) {
      const auto& p = trace_[next_++];
      table_.expire(p.ts);
      table_.process_packet(p.key, p.ts);
    }
    now_ = until;
    table_.expire(now_);
    return table_.observe(now_);
  }

private:
  FlowTable table_;
  Millis period_;
  Millis end_;
  Millis now_ = 0;
  std::vector<TimedPacket> trace_;
  std::size_t next_ = 0;
};

struct MetricsRow
{
  Millis t = 0;
  int f = 0;
  int delta_f = 0;
  std::uint64_t packet_in = 0;
  std::uint64_t rejected = 0;
  std::uint64_t installs = 0;
  int scheme_changes = 0;
  double mean_theta = 0;
  double reward = 0;
  std::optional<Verdict> svm_verdict;
};

struct Models
{
  std::optional<SvmModel> svm;
  std::optional<QTable> q;
};

struct ScenarioResult
{
  std::vector<MetricsRow> rows;
  std::vector<PolicyDirective> directives;
  std::vector<int> max_signatures; // per window, at the observation
  std::vector<bool> attack_truth;  // per window
  int detector_threshold = 0;
  DetectionOutcome detection;
  std::optional<QTable> final_q; // QDATA only, after online updates
};

inline SchemeId pinned_scheme(Strategy s) noexcept
{
  return s == Strategy::Mmos ? kMmos : kFms;
}

inline Models resolve_models(const ScenarioConfig& cfg, Models models)
{
  // Pinned strategies run without models, so unused paths are never opened.
  const bool needs_svm = cfg.strategy == Strategy::Data || cfg.strategy == Strategy::QData;
  try {
    if (needs_svm && !models.svm && cfg.svm_model_path) models.svm = SvmModel::load_file(*cfg.svm_model_path);
  } catch (const std::runtime_error& e) {
    throw ConfigError("svm_model", e.what());
  }
  try {
    if (cfg.strategy == Strategy::QData && !models.q && cfg.q_table_path) models.q = QTable::load_file(*cfg.q_table_path);
  } catch (const std::runtime_error& e) {
    throw ConfigError("q_table", e.what());
  }
  if (needs_svm && !models.svm) throw ConfigError("svm_model", "required by strategy " + std::string(strategy_name(cfg.strategy)));
  if (cfg.strategy == Strategy::QData) {
    if (!models.q) throw ConfigError("q_table", "required by strategy qdata");
    if (models.q->num_actions() != static_cast<int>(kNumSchemes))
      throw ConfigError("q_table", "expected one column per match scheme");
  }
  return models;
}

inline ControlConfig control_config(const ScenarioConfig& cfg)
{
  return {cfg.z, cfg.f_cap, cfg.idle_timeout, cfg.observation_period};
}

inline std::vector<bool> attack_windows(const ScenarioConfig& cfg)
{
  std::vector<bool> truth;
  for (Millis t = cfg.observation_period; t <= cfg.duration; t += cfg.observation_period) {
    const Millis lo = t - cfg.observation_period;
    bool any = false;
    for (const auto& s : cfg.traffic)
      any = any || (s.is_attack() && s.start < t && s.end > lo);
    truth.push_back(any);
  }
  return truth;
}

namespace detail {

inline void check_invariants(const FlowTable& table)
{
  if (table.size() > table.f_cap()) throw InvariantViolation("flow table exceeds its capacity");
  for (const auto& [key, e] : table.entries())
    if (e.scheme_id != table.scheme_for(e.dst_host)) throw InvariantViolation("entry scheme disagrees with host policy");
}

// The simulation proper, without detector calibration.
inline ScenarioResult simulate(const ScenarioConfig& cfg, const Models& models)
{
  Simulator sim(cfg, pinned_scheme(cfg.strategy));
  FlowTable& table = sim.table();
  const ControlConfig ctl = control_config(cfg);

  std::optional<OnlineAgent> agent;
  if (cfg.strategy == Strategy::QData) {
    QTable q = *models.q;
    if (q.bins().f != cfg.bins.f || q.bins().df != cfg.bins.df)
      throw ConfigError("q_table", "bin grid does not match bins_f/bins_df");
    agent.emplace(std::move(q), cfg.f_cap, cfg.epsilon, cfg.online_learning, mix64(cfg.seed, 0xa6e7));
  }

  ScenarioResult res;
  TableCounters prev = table.counters();
  while (!sim.done()) {
    const Observation obs = sim.advance();
    const TableCounters& now = table.counters();

    MetricsRow row;
    row.t = obs.t;
    row.f = obs.f;
    row.delta_f = obs.delta_f;
    row.packet_in = now.packet_in - prev.packet_in;
    row.rejected = now.rejected - prev.rejected;
    row.installs = now.installs - prev.installs;
    row.mean_theta = obs.f > 0 ? static_cast<double>(table.total_theta()) / obs.f : 0.0;
    row.reward = obs.f > 0 ? reward(table) : 0.0;
    res.max_signatures.push_back(max_signatures_per_destination(table));

    StepResult step;
    switch (cfg.strategy) {
      case Strategy::Mmos:
      case Strategy::Fms: break;
      case Strategy::Data: step = data_step(obs, table, *models.svm, ctl); break;
      case Strategy::QData:
        if (obs.f > 0) agent->feedback(obs, period_reward(table));
        step = qdata_step(obs, table, *models.svm, *agent, ctl);
        break;
    }
    row.svm_verdict = step.verdict;
    row.scheme_changes = static_cast<int>(step.directives.size());
    res.directives.insert(res.directives.end(), step.directives.begin(), step.directives.end());
    res.rows.push_back(row);
    check_invariants(table);
    prev = table.counters();
  }
  if (agent) res.final_q = agent->table();
  res.attack_truth = attack_windows(cfg);
  return res;
}

} // namespace detail

// The same scenario with every attack stream removed.
inline ScenarioConfig benign_only(ScenarioConfig cfg)
{
  std::erase_if(cfg.traffic, [](const TrafficSpec& s) { return s.is_attack(); });
  return cfg;
}

// Detector threshold: detector_factor times the largest per-destination
// signature count of the benign-only run.
inline int calibrate_threshold(const ScenarioConfig& cfg, const Models& models)
{
  const auto res = detail::simulate(benign_only(cfg), resolve_models(cfg, models));
  const int peak = res.max_signatures.empty() ? 0 : *std::max_element(res.max_signatures.begin(), res.max_signatures.end());
  return static_cast<int>(std::ceil(cfg.detector_factor * std::max(peak, 1)));
}

inline ScenarioResult run_scenario(const ScenarioConfig& cfg, const Models& supplied = {})
{
  validate(cfg);
  const Models models = resolve_models(cfg, supplied);
  ScenarioResult res = detail::simulate(cfg, models);
  res.detector_threshold = cfg.detector_threshold ? *cfg.detector_threshold : calibrate_threshold(cfg, models);
  res.detection = baseline_detector(res.max_signatures, res.attack_truth, res.detector_threshold);
  return res;
}

// Observations of an FMS-pinned run labeled by look-ahead rejections.
inline std::vector<LabeledSample> label_harness(ScenarioConfig cfg, int horizon)
{
  cfg.strategy = Strategy::Fms;
  validate(cfg);
  Simulator sim(cfg, kFms);
  std::vector<Observation> obs;
  std::vector<std::uint64_t> rejected;
  std::uint64_t prev = 0;
  while (!sim.done()) {
    obs.push_back(sim.advance());
    rejected.push_back(sim.table().counters().rejected - prev);
    prev = sim.table().counters().rejected;
  }
  return label_observations(obs, rejected, horizon);
}

namespace detail {

inline std::string fixed(double v, int digits = 6)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string_view verdict_name(const std::optional<Verdict>& v)
{
  if (!v) return "N/A";
  return *v == Verdict::Good ? "GOOD" : "DEGRADED";
}

} // namespace detail

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows)
{
  os << "t_ms,f,delta_f,packet_in,rejected,scheme_changes,mean_theta,reward,svm_verdict\n";
  for (const auto& r : rows)
    os << r.t << ',' << r.f << ',' << r.delta_f << ',' << r.packet_in << ',' << r.rejected << ','
       << r.scheme_changes << ',' << detail::fixed(r.mean_theta) << ',' << detail::fixed(r.reward) << ','
       << detail::verdict_name(r.svm_verdict) << '\n';
}

inline void write_directive_csv(std::ostream& os, const std::vector<PolicyDirective>& log)
{
  os << "t_ms,dst_host,old_scheme,new_scheme,origin\n";
  for (const auto& d : log)
    os << d.t << ',' << format_ipv4(d.dst_host) << ',' << d.old_scheme << ',' << d.target_scheme << ','
       << origin_name(d.origin) << '\n';
}

inline void write_detection_csv(std::ostream& os, const DetectionOutcome& out, int threshold)
{
  os << "Dr,Ac,Fa,dr_defined,threshold\n"
     << detail::fixed(out.dr) << ',' << detail::fixed(out.ac) << ',' << detail::fixed(out.fa) << ','
     << (out.dr_defined ? 1 : 0) << ',' << threshold << '\n';
}

} // namespace qdata
