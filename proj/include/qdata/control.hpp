#pragma once

#include "qdata/flow_table.hpp"
#include "qdata/match_schemes.hpp"
#include "qdata/qlearning.hpp"
#include "qdata/svm.hpp"

#include <algorithm>
#include <concepts>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace qdata {

enum class DirectiveOrigin { Overflow, QPolicy, MmosRestore };

constexpr std::string_view origin_name(DirectiveOrigin o) noexcept
{
  switch (o) {
    case DirectiveOrigin::Overflow: return "OVERFLOW";
    case DirectiveOrigin::QPolicy: return "QPOLICY";
    case DirectiveOrigin::MmosRestore: return "MMOS_RESTORE";
  }
  return "?";
}

struct PolicyDirective
{
  HostId dst_host = 0;
  SchemeId old_scheme = kFms;
  SchemeId target_scheme = kFms;
  DirectiveOrigin origin = DirectiveOrigin::QPolicy;
  Millis t = 0;
};

struct ControlConfig
{
  double z = 2.0; // average flow entries per source-destination IP pair
  int f_cap = 300;
  Millis idle_timeout = 10'000;
  Millis observation_period = 10'000;
};

inline void validate(const ControlConfig& cfg)
{
  if (!(cfg.z >= 1.0)) throw std::invalid_argument("z must be at least 1");
  if (cfg.f_cap <= 0) throw std::invalid_argument("f_cap must be positive");
  if (cfg.idle_timeout <= 0) throw std::invalid_argument("idle_timeout must be positive");
  if (cfg.observation_period <= 0) throw std::invalid_argument("observation_period must be positive");
}

template <class P>
concept DegradationPredictor = requires(const P& p, double f, double df) {
  { p(f, df) } -> std::convertible_to<Verdict>;
};

struct CriticalHosts
{
  std::vector<HostId> hosts;
  bool insufficient = false; // even aggregating every host was predicted Degraded
};

// Picks the smallest prefix of the destinations, by descending flow count,
// whose aggregation to one entry per host leaves a table the predictor calls
// Good. The predictor sees the hypothetical remaining count and the number of
// entries the aggregation would delete.
template <DegradationPredictor P>
CriticalHosts select_critical_hosts(std::span<const DstFlows> census, int f, const P& predict)
{
  std::vector<DstFlows> sorted(census.begin(), census.end());
  std::sort(sorted.begin(), sorted.end(), [](const DstFlows& a, const DstFlows& b) {
    return a.flows != b.flows ? a.flows > b.flows : a.host < b.host;
  });

  long rest = 0;
  for (const auto& d : sorted)
    rest += d.flows;

  CriticalHosts out;
  for (const auto& d : sorted) {
    out.hosts.push_back(d.host);
    rest -= d.flows;
    const long remaining = static_cast<long>(out.hosts.size()) + rest;
    const long deleted = f - remaining;
    if (predict(static_cast<double>(remaining), static_cast<double>(deleted)) == Verdict::Good) return out;
  }
  out.insufficient = !out.hosts.empty();
  return out;
}

inline CriticalHosts select_critical_hosts(std::span<const DstFlows> census, int f, const SvmModel& svm)
{
  return select_critical_hosts(census, f, [&svm](double fr, double df) { return svm.predict(fr, df); });
}

struct HostRate
{
  HostId host = 0;
  double pkt_rate = 0; // packets per second
};

// MMOS hosts that can go back to full matching under the worst case of one new
// entry per packet over an idle timeout. f is not advanced between checks.
inline std::vector<HostId> select_fms_candidates(std::span<const HostRate> mmos_stats, int f, const ControlConfig& cfg)
{
  std::vector<HostId> out;
  const double idle_s = static_cast<double>(cfg.idle_timeout) / 1000.0;
  for (const auto& [host, rate] : mmos_stats) {
    const double f_extra = idle_s * rate;
    if (f_extra + f < cfg.f_cap) out.push_back(host);
  }
  return out;
}

// Packet rates over the last period for census hosts currently under MMOS.
inline std::vector<HostRate> mmos_host_rates(const FlowTable& table, const DstCensus& census, Millis period)
{
  std::vector<HostRate> out;
  const auto& pkts = table.last_period().dst_packets;
  for (const auto& d : census.hosts) {
    if (table.scheme_for(d.host) != kMmos) continue;
    const auto it = pkts.find(d.host);
    const double n = it == pkts.end() ? 0.0 : static_cast<double>(it->second);
    out.push_back({d.host, n * 1000.0 / static_cast<double>(period)});
  }
  return out;
}

enum class ControlBranch { Overflow, OverflowQPolicy, Restore, QPolicy, Idle };

struct StepResult
{
  std::vector<PolicyDirective> directives; // effective changes only
  std::optional<Verdict> verdict;          // absent when the SVM was not consulted
  ControlBranch branch = ControlBranch::Idle;
  bool insufficient_aggregation = false;
};

namespace detail {

inline void apply(FlowTable& table, HostId h, SchemeId target, DirectiveOrigin origin, Millis t,
                  std::vector<PolicyDirective>& log)
{
  const SchemeId old = table.scheme_for(h);
  if (old == target) return;
  table.change_scheme(h, target);
  log.push_back({h, old, target, origin, t});
}

inline std::vector<PolicyDirective> restore_fms(FlowTable& table, const DstCensus& census, int f,
                                                const ControlConfig& cfg, Millis t)
{
  std::vector<PolicyDirective> log;
  const auto rates = mmos_host_rates(table, census, cfg.observation_period);
  for (HostId h : select_fms_candidates(rates, f, cfg))
    apply(table, h, kFms, DirectiveOrigin::MmosRestore, t, log);
  return log;
}

} // namespace detail

// The QDATA workflow up to the Q-policy decision: the overflow guard with
// the N_ip test and the SVM-gated MMOS restoration are applied here; the
// critical hosts that still await a scheme from the policy go to pending.
inline StepResult qdata_plan(const Observation& obs, FlowTable& table, const SvmModel& svm, const ControlConfig& cfg,
                             std::vector<HostId>& pending)
{
  StepResult r;
  pending.clear();
  if (obs.f >= cfg.f_cap) {
    const DstCensus census = table.census();
    const auto crit = select_critical_hosts(census.hosts, obs.f, svm);
    r.insufficient_aggregation = crit.insufficient;
    if (crit.hosts.empty()) return r;
    if (census.n_ip >= cfg.f_cap / cfg.z) {
      r.branch = ControlBranch::Overflow;
      for (HostId h : crit.hosts)
        detail::apply(table, h, kMmos, DirectiveOrigin::Overflow, obs.t, r.directives);
    } else {
      r.branch = ControlBranch::OverflowQPolicy;
      pending = crit.hosts;
    }
    return r;
  }

  r.verdict = svm.predict(obs);
  if (*r.verdict == Verdict::Good) {
    r.directives = detail::restore_fms(table, table.census(), obs.f, cfg, obs.t);
    if (!r.directives.empty()) r.branch = ControlBranch::Restore;
  } else if (obs.delta_f > 0) {
    const auto crit = select_critical_hosts(table.census().hosts, obs.f, svm);
    r.insufficient_aggregation = crit.insufficient;
    if (crit.hosts.empty()) return r;
    r.branch = ControlBranch::QPolicy;
    pending = crit.hosts;
  }
  return r;
}

// Applies one scheme to hosts as Q-policy directives.
inline void apply_policy(FlowTable& table, std::span<const HostId> hosts, SchemeId a, Millis t,
                         std::vector<PolicyDirective>& log)
{
  for (HostId h : hosts)
    detail::apply(table, h, a, DirectiveOrigin::QPolicy, t, log);
}

// One full pass of the QDATA workflow per observation.
inline StepResult qdata_step(const Observation& obs, FlowTable& table, const SvmModel& svm, OnlineAgent& agent,
                             const ControlConfig& cfg)
{
  std::vector<HostId> pending;
  StepResult r = qdata_plan(obs, table, svm, cfg, pending);
  if (!pending.empty()) apply_policy(table, pending, agent.choose(obs), obs.t, r.directives);
  return r;
}

// The two-scheme predecessor: critical hosts fall back to MMOS when the table
// is full or predicted to degrade, and return to FMS when that is safe.
inline StepResult data_step(const Observation& obs, FlowTable& table, const SvmModel& svm, const ControlConfig& cfg)
{
  StepResult r;
  const bool at_cap = obs.f >= cfg.f_cap;
  if (!at_cap) r.verdict = svm.predict(obs);
  const DstCensus census = table.census();
  if (at_cap || *r.verdict == Verdict::Degraded) {
    const auto crit = select_critical_hosts(census.hosts, obs.f, svm);
    r.insufficient_aggregation = crit.insufficient;
    r.branch = ControlBranch::Overflow;
    for (HostId h : crit.hosts)
      detail::apply(table, h, kMmos, DirectiveOrigin::Overflow, obs.t, r.directives);
  } else {
    r.directives = detail::restore_fms(table, census, obs.f, cfg, obs.t);
    if (!r.directives.empty()) r.branch = ControlBranch::Restore;
  }
  return r;
}

} // namespace qdata
