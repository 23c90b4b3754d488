#pragma once

#include "qdata/match_schemes.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qdata {

// Simulated time, integer milliseconds.
using Millis = std::int64_t;

// Destination hosts are identified by IPv4 address; the MAC<->IP mapping is a
// bijection within a scenario, so MMOS entries resolve to the same identity.
using HostId = Ipv4Addr;

struct FlowEntry
{
  MatchKey key;
  SchemeId scheme_id = kFms;
  HostId dst_host = 0;
  Millis installed_at = 0;
  Millis last_hit = 0;
  std::uint64_t pkt_count = 0;
};

enum class PacketOutcome { Hit, MissInstalled, MissRejected };

struct Observation
{
  int f = 0;
  int delta_f = 0;
  Millis t = 0;
};

// Cumulative since construction. packet_in == installs_from_misses + rejected.
struct TableCounters
{
  std::uint64_t packets = 0;
  std::uint64_t hits = 0;
  std::uint64_t packet_in = 0;
  std::uint64_t rejected = 0;
  std::uint64_t installs = 0;
  std::uint64_t expired = 0;
  std::uint64_t deleted = 0;
};

// Statistics of the last closed observation period.
struct PeriodStats
{
  std::map<HostId, std::uint64_t> dst_packets;
  bool saturated = false; // the table was full at some point during the period
};

struct DstFlows
{
  HostId host = 0;
  int flows = 0;

  friend bool operator==(const DstFlows&, const DstFlows&) = default;
};

struct DstCensus
{
  std::vector<DstFlows> hosts; // ascending host id
  int n_ip = 0;                // distinct (src_ip, dst_ip) pairs over IP-visible entries
};

class FlowTable
{
public:
  FlowTable(int f_cap, Millis idle_timeout, SchemeId default_scheme = kFms)
      : f_cap_(f_cap), idle_timeout_(idle_timeout), default_scheme_(default_scheme)
  {
    if (f_cap <= 0) throw std::invalid_argument("f_cap must be positive");
    if (idle_timeout <= 0) throw std::invalid_argument("idle_timeout must be positive");
    if (!valid_scheme_id(default_scheme)) throw std::invalid_argument("default scheme out of range");
  }

  int f_cap() const noexcept { return f_cap_; }
  Millis idle_timeout() const noexcept { return idle_timeout_; }
  int size() const noexcept { return static_cast<int>(entries_.size()); }
  bool full() const noexcept { return size() >= f_cap_; }

  const std::map<MatchKey, FlowEntry>& entries() const noexcept { return entries_; }
  const TableCounters& counters() const noexcept { return counters_; }
  const PeriodStats& last_period() const noexcept { return last_period_; }

  SchemeId scheme_for(HostId dst) const
  {
    auto it = per_dst_scheme_.find(dst);
    return it == per_dst_scheme_.end() ? default_scheme_ : it->second;
  }

  // Hosts with an explicit policy (those whose scheme was changed at least once).
  const std::map<HostId, SchemeId>& policies() const noexcept { return per_dst_scheme_; }

  PacketOutcome process_packet(const PacketKey& packet, Millis now)
  {
    const HostId dst = packet.dst_ip;
    const SchemeId sid = scheme_for(dst);
    const MatchKey key = project(packet, scheme(sid));

    ++counters_.packets;
    ++period_.dst_packets[dst];

    if (auto it = entries_.find(key); it != entries_.end()) {
      touch(it->second, now);
      ++counters_.hits;
      return PacketOutcome::Hit;
    }

    ++counters_.packet_in;
    if (full()) {
      ++counters_.rejected;
      period_.saturated = true;
      return PacketOutcome::MissRejected;
    }
    install(key, sid, dst, now);
    return PacketOutcome::MissInstalled;
  }

  // Removes entries idle for at least idle_timeout.
  int expire(Millis now)
  {
    int removed = 0;
    while (!by_last_hit_.empty()) {
      auto first = by_last_hit_.begin();
      if (now - first->first < idle_timeout_) break;
      entries_.erase(first->second);
      by_last_hit_.erase(first);
      ++removed;
    }
    counters_.expired += static_cast<std::uint64_t>(removed);
    return removed;
  }

  // Closes the current observation period.
  Observation observe(Millis now)
  {
    const int f = size();
    Observation obs{f, f - prev_f_, now};
    prev_f_ = f;
    last_period_ = std::move(period_);
    period_ = PeriodStats{};
    period_.saturated = full();
    return obs;
  }

  // Deletes every entry of dst and re-points it at new_scheme. When a seed
  // packet is supplied and there is room, one entry under the new scheme is
  // installed for it. Re-selecting the active scheme is a no-op.
  int change_scheme(HostId dst, SchemeId new_scheme, const std::optional<PacketKey>& seed = std::nullopt,
                    Millis now = 0)
  {
    if (!valid_scheme_id(new_scheme)) throw std::invalid_argument("scheme id out of range");
    if (scheme_for(dst) == new_scheme) return 0;

    int deleted = 0;
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (it->second.dst_host == dst) {
        by_last_hit_.erase({it->second.last_hit, it->first});
        it = entries_.erase(it);
        ++deleted;
      } else {
        ++it;
      }
    }
    counters_.deleted += static_cast<std::uint64_t>(deleted);
    per_dst_scheme_[dst] = new_scheme;

    if (seed && seed->dst_ip == dst && !full())
      install(project(*seed, scheme(new_scheme)), new_scheme, dst, now);
    return deleted;
  }

  DstCensus census() const
  {
    std::map<HostId, int> counts;
    std::set<std::pair<Ipv4Addr, Ipv4Addr>> pairs;
    for (const auto& [key, e] : entries_) {
      ++counts[e.dst_host];
      if (key.fields.contains(MatchField::Ipv4Src) && key.fields.contains(MatchField::Ipv4Dst))
        pairs.emplace(key.values.src_ip, key.values.dst_ip);
    }
    DstCensus c;
    c.hosts.reserve(counts.size());
    for (auto [h, n] : counts)
      c.hosts.push_back({h, n});
    c.n_ip = static_cast<int>(pairs.size());
    return c;
  }

  // Sum of enabled-field counts over all entries.
  long total_theta() const
  {
    long sum = 0;
    for (const auto& [key, e] : entries_)
      sum += theta(e.scheme_id);
    return sum;
  }

  void dump_csv(std::ostream& os, Millis now) const
  {
    os << "dst,scheme_id,theta,age_ms,pkt_count\n";
    for (const auto& [key, e] : entries_)
      os << format_ipv4(e.dst_host) << ',' << e.scheme_id << ',' << theta(e.scheme_id) << ','
         << (now - e.installed_at) << ',' << e.pkt_count << '\n';
  }

private:
  void install(const MatchKey& key, SchemeId sid, HostId dst, Millis now)
  {
    entries_.emplace(key, FlowEntry{key, sid, dst, now, now, 1});
    by_last_hit_.emplace(now, key);
    ++counters_.installs;
    if (full()) period_.saturated = true;
  }

  void touch(FlowEntry& e, Millis now)
  {
    if (now > e.last_hit) {
      by_last_hit_.erase({e.last_hit, e.key});
      e.last_hit = now;
      by_last_hit_.emplace(now, e.key);
    }
    ++e.pkt_count;
  }

  int f_cap_;
  Millis idle_timeout_;
  SchemeId default_scheme_;
  std::map<MatchKey, FlowEntry> entries_;
  std::set<std::pair<Millis, MatchKey>> by_last_hit_;
  std::map<HostId, SchemeId> per_dst_scheme_;
  int prev_f_ = 0;
  TableCounters counters_;
  PeriodStats period_;
  PeriodStats last_period_;
};

} // namespace qdata
