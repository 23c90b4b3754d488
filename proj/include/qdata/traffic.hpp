#pragma once

#include "qdata/flow_table.hpp"
#include "qdata/match_schemes.hpp"
#include "qdata/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qdata {

enum class HostRole { Host, Server };

struct Host
{
  std::string name;
  MacAddr mac = 0;
  Ipv4Addr ip = 0;
  HostRole role = HostRole::Host;

  friend bool operator==(const Host&, const Host&) = default;
};

enum class TrafficKind { Benign, SynFlood, PortScan, SlowDos };

constexpr std::string_view kind_name(TrafficKind k) noexcept
{
  switch (k) {
    case TrafficKind::Benign: return "benign";
    case TrafficKind::SynFlood: return "syn_flood";
    case TrafficKind::PortScan: return "port_scan";
    case TrafficKind::SlowDos: return "slow_dos";
  }
  return "?";
}

struct TrafficSpec
{
  TrafficKind kind = TrafficKind::Benign;
  double rate = 1.0; // new-flow packets per second
  Millis start = 0;
  Millis end = 0;
  std::vector<Host> targets;
  std::vector<Host> sources;
  std::uint64_t seed = 0;
  int scan_ports = 1024;         // PORT_SCAN sweep size
  Millis refresh_period = 9000;  // SLOW_DOS re-emission period, below idle_timeout

  bool is_attack() const noexcept { return kind != TrafficKind::Benign; }
};

struct TimedPacket
{
  Millis ts = 0;
  PacketKey key;

  friend bool operator==(const TimedPacket&, const TimedPacket&) = default;
};

inline void validate(const TrafficSpec& spec)
{
  if (!(spec.rate > 0.0) || !std::isfinite(spec.rate)) throw std::invalid_argument("traffic rate must be positive");
  if (spec.start >= spec.end) throw std::invalid_argument("traffic start must precede end");
  if (spec.targets.empty()) throw std::invalid_argument("traffic needs at least one target");
  if (spec.sources.empty()) throw std::invalid_argument("traffic needs at least one source");
  if (spec.kind == TrafficKind::PortScan && spec.scan_ports <= 0)
    throw std::invalid_argument("scan_ports must be positive");
  if (spec.kind == TrafficKind::SlowDos && spec.refresh_period <= 0)
    throw std::invalid_argument("refresh_period must be positive");
}

namespace detail {

// Packet k of a stream occupies the slot [start + k/rate, start + (k+1)/rate)
// seconds and is placed uniformly inside it, so any window holds rate*duration
// packets give or take one.
class SlotClock
{
public:
  SlotClock(const TrafficSpec& spec) : start_(spec.start), rate_(spec.rate), seed_(spec.seed) {}

  Millis slot_begin(std::int64_t k) const
  {
    return start_ + static_cast<Millis>(std::floor(static_cast<double>(k) * 1000.0 / rate_));
  }

  Millis time_of(std::int64_t k) const
  {
    const Millis b = slot_begin(k);
    const Millis len = slot_begin(k + 1) - b;
    if (len <= 1) return b;
    return b + static_cast<Millis>(pick_below(mix64(seed_, 0x7157, static_cast<std::uint64_t>(k)),
                                              static_cast<std::uint64_t>(len)));
  }

  // First slot index whose slot may reach t.
  std::int64_t first_slot_at(Millis t) const
  {
    const double k = std::floor(static_cast<double>(t - start_) * rate_ / 1000.0) - 1.0;
    return std::max<std::int64_t>(0, static_cast<std::int64_t>(k));
  }

  // One past the last slot that may begin before t.
  std::int64_t end_slot_before(Millis t) const
  {
    return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(static_cast<double>(t - start_) * rate_ / 1000.0)) + 1);
  }

private:
  Millis start_;
  double rate_;
  std::uint64_t seed_;
};

inline const Host& pick(const std::vector<Host>& hosts, std::uint64_t bits)
{
  return hosts[static_cast<std::size_t>(pick_below(bits, hosts.size()))];
}

inline PacketKey base_key(const Host& src, const Host& dst)
{
  PacketKey p;
  p.src_mac = src.mac;
  p.dst_mac = dst.mac;
  p.src_ip = src.ip;
  p.dst_ip = dst.ip;
  p.proto = IpProto::Tcp;
  return p;
}

inline PacketKey benign_packet(const TrafficSpec& spec, std::int64_t k)
{
  const auto u = static_cast<std::uint64_t>(k);
  const Host& src = pick(spec.sources, mix64(spec.seed, 1, u));
  const Host& dst = pick(spec.targets, mix64(spec.seed, 2, u));
  PacketKey p = base_key(src, dst);
  p.src_port = static_cast<std::uint16_t>(32768 + pick_below(mix64(spec.seed, 3, u), 28232));
  p.dst_port = pick_below(mix64(spec.seed, 4, u), 2) ? 443 : 80;
  return p;
}

// Spoofed source addresses come from a bijection on the low 24 bits so every
// packet of a flood is a distinct flow under full matching.
inline PacketKey syn_flood_packet(const TrafficSpec& spec, std::int64_t k)
{
  const auto u = static_cast<std::uint64_t>(k);
  const Host& src = spec.sources[u % spec.sources.size()];
  const Host& dst = spec.targets[u % spec.targets.size()];
  PacketKey p = base_key(src, dst);
  const std::uint64_t offset = mix64(spec.seed, 5);
  p.src_ip = 0x64000000u | static_cast<Ipv4Addr>((u * 0x9e3779u + offset) & 0xffffffu);
  p.src_port = static_cast<std::uint16_t>(1024 + pick_below(mix64(spec.seed, 6, u), 64511));
  p.dst_port = 80;
  return p;
}

inline PacketKey port_scan_packet(const TrafficSpec& spec, std::int64_t k)
{
  const auto u = static_cast<std::uint64_t>(k);
  const auto n = static_cast<std::uint64_t>(spec.scan_ports);
  const Host& dst = spec.targets[(u / n) % spec.targets.size()];
  PacketKey p = base_key(spec.sources.front(), dst);
  p.src_port = static_cast<std::uint16_t>(40000 + spec.seed % 1000);
  p.dst_port = static_cast<std::uint16_t>(u % n + 1);
  return p;
}

inline PacketKey slow_dos_packet(const TrafficSpec& spec, std::int64_t k)
{
  const auto u = static_cast<std::uint64_t>(k);
  const Host& src = spec.sources[u % spec.sources.size()];
  const Host& dst = spec.targets[(u / spec.sources.size()) % spec.targets.size()];
  PacketKey p = base_key(src, dst);
  p.src_port = static_cast<std::uint16_t>(1024 + u % 64000);
  p.dst_port = 80;
  return p;
}

inline PacketKey packet_for(const TrafficSpec& spec, std::int64_t k)
{
  switch (spec.kind) {
    case TrafficKind::Benign: return benign_packet(spec, k);
    case TrafficKind::SynFlood: return syn_flood_packet(spec, k);
    case TrafficKind::PortScan: return port_scan_packet(spec, k);
    case TrafficKind::SlowDos: return slow_dos_packet(spec, k);
  }
  return {};
}

} // namespace detail

// Packets of spec with timestamps in [t0, t1) intersected with the spec's
// lifetime, ordered by timestamp. A pure function of (spec, window).
inline std::vector<TimedPacket> generate(const TrafficSpec& spec, Millis t0, Millis t1)
{
  validate(spec);
  const Millis lo = std::max(t0, spec.start);
  const Millis hi = std::min(t1, spec.end);
  std::vector<TimedPacket> out;
  if (lo >= hi) return out;

  const detail::SlotClock clock(spec);

  if (spec.kind == TrafficKind::SlowDos) {
    // Every key is refreshed once per refresh_period after its first emission.
    const std::int64_t kend = clock.end_slot_before(hi);
    for (std::int64_t k = 0; k < kend; ++k) {
      const Millis first = clock.time_of(k);
      if (first >= hi) continue;
      const PacketKey key = detail::slow_dos_packet(spec, k);
      Millis j = first >= lo ? 0 : (lo - first + spec.refresh_period - 1) / spec.refresh_period;
      for (Millis ts = first + j * spec.refresh_period; ts < hi; ts += spec.refresh_period)
        out.push_back({ts, key});
    }
  } else {
    for (std::int64_t k = clock.first_slot_at(lo), kend = clock.end_slot_before(hi); k < kend; ++k) {
      const Millis ts = clock.time_of(k);
      if (ts < lo || ts >= hi) continue;
      out.push_back({ts, detail::packet_for(spec, k)});
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const TimedPacket& a, const TimedPacket& b) {
    return a.ts < b.ts || (a.ts == b.ts && a.key < b.key);
  });
  return out;
}

inline void write_trace_csv(std::ostream& os, const std::vector<TimedPacket>& packets)
{
  os << "ts_ms,src_mac,dst_mac,vlan,src_ip,dst_ip,proto,sport,dport\n";
  for (const auto& [ts, p] : packets)
    os << ts << ',' << format_mac(p.src_mac) << ',' << format_mac(p.dst_mac) << ',' << p.vlan << ','
       << format_ipv4(p.src_ip) << ',' << format_ipv4(p.dst_ip) << ',' << proto_name(p.proto) << ','
       << p.src_port << ',' << p.dst_port << '\n';
}

// The reference topology: hosts H1..H5 and web servers S1..S3 on one switch.
inline std::vector<Host> default_hosts()
{
  std::vector<Host> hosts;
  for (int i = 1; i <= 5; ++i)
    hosts.push_back({"H" + std::to_string(i), static_cast<MacAddr>(i), 0x0a000000u + static_cast<Ipv4Addr>(i),
                     HostRole::Host});
  for (int i = 1; i <= 3; ++i)
    hosts.push_back({"S" + std::to_string(i), static_cast<MacAddr>(0x100 + i),
                     0x0a000100u + static_cast<Ipv4Addr>(i), HostRole::Server});
  return hosts;
}

} // namespace qdata
