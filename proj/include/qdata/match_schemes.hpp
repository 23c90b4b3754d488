#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <tuple>

namespace qdata {

enum class MatchField : std::uint8_t {
  EthSrc,
  EthDst,
  VlanId,
  Ipv4Src,
  Ipv4Dst,
  IpProto,
  L4Src,
  L4Dst,
};

inline constexpr std::size_t kNumMatchFields = 8;

inline constexpr std::array<MatchField, kNumMatchFields> kAllMatchFields = {
    MatchField::EthSrc,  MatchField::EthDst,  MatchField::VlanId, MatchField::Ipv4Src,
    MatchField::Ipv4Dst, MatchField::IpProto, MatchField::L4Src,  MatchField::L4Dst,
};

constexpr std::string_view field_name(MatchField f) noexcept
{
  switch (f) {
    case MatchField::EthSrc: return "ETH_SRC";
    case MatchField::EthDst: return "ETH_DST";
    case MatchField::VlanId: return "VLAN_ID";
    case MatchField::Ipv4Src: return "IPV4_SRC";
    case MatchField::Ipv4Dst: return "IPV4_DST";
    case MatchField::IpProto: return "IP_PROTO";
    case MatchField::L4Src: return "L4_SRC";
    case MatchField::L4Dst: return "L4_DST";
  }
  return "?";
}

// Bit set over MatchField, bit i <=> field with underlying value i.
class FieldSet
{
public:
  constexpr FieldSet() = default;
  constexpr FieldSet(std::initializer_list<MatchField> fields)
  {
    for (auto f : fields)
      bits_ |= bit(f);
  }

  static constexpr FieldSet all() noexcept { return from_bits(0xff); }
  static constexpr FieldSet from_bits(std::uint8_t b) noexcept
  {
    FieldSet s;
    s.bits_ = b;
    return s;
  }

  constexpr bool contains(MatchField f) const noexcept { return (bits_ & bit(f)) != 0; }
  constexpr int size() const noexcept { return std::popcount(bits_); }
  constexpr std::uint8_t bits() const noexcept { return bits_; }

  friend constexpr bool operator==(FieldSet, FieldSet) = default;

private:
  static constexpr std::uint8_t bit(MatchField f) noexcept
  {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(f));
  }

  std::uint8_t bits_ = 0;
};

using SchemeId = int;

struct MatchScheme
{
  SchemeId id = 0;
  FieldSet fields;

  friend constexpr bool operator==(const MatchScheme&, const MatchScheme&) = default;
};

inline constexpr std::size_t kNumSchemes = 9;
inline constexpr SchemeId kMmos = 0;
inline constexpr SchemeId kFms = 8;

namespace detail {

using F = MatchField;

// Ordered by enabled-field count so that granularity never decreases with id.
inline constexpr std::array<MatchScheme, kNumSchemes> kCatalog = {{
    {0, {F::EthDst}},
    {1, {F::EthDst, F::EthSrc}},
    {2, {F::EthDst, F::Ipv4Dst}},
    {3, {F::EthDst, F::EthSrc, F::VlanId}},
    {4, {F::EthDst, F::Ipv4Dst, F::Ipv4Src}},
    {5, {F::EthDst, F::EthSrc, F::Ipv4Dst, F::Ipv4Src}},
    {6, {F::EthDst, F::Ipv4Dst, F::Ipv4Src, F::IpProto}},
    {7, {F::EthDst, F::Ipv4Dst, F::Ipv4Src, F::IpProto, F::L4Dst}},
    {8, FieldSet::all()},
}};

} // namespace detail

// The fixed ladder of feasible match-field combinations, MMOS first and FMS last.
constexpr std::span<const MatchScheme, kNumSchemes> catalog() noexcept
{
  return detail::kCatalog;
}

constexpr const MatchScheme& scheme(SchemeId id) { return detail::kCatalog.at(static_cast<std::size_t>(id)); }

constexpr bool valid_scheme_id(SchemeId id) noexcept
{
  return id >= 0 && id < static_cast<SchemeId>(kNumSchemes);
}

// Number of enabled match fields: the granularity of an entry under this scheme.
constexpr int theta(const MatchScheme& s) noexcept { return s.fields.size(); }
constexpr int theta(SchemeId id) { return theta(scheme(id)); }

using MacAddr = std::uint64_t; // low 48 bits
using Ipv4Addr = std::uint32_t;

enum class IpProto : std::uint8_t { Tcp = 6, Udp = 17, Icmp = 1 };

struct PacketKey
{
  MacAddr src_mac = 0;
  MacAddr dst_mac = 0;
  std::uint16_t vlan = 0;
  Ipv4Addr src_ip = 0;
  Ipv4Addr dst_ip = 0;
  IpProto proto = IpProto::Tcp;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;

  friend constexpr bool operator==(const PacketKey&, const PacketKey&) = default;
  friend constexpr auto operator<=>(const PacketKey&, const PacketKey&) = default;
};

// A packet restricted to the fields of one scheme. Disabled fields are zeroed,
// and the field mask is part of the identity so keys of different schemes
// never compare equal.
struct MatchKey
{
  FieldSet fields;
  PacketKey values;

  friend constexpr bool operator==(const MatchKey&, const MatchKey&) = default;
  friend constexpr bool operator<(const MatchKey& a, const MatchKey& b) noexcept
  {
    return std::tuple(a.fields.bits(), a.values) < std::tuple(b.fields.bits(), b.values);
  }
};

constexpr MatchKey project(const PacketKey& p, const MatchScheme& s) noexcept
{
  using F = MatchField;
  MatchKey k;
  k.fields = s.fields;
  const auto on = [&](F f) { return s.fields.contains(f); };
  if (on(F::EthSrc)) k.values.src_mac = p.src_mac;
  if (on(F::EthDst)) k.values.dst_mac = p.dst_mac;
  if (on(F::VlanId)) k.values.vlan = p.vlan;
  if (on(F::Ipv4Src)) k.values.src_ip = p.src_ip;
  if (on(F::Ipv4Dst)) k.values.dst_ip = p.dst_ip;
  // IpProto's zero value is not a valid protocol, so a disabled field stays distinguishable.
  k.values.proto = on(F::IpProto) ? p.proto : IpProto{0};
  if (on(F::L4Src)) k.values.src_port = p.src_port;
  if (on(F::L4Dst)) k.values.dst_port = p.dst_port;
  return k;
}

inline std::string format_ipv4(Ipv4Addr ip)
{
  return std::to_string((ip >> 24) & 0xff) + '.' + std::to_string((ip >> 16) & 0xff) + '.' +
         std::to_string((ip >> 8) & 0xff) + '.' + std::to_string(ip & 0xff);
}

inline std::string format_mac(MacAddr mac)
{
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (int i = 5; i >= 0; --i) {
    const auto byte = static_cast<unsigned>((mac >> (8 * i)) & 0xff);
    out += hex[byte >> 4];
    out += hex[byte & 0xf];
    if (i) out += ':';
  }
  return out;
}

inline std::string_view proto_name(IpProto p)
{
  switch (p) {
    case IpProto::Tcp: return "tcp";
    case IpProto::Udp: return "udp";
    case IpProto::Icmp: return "icmp";
  }
  return "none";
}

// Text dump of the catalog, one line per scheme: "<id> <theta> FIELD,FIELD,...".
inline void dump_catalog(std::ostream& os)
{
  for (const auto& s : catalog()) {
    os << s.id << ' ' << theta(s) << ' ';
    bool first = true;
    for (auto f : kAllMatchFields) {
      if (!s.fields.contains(f)) continue;
      if (!first) os << ',';
      os << field_name(f);
      first = false;
    }
    os << '\n';
  }
}

} // namespace qdata
