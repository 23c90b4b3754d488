#pragma once

#include "qdata/flow_table.hpp"
#include "qdata/qlearning.hpp"
#include "qdata/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qdata {

// Invalid or missing configuration; field() names the offending key.
class ConfigError : public std::runtime_error
{
public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field))
  {
  }

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

enum class Strategy { Mmos, Fms, Data, QData };

constexpr std::string_view strategy_name(Strategy s) noexcept
{
  switch (s) {
    case Strategy::Mmos: return "mmos";
    case Strategy::Fms: return "fms";
    case Strategy::Data: return "data";
    case Strategy::QData: return "qdata";
  }
  return "?";
}

struct ScenarioConfig
{
  Millis duration = 500'000;
  Millis observation_period = 10'000;
  int f_cap = 300;
  Millis idle_timeout = 10'000;
  Strategy strategy = Strategy::Fms;
  double epsilon = 0.0;        // online exploration for QDATA
  bool online_learning = true; // QDATA keeps backing up its Q-table
  std::vector<TrafficSpec> traffic;
  std::vector<Host> hosts = default_hosts();
  std::optional<std::string> q_table_path;
  std::optional<std::string> svm_model_path;
  std::uint64_t seed = 1;
  double alpha = 0.1;
  double gamma = 0.9;
  double z = 2.0;
  StateBins bins;
  std::optional<int> detector_threshold;
  double detector_factor = 3.0;
};

inline void validate(const ScenarioConfig& cfg)
{
  if (cfg.observation_period <= 0) throw ConfigError("observation_period", "must be positive");
  if (cfg.duration <= 0) throw ConfigError("duration", "must be positive");
  if (cfg.duration % cfg.observation_period != 0)
    throw ConfigError("duration", "must be a multiple of observation_period");
  if (cfg.f_cap <= 0) throw ConfigError("f_cap", "must be positive");
  if (cfg.idle_timeout <= 0) throw ConfigError("idle_timeout", "must be positive");
  if (!(cfg.epsilon >= 0 && cfg.epsilon <= 1)) throw ConfigError("epsilon", "must lie in [0, 1]");
  if (!(cfg.alpha >= 0 && cfg.alpha <= 1)) throw ConfigError("alpha", "must lie in [0, 1]");
  if (!(cfg.gamma >= 0 && cfg.gamma < 1)) throw ConfigError("gamma", "must lie in [0, 1)");
  if (!(cfg.z >= 1)) throw ConfigError("z", "must be at least 1");
  if (cfg.bins.f <= 0 || cfg.bins.df <= 0) throw ConfigError("bins", "must be positive");
  if (!(cfg.detector_factor > 0)) throw ConfigError("detector_factor", "must be positive");
  if (cfg.hosts.empty()) throw ConfigError("host", "at least one host required");
  for (std::size_t i = 0; i < cfg.traffic.size(); ++i) {
    try {
      validate(cfg.traffic[i]);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("traffic[" + std::to_string(i) + "]", e.what());
    }
  }
}

namespace detail {

inline std::string trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_number(const std::string& field, const std::string& text)
{
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw ConfigError(field, "expected a number, got '" + text + "'");
  }
  if (pos != text.size() || !std::isfinite(v)) throw ConfigError(field, "expected a number, got '" + text + "'");
  return v;
}

inline long long parse_integer(const std::string& field, const std::string& text)
{
  const double v = parse_number(field, text);
  if (v != std::floor(v)) throw ConfigError(field, "expected an integer, got '" + text + "'");
  return static_cast<long long>(v);
}

inline Millis parse_seconds(const std::string& field, const std::string& text)
{
  return static_cast<Millis>(std::llround(parse_number(field, text) * 1000.0));
}

inline std::vector<std::string> split(std::string_view s, char sep)
{
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(sep, start);
    out.push_back(trim(s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start)));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

inline std::uint32_t parse_ipv4(const std::string& field, const std::string& text)
{
  const auto parts = split(text, '.');
  if (parts.size() != 4) throw ConfigError(field, "bad IPv4 address '" + text + "'");
  std::uint32_t ip = 0;
  for (const auto& p : parts) {
    const auto v = parse_integer(field, p);
    if (v < 0 || v > 255) throw ConfigError(field, "bad IPv4 address '" + text + "'");
    ip = ip << 8 | static_cast<std::uint32_t>(v);
  }
  return ip;
}

inline MacAddr parse_mac(const std::string& field, const std::string& text)
{
  const auto parts = split(text, ':');
  if (parts.size() != 6) throw ConfigError(field, "bad MAC address '" + text + "'");
  MacAddr mac = 0;
  for (const auto& p : parts) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(p, &pos, 16);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (p.empty() || pos != p.size() || v > 255) throw ConfigError(field, "bad MAC address '" + text + "'");
    mac = mac << 8 | v;
  }
  return mac;
}

inline TrafficKind parse_kind(const std::string& text)
{
  if (text == "benign") return TrafficKind::Benign;
  if (text == "syn_flood") return TrafficKind::SynFlood;
  if (text == "port_scan") return TrafficKind::PortScan;
  if (text == "slow_dos") return TrafficKind::SlowDos;
  throw ConfigError("traffic", "unknown traffic kind '" + text + "'");
}

inline Strategy parse_strategy(const std::string& text)
{
  if (text == "mmos") return Strategy::Mmos;
  if (text == "fms") return Strategy::Fms;
  if (text == "data") return Strategy::Data;
  if (text == "qdata") return Strategy::QData;
  throw ConfigError("strategy", "unknown strategy '" + text + "'");
}

// Traffic lines reference hosts by name; "hosts" and "servers" expand to every
// host of that role.
inline std::vector<Host> resolve_hosts(const std::string& field, const std::string& list,
                                       const std::vector<Host>& hosts)
{
  std::vector<Host> out;
  for (const auto& name : split(list, ',')) {
    if (name == "hosts" || name == "servers") {
      const auto role = name == "hosts" ? HostRole::Host : HostRole::Server;
      for (const auto& h : hosts)
        if (h.role == role) out.push_back(h);
      continue;
    }
    auto it = std::find_if(hosts.begin(), hosts.end(), [&](const Host& h) { return h.name == name; });
    if (it == hosts.end()) throw ConfigError(field, "unknown host '" + name + "'");
    out.push_back(*it);
  }
  if (out.empty()) throw ConfigError(field, "empty host list");
  return out;
}

inline TrafficSpec parse_traffic(const std::string& value, const std::vector<Host>& hosts, std::size_t index)
{
  std::istringstream in(value);
  std::string kind;
  in >> kind;
  TrafficSpec spec;
  spec.kind = parse_kind(kind);
  spec.seed = index;
  bool have_rate = false, have_end = false;
  std::string targets = "servers", sources = "hosts";
  for (std::string tok; in >> tok;) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("traffic", "expected key=value, got '" + tok + "'");
    const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
    const std::string field = "traffic." + k;
    if (k == "rate") {
      spec.rate = parse_number(field, v);
      have_rate = true;
    } else if (k == "start") {
      spec.start = parse_seconds(field, v);
    } else if (k == "end") {
      spec.end = parse_seconds(field, v);
      have_end = true;
    } else if (k == "targets") {
      targets = v;
    } else if (k == "sources") {
      sources = v;
    } else if (k == "seed") {
      spec.seed = static_cast<std::uint64_t>(parse_integer(field, v));
    } else if (k == "scan_ports") {
      spec.scan_ports = static_cast<int>(parse_integer(field, v));
    } else if (k == "refresh") {
      spec.refresh_period = parse_seconds(field, v);
    } else {
      throw ConfigError(field, "unknown traffic attribute");
    }
  }
  if (!have_rate) throw ConfigError("traffic.rate", "missing");
  if (!have_end) throw ConfigError("traffic.end", "missing");
  spec.targets = resolve_hosts("traffic.targets", targets, hosts);
  spec.sources = resolve_hosts("traffic.sources", sources, hosts);
  return spec;
}

} // namespace detail

// Flat "key = value" format, '#' starts a comment. Repeatable keys: host, traffic.
//
//   duration = 500              # seconds
//   strategy = qdata            # mmos | fms | data | qdata
//   host = S1 10.0.1.1 00:00:00:00:01:01 server
//   traffic = benign rate=30 start=0 end=500 targets=servers sources=hosts
//
// Relative model paths resolve against base_dir.
inline ScenarioConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {})
{
  using namespace detail;
  ScenarioConfig cfg;
  std::vector<Host> hosts;
  std::vector<std::string> traffic_lines;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto path = [&](const std::string& v) {
      std::filesystem::path p(v);
      return (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
    };

    if (key == "duration") cfg.duration = parse_seconds(key, value);
    else if (key == "observation_period") cfg.observation_period = parse_seconds(key, value);
    else if (key == "f_cap") cfg.f_cap = static_cast<int>(parse_integer(key, value));
    else if (key == "idle_timeout") cfg.idle_timeout = parse_seconds(key, value);
    else if (key == "strategy") cfg.strategy = parse_strategy(value);
    else if (key == "epsilon") cfg.epsilon = parse_number(key, value);
    else if (key == "online_learning") {
      if (value != "true" && value != "false") throw ConfigError(key, "expected true or false");
      cfg.online_learning = value == "true";
    }
    else if (key == "q_table") cfg.q_table_path = path(value);
    else if (key == "svm_model") cfg.svm_model_path = path(value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_integer(key, value));
    else if (key == "alpha") cfg.alpha = parse_number(key, value);
    else if (key == "gamma") cfg.gamma = parse_number(key, value);
    else if (key == "z") cfg.z = parse_number(key, value);
    else if (key == "bins_f") cfg.bins.f = static_cast<int>(parse_integer(key, value));
    else if (key == "bins_df") cfg.bins.df = static_cast<int>(parse_integer(key, value));
    else if (key == "detector_threshold") cfg.detector_threshold = static_cast<int>(parse_integer(key, value));
    else if (key == "detector_factor") cfg.detector_factor = parse_number(key, value);
    else if (key == "host") {
      std::istringstream hs(value);
      std::string name, ip, mac, role;
      if (!(hs >> name >> ip >> mac >> role)) throw ConfigError(key, "expected: <name> <ipv4> <mac> <host|server>");
      if (role != "host" && role != "server") throw ConfigError(key, "role must be host or server");
      hosts.push_back({name, parse_mac(key, mac), parse_ipv4(key, ip), role == "host" ? HostRole::Host : HostRole::Server});
    }
    else if (key == "traffic") traffic_lines.push_back(value);
    else throw ConfigError(key, "unknown key");
  }
  if (!hosts.empty()) cfg.hosts = std::move(hosts);
  for (std::size_t i = 0; i < traffic_lines.size(); ++i)
    cfg.traffic.push_back(parse_traffic(traffic_lines[i], cfg.hosts, i));
  validate(cfg);
  return cfg;
}

inline ScenarioConfig load_config(const std::string& file)
{
  std::ifstream in(file);
  if (!in) throw ConfigError("", "cannot open config " + file);
  return parse_config(in, std::filesystem::path(file).parent_path());
}

} // namespace qdata
