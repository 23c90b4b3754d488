#pragma once

#include "qdata/flow_table.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

namespace qdata {

struct DetectionOutcome
{
  double dr = 0; // detection rate
  double ac = 0; // accuracy
  double fa = 0; // false alarm rate
  bool dr_defined = true; // false when there were no attack windows
};

struct FitnessWeights
{
  double dr = 1.0 / 3.0;
  double ac = 1.0 / 3.0;
  double fa = 1.0 / 3.0;
};

inline double fitness(const DetectionOutcome& out, const FitnessWeights& w = {})
{
  return w.dr * out.dr + w.ac * out.ac + w.fa * std::exp(-out.fa);
}

// A signature is the source side of an entry's key plus the service it
// targets: source MAC, source IP, protocol and destination port as far as the
// entry matches them. Ephemeral source ports carry no host identity and are
// dropped, so benign clients contribute a handful of signatures per server,
// spoofed floods one per packet, and MAC-only entries exactly one.
inline PacketKey signature(const MatchKey& key)
{
  PacketKey s;
  s.src_mac = key.values.src_mac;
  s.src_ip = key.values.src_ip;
  s.proto = key.values.proto;
  s.dst_port = key.values.dst_port;
  return s;
}

// Largest number of distinct signatures toward one destination.
inline int max_signatures_per_destination(const FlowTable& table)
{
  std::map<HostId, std::set<PacketKey>> sigs;
  for (const auto& [key, e] : table.entries())
    sigs[e.dst_host].insert(signature(key));
  int best = 0;
  for (const auto& [h, set] : sigs)
    best = std::max(best, static_cast<int>(set.size()));
  return best;
}

// Stand-in anomaly detector over per-window flow statistics: a window is
// flagged when some destination shows more than threshold distinct signatures.
inline DetectionOutcome baseline_detector(std::span<const int> max_signatures, const std::vector<bool>& attack_truth,
                                          int threshold)
{
  if (max_signatures.size() != attack_truth.size()) throw std::invalid_argument("statistics/truth length mismatch");
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
  for (std::size_t i = 0; i < max_signatures.size(); ++i) {
    const bool flagged = max_signatures[i] > threshold;
    if (attack_truth[i]) (flagged ? tp : fn)++;
    else (flagged ? fp : tn)++;
  }
  DetectionOutcome out;
  const std::size_t total = tp + fn + fp + tn;
  out.dr_defined = tp + fn > 0;
  out.dr = out.dr_defined ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  out.fa = fp + tn > 0 ? static_cast<double>(fp) / static_cast<double>(fp + tn) : 0.0;
  out.ac = total > 0 ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
  return out;
}

} // namespace qdata
