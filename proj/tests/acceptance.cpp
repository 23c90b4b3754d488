// End-to-end acceptance checks. One PASS/FAIL line per check; the exit code
// is the number of failed checks.

#include "qdata/qdata.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace qdata;

namespace {

const std::string kConfigs = std::string(QDATA_SOURCE_DIR) + "/configs/";
constexpr std::array<std::uint64_t, 5> kSeeds{1, 2, 3, 4, 5};

struct Outcome
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ScenarioConfig desk(const std::string& load, Strategy s, std::uint64_t seed)
{
  ScenarioConfig cfg = load_config(kConfigs + "desk_" + load + ".conf");
  cfg.strategy = s;
  cfg.seed = seed;
  cfg.epsilon = 0.0;
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double mean_theta_from(const std::vector<MetricsRow>& rows, std::size_t first)
{
  double sum = 0;
  for (std::size_t i = first; i < rows.size(); ++i)
    sum += rows[i].mean_theta;
  return rows.size() > first ? sum / static_cast<double>(rows.size() - first) : 0.0;
}

int total_changes(const ScenarioResult& r)
{
  int n = 0;
  for (const auto& row : r.rows)
    n += row.scheme_changes;
  return n;
}

// Deterministic three-state chain with two actions.
struct Chain
{
  static constexpr std::array<std::array<int, 2>, 3> next{{{1, 2}, {0, 2}, {2, 0}}};
  static constexpr std::array<std::array<double, 2>, 3> reward{{{1.0, 0.0}, {0.0, 3.0}, {0.5, 2.0}}};
  int s = 0;

  int reset(std::uint64_t seed)
  {
    s = static_cast<int>(seed % 3);
    return s;
  }

  Transition step(int a)
  {
    const auto ua = static_cast<std::size_t>(a);
    const auto us = static_cast<std::size_t>(s);
    const Transition tr{reward[us][ua], next[us][ua]};
    s = tr.next_state;
    return tr;
  }
};

Outcome q_learning_oracle()
{
  const double gamma = 0.9;
  std::array<std::array<double, 2>, 3> star{};
  for (int it = 0; it < 5000; ++it) {
    auto n = star;
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t a = 0; a < 2; ++a) {
        const auto sn = static_cast<std::size_t>(Chain::next[s][a]);
        n[s][a] = Chain::reward[s][a] + gamma * std::max(star[sn][0], star[sn][1]);
      }
    star = n;
  }
  const auto t0 = std::chrono::steady_clock::now();
  Chain env;
  const auto res = train(QTable(3, 1, 2, 0.1, gamma), env, {1'000, 100, 0.2, 11});
  const double secs = seconds_since(t0);
  double err = 0;
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a)
      err = std::max(err, std::abs(res.q.at(s, a) - star[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]));
  return {err <= 1e-3 && secs < 5.0, fmt("sup|Q-Q*| = %.2e after 100000 steps in %.3f s", err, secs)};
}

Outcome reward_property()
{
  Rng rng(7);
  int bad = 0;
  for (int trial = 0; trial < 10'000; ++trial) {
    const int cap = 1 + static_cast<int>(uniform_below(rng, 50));
    FlowTable t(cap, 10'000);
    for (Ipv4Addr h = 0; h < 3; ++h)
      t.change_scheme(0x0a000101 + h, static_cast<SchemeId>(uniform_below(rng, kNumSchemes)));
    const int n = 1 + static_cast<int>(uniform_below(rng, 70));
    for (int i = 0; i < n; ++i) {
      PacketKey p;
      p.dst_ip = 0x0a000101 + static_cast<Ipv4Addr>(uniform_below(rng, 3));
      p.dst_mac = 0x100 | (p.dst_ip & 0xff);
      p.src_ip = 0x0a000001 + static_cast<Ipv4Addr>(uniform_below(rng, 5));
      p.src_mac = p.src_ip & 0xff;
      p.src_port = static_cast<std::uint16_t>(uniform_below(rng, 500));
      p.dst_port = uniform_below(rng, 2) ? 80 : 443;
      t.process_packet(p, 0);
    }
    double fields = 0;
    for (const auto& [key, e] : t.entries())
      fields += static_cast<double>(key.fields.size());
    const double brute = t.size() == cap ? 0.0 : fields / t.size();
    const double r = reward(t);
    const bool ok = std::abs(r - brute) < 1e-12 && (r == 0.0) == (t.size() == cap) && r >= 0 && r <= 8;
    bad += !ok;
  }
  return {bad == 0, fmt("%d of 10000 random tables disagree with the brute-force mean", bad)};
}

struct HighLoadRuns
{
  std::vector<ScenarioResult> fms, mmos, data, qdata;
  std::vector<double> qdata_secs;
};

const HighLoadRuns& high_load()
{
  static const HighLoadRuns runs = [] {
    HighLoadRuns r;
    for (auto seed : kSeeds) {
      r.fms.push_back(run_scenario(desk("high", Strategy::Fms, seed)));
      r.mmos.push_back(run_scenario(desk("high", Strategy::Mmos, seed)));
      r.data.push_back(run_scenario(desk("high", Strategy::Data, seed)));
      const auto t0 = std::chrono::steady_clock::now();
      r.qdata.push_back(run_scenario(desk("high", Strategy::QData, seed)));
      r.qdata_secs.push_back(seconds_since(t0));
    }
    return r;
  }();
  return runs;
}

Outcome overflow_safety()
{
  const auto& h = high_load();
  std::uint64_t late = 0;
  double worst = 0;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    for (std::size_t w = 2; w < h.qdata[i].rows.size(); ++w)
      late += h.qdata[i].rows[w].rejected;
    worst = std::max(worst, h.qdata_secs[i]);
  }
  return {late == 0 && worst < 30.0,
          fmt("qdata rejections after the second period: %llu over 5 seeds; slowest seed %.3f s",
              static_cast<unsigned long long>(late), worst)};
}

Outcome granularity_dominance()
{
  const auto& h = high_load();
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    const auto& d = h.data[i].rows;
    // DATA's post-cap stretch starts once it hits the cap or first reacts to it.
    std::size_t cap_row = d.size();
    for (std::size_t w = 0; w < d.size(); ++w)
      if (d[w].f >= 300 || d[w].scheme_changes > 0) {
        cap_row = w;
        break;
      }
    const double q = mean_theta_from(h.qdata[i].rows, 0);
    const double dp = mean_theta_from(d, cap_row);
    bool above_mmos = true;
    for (const auto& row : h.qdata[i].rows)
      above_mmos = above_mmos && row.mean_theta > 1.0;
    const bool seed_ok = cap_row < d.size() && q >= 1.5 * dp && above_mmos;
    ok = ok && seed_ok;
    detail += fmt("%sseed %llu: qdata %.3f vs data %.3f (x%.3f)", i ? "; " : "",
                  static_cast<unsigned long long>(kSeeds[i]), q, dp, dp > 0 ? q / dp : 0.0);
  }
  return {ok, detail};
}

Outcome fms_failure()
{
  const auto& h = high_load();
  bool ok = true;
  std::string detail = "first rejection at";
  for (const auto& r : h.fms) {
    Millis first = -1;
    for (const auto& row : r.rows)
      if (row.rejected > 0) {
        first = row.t;
        break;
      }
    ok = ok && first >= 0 && first <= 500'000 / 4;
    detail += fmt(" %.0fs", static_cast<double>(first) / 1000.0);
  }
  return {ok, detail};
}

Outcome scheme_change_pattern()
{
  const auto& h = high_load();
  const int low = total_changes(run_scenario(desk("low", Strategy::Data, 1)));
  const int medium = total_changes(run_scenario(desk("medium", Strategy::Data, 1)));
  bool high_ok = true;
  int data_high = 0, qdata_high = 0;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    const int d = total_changes(h.data[i]), q = total_changes(h.qdata[i]);
    high_ok = high_ok && d > 0 && q > 0;
    data_high += d;
    qdata_high += q;
  }
  return {low == 0 && medium == 0 && high_ok,
          fmt("data changes low %d, medium %d, high %d; qdata high %d", low, medium, data_high, qdata_high)};
}

Outcome packet_in_ordering()
{
  const auto& h = high_load();
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    const auto& fr = h.fms[i].rows;
    std::size_t last = fr.size() - 1;
    for (std::size_t w = 0; w < fr.size(); ++w)
      if (fr[w].rejected > 0) {
        last = w;
        break;
      }
    auto rate = [last](const ScenarioResult& r) {
      double n = 0;
      for (std::size_t w = 0; w <= last; ++w)
        n += static_cast<double>(r.rows[w].packet_in);
      return n / (static_cast<double>(last + 1) * 10.0);
    };
    const double m = rate(h.mmos[i]), q = rate(h.qdata[i]), f = rate(h.fms[i]);
    ok = ok && m < q && q < f;
    detail += fmt("%sseed %llu: %.1f < %.1f < %.1f /s", i ? "; " : "", static_cast<unsigned long long>(kSeeds[i]), m, q,
                  f);
  }
  return {ok, detail};
}

double gauss(Rng& rng)
{
  const double u1 = 1.0 - uniform_real(rng);
  const double u2 = uniform_real(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

std::vector<LabeledSample> clusters(int n, std::uint64_t seed)
{
  Rng rng(seed);
  std::vector<LabeledSample> out;
  for (int i = 0; i < n; ++i) {
    const bool good = i < n / 2;
    out.push_back({(good ? 900.0 : 2500.0) + 150 * gauss(rng), (good ? -20.0 : 120.0) + 40 * gauss(rng), good ? 1 : -1});
  }
  return out;
}

Outcome svm_quality()
{
  const auto train = clusters(400, 21), held_out = clusters(400, 22);
  const SvmModel a = train_svm(train, {1.0, 200, 5});
  const SvmModel b = train_svm(train, {1.0, 200, 5});
  int ok = 0;
  for (const auto& s : held_out)
    ok += (a.predict(s.f, s.delta_f) == Verdict::Good) == (s.sign > 0);
  const double acc = ok / 400.0;
  const bool same = a.w1 == b.w1 && a.w2 == b.w2 && a.b == b.b;
  return {acc >= 0.99 && same, fmt("held-out accuracy %.4f, retrain identical: %s", acc, same ? "yes" : "no")};
}

Outcome control_traces()
{
  constexpr HostId h1 = 1, h2 = 2, h3 = 3;
  const std::vector<DstFlows> census{{h1, 50}, {h2, 30}, {h3, 20}};
  const auto a = select_critical_hosts(census, 100, [](double fr, double) { return fr < 60 ? Verdict::Good : Verdict::Degraded; });
  const std::vector<DstFlows> single{{h1, 10}};
  const auto b = select_critical_hosts(single, 10, [](double, double) { return Verdict::Good; });
  ControlConfig cfg;
  cfg.f_cap = 300;
  cfg.idle_timeout = 10'000;
  const std::vector<HostRate> quiet{{h1, 10.0}}, busy{{h1, 30.0}};
  const bool admitted = select_fms_candidates(quiet, 100, cfg) == std::vector<HostId>{h1};
  const bool refused = select_fms_candidates(busy, 100, cfg).empty();
  const bool ok = a.hosts == std::vector<HostId>{h1} && b.hosts == std::vector<HostId>{h1} && admitted && refused;
  return {ok, fmt("H=[h1] %s, single host %s, 10/s admitted %s, 30/s refused %s", a.hosts.size() == 1 ? "yes" : "no",
                  b.hosts.size() == 1 ? "yes" : "no", admitted ? "yes" : "no", refused ? "yes" : "no")};
}

Outcome detection_trend()
{
  const auto& h = high_load();
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    const auto& m = h.mmos[i].detection;
    const auto& q = h.qdata[i].detection;
    ok = ok && m.dr_defined && m.dr == 0.0 && q.dr_defined && q.dr >= 0.8;
    detail += fmt("%sseed %llu: mmos Dr %.2f F %.3f, qdata Dr %.2f F %.3f (threshold %d)", i ? "; " : "",
                  static_cast<unsigned long long>(kSeeds[i]), m.dr, fitness(m), q.dr, fitness(q),
                  h.qdata[i].detector_threshold);
  }
  return {ok, detail};
}

Outcome determinism()
{
  int differing = 0, runs = 0;
  for (const char* load : {"low", "medium", "high"})
    for (auto s : {Strategy::Mmos, Strategy::Fms, Strategy::Data, Strategy::QData}) {
      std::ostringstream a, b;
      write_metrics_csv(a, run_scenario(desk(load, s, 3)).rows);
      write_metrics_csv(b, run_scenario(desk(load, s, 3)).rows);
      differing += a.str() != b.str();
      ++runs;
    }
  return {differing == 0, fmt("%d of %d scenario pairs differ", differing, runs)};
}

} // namespace

int main()
{
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks{
      {"q-learning matches value iteration", q_learning_oracle},
      {"reward equals brute-force mean theta", reward_property},
      {"qdata keeps the table below capacity", overflow_safety},
      {"qdata keeps finer granularity than data", granularity_dominance},
      {"fms rejects early at high load", fms_failure},
      {"scheme-change pattern across loads", scheme_change_pattern},
      {"packet_in ordering mmos < qdata < fms", packet_in_ordering},
      {"svm separates planted clusters", svm_quality},
      {"critical-host and restore traces", control_traces},
      {"mmos blinds the detector, qdata does not", detection_trend},
      {"identical seeds give identical metrics", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, checks[i].first, o.detail.c_str());
  }
  std::printf("%d of %zu acceptance checks failed\n", failed, checks.size());
  return failed;
}
