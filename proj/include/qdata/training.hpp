#pragma once

#include "qdata/config.hpp"
#include "qdata/control.hpp"
#include "qdata/qlearning.hpp"
#include "qdata/rng.hpp"
#include "qdata/scenario.hpp"
#include "qdata/svm.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace qdata {

// A randomized benign + attack scenario over base's topology and timing.
// The benign rate is drawn around the critical rate f_cap / idle_timeout.
inline ScenarioConfig random_mixture(const ScenarioConfig& base, std::uint64_t seed)
{
  ScenarioConfig cfg = base;
  cfg.seed = seed;
  cfg.traffic.clear();
  Rng rng(mix64(seed, 0x313));

  std::vector<Host> hosts, servers;
  for (const auto& h : cfg.hosts)
    (h.role == HostRole::Server ? servers : hosts).push_back(h);
  if (servers.empty()) servers = cfg.hosts;
  if (hosts.empty()) hosts = cfg.hosts;

  const double idle_s = static_cast<double>(cfg.idle_timeout) / 1000.0;
  const double critical = cfg.f_cap / idle_s;

  TrafficSpec benign;
  benign.kind = TrafficKind::Benign;
  benign.rate = critical * (0.2 + 1.1 * uniform_real(rng));
  benign.start = 0;
  benign.end = cfg.duration;
  benign.sources = hosts;
  benign.targets = servers;
  benign.seed = 0;
  cfg.traffic.push_back(benign);

  if (uniform_real(rng) < 0.5) {
    TrafficSpec attack;
    static constexpr TrafficKind kinds[] = {TrafficKind::SynFlood, TrafficKind::PortScan, TrafficKind::SlowDos};
    attack.kind = kinds[uniform_below(rng, 3)];
    attack.rate = critical * (0.1 + 0.9 * uniform_real(rng));
    const Millis span = cfg.duration / cfg.observation_period;
    const Millis a = static_cast<Millis>(uniform_below(rng, static_cast<std::uint64_t>(span)));
    const Millis b = static_cast<Millis>(uniform_below(rng, static_cast<std::uint64_t>(span)));
    attack.start = std::min(a, b) * cfg.observation_period;
    attack.end = (std::max(a, b) + 1) * cfg.observation_period;
    attack.sources = {hosts[uniform_below(rng, hosts.size())]};
    attack.targets = {servers[uniform_below(rng, servers.size())]};
    attack.seed = 1;
    cfg.traffic.push_back(attack);
  }
  return cfg;
}

// FMS-pinned runs over random mixtures, labeled by look-ahead rejections.
inline std::vector<LabeledSample> svm_training_set(const ScenarioConfig& base, int runs, int horizon,
                                                   std::uint64_t seed)
{
  std::vector<LabeledSample> out;
  for (int i = 0; i < runs; ++i) {
    auto labeled = label_harness(random_mixture(base, mix64(seed, 0x5e1, static_cast<std::uint64_t>(i))), horizon);
    out.insert(out.end(), labeled.begin(), labeled.end());
  }
  return out;
}

inline SvmModel train_svm_from_mixtures(const ScenarioConfig& base, int runs, int horizon, const SvmOptions& opt)
{
  const auto samples = svm_training_set(base, runs, horizon, opt.seed);
  return train_svm(samples, opt);
}

// The simulated switch as a Q-learning environment. States are the
// observations at which the workflow asks the policy for a scheme; the
// periods in between run the rest of the workflow unattended. The reward of
// an action is the period reward of the observation right after it. Without
// a predictor every observation is a decision over all census hosts.
class QDataEnv
{
public:
  QDataEnv(ScenarioConfig base, std::optional<SvmModel> svm) : base_(std::move(base)), svm_(std::move(svm)) {}

  int reset(std::uint64_t seed)
  {
    seed_ = seed;
    restarts_ = 0;
    start();
    seek_decision();
    return state_of(obs_);
  }

  Transition step(int action)
  {
    for (HostId h : pending_)
      sim_->table().change_scheme(h, action);
    advance();
    const double r = obs_.f > 0 ? period_reward(sim_->table()) : 0.0;
    plan();
    seek_decision();
    return {r, state_of(obs_)};
  }

  const Observation& observation() const noexcept { return obs_; }
  const std::vector<HostId>& pending() const noexcept { return pending_; }

private:
  void start()
  {
    cfg_ = random_mixture(base_, mix64(seed_, restarts_++));
    sim_ = std::make_unique<Simulator>(cfg_, kFms);
    advance();
    plan();
  }

  void advance()
  {
    if (sim_->done()) {
      cfg_ = random_mixture(base_, mix64(seed_, restarts_++));
      sim_ = std::make_unique<Simulator>(cfg_, kFms);
    }
    obs_ = sim_->advance();
  }

  void plan()
  {
    FlowTable& table = sim_->table();
    pending_.clear();
    if (obs_.f == 0) return;
    if (svm_) {
      qdata_plan(obs_, table, *svm_, control_config(cfg_), pending_);
      return;
    }
    for (const auto& d : table.census().hosts)
      pending_.push_back(d.host);
  }

  void seek_decision()
  {
    while (pending_.empty()) {
      advance();
      plan();
    }
  }

  // An empty table is binned with the lowest occupied row.
  int state_of(const Observation& obs) const
  {
    Observation o = obs;
    o.f = std::max(o.f, 1);
    const StateIndex s = bin_state(o, cfg_.f_cap, cfg_.bins);
    return s.f_bin * cfg_.bins.df + s.df_bin;
  }

  ScenarioConfig base_;
  ScenarioConfig cfg_;
  std::optional<SvmModel> svm_;
  std::unique_ptr<Simulator> sim_;
  Observation obs_;
  std::vector<HostId> pending_;
  std::uint64_t seed_ = 0;
  std::uint64_t restarts_ = 0;
};

inline TrainResult train_q(const ScenarioConfig& base, const std::optional<SvmModel>& svm, const TrainOptions& opt)
{
  QDataEnv env(base, svm);
  return train(QTable(base.bins, base.alpha, base.gamma), env, opt);
}

} // namespace qdata
