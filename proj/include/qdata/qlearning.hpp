#pragma once

#include "qdata/flow_table.hpp"
#include "qdata/match_schemes.hpp"
#include "qdata/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdata {

struct StateIndex
{
  int f_bin = 0;
  int df_bin = 0;

  friend bool operator==(const StateIndex&, const StateIndex&) = default;
};

struct StateBins
{
  int f = 30;
  int df = 21;
};

// Maps (f, delta_f) in (0, f_cap] x [-f_cap, f_cap] onto a bins.f x bins.df grid.
inline StateIndex bin_state(const Observation& obs, int f_cap, StateBins bins = {})
{
  if (obs.f <= 0 || obs.f > f_cap) throw std::out_of_range("state outside S_i");
  const long df = std::clamp<long>(obs.delta_f, -f_cap, f_cap);
  StateIndex s;
  s.f_bin = static_cast<int>((static_cast<long>(obs.f) - 1) * bins.f / f_cap);
  s.df_bin = static_cast<int>((df + f_cap) * bins.df / (2L * f_cap + 1));
  return s;
}

// Dense state x action value table. States are flattened row-major over
// (f_bin, df_bin).
class QTable
{
public:
  QTable(int bins_f, int bins_df, int actions = static_cast<int>(kNumSchemes), double alpha = 0.1,
         double gamma = 0.9)
      : bins_f_(bins_f), bins_df_(bins_df), actions_(actions), alpha_(alpha), gamma_(gamma)
  {
    if (bins_f <= 0 || bins_df <= 0 || actions <= 0) throw std::invalid_argument("q-table dimensions must be positive");
    if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (!(gamma >= 0 && gamma < 1)) throw std::invalid_argument("gamma must lie in [0, 1)");
    values_.assign(static_cast<std::size_t>(bins_f) * bins_df * actions, 0.0);
  }

  explicit QTable(StateBins bins, double alpha = 0.1, double gamma = 0.9)
      : QTable(bins.f, bins.df, static_cast<int>(kNumSchemes), alpha, gamma)
  {
  }

  int bins_f() const noexcept { return bins_f_; }
  int bins_df() const noexcept { return bins_df_; }
  StateBins bins() const noexcept { return {bins_f_, bins_df_}; }
  int num_states() const noexcept { return bins_f_ * bins_df_; }
  int num_actions() const noexcept { return actions_; }
  double alpha() const noexcept { return alpha_; }
  double gamma() const noexcept { return gamma_; }

  int state(StateIndex s) const
  {
    if (s.f_bin < 0 || s.f_bin >= bins_f_ || s.df_bin < 0 || s.df_bin >= bins_df_)
      throw std::out_of_range("state index out of range");
    return s.f_bin * bins_df_ + s.df_bin;
  }

  double& at(int state, int action) { return values_[offset(state, action)]; }
  double at(int state, int action) const { return values_[offset(state, action)]; }

  std::span<const double> row(int state) const
  {
    return std::span<const double>(values_).subspan(offset(state, 0), static_cast<std::size_t>(actions_));
  }

  // Argmax with ties going to the lowest action id.
  int greedy(int state) const
  {
    const auto r = row(state);
    return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }

  double max_value(int state) const
  {
    const auto r = row(state);
    return *std::max_element(r.begin(), r.end());
  }

  std::span<const double> values() const noexcept { return values_; }

  // Text grid: a "qtable <bins_f> <bins_df> <actions> <alpha> <gamma>" header,
  // then one line of action values per state.
  void save(std::ostream& os) const
  {
    os << std::setprecision(17) << "qtable " << bins_f_ << ' ' << bins_df_ << ' ' << actions_ << ' ' << alpha_ << ' '
       << gamma_ << '\n';
    for (int s = 0; s < num_states(); ++s) {
      for (int a = 0; a < actions_; ++a)
        os << (a ? " " : "") << at(s, a);
      os << '\n';
    }
  }

  static QTable load(std::istream& is)
  {
    std::string tag;
    int bf = 0, bdf = 0, na = 0;
    double alpha = 0, gamma = 0;
    if (!(is >> tag >> bf >> bdf >> na >> alpha >> gamma) || tag != "qtable")
      throw std::runtime_error("malformed q-table header");
    QTable q(bf, bdf, na, alpha, gamma);
    for (auto& v : q.values_) {
      if (!(is >> v) || !std::isfinite(v)) throw std::runtime_error("malformed q-table body");
    }
    return q;
  }

  static QTable load_file(const std::string& path)
  {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open q-table " + path);
    return load(in);
  }

  void save_file(const std::string& path) const
  {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write q-table " + path);
    save(out);
  }

private:
  std::size_t offset(int state, int action) const
  {
    if (state < 0 || state >= num_states() || action < 0 || action >= actions_)
      throw std::out_of_range("q-table access out of range");
    return static_cast<std::size_t>(state) * actions_ + action;
  }

  int bins_f_;
  int bins_df_;
  int actions_;
  double alpha_;
  double gamma_;
  std::vector<double> values_;
};

// Average number of enabled match fields per entry; zero on a full table.
inline double reward(const FlowTable& table)
{
  if (table.size() == 0) throw std::domain_error("reward undefined on empty table");
  if (table.full()) return 0.0;
  return static_cast<double>(table.total_theta()) / table.size();
}

// Reward credited to the action taken at the start of the period that just
// closed: nothing if the table ran full at any point during that period.
inline double period_reward(const FlowTable& table)
{
  return table.last_period().saturated ? 0.0 : reward(table);
}

inline int select_action(const QTable& q, int state, double epsilon, Rng& rng)
{
  if (!(epsilon >= 0 && epsilon <= 1)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (epsilon > 0 && uniform_real(rng) < epsilon)
    return static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(q.num_actions())));
  return q.greedy(state);
}

// One-step Q-learning backup; returns the new Q(s, a).
inline double update(QTable& q, int s, int a, double r, int s_next)
{
  double& v = q.at(s, a);
  v += q.alpha() * (r + q.gamma() * q.max_value(s_next) - v);
  return v;
}

struct Transition
{
  double reward = 0;
  int next_state = 0;
};

// An environment exposes reset(seed) -> initial state and step(action) -> Transition.
template <class Env>
concept QEnvironment = requires(Env env, std::uint64_t seed, int action) {
  { env.reset(seed) } -> std::convertible_to<int>;
  { env.step(action) } -> std::convertible_to<Transition>;
};

struct TrainOptions
{
  int episodes = 100;
  int steps_per_episode = 50;
  double epsilon = 0.8;
  std::uint64_t seed = 0;
};

struct TrainResult
{
  QTable q;
  std::vector<double> episode_reward; // cumulative reward per episode
};

// Tabular Q-learning with an epsilon-greedy behaviour policy. q carries the
// shape, alpha and gamma; its initial values are the arbitrary starting point.
template <QEnvironment Env>
TrainResult train(QTable q, Env& env, const TrainOptions& opt)
{
  Rng rng(opt.seed);
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(std::max(0, opt.episodes)));
  for (int ep = 0; ep < opt.episodes; ++ep) {
    int s = env.reset(mix64(opt.seed, static_cast<std::uint64_t>(ep)));
    double total = 0;
    for (int step = 0; step < opt.steps_per_episode; ++step) {
      const int a = select_action(q, s, opt.epsilon, rng);
      const Transition tr = env.step(a);
      update(q, s, a, tr.reward, tr.next_state);
      total += tr.reward;
      s = tr.next_state;
    }
    curve.push_back(total);
  }
  return {std::move(q), std::move(curve)};
}

inline void write_training_curve(std::ostream& os, std::span<const double> curve)
{
  os << "episode,cumulative_reward\n" << std::setprecision(10);
  for (std::size_t i = 0; i < curve.size(); ++i)
    os << i << ',' << curve[i] << '\n';
}

// Deployed policy with the online backup of the previous decision: the
// reward for an action is collected at the observation that follows it.
class OnlineAgent
{
public:
  OnlineAgent(QTable q, int f_cap, double epsilon = 0.0, bool learn = true, std::uint64_t seed = 0)
      : q_(std::move(q)), f_cap_(f_cap), epsilon_(epsilon), learn_(learn), rng_(seed)
  {
    if (!(epsilon >= 0 && epsilon <= 1)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  }

  const QTable& table() const noexcept { return q_; }
  int f_cap() const noexcept { return f_cap_; }
  bool pending() const noexcept { return pending_.has_value(); }

  // Settles the outstanding backup, if any, against the new observation.
  void feedback(const Observation& obs, double r)
  {
    if (!pending_) return;
    if (learn_ && obs.f > 0) update(q_, pending_->state, pending_->action, r, state_of(obs));
    pending_.reset();
  }

  int choose(const Observation& obs)
  {
    const int s = state_of(obs);
    const int a = select_action(q_, s, epsilon_, rng_);
    pending_ = Decision{s, a};
    return a;
  }

  int state_of(const Observation& obs) const
  {
    return q_.state(bin_state(obs, f_cap_, q_.bins()));
  }

private:
  struct Decision
  {
    int state;
    int action;
  };

  QTable q_;
  int f_cap_;
  double epsilon_;
  bool learn_;
  Rng rng_;
  std::optional<Decision> pending_;
};

// Applies pi*(s) to every host in hosts; returns the applied action.
template <class HostRange>
int act_online(OnlineAgent& agent, const Observation& obs, const HostRange& hosts, FlowTable& table)
{
  if (std::ranges::empty(hosts)) throw std::invalid_argument("no target hosts");
  const int a = agent.choose(obs);
  for (HostId h : hosts)
    table.change_scheme(h, a);
  return a;
}

} // namespace qdata
