#include "qdata/qlearning.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <sstream>

using namespace qdata;

namespace {

PacketKey flow(Ipv4Addr dst, std::uint16_t sport, Ipv4Addr src = 0x0a000001)
{
  PacketKey p;
  p.src_mac = src & 0xff;
  p.dst_mac = 0x100 | (dst & 0xff);
  p.src_ip = src;
  p.dst_ip = dst;
  p.proto = IpProto::Tcp;
  p.src_port = sport;
  p.dst_port = 80;
  return p;
}

// Puts n distinct flows toward dst under the scheme in force for dst.
void fill(FlowTable& t, Ipv4Addr dst, int n, std::uint16_t first_port = 1000)
{
  for (int i = 0; i < n; ++i)
    t.process_packet(flow(dst, static_cast<std::uint16_t>(first_port + i), 0x0a000001 + static_cast<Ipv4Addr>(i)), 0);
}

// Three states, two actions, deterministic transitions and rewards.
struct Chain
{
  static constexpr int kStates = 3, kActions = 2;
  static constexpr std::array<std::array<int, kActions>, kStates> next{{{1, 0}, {2, 0}, {2, 1}}};
  static constexpr std::array<std::array<double, kActions>, kStates> reward{{{0.0, 1.0}, {0.0, 0.5}, {2.0, 0.0}}};

  int s = 0;

  int reset(std::uint64_t seed)
  {
    s = static_cast<int>(seed % kStates);
    return s;
  }

  Transition step(int a)
  {
    const Transition tr{reward[s][a], next[s][a]};
    s = tr.next_state;
    return tr;
  }
};

// Value iteration on the known model.
std::array<std::array<double, 2>, 3> value_iteration(double gamma)
{
  std::array<std::array<double, 2>, 3> q{};
  for (int it = 0; it < 2000; ++it) {
    auto nq = q;
    for (int s = 0; s < 3; ++s)
      for (int a = 0; a < 2; ++a) {
        const int n = Chain::next[s][a];
        nq[s][a] = Chain::reward[s][a] + gamma * std::max(q[n][0], q[n][1]);
      }
    q = nq;
  }
  return q;
}

} // namespace

TEST(BinState, Corners)
{
  EXPECT_EQ(bin_state({1, -300, 0}, 300), (StateIndex{0, 0}));
  EXPECT_EQ(bin_state({300, 300, 0}, 300), (StateIndex{29, 20}));
  EXPECT_EQ(bin_state({150, 0, 0}, 300).f_bin, 14);
  EXPECT_EQ(bin_state({150, 0, 0}, 300).df_bin, 10);
}

TEST(BinState, CoversEveryCellExactlyOnce)
{
  std::vector<int> f_hits(30), df_hits(21);
  for (int f = 1; f <= 300; ++f)
    ++f_hits[bin_state({f, 0, 0}, 300).f_bin];
  for (int df = -300; df <= 300; ++df)
    ++df_hits[bin_state({1, df, 0}, 300).df_bin];
  for (int n : f_hits)
    EXPECT_EQ(n, 10);
  for (int n : df_hits)
    EXPECT_GT(n, 0);
}

TEST(BinState, RejectsEmptyAndOverfull)
{
  EXPECT_THROW(bin_state({0, 0, 0}, 300), std::out_of_range);
  EXPECT_THROW(bin_state({301, 0, 0}, 300), std::out_of_range);
}

TEST(Reward, AllFullMatchIsEight)
{
  FlowTable t(300, 10'000);
  fill(t, 0x0a000101, 10);
  EXPECT_DOUBLE_EQ(reward(t), 8.0);
}

TEST(Reward, UniformSchemeGivesItsTheta)
{
  FlowTable t(300, 10'000, 3);
  for (Ipv4Addr src = 1; src <= 5; ++src)
    t.process_packet(flow(0x0a000101, 1000, 0x0a000000 + src), 0);
  ASSERT_EQ(t.size(), 5); // one {D,S,V} key per source MAC
  EXPECT_DOUBLE_EQ(reward(t), 3.0);
}

TEST(Reward, MixedEntriesAverage)
{
  FlowTable t(300, 10'000);
  t.change_scheme(0x0a000101, kMmos);
  t.change_scheme(0x0a000102, 7);
  t.process_packet(flow(0x0a000101, 1), 0);
  t.process_packet(flow(0x0a000102, 1), 0);
  ASSERT_EQ(t.total_theta(), 1 + 5);
  EXPECT_DOUBLE_EQ(reward(t), 3.0);
}

TEST(Reward, ZeroOnFullTable)
{
  FlowTable t(5, 10'000);
  fill(t, 0x0a000101, 5);
  EXPECT_EQ(reward(t), 0.0);
}

TEST(Reward, UndefinedOnEmptyTable)
{
  FlowTable t(5, 10'000);
  EXPECT_THROW(reward(t), std::domain_error);
}

TEST(Reward, SaturatedPeriodEarnsNothing)
{
  FlowTable t(5, 10'000);
  fill(t, 0x0a000101, 5);
  t.change_scheme(0x0a000101, kMmos, flow(0x0a000101, 1), 0);
  t.observe(10'000);
  EXPECT_DOUBLE_EQ(reward(t), 1.0);
  EXPECT_EQ(period_reward(t), 0.0);
}

// Random mixtures of schemes: the reward is the entry-weighted mean of theta,
// in [1, 8] below capacity and 0 at capacity.
TEST(Reward, RandomTablesMatchDirectCount)
{
  Rng rng(2024);
  for (int trial = 0; trial < 10'000; ++trial) {
    const int cap = 1 + static_cast<int>(uniform_below(rng, 60));
    FlowTable t(cap, 10'000);
    const int hosts = 1 + static_cast<int>(uniform_below(rng, 4));
    for (int h = 0; h < hosts; ++h)
      t.change_scheme(0x0a000101 + static_cast<Ipv4Addr>(h), static_cast<SchemeId>(uniform_below(rng, 9)));
    const int packets = 1 + static_cast<int>(uniform_below(rng, 80));
    for (int i = 0; i < packets; ++i) {
      const auto dst = 0x0a000101 + static_cast<Ipv4Addr>(uniform_below(rng, static_cast<std::uint64_t>(hosts)));
      const auto src = 0x0a000001 + static_cast<Ipv4Addr>(uniform_below(rng, 5));
      t.process_packet(flow(dst, static_cast<std::uint16_t>(uniform_below(rng, 1000)), src), 0);
    }
    ASSERT_GT(t.size(), 0);
    double sum = 0;
    for (const auto& [key, e] : t.entries())
      sum += static_cast<double>(key.fields.size());
    const double r = reward(t);
    if (t.full()) {
      ASSERT_EQ(r, 0.0);
    } else {
      ASSERT_NEAR(r, sum / t.size(), 1e-12);
      ASSERT_GE(r, 1.0);
      ASSERT_LE(r, 8.0);
    }
  }
}

TEST(SelectAction, GreedyWithLowestIdTies)
{
  QTable q(StateBins{});
  Rng rng(1);
  EXPECT_EQ(select_action(q, 0, 0.0, rng), 0);
  q.at(0, 4) = 2.0;
  q.at(0, 7) = 2.0;
  EXPECT_EQ(select_action(q, 0, 0.0, rng), 4);
}

TEST(SelectAction, FullExplorationIsUniform)
{
  QTable q(StateBins{});
  q.at(0, 3) = 100.0;
  Rng rng(99);
  std::array<int, 9> counts{};
  const int n = 10'000;
  for (int i = 0; i < n; ++i)
    ++counts[static_cast<std::size_t>(select_action(q, 0, 1.0, rng))];
  const double p = 1.0 / 9, sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts)
    EXPECT_NEAR(c, n * p, 3 * sigma);
}

TEST(SelectAction, RejectsBadEpsilon)
{
  QTable q(StateBins{});
  Rng rng(0);
  EXPECT_THROW(select_action(q, 0, 1.5, rng), std::invalid_argument);
  EXPECT_THROW(select_action(q, 0, -0.1, rng), std::invalid_argument);
}

TEST(Update, SingleBackups)
{
  QTable q(StateBins{});
  EXPECT_DOUBLE_EQ(update(q, 0, 0, 8.0, 1), 0.8);
  q.at(5, 2) = 1.0;
  EXPECT_DOUBLE_EQ(update(q, 5, 2, 10.0, 9), 1.9);
  q.at(7, 0) = 2.0;
  EXPECT_DOUBLE_EQ(update(q, 6, 1, 0.0, 7), 0.1 * 0.9 * 2.0);
}

TEST(Update, ZeroLearningRateLeavesValue)
{
  QTable q(30, 21, 9, 0.0, 0.9);
  q.at(3, 3) = 4.2;
  q.at(4, 0) = 100.0;
  EXPECT_EQ(update(q, 3, 3, 8.0, 4), 4.2);
}

TEST(Train, ConvergesToValueIterationOracle)
{
  Chain env;
  QTable q(3, 1, 2, 0.1, 0.9);
  const auto res = train(q, env, {1'000, 100, 0.2, 5});
  const auto oracle = value_iteration(0.9);
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a)
      EXPECT_NEAR(res.q.at(s, a), oracle[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)], 1e-3) << s << ',' << a;
    const auto& row = oracle[static_cast<std::size_t>(s)];
    EXPECT_EQ(res.q.greedy(s), row[1] > row[0] ? 1 : 0);
  }
  EXPECT_EQ(res.episode_reward.size(), 1'000u);
}

TEST(Train, ZeroLearningRateKeepsZeros)
{
  Chain env;
  const auto res = train(QTable(3, 1, 2, 0.0, 0.9), env, {50, 20, 0.8, 1});
  for (double v : res.q.values())
    EXPECT_EQ(v, 0.0);
}

TEST(Train, DeterministicGivenSeed)
{
  Chain a, b;
  const auto ra = train(QTable(3, 1, 2), a, {30, 30, 0.5, 77});
  const auto rb = train(QTable(3, 1, 2), b, {30, 30, 0.5, 77});
  EXPECT_TRUE(std::ranges::equal(ra.q.values(), rb.q.values()));
  EXPECT_EQ(ra.episode_reward, rb.episode_reward);
}

TEST(QTableIo, RoundTripIsExact)
{
  QTable q(StateBins{}, 0.25, 0.5);
  Rng rng(3);
  for (int s = 0; s < q.num_states(); ++s)
    for (int a = 0; a < q.num_actions(); ++a)
      q.at(s, a) = uniform_real(rng) * 10 - 5;
  std::stringstream ss;
  q.save(ss);
  const QTable r = QTable::load(ss);
  EXPECT_EQ(r.bins_f(), 30);
  EXPECT_EQ(r.bins_df(), 21);
  EXPECT_EQ(r.alpha(), 0.25);
  EXPECT_EQ(r.gamma(), 0.5);
  EXPECT_TRUE(std::ranges::equal(q.values(), r.values()));
}

TEST(QTableIo, MalformedInput)
{
  std::istringstream bad_tag("table 1 1 1 0.1 0.9 0");
  EXPECT_THROW(QTable::load(bad_tag), std::runtime_error);
  std::istringstream short_body("qtable 2 1 2 0.1 0.9 1 2 3");
  EXPECT_THROW(QTable::load(short_body), std::runtime_error);
  EXPECT_THROW(QTable(0, 1, 1), std::invalid_argument);
  EXPECT_THROW(QTable(1, 1, 1, 0.1, 1.0), std::invalid_argument);
}

TEST(OnlineAgent, AppliesGreedyActionToEveryHost)
{
  QTable q(StateBins{});
  const Observation obs{300, 300, 10'000};
  const int s = q.state(bin_state(obs, 300));
  q.at(s, 7) = 5.0;
  OnlineAgent agent(q, 300);
  FlowTable t(300, 10'000);
  fill(t, 0x0a000101, 20);
  fill(t, 0x0a000102, 20);
  const std::vector<HostId> hosts{0x0a000101, 0x0a000102};
  EXPECT_EQ(act_online(agent, obs, hosts, t), 7);
  EXPECT_EQ(t.scheme_for(0x0a000101), 7);
  EXPECT_EQ(t.scheme_for(0x0a000102), 7);
  EXPECT_EQ(t.scheme_for(0x0a000103), kFms);
  EXPECT_TRUE(agent.pending());
}

TEST(OnlineAgent, NoTargetHostsIsAnError)
{
  OnlineAgent agent(QTable(StateBins{}), 300);
  FlowTable t(300, 10'000);
  const std::vector<HostId> none;
  try {
    act_online(agent, {10, 0, 0}, none, t);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "no target hosts");
  }
}

TEST(OnlineAgent, FeedbackBacksUpThePreviousDecision)
{
  OnlineAgent agent(QTable(StateBins{}), 300);
  const Observation first{300, 300, 10'000};
  const int a = agent.choose(first);
  EXPECT_EQ(a, 0);
  agent.feedback({200, -100, 20'000}, 7.5);
  EXPECT_FALSE(agent.pending());
  EXPECT_DOUBLE_EQ(agent.table().at(agent.state_of(first), a), 0.75);
  // Without a pending decision feedback does nothing.
  agent.feedback({200, 0, 30'000}, 7.5);
  EXPECT_DOUBLE_EQ(agent.table().at(agent.state_of(first), a), 0.75);
}

TEST(OnlineAgent, FrozenAgentDoesNotLearn)
{
  OnlineAgent agent(QTable(StateBins{}), 300, 0.0, false);
  const Observation first{300, 300, 10'000};
  agent.choose(first);
  agent.feedback({200, -100, 20'000}, 7.5);
  for (double v : agent.table().values())
    EXPECT_EQ(v, 0.0);
}
