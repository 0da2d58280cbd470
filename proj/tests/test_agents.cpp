#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "jsonbag/agents.hpp"
#include "jsonbag/games/games.hpp"
#include "test_util.hpp"

using namespace jsonbag;
using namespace jsonbag::agents;
using namespace jsonbag::games;

namespace {

// Player 0 to move with three in column 0 and player 1 stacked on column 1.
Connect4::State immediate_win(const Connect4& g) {
  auto s = g.initial_state();
  for (int i = 0; i < 3; ++i) {
    g.step(s, 0);
    g.step(s, 1);
  }
  return s;
}

double policy_sum(const Policy& p) {
  double s = 0.0;
  for (const auto& [_, v] : p) s += v;
  return s;
}

}  // namespace

TEST(RandomAgent, UniformByChiSquare) {
  const Connect4 g;
  const auto s = g.initial_state();
  Rng rng(1);
  std::vector<int> counts(8, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(act_random(g, s, rng))];
  double chi2 = 0.0;
  const double expected = draws / 8.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // Upper 1% point of chi-square with 7 degrees of freedom.
  EXPECT_LT(chi2, 18.475);
}

TEST(RandomAgent, SingleActionAndDeterminism) {
  const Connect4 g(Connect4Params{1, 3, 4});
  const auto s = g.initial_state();
  Rng rng(2);
  EXPECT_EQ(act_random(g, s, rng), 0);
  const Connect4 big;
  Rng a(3), b(3);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(act_random(big, big.initial_state(), a), act_random(big, big.initial_state(), b));
}

TEST(Agents, TerminalStateIsAnError) {
  const Connect4 g;
  auto s = immediate_win(g);
  g.step(s, 0);
  Rng rng(4);
  EXPECT_THROW(act_random(g, s, rng), Error);
  EXPECT_THROW(act_osla(g, s, rng), Error);
  EXPECT_THROW(act_mcts(g, s, MctsConfig{}, rng), Error);
  EXPECT_THROW(extract_policy(random_agent(), g, s, rng), Error);
}

TEST(Osla, TakesTheWin) {
  const Connect4 g;
  const auto s = immediate_win(g);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(act_osla(g, s, rng), 0);
}

TEST(Osla, TakesTheBox) {
  const DotsAndBoxes g(DotsAndBoxesParams{3, 3});
  auto s = g.initial_state();
  const auto& e = g.box_edges(4);
  g.step(s, e[0]);
  g.step(s, e[1]);
  g.step(s, e[2]);
  Rng rng(6);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(act_osla(g, s, rng), e[3]);
}

TEST(Osla, UniformAmongEqualSuccessors) {
  const Connect4 g;
  const auto s = g.initial_state();
  Rng rng(7);
  std::vector<int> counts(8, 0);
  for (int i = 0; i < 10000; ++i) ++counts[static_cast<std::size_t>(act_osla(g, s, rng))];
  for (int c : counts) EXPECT_NEAR(c / 10000.0, 1.0 / 8.0, 0.05);
  Rng a(8), b(8);
  EXPECT_EQ(act_osla(g, s, a), act_osla(g, s, b));
}

TEST(Mcts, FindsImmediateWin) {
  const Connect4 g;
  const auto s = immediate_win(g);
  MctsConfig c;
  c.budget = 256;
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    wins += act_mcts(g, s, c, rng) == 0;
  }
  EXPECT_GE(wins, 95);
}

TEST(Mcts, BudgetOneIsLegal) {
  MctsConfig c;
  c.budget = 1;
  Rng rng(9);
  const Connect4 g;
  const auto legal = g.legal_actions(g.initial_state());
  for (int i = 0; i < 20; ++i) {
    const auto a = act_mcts(g, g.initial_state(), c, rng);
    EXPECT_NE(std::find(legal.begin(), legal.end(), a), legal.end());
  }
  c.budget = 0;
  EXPECT_THROW(act_mcts(g, g.initial_state(), c, rng), Error);
}

TEST(Mcts, SeededDeterminism) {
  const CantStop g;
  auto s = g.initial_state(3);
  g.step(s, CantStop::kRoll);
  MctsConfig c;
  c.budget = 64;
  Rng a(10), b(10);
  const auto ra = search_mcts(g, s, c, a);
  const auto rb = search_mcts(g, s, c, b);
  EXPECT_EQ(ra.visits, rb.visits);
  EXPECT_EQ(ra.best, rb.best);
  EXPECT_EQ(std::accumulate(ra.visits.begin(), ra.visits.end(), 0), 64);
}

TEST(Mcts, LargerBudgetHoldsItsOwnAgainstBudgetOne) {
  const auto strong = mcts_agent("MCTS64", 64);
  const auto weak = mcts_agent("MCTS1", 1);
  double score = 0.0;
  for (std::uint64_t g = 0; g < 100; ++g) {
    // Alternate seats.
    const bool first = g % 2 == 0;
    const std::vector<AgentSpec> seats = first ? std::vector{strong, weak} : std::vector{weak, strong};
    const auto t = play_game(default_spec(GameId::Connect4), seats, g);
    const int me = first ? 0 : 1;
    score += t.outcome.winner == kDraw ? 0.5 : (t.outcome.winner == me ? 1.0 : 0.0);
  }
  EXPECT_GE(score / 100.0, 0.5);
}

TEST(Policy, RandomNearUniform) {
  const Connect4 g;
  Rng rng(11);
  const auto p = extract_policy(random_agent(), g, g.initial_state(), rng, 100);
  EXPECT_NEAR(policy_sum(p), 1.0, 1e-12);
  for (int a = 0; a < 8; ++a) EXPECT_NEAR(p.count(a) ? p.at(a) : 0.0, 1.0 / 8.0, 0.15);
}

TEST(Policy, ValidOnRandomStates) {
  Rng rng(12);
  const DotsAndBoxes g;
  for (const auto& agent : default_roster()) {
    auto s = g.initial_state();
    for (int i = 0; i < 20 && !g.is_terminal(s); ++i) {
      const auto legal = g.legal_actions(s);
      const auto p = extract_policy(agent, g, s, rng, 100);
      EXPECT_NEAR(policy_sum(p), 1.0, 1e-9) << agent.name;
      for (const auto& [a, v] : p) {
        EXPECT_TRUE(std::binary_search(legal.begin(), legal.end(), a));
        EXPECT_GT(v, 0.0);
      }
      g.step(s, legal[uniform_index(rng, legal.size())]);
    }
  }
}

TEST(Policy, SameSampledPoliciesHaveZeroDistance) {
  const Connect4 g;
  Rng rng(13);
  const auto p = extract_policy(osla_agent(), g, g.initial_state(), rng);
  EXPECT_EQ(js_distance(p, p), 0.0);
}

TEST(Softmax, VisitCounts) {
  const std::vector<double> v{90.0, 10.0};
  const auto p = softmax(v);
  EXPECT_NEAR(p[1], std::exp(10.0) / (std::exp(90.0) + std::exp(10.0)), 1e-45);
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
  const std::vector<double> flat{3.0, 3.0, 3.0};
  for (double x : softmax(flat)) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);
  const auto warm = softmax(v, 100.0);
  EXPECT_NEAR(warm[0], 1.0 / (1.0 + std::exp(-0.8)), 1e-12);
}

TEST(Roster, DefaultAndJson) {
  const auto roster = default_roster();
  ASSERT_EQ(roster.size(), 5u);
  std::vector<std::string> names;
  for (const auto& a : roster) {
    names.push_back(a.name);
    const auto back = agent_from_json(to_json(a));
    EXPECT_EQ(back.name, a.name);
    EXPECT_EQ(back.type, a.type);
    EXPECT_EQ(back.mcts.budget, a.mcts.budget);
    EXPECT_EQ(back.mcts.exploration, a.mcts.exploration);
  }
  EXPECT_EQ(names, (std::vector<std::string>{"Random", "OSLA", "MCTS64", "MCTS256", "MCTS64-C0.3"}));
  EXPECT_THROW(parse_agent_type("minimax"), Error);
}

TEST(Agents, EveryActIsLegalOverFullPlayouts) {
  Rng rng(14);
  const std::vector<AgentSpec> cheap = {random_agent(), osla_agent(), mcts_agent("M8", 8)};
  for (const auto& a : cheap) {
    for (auto id : {GameId::Connect4, GameId::DotsAndBoxes, GameId::CantStop}) {
      auto spec = default_spec(id, rng());
      if (id == GameId::DotsAndBoxes) spec.params = DotsAndBoxesParams{3, 3};
      const std::vector<AgentSpec> seats(static_cast<std::size_t>(spec.players), a);
      // run_game throws on any illegal action.
      const auto t = play_game(spec, seats, rng());
      EXPECT_GT(t.decisions, 0);
    }
  }
}
