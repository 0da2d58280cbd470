#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "jsonbag/common.hpp"
#include "jsonbag/distance_metrics.hpp"
#include "jsonbag/games/games.hpp"

namespace jsonbag::agents {

using games::Action;
using games::Game;

/// Distribution over the legal actions of one state.
using Policy = Distribution<Action>;

enum class AgentType { Random, Osla, Mcts };

inline std::string_view to_string(AgentType t) {
  switch (t) {
    case AgentType::Random: return "random";
    case AgentType::Osla: return "osla";
    case AgentType::Mcts: return "mcts";
  }
  return "?";
}

inline AgentType parse_agent_type(std::string_view name) {
  if (name == "random") return AgentType::Random;
  if (name == "osla") return AgentType::Osla;
  if (name == "mcts") return AgentType::Mcts;
  throw Error("unknown agent type '" + std::string(name) + "' (expected random|osla|mcts)");
}

struct MctsConfig {
  /// Iterations per decision.
  int budget = 64;
  double exploration = std::numbers::sqrt2;
  /// Random rollout steps after leaving the tree; the game's reward estimate
  /// scores states cut off here.
  int rollout_depth = 1000;
  /// Nodes are keyed by action sequences and states re-simulated from the
  /// root every iteration. The closed-loop variant is not implemented.
  bool open_loop = true;
  /// Softmax temperature over root visit counts for policy extraction.
  double temperature = 1.0;

  void validate() const {
    if (budget < 1) throw Error("MctsConfig: budget must be at least 1");
    if (!open_loop) throw Error("MctsConfig: only open-loop search is supported");
    if (!(temperature > 0.0)) throw Error("MctsConfig: temperature must be positive");
    if (rollout_depth < 0) throw Error("MctsConfig: rollout depth must be non-negative");
  }
};

struct AgentSpec {
  std::string name;
  AgentType type = AgentType::Random;
  MctsConfig mcts;
  /// OSLA tie-breaking noise is drawn from Uniform(0, osla_noise).
  double osla_noise = 1e-3;
};

inline AgentSpec random_agent(std::string name = "Random") { return {std::move(name), AgentType::Random, {}, 1e-3}; }
inline AgentSpec osla_agent(std::string name = "OSLA") { return {std::move(name), AgentType::Osla, {}, 1e-3}; }
inline AgentSpec mcts_agent(std::string name, int budget, double exploration = std::numbers::sqrt2,
                            int rollout_depth = 1000) {
  AgentSpec a{std::move(name), AgentType::Mcts, {}, 1e-3};
  a.mcts.budget = budget;
  a.mcts.exploration = exploration;
  a.mcts.rollout_depth = rollout_depth;
  return a;
}

/// Random, OSLA, MCTS-64, MCTS-256 and MCTS-64 with a low exploration
/// constant.
inline std::vector<AgentSpec> default_roster(int rollout_depth = 1000) {
  return {random_agent(), osla_agent(), mcts_agent("MCTS64", 64, std::numbers::sqrt2, rollout_depth),
          mcts_agent("MCTS256", 256, std::numbers::sqrt2, rollout_depth),
          mcts_agent("MCTS64-C0.3", 64, 0.3, rollout_depth)};
}

inline nlohmann::json to_json(const AgentSpec& a) {
  nlohmann::json j = {{"name", a.name}, {"type", std::string(to_string(a.type))}};
  if (a.type == AgentType::Mcts) {
    j["budget"] = a.mcts.budget;
    j["exploration"] = a.mcts.exploration;
    j["rolloutDepth"] = a.mcts.rollout_depth;
    j["temperature"] = a.mcts.temperature;
  }
  if (a.type == AgentType::Osla) j["noise"] = a.osla_noise;
  return j;
}

inline AgentSpec agent_from_json(const nlohmann::json& j) {
  AgentSpec a;
  a.type = parse_agent_type(j.at("type").get<std::string>());
  a.name = j.value("name", std::string(to_string(a.type)));
  a.mcts.budget = j.value("budget", a.mcts.budget);
  a.mcts.exploration = j.value("exploration", a.mcts.exploration);
  a.mcts.rollout_depth = j.value("rolloutDepth", a.mcts.rollout_depth);
  a.mcts.temperature = j.value("temperature", a.mcts.temperature);
  a.osla_noise = j.value("noise", a.osla_noise);
  if (a.type == AgentType::Mcts) a.mcts.validate();
  return a;
}

namespace detail {

template <class G>
concept HasFastRandomAction = requires(const G g, const typename G::State s, Rng rng) {
  { g.random_action(s, rng) } -> std::convertible_to<Action>;
};

template <Game G>
Action random_legal_action(const G& game, const typename G::State& s, Rng& rng) {
  if constexpr (HasFastRandomAction<G>) {
    return game.random_action(s, rng);
  } else {
    const auto legal = game.legal_actions(s);
    return legal[uniform_index(rng, legal.size())];
  }
}

template <Game G>
std::vector<Action> require_actions(const G& game, const typename G::State& s) {
  if (game.is_terminal(s)) throw Error("agent asked to act in a terminal state");
  auto legal = game.legal_actions(s);
  if (legal.empty()) throw Error("agent asked to act in a state without legal actions");
  return legal;
}

}  // namespace detail

template <Game G>
Action act_random(const G& game, const typename G::State& s, Rng& rng) {
  const auto legal = detail::require_actions(game, s);
  return legal[uniform_index(rng, legal.size())];
}

/// One-step look-ahead: apply each action, score the successor with the
/// game's heuristic from the mover's view, add Uniform(0, noise), take the
/// best. Hidden chance is redrawn first, so a roll is judged on one sampled
/// outcome rather than the real next dice.
template <Game G>
Action act_osla(const G& game, const typename G::State& s, Rng& rng, double noise = 1e-3) {
  const auto legal = detail::require_actions(game, s);
  const int me = game.current_player(s);
  Action best = legal.front();
  double best_v = -std::numeric_limits<double>::infinity();
  for (Action a : legal) {
    auto next = s;
    game.redraw_chance(next, rng);
    game.step(next, a);
    const double v = game.heuristic(next, me) + uniform_real(rng, 0.0, noise);
    if (v > best_v) {
      best_v = v;
      best = a;
    }
  }
  return best;
}

struct MctsResult {
  std::vector<Action> actions;  // legal root actions, ascending
  std::vector<int> visits;      // root-child visits per action (0 if never expanded)
  std::vector<double> mean_reward;
  Action best = 0;
};

/// Open-loop UCT search.
template <Game G>
MctsResult search_mcts(const G& game, const typename G::State& root, const MctsConfig& config, Rng& rng) {
  config.validate();
  const auto root_actions = detail::require_actions(game, root);

  struct Node {
    Action action = 0;
    int mover = 0;  // player who took `action`
    double visits = 0.0;
    double total = 0.0;  // summed reward of `mover`
    std::vector<int> children;  // sorted by action
  };
  std::vector<Node> tree(1);
  std::vector<int> path;
  std::vector<Action> untried;

  for (int it = 0; it < config.budget; ++it) {
    auto s = root;
    game.redraw_chance(s, rng);
    int node = 0;
    path.assign(1, 0);
    while (!game.is_terminal(s)) {
      const auto legal = game.legal_actions(s);
      // Both lists are ascending, so a merge finds the unexpanded actions.
      untried.clear();
      const auto& kids = tree[static_cast<std::size_t>(node)].children;
      std::size_t k = 0;
      for (Action a : legal) {
        while (k < kids.size() && tree[static_cast<std::size_t>(kids[k])].action < a) ++k;
        if (k == kids.size() || tree[static_cast<std::size_t>(kids[k])].action != a) untried.push_back(a);
      }
      if (!untried.empty()) {
        const Action a = untried[uniform_index(rng, untried.size())];
        Node child;
        child.action = a;
        child.mover = game.current_player(s);
        tree.push_back(std::move(child));
        const int id = static_cast<int>(tree.size() - 1);
        auto& ch = tree[static_cast<std::size_t>(node)].children;
        ch.insert(std::lower_bound(ch.begin(), ch.end(), a,
                                   [&](int c, Action x) { return tree[static_cast<std::size_t>(c)].action < x; }),
                  id);
        game.step(s, a);
        node = id;
        path.push_back(node);
        break;
      }
      // Every legal action is expanded: UCT over the children legal here.
      const double log_n = std::log(std::max(1.0, tree[static_cast<std::size_t>(node)].visits));
      int chosen = -1;
      double chosen_v = -std::numeric_limits<double>::infinity();
      k = 0;
      for (Action a : legal) {
        while (tree[static_cast<std::size_t>(kids[k])].action < a) ++k;
        const auto& c = tree[static_cast<std::size_t>(kids[k])];
        const double v = c.total / c.visits + config.exploration * std::sqrt(log_n / c.visits);
        if (v > chosen_v) {
          chosen_v = v;
          chosen = kids[k];
        }
      }
      game.step(s, tree[static_cast<std::size_t>(chosen)].action);
      node = chosen;
      path.push_back(node);
    }
    for (int d = 0; d < config.rollout_depth && !game.is_terminal(s); ++d)
      game.step(s, detail::random_legal_action(game, s, rng));
    const auto rewards = game.rewards(s);
    for (int id : path) {
      auto& n = tree[static_cast<std::size_t>(id)];
      n.visits += 1.0;
      if (id != 0) n.total += rewards[static_cast<std::size_t>(n.mover)];
    }
  }

  MctsResult result;
  result.actions = root_actions;
  result.visits.assign(root_actions.size(), 0);
  result.mean_reward.assign(root_actions.size(), 0.0);
  for (int c : tree[0].children) {
    const auto& n = tree[static_cast<std::size_t>(c)];
    const auto pos = std::lower_bound(root_actions.begin(), root_actions.end(), n.action) - root_actions.begin();
    if (pos < static_cast<std::ptrdiff_t>(root_actions.size()) && root_actions[static_cast<std::size_t>(pos)] == n.action) {
      result.visits[static_cast<std::size_t>(pos)] = static_cast<int>(n.visits);
      result.mean_reward[static_cast<std::size_t>(pos)] = n.visits > 0 ? n.total / n.visits : 0.0;
    }
  }
  // Most visited; ties by mean reward, then the lowest action id.
  std::size_t best = 0;
  for (std::size_t i = 1; i < root_actions.size(); ++i) {
    if (result.visits[i] > result.visits[best] ||
        (result.visits[i] == result.visits[best] && result.mean_reward[i] > result.mean_reward[best]))
      best = i;
  }
  result.best = root_actions[best];
  return result;
}

template <Game G>
Action act_mcts(const G& game, const typename G::State& s, const MctsConfig& config, Rng& rng) {
  return search_mcts(game, s, config, rng).best;
}

template <Game G>
Action act(const AgentSpec& agent, const G& game, const typename G::State& s, Rng& rng) {
  switch (agent.type) {
    case AgentType::Random: return act_random(game, s, rng);
    case AgentType::Osla: return act_osla(game, s, rng, agent.osla_noise);
    case AgentType::Mcts: return act_mcts(game, s, agent.mcts, rng);
  }
  throw Error("act: bad agent type");
}

/// Softmax with temperature over raw counts, computed stably.
inline std::vector<double> softmax(std::span<const double> xs, double temperature = 1.0) {
  std::vector<double> out(xs.size());
  if (xs.empty()) return out;
  const double mx = *std::max_element(xs.begin(), xs.end());
  double z = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) z += out[i] = std::exp((xs[i] - mx) / temperature);
  for (auto& v : out) v /= z;
  return out;
}

/// Random and OSLA: empirical distribution of `n_samples` decisions.
/// MCTS: softmax over root visit counts of a single search.
template <Game G>
Policy extract_policy(const AgentSpec& agent, const G& game, const typename G::State& s, Rng& rng,
                      int n_samples = 100) {
  const auto legal = detail::require_actions(game, s);
  Policy policy;
  if (agent.type == AgentType::Mcts) {
    const auto res = search_mcts(game, s, agent.mcts, rng);
    std::vector<double> counts(res.visits.begin(), res.visits.end());
    const auto probs = softmax(counts, agent.mcts.temperature);
    for (std::size_t i = 0; i < probs.size(); ++i)
      if (probs[i] > 0.0) policy[res.actions[i]] = probs[i];
    return policy;
  }
  if (n_samples < 1) throw Error("extract_policy: n_samples must be positive");
  for (int i = 0; i < n_samples; ++i) policy[act(agent, game, s, rng)] += 1.0;
  for (auto& [_, p] : policy) p /= n_samples;
  return policy;
}

/// Plays one game, seat i controlled by agents[i]. Each seat draws from its
/// own (agent_seed, seat) stream; dice come from spec.seed only.
inline games::Trajectory play_game(const games::GameSpec& spec, const std::vector<AgentSpec>& agents,
                                   std::uint64_t agent_seed) {
  if (static_cast<int>(agents.size()) != spec.players)
    throw Error("play_game: " + std::to_string(agents.size()) + " agents for " + std::to_string(spec.players) +
                " players");
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < agents.size(); ++i) rngs.emplace_back(derive_seed(agent_seed, i));
  return games::visit_game(spec, [&](const auto& game) {
    return games::run_game(game, spec, [&](const auto& state, int player) {
      const auto p = static_cast<std::size_t>(player);
      return act(agents[p], game, state, rngs[p]);
    });
  });
}

}  // namespace jsonbag::agents
