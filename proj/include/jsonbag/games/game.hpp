#pragma once

#include <concepts>
#include <cstdint>
#include <string>
#include <vector>

#include "jsonbag/common.hpp"
#include "jsonbag/json_tokenizer.hpp"

namespace jsonbag::games {

using Action = int;

/// Thrown when an action violates a game rule; the message names the rule.
class IllegalAction : public Error {
public:
  using Error::Error;
};

inline constexpr int kOngoing = -2;
inline constexpr int kDraw = -1;

struct Outcome {
  int winner = kDraw;  // player index, or kDraw
  std::vector<double> scores;

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

/// Value assigned to a decisive result by heuristics; dominates any score
/// difference a game can produce.
inline constexpr double kWinValue = 1e6;

/// What agents and the game runner need from a game.
///
/// `step` mutates in place, `apply` is the pure form. `rewards` is per player
/// in [0, 1]: the result for terminal states, an estimate otherwise.
/// `heuristic` scores a state from one player's point of view.
/// `redraw_chance` replaces hidden future randomness (dice) so that search
/// cannot peek at it.
template <class G>
concept Game = requires(const G g, typename G::State s, const typename G::State cs, Action a, Rng rng, int p) {
  { g.initial_state(std::uint64_t{}) } -> std::same_as<typename G::State>;
  { g.legal_actions(cs) } -> std::same_as<std::vector<Action>>;
  g.step(s, a);
  { g.apply(cs, a) } -> std::same_as<typename G::State>;
  { g.is_terminal(cs) } -> std::convertible_to<bool>;
  { g.current_player(cs) } -> std::convertible_to<int>;
  { g.player_count() } -> std::convertible_to<int>;
  { g.outcome(cs) } -> std::same_as<Outcome>;
  { g.scores(cs) } -> std::same_as<std::vector<double>>;
  { g.rewards(cs) } -> std::same_as<std::vector<double>>;
  { g.heuristic(cs, p) } -> std::convertible_to<double>;
  g.redraw_chance(s, rng);
  { g.serialize(cs) } -> std::same_as<JsonValue>;
};

/// Terminal rewards: 1 for the winner, 0 for the rest; a draw shares 1.
inline std::vector<double> terminal_rewards(int winner, int players) {
  if (winner == kDraw) return std::vector<double>(static_cast<std::size_t>(players), 1.0 / players);
  std::vector<double> r(static_cast<std::size_t>(players), 0.0);
  r[static_cast<std::size_t>(winner)] = 1.0;
  return r;
}

inline double terminal_heuristic(int winner, int player) {
  if (winner == kDraw) return 0.0;
  return winner == player ? kWinValue : -kWinValue;
}

}  // namespace jsonbag::games
