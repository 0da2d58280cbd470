#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "jsonbag/common.hpp"
#include "jsonbag/games/cant_stop.hpp"
#include "jsonbag/games/connect4.hpp"
#include "jsonbag/games/dots_and_boxes.hpp"
#include "jsonbag/games/game.hpp"

namespace jsonbag::games {

enum class GameId { Connect4, DotsAndBoxes, CantStop };

inline std::string_view to_string(GameId id) {
  switch (id) {
    case GameId::Connect4: return "connect4";
    case GameId::DotsAndBoxes: return "dotsandboxes";
    case GameId::CantStop: return "cantstop";
  }
  return "?";
}

inline GameId parse_game_id(std::string_view name) {
  if (name == "connect4") return GameId::Connect4;
  if (name == "dotsandboxes" || name == "dots_and_boxes" || name == "dots") return GameId::DotsAndBoxes;
  if (name == "cantstop" || name == "cant_stop") return GameId::CantStop;
  throw Error("unknown game '" + std::string(name) + "' (expected connect4|dotsandboxes|cantstop)");
}

using GameParams = std::variant<Connect4Params, DotsAndBoxesParams, CantStopParams>;

struct GameSpec {
  GameParams params;
  int players = 2;
  std::uint64_t seed = 0;

  GameId id() const { return static_cast<GameId>(params.index()); }
  friend bool operator==(const GameSpec&, const GameSpec&) = default;
};

inline int default_players(GameId id) { return id == GameId::CantStop ? 4 : 2; }

inline GameSpec default_spec(GameId id, std::uint64_t seed = 0) {
  switch (id) {
    case GameId::Connect4: return {Connect4Params{}, 2, seed};
    case GameId::DotsAndBoxes: return {DotsAndBoxesParams{}, 2, seed};
    case GameId::CantStop: return {CantStopParams{}, 4, seed};
  }
  throw Error("default_spec: bad game id");
}

/// Calls fn(game) with the concrete game object for `spec`.
template <class Fn>
decltype(auto) visit_game(const GameSpec& spec, Fn&& fn) {
  switch (spec.id()) {
    case GameId::Connect4:
      if (spec.players != 2) throw Error("Connect4 is a two-player game");
      return fn(Connect4(std::get<Connect4Params>(spec.params)));
    case GameId::DotsAndBoxes:
      if (spec.players != 2) throw Error("DotsAndBoxes is a two-player game");
      return fn(DotsAndBoxes(std::get<DotsAndBoxesParams>(spec.params)));
    case GameId::CantStop:
      return fn(CantStop(std::get<CantStopParams>(spec.params), spec.players));
  }
  throw Error("visit_game: bad game id");
}

inline constexpr int kMinSampledSide = 5;
inline constexpr int kMaxSampledSide = 10;
inline constexpr int kMinSampledTrack = 2;
inline constexpr int kMaxSampledTrack = 13;

/// Random parameter set: grid sides in [5, 10] for the grid games; for Can't
/// Stop, track lengths in [2, 13] mirrored around the sum-7 track.
inline GameSpec sample_parameters(GameId id, Rng& rng) {
  auto side = [&] { return std::uniform_int_distribution<int>(kMinSampledSide, kMaxSampledSide)(rng); };
  GameSpec spec = default_spec(id);
  switch (id) {
    case GameId::Connect4: {
      Connect4Params p;
      p.width = side();
      p.height = side();
      spec.params = p;
      break;
    }
    case GameId::DotsAndBoxes: {
      DotsAndBoxesParams p;
      p.width = side();
      p.height = side();
      spec.params = p;
      break;
    }
    case GameId::CantStop: {
      CantStopParams p;
      std::uniform_int_distribution<int> len(kMinSampledTrack, kMaxSampledTrack);
      for (int i = 0; i <= 5; ++i) {
        const int v = len(rng);
        p.track_lengths[static_cast<std::size_t>(i)] = v;
        p.track_lengths[static_cast<std::size_t>(kTrackCount - 1 - i)] = v;
      }
      spec.params = p;
      break;
    }
  }
  spec.seed = rng();
  return spec;
}

// ---------------------------------------------------------------------------
// Spec persistence

inline nlohmann::json params_to_json(const GameParams& params) {
  return std::visit(
      [](const auto& p) -> nlohmann::json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Connect4Params>) {
          return {{"width", p.width}, {"height", p.height}, {"winLength", p.win_length}};
        } else if constexpr (std::is_same_v<P, DotsAndBoxesParams>) {
          return {{"width", p.width}, {"height", p.height}};
        } else {
          return {{"trackLengths", p.track_lengths}, {"tracksToWin", p.tracks_to_win},
                  {"maxDecisions", p.max_decisions}};
        }
      },
      params);
}

/// Missing fields keep their defaults.
inline GameParams params_from_json(GameId id, const nlohmann::json& j) {
  switch (id) {
    case GameId::Connect4: {
      Connect4Params p;
      p.width = j.value("width", p.width);
      p.height = j.value("height", p.height);
      p.win_length = j.value("winLength", p.win_length);
      return p;
    }
    case GameId::DotsAndBoxes: {
      DotsAndBoxesParams p;
      p.width = j.value("width", p.width);
      p.height = j.value("height", p.height);
      return p;
    }
    case GameId::CantStop: {
      CantStopParams p;
      if (j.contains("trackLengths")) p.track_lengths = j["trackLengths"].get<std::array<int, kTrackCount>>();
      p.tracks_to_win = j.value("tracksToWin", p.tracks_to_win);
      p.max_decisions = j.value("maxDecisions", p.max_decisions);
      return p;
    }
  }
  throw Error("params_from_json: bad game id");
}

inline nlohmann::json to_json(const GameSpec& s) {
  return {{"game", std::string(to_string(s.id()))},
          {"players", s.players},
          {"seed", s.seed},
          {"params", params_to_json(s.params)}};
}

inline GameSpec spec_from_json(const nlohmann::json& j) {
  const auto id = parse_game_id(j.at("game").get<std::string>());
  GameSpec s = default_spec(id);
  s.players = j.value("players", s.players);
  s.seed = j.value("seed", s.seed);
  if (j.contains("params")) s.params = params_from_json(id, j["params"]);
  return s;
}

// ---------------------------------------------------------------------------
// Playing

struct Trajectory {
  GameSpec spec;
  /// Initial state followed by the state after every applied action.
  std::vector<JsonValue> states;
  Outcome outcome;
  /// Scores of every player, recorded each time play returns to player 0
  /// and once more at the end of the game.
  std::vector<std::vector<double>> score_history;
  int decisions = 0;
};

/// Plays one game from the initial state of `spec`.
/// `decide(state, player)` returns the acting player's action; the game's
/// chance events draw only from `spec.seed`.
template <Game G, class Decide>
Trajectory run_game(const G& game, const GameSpec& spec, Decide&& decide) {
  Trajectory traj;
  traj.spec = spec;
  auto state = game.initial_state(spec.seed);
  traj.states.push_back(game.serialize(state));
  while (!game.is_terminal(state)) {
    const int player = game.current_player(state);
    const Action a = decide(std::as_const(state), player);
    const auto legal = game.legal_actions(state);
    if (std::find(legal.begin(), legal.end(), a) == legal.end())
      throw IllegalAction("agent for player " + std::to_string(player) + " chose illegal action " + std::to_string(a));
    game.step(state, a);
    ++traj.decisions;
    traj.states.push_back(game.serialize(state));
    const int next = game.current_player(state);
    if (!game.is_terminal(state) && next != player && next == 0) traj.score_history.push_back(game.scores(state));
  }
  traj.score_history.push_back(game.scores(state));
  traj.outcome = game.outcome(state);
  return traj;
}

}  // namespace jsonbag::games
