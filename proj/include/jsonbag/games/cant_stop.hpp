#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "jsonbag/games/game.hpp"

namespace jsonbag::games {

inline constexpr int kTrackCount = 11;  // sums 2..12

struct CantStopParams {
  std::array<int, kTrackCount> track_lengths{3, 5, 7, 9, 11, 13, 11, 9, 7, 5, 3};
  int tracks_to_win = 3;
  /// Decisions after which an unfinished game is declared a draw.
  int max_decisions = 4000;

  friend bool operator==(const CantStopParams&, const CantStopParams&) = default;
};

/// Push-your-luck dice race over eleven tracks.
///
/// A turn alternates two decisions. In the roll phase the player rolls four
/// dice (mandatory at the start of a turn) or stops, committing the temporary
/// runners. After a roll the player picks how to pair the dice into two sums
/// and advances up to three runners on those tracks. A roll that allows no
/// advance busts: runners are lost and the turn passes. Claiming
/// `tracks_to_win` tracks wins.
class CantStop {
public:
  static constexpr int kMaxPlayers = 4;
  static constexpr int kMaxRunners = 3;
  static constexpr Action kRoll = 0;
  static constexpr Action kStop = 1;
  /// Pair choices: kChooseBase + first*13 + second; second is 0 when only
  /// one sum advances.
  static constexpr Action kChooseBase = 100;

  enum class Phase : std::uint8_t { Roll, Choose };

  struct State {
    std::array<std::array<std::int8_t, kTrackCount>, kMaxPlayers> markers{};
    std::array<std::int8_t, kTrackCount> runners{};  // -1: no runner
    std::array<std::int8_t, kTrackCount> claimed{};  // -1: open
    std::array<std::int8_t, 4> dice{};
    std::int8_t runner_count = 0;
    std::int8_t current = 0;
    std::int8_t winner = kOngoing;
    Phase phase = Phase::Roll;
    bool must_roll = true;
    int turn = 0;
    std::uint64_t dice_rng = 0;

    friend bool operator==(const State&, const State&) = default;
  };

  explicit CantStop(CantStopParams params = {}, int players = 4) : p_(params), players_(players) {
    if (players_ < 2 || players_ > kMaxPlayers) throw Error("CantStop: player count must be in [2, 4]");
    for (int len : p_.track_lengths)
      if (len < 1 || len > 100) throw Error("CantStop: track lengths must be in [1, 100]");
    if (p_.tracks_to_win < 1 || p_.tracks_to_win > kTrackCount) throw Error("CantStop: tracks_to_win out of range");
  }

  const CantStopParams& params() const noexcept { return p_; }
  int player_count() const noexcept { return players_; }
  int track_length(int sum) const { return p_.track_lengths.at(static_cast<std::size_t>(sum - 2)); }

  State initial_state(std::uint64_t seed) const {
    State s;
    s.runners.fill(-1);
    s.claimed.fill(-1);
    s.dice_rng = seed;
    return s;
  }

  static Action encode_choice(int first, int second) { return kChooseBase + first * 13 + second; }
  static std::pair<int, int> decode_choice(Action a) { return {(a - kChooseBase) / 13, (a - kChooseBase) % 13}; }

  /// Position the current player would advance from on `sum`'s track.
  int position(const State& s, int sum) const {
    const auto t = static_cast<std::size_t>(sum - 2);
    return s.runners[t] >= 0 ? s.runners[t] : s.markers[static_cast<std::size_t>(s.current)][t];
  }

  bool can_advance(const State& s, int sum) const {
    const auto t = static_cast<std::size_t>(sum - 2);
    if (s.claimed[t] >= 0) return false;
    if (position(s, sum) >= p_.track_lengths[t]) return false;
    return s.runners[t] >= 0 || s.runner_count < kMaxRunners;
  }

  /// Distinct pair choices for the current dice, sorted by action id.
  std::vector<Action> choices(const State& s) const {
    const auto& d = s.dice;
    const std::array<std::pair<int, int>, 3> pairings = {
        std::pair{d[0] + d[1], d[2] + d[3]}, std::pair{d[0] + d[2], d[1] + d[3]}, std::pair{d[0] + d[3], d[1] + d[2]}};
    std::vector<Action> out;
    for (auto [a, b] : pairings) {
      if (a > b) std::swap(a, b);
      State probe = s;
      if (can_advance(probe, a)) {
        advance(probe, a);
        if (can_advance(probe, b)) {
          out.push_back(encode_choice(a, b));
          continue;
        }
      }
      if (can_advance(s, a)) out.push_back(encode_choice(a, 0));
      if (can_advance(s, b)) out.push_back(encode_choice(b, 0));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<Action> legal_actions(const State& s) const {
    if (is_terminal(s)) return {};
    if (s.phase == Phase::Choose) return choices(s);
    if (s.must_roll) return {kRoll};
    return {kRoll, kStop};
  }

  void step(State& s, Action a) const {
    if (is_terminal(s)) throw IllegalAction("CantStop: game is over");
    if (s.phase == Phase::Choose) {
      const auto legal = choices(s);
      if (!std::binary_search(legal.begin(), legal.end(), a))
        throw IllegalAction("CantStop: chosen pairing cannot be formed from the dice or cannot advance");
      const auto [first, second] = decode_choice(a);
      advance(s, first);
      if (second != 0) advance(s, second);
      s.phase = Phase::Roll;
      s.must_roll = false;
    } else if (a == kRoll) {
      for (auto& die : s.dice) die = static_cast<std::int8_t>(1 + next_random(s.dice_rng) % 6);
      if (choices(s).empty()) {
        // Bust: temporary progress is lost.
        clear_runners(s);
        end_turn(s);
      } else {
        s.phase = Phase::Choose;
      }
    } else if (a == kStop) {
      if (s.must_roll) throw IllegalAction("CantStop: must roll at least once before stopping");
      commit(s);
      if (!is_terminal(s)) end_turn(s);
    } else {
      throw IllegalAction("CantStop: expected roll or stop in the roll phase");
    }
    ++s.turn;
    if (!is_terminal(s) && s.turn >= p_.max_decisions) s.winner = kDraw;
  }

  State apply(const State& s, Action a) const {
    State next = s;
    step(next, a);
    return next;
  }

  bool is_terminal(const State& s) const noexcept { return s.winner != kOngoing; }
  int current_player(const State& s) const noexcept { return s.current; }
  int winner(const State& s) const noexcept { return s.winner; }

  int claimed_by(const State& s, int player) const {
    return static_cast<int>(std::count(s.claimed.begin(), s.claimed.end(), static_cast<std::int8_t>(player)));
  }

  Outcome outcome(const State& s) const { return {s.winner == kOngoing ? kDraw : s.winner, scores(s)}; }

  /// Claimed tracks per player.
  std::vector<double> scores(const State& s) const {
    std::vector<double> out;
    for (int q = 0; q < players_; ++q) out.push_back(claimed_by(s, q));
    return out;
  }

  /// Fractional progress: claimed tracks count 1, markers their share of the
  /// track. The current player's runners count at half weight since a bust
  /// would erase them.
  double progress(const State& s, int player) const {
    double v = 0.0;
    for (std::size_t t = 0; t < kTrackCount; ++t) {
      const double len = p_.track_lengths[t];
      if (s.claimed[t] == player) {
        v += 1.0;
      } else if (s.claimed[t] < 0) {
        const double base = s.markers[static_cast<std::size_t>(player)][t];
        v += base / len;
        if (player == s.current && s.runners[t] >= 0) v += 0.5 * (s.runners[t] - base) / len;
      }
    }
    return v;
  }

  std::vector<double> rewards(const State& s) const {
    if (is_terminal(s)) return terminal_rewards(s.winner, players_);
    std::vector<double> r;
    double total = 0.0;
    for (int q = 0; q < players_; ++q) {
      r.push_back(progress(s, q));
      total += r.back();
    }
    for (auto& v : r) v = total > 0.0 ? v / total : 1.0 / players_;
    return r;
  }

  double heuristic(const State& s, int player) const {
    if (is_terminal(s) && s.winner != kDraw) return terminal_heuristic(s.winner, player);
    double best_other = 0.0;
    for (int q = 0; q < players_; ++q)
      if (q != player) best_other = std::max(best_other, progress(s, q));
    return progress(s, player) - best_other;
  }

  void redraw_chance(State& s, Rng& rng) const { s.dice_rng = rng(); }

  /// The dice generator itself is hidden state and is not serialized.
  JsonValue serialize(const State& s) const {
    JsonValue markers = JsonValue::array();
    for (int q = 0; q < players_; ++q) {
      JsonValue row = JsonValue::array();
      for (auto v : s.markers[static_cast<std::size_t>(q)]) row.push_back(int(v));
      markers.push_back(std::move(row));
    }
    JsonValue runners = JsonValue::array();
    for (int t = 0; t < kTrackCount; ++t) {
      if (s.runners[static_cast<std::size_t>(t)] >= 0)
        runners.push_back({{"track", t + 2}, {"position", int(s.runners[static_cast<std::size_t>(t)])}});
    }
    JsonValue claimed = JsonValue::array();
    for (auto v : s.claimed) claimed.push_back(int(v));
    JsonValue dice = JsonValue::array();
    for (auto v : s.dice) dice.push_back(int(v));
    JsonValue j = JsonValue::object();
    j["trackLengths"] = p_.track_lengths;
    j["markers"] = std::move(markers);
    j["runners"] = std::move(runners);
    j["claimedBy"] = std::move(claimed);
    j["dice"] = std::move(dice);
    j["phase"] = s.phase == Phase::Roll ? "roll" : "choose";
    j["currentPlayer"] = s.current;
    j["turnCount"] = s.turn;
    return j;
  }

private:
  static std::uint64_t next_random(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  void advance(State& s, int sum) const {
    const auto t = static_cast<std::size_t>(sum - 2);
    if (s.runners[t] < 0) {
      s.runners[t] = static_cast<std::int8_t>(s.markers[static_cast<std::size_t>(s.current)][t] + 1);
      ++s.runner_count;
    } else {
      ++s.runners[t];
    }
  }

  static void clear_runners(State& s) {
    s.runners.fill(-1);
    s.runner_count = 0;
  }

  void commit(State& s) const {
    const auto me = static_cast<std::size_t>(s.current);
    for (std::size_t t = 0; t < kTrackCount; ++t) {
      if (s.runners[t] < 0) continue;
      s.markers[me][t] = s.runners[t];
      if (s.runners[t] >= p_.track_lengths[t]) {
        s.claimed[t] = s.current;
        for (std::size_t q = 0; q < kMaxPlayers; ++q)
          if (q != me) s.markers[q][t] = 0;
      }
    }
    clear_runners(s);
    if (claimed_by(s, s.current) >= p_.tracks_to_win) s.winner = s.current;
  }

  void end_turn(State& s) const {
    s.current = static_cast<std::int8_t>((s.current + 1) % players_);
    s.phase = Phase::Roll;
    s.must_roll = true;
  }

  CantStopParams p_;
  int players_;
};

}  // namespace jsonbag::games
