#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "jsonbag/games/game.hpp"

namespace jsonbag::games {

struct Connect4Params {
  int width = 8;
  int height = 8;
  int win_length = 4;

  friend bool operator==(const Connect4Params&, const Connect4Params&) = default;
};

/// Gravity grid game: players drop pieces into columns and win by lining up
/// `win_length` pieces in a row, column or diagonal.
class Connect4 {
public:
  static constexpr int kMaxSide = 10;
  static constexpr std::int8_t kEmpty = -1;

  struct State {
    std::array<std::int8_t, kMaxSide * kMaxSide> cells{};  // row-major, row 0 at the bottom
    std::array<std::int8_t, kMaxSide> heights{};
    std::int8_t current = 0;
    std::int8_t winner = kOngoing;
    int turn = 0;

    friend bool operator==(const State&, const State&) = default;
  };

  explicit Connect4(Connect4Params params = {}) : p_(params) {
    if (p_.width < 1 || p_.width > kMaxSide || p_.height < 1 || p_.height > kMaxSide)
      throw Error("Connect4: grid sides must be in [1, " + std::to_string(kMaxSide) + "]");
    if (p_.win_length < 2) throw Error("Connect4: win length must be at least 2");
  }

  const Connect4Params& params() const noexcept { return p_; }
  int player_count() const noexcept { return 2; }

  State initial_state(std::uint64_t /*seed*/ = 0) const {
    State s;
    s.cells.fill(kEmpty);
    return s;
  }

  std::int8_t cell(const State& s, int row, int col) const { return s.cells[static_cast<std::size_t>(row * p_.width + col)]; }

  std::vector<Action> legal_actions(const State& s) const {
    std::vector<Action> out;
    if (is_terminal(s)) return out;
    for (int c = 0; c < p_.width; ++c)
      if (s.heights[static_cast<std::size_t>(c)] < p_.height) out.push_back(c);
    return out;
  }

  void step(State& s, Action col) const {
    if (is_terminal(s)) throw IllegalAction("Connect4: game is over");
    if (col < 0 || col >= p_.width) throw IllegalAction("Connect4: column out of range");
    auto& h = s.heights[static_cast<std::size_t>(col)];
    if (h >= p_.height) throw IllegalAction("Connect4: column is full");
    const int row = h++;
    s.cells[static_cast<std::size_t>(row * p_.width + col)] = s.current;
    ++s.turn;
    if (completes_line(s, row, col)) {
      s.winner = s.current;
    } else if (s.turn == p_.width * p_.height) {
      s.winner = kDraw;
    }
    s.current = static_cast<std::int8_t>(1 - s.current);
  }

  State apply(const State& s, Action a) const {
    State next = s;
    step(next, a);
    return next;
  }

  bool is_terminal(const State& s) const noexcept { return s.winner != kOngoing; }
  int current_player(const State& s) const noexcept { return s.current; }
  int winner(const State& s) const noexcept { return s.winner; }

  Outcome outcome(const State& s) const { return {s.winner == kOngoing ? kDraw : s.winner, scores(s)}; }

  /// Connect4 keeps no score.
  std::vector<double> scores(const State&) const { return {0.0, 0.0}; }

  std::vector<double> rewards(const State& s) const {
    if (is_terminal(s)) return terminal_rewards(s.winner, 2);
    return {0.5, 0.5};
  }

  double heuristic(const State& s, int player) const {
    return is_terminal(s) ? terminal_heuristic(s.winner, player) : 0.0;
  }

  void redraw_chance(State&, Rng&) const {}

  JsonValue serialize(const State& s) const {
    JsonValue grid = JsonValue::array();
    for (int r = 0; r < p_.height; ++r) {
      JsonValue row = JsonValue::array();
      for (int c = 0; c < p_.width; ++c) {
        const auto v = cell(s, r, c);
        row.push_back(v == kEmpty ? "empty" : (v == 0 ? "P0" : "P1"));
      }
      grid.push_back(std::move(row));
    }
    JsonValue j = JsonValue::object();
    j["gridWidth"] = p_.width;
    j["gridHeight"] = p_.height;
    j["winLength"] = p_.win_length;
    j["grid"] = std::move(grid);
    j["currentPlayer"] = s.current;
    j["turnCount"] = s.turn;
    return j;
  }

private:
  bool completes_line(const State& s, int row, int col) const {
    const auto who = cell(s, row, col);
    static constexpr int dirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
    for (const auto& d : dirs) {
      int run = 1;
      for (int sign : {1, -1}) {
        int r = row + sign * d[0];
        int c = col + sign * d[1];
        while (r >= 0 && r < p_.height && c >= 0 && c < p_.width && cell(s, r, c) == who) {
          ++run;
          r += sign * d[0];
          c += sign * d[1];
        }
      }
      if (run >= p_.win_length) return true;
    }
    return false;
  }

  Connect4Params p_;
};

}  // namespace jsonbag::games
