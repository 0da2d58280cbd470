#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "jsonbag/games/game.hpp"

namespace jsonbag::games {

/// Grid size in boxes.
struct DotsAndBoxesParams {
  int width = 5;
  int height = 5;

  friend bool operator==(const DotsAndBoxesParams&, const DotsAndBoxesParams&) = default;
};

/// Players alternately draw an edge between adjacent dots; closing a box
/// scores a point and grants another move.
///
/// Edge ids: horizontal edges first, (h+1) rows of w, id = r*w + c; then
/// vertical edges, h rows of (w+1), id = H + r*(w+1) + c.
class DotsAndBoxes {
public:
  static constexpr int kMaxSide = 10;
  static constexpr int kMaxEdges = 2 * kMaxSide * (kMaxSide + 1);

  struct State {
    std::array<std::uint8_t, kMaxEdges> edges{};
    std::array<std::int8_t, kMaxSide * kMaxSide> owners{};
    std::array<int, 2> score{};
    std::int8_t current = 0;
    int placed = 0;
    int turn = 0;

    friend bool operator==(const State&, const State&) = default;
  };

  explicit DotsAndBoxes(DotsAndBoxesParams params = {}) : p_(params) {
    if (p_.width < 1 || p_.width > kMaxSide || p_.height < 1 || p_.height > kMaxSide)
      throw Error("DotsAndBoxes: grid sides must be in [1, " + std::to_string(kMaxSide) + "]");
    horizontal_ = (p_.height + 1) * p_.width;
    edge_count_ = horizontal_ + p_.height * (p_.width + 1);
    edge_boxes_.assign(static_cast<std::size_t>(edge_count_), {-1, -1});
    box_edges_.resize(static_cast<std::size_t>(p_.width * p_.height));
    for (int r = 0; r < p_.height; ++r) {
      for (int c = 0; c < p_.width; ++c) {
        const int box = r * p_.width + c;
        const std::array<int, 4> e = {h_edge(r, c), h_edge(r + 1, c), v_edge(r, c), v_edge(r, c + 1)};
        box_edges_[static_cast<std::size_t>(box)] = e;
        for (int id : e) {
          auto& slot = edge_boxes_[static_cast<std::size_t>(id)];
          (slot[0] < 0 ? slot[0] : slot[1]) = box;
        }
      }
    }
  }

  const DotsAndBoxesParams& params() const noexcept { return p_; }
  int player_count() const noexcept { return 2; }
  int edge_count() const noexcept { return edge_count_; }
  int box_count() const noexcept { return p_.width * p_.height; }
  int h_edge(int row, int col) const noexcept { return row * p_.width + col; }
  int v_edge(int row, int col) const noexcept { return horizontal_ + row * (p_.width + 1) + col; }
  const std::array<int, 4>& box_edges(int box) const { return box_edges_.at(static_cast<std::size_t>(box)); }

  State initial_state(std::uint64_t /*seed*/ = 0) const {
    State s;
    s.owners.fill(-1);
    return s;
  }

  std::vector<Action> legal_actions(const State& s) const {
    std::vector<Action> out;
    out.reserve(static_cast<std::size_t>(edge_count_ - s.placed));
    for (int e = 0; e < edge_count_; ++e)
      if (!s.edges[static_cast<std::size_t>(e)]) out.push_back(e);
    return out;
  }

  /// Uniform legal edge without building the action list.
  Action random_action(const State& s, Rng& rng) const {
    auto k = uniform_index(rng, static_cast<std::size_t>(edge_count_ - s.placed));
    for (int e = 0; e < edge_count_; ++e)
      if (!s.edges[static_cast<std::size_t>(e)] && k-- == 0) return e;
    throw IllegalAction("DotsAndBoxes: no edge left");
  }

  void step(State& s, Action edge) const {
    if (is_terminal(s)) throw IllegalAction("DotsAndBoxes: game is over");
    if (edge < 0 || edge >= edge_count_) throw IllegalAction("DotsAndBoxes: edge out of range");
    if (s.edges[static_cast<std::size_t>(edge)]) throw IllegalAction("DotsAndBoxes: edge already placed");
    s.edges[static_cast<std::size_t>(edge)] = 1;
    ++s.placed;
    ++s.turn;
    int closed = 0;
    for (int box : edge_boxes_[static_cast<std::size_t>(edge)]) {
      if (box < 0) continue;
      bool complete = true;
      for (int e : box_edges_[static_cast<std::size_t>(box)]) complete = complete && s.edges[static_cast<std::size_t>(e)];
      if (complete) {
        s.owners[static_cast<std::size_t>(box)] = s.current;
        ++closed;
      }
    }
    if (closed > 0) {
      s.score[static_cast<std::size_t>(s.current)] += closed;
    } else {
      s.current = static_cast<std::int8_t>(1 - s.current);
    }
  }

  State apply(const State& s, Action a) const {
    State next = s;
    step(next, a);
    return next;
  }

  bool is_terminal(const State& s) const noexcept { return s.placed == edge_count_; }
  int current_player(const State& s) const noexcept { return s.current; }

  int winner(const State& s) const noexcept {
    if (!is_terminal(s)) return kOngoing;
    if (s.score[0] == s.score[1]) return kDraw;
    return s.score[0] > s.score[1] ? 0 : 1;
  }

  Outcome outcome(const State& s) const {
    const int w = winner(s);
    return {w == kOngoing ? kDraw : w, scores(s)};
  }

  std::vector<double> scores(const State& s) const { return {double(s.score[0]), double(s.score[1])}; }

  std::vector<double> rewards(const State& s) const {
    if (is_terminal(s)) return terminal_rewards(winner(s), 2);
    const double diff = double(s.score[0] - s.score[1]) / (2.0 * box_count());
    return {0.5 + diff, 0.5 - diff};
  }

  double heuristic(const State& s, int player) const {
    if (is_terminal(s) && winner(s) != kDraw) return terminal_heuristic(winner(s), player);
    return double(s.score[static_cast<std::size_t>(player)] - s.score[static_cast<std::size_t>(1 - player)]);
  }

  void redraw_chance(State&, Rng&) const {}

  JsonValue serialize(const State& s) const {
    JsonValue horizontal = JsonValue::array();
    for (int r = 0; r <= p_.height; ++r) {
      JsonValue row = JsonValue::array();
      for (int c = 0; c < p_.width; ++c) row.push_back(bool(s.edges[static_cast<std::size_t>(h_edge(r, c))]));
      horizontal.push_back(std::move(row));
    }
    JsonValue vertical = JsonValue::array();
    for (int r = 0; r < p_.height; ++r) {
      JsonValue row = JsonValue::array();
      for (int c = 0; c <= p_.width; ++c) row.push_back(bool(s.edges[static_cast<std::size_t>(v_edge(r, c))]));
      vertical.push_back(std::move(row));
    }
    JsonValue boxes = JsonValue::array();
    for (int r = 0; r < p_.height; ++r) {
      JsonValue row = JsonValue::array();
      for (int c = 0; c < p_.width; ++c) row.push_back(int(s.owners[static_cast<std::size_t>(r * p_.width + c)]));
      boxes.push_back(std::move(row));
    }
    JsonValue j = JsonValue::object();
    j["gridWidth"] = p_.width;
    j["gridHeight"] = p_.height;
    j["horizontalEdges"] = std::move(horizontal);
    j["verticalEdges"] = std::move(vertical);
    j["boxOwners"] = std::move(boxes);
    j["scores"] = {s.score[0], s.score[1]};
    j["currentPlayer"] = s.current;
    j["turnCount"] = s.turn;
    return j;
  }

private:
  DotsAndBoxesParams p_;
  int horizontal_ = 0;
  int edge_count_ = 0;
  std::vector<std::array<int, 2>> edge_boxes_;
  std::vector<std::array<int, 4>> box_edges_;
};

}  // namespace jsonbag::games
