#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "jsonbag/agents.hpp"
#include "jsonbag/bag_model.hpp"
#include "jsonbag/classifiers.hpp"
#include "jsonbag/common.hpp"
#include "jsonbag/distance_metrics.hpp"
#include "jsonbag/games/games.hpp"
#include "jsonbag/json_tokenizer.hpp"
#include "jsonbag/random_forest.hpp"

namespace jsonbag::experiments {

namespace fs = std::filesystem;
using games::GameId;

/// Reads JSONBAG_LOG (trace|debug|info|warn|error|critical|off).
inline void configure_logging(spdlog::level::level_enum fallback = spdlog::level::info) {
  const char* env = std::getenv("JSONBAG_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : fallback);
}

/// Shortest round-trip decimal form.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Task description

enum class TaskKind { Agents, Parameters, Seeds };

inline std::string_view to_string(TaskKind t) {
  switch (t) {
    case TaskKind::Agents: return "agents";
    case TaskKind::Parameters: return "parameters";
    case TaskKind::Seeds: return "seeds";
  }
  return "?";
}

inline TaskKind parse_task_kind(std::string_view name) {
  if (name == "agents") return TaskKind::Agents;
  if (name == "parameters" || name == "params") return TaskKind::Parameters;
  if (name == "seeds") return TaskKind::Seeds;
  throw Error("unknown task '" + std::string(name) + "' (expected agents|parameters|seeds)");
}

inline const std::vector<std::string>& all_methods() {
  static const std::vector<std::string> methods = {"jsd", "char", "l2", "cosine", "baseline", "rf", "rf-baseline",
                                                   "rf-char"};
  return methods;
}

inline std::string join(const std::vector<std::string>& items, std::string_view sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

inline std::vector<std::string> parse_methods(std::string_view list) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    auto end = list.find(',', start);
    if (end == std::string_view::npos) end = list.size();
    std::string m(list.substr(start, end - start));
    if (!m.empty()) {
      if (m == "all") {
        for (const auto& a : all_methods()) out.push_back(a);
      } else if (std::find(all_methods().begin(), all_methods().end(), m) == all_methods().end()) {
        throw Error("unknown method '" + m + "' (valid: " + join(all_methods()) + ")");
      } else {
        out.push_back(m);
      }
    }
    start = end + 1;
  }
  if (out.empty()) throw Error("no methods given (valid: " + join(all_methods()) + ")");
  return out;
}

struct ParameterClass {
  std::string label;
  /// Unset: draw a random parameter set distinct from the earlier classes.
  std::optional<nlohmann::json> params;
};

struct PolicyStudyConfig {
  int games = 50;
  int states = 200;
  int samples = 100;
};

struct TaskSpec {
  std::string name;
  GameId game = GameId::Connect4;
  TaskKind task = TaskKind::Agents;
  int players = 2;
  int games_per_class = 100;
  std::uint64_t seed = 0;
  TokenizationMode mode = TokenizationMode::Ordered;
  std::vector<std::string> filters;
  double train_fraction = 0.5;
  std::vector<agents::AgentSpec> roster;
  agents::AgentSpec generator = agents::mcts_agent("MCTS32", 32);
  std::vector<ParameterClass> parameter_classes;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods = all_methods();
  ForestConfig forest;
  std::vector<std::size_t> nshot_n = {3, 5, 10, 20, 40};
  std::size_t nshot_trials = 20;
  PolicyStudyConfig policy;

  std::size_t class_count() const {
    switch (task) {
      case TaskKind::Agents: return roster.size();
      case TaskKind::Parameters: return parameter_classes.size();
      case TaskKind::Seeds: return seeds.size();
    }
    return 0;
  }

  void validate() const {
    if (task == TaskKind::Seeds && game != GameId::CantStop)
      throw Error(std::string(games::to_string(game)) + " is deterministic given play; the seeds task needs cantstop");
    if (class_count() < 2) throw Error("task '" + name + "' needs at least 2 classes");
    if (games_per_class < 2) throw Error("gamesPerClass must be at least 2");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error("trainFraction must be in (0, 1)");
    if (mode == TokenizationMode::Char) throw Error("mode 'char' is evaluated by the char method; pick a path mode");
    std::set<std::string> names;
    for (const auto& a : roster)
      if (!names.insert(a.name).second) throw Error("duplicate agent name '" + a.name + "'");
    if (policy.games < 1 || policy.states < 1 || policy.samples < 1)
      throw Error("policyDistance games, states and samples must be positive");
  }
};

inline TokenizationMode default_mode(GameId id) {
  return id == GameId::CantStop ? TokenizationMode::Both : TokenizationMode::Ordered;
}

inline nlohmann::json to_json(const TaskSpec& t) {
  nlohmann::json j;
  j["name"] = t.name;
  j["game"] = std::string(games::to_string(t.game));
  j["task"] = std::string(to_string(t.task));
  j["players"] = t.players;
  j["gamesPerClass"] = t.games_per_class;
  j["seed"] = t.seed;
  j["mode"] = std::string(to_string(t.mode));
  j["filters"] = t.filters;
  j["trainFraction"] = t.train_fraction;
  if (t.task == TaskKind::Agents) {
    nlohmann::json roster = nlohmann::json::array();
    for (const auto& a : t.roster) roster.push_back(agents::to_json(a));
    j["agents"] = std::move(roster);
  } else {
    j["generator"] = agents::to_json(t.generator);
  }
  if (t.task == TaskKind::Parameters) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : t.parameter_classes) {
      nlohmann::json e = {{"label", c.label}};
      if (c.params) e["params"] = *c.params;
      else e["sampled"] = true;
      classes.push_back(std::move(e));
    }
    j["parameterClasses"] = std::move(classes);
  }
  if (t.task == TaskKind::Seeds) j["seeds"] = t.seeds;
  j["methods"] = t.methods;
  j["forest"] = to_json(t.forest);
  j["nshot"] = {{"n", t.nshot_n}, {"trials", t.nshot_trials}};
  j["policyDistance"] = {{"games", t.policy.games}, {"states", t.policy.states}, {"samples", t.policy.samples}};
  return j;
}

inline TaskSpec task_from_json(const nlohmann::json& j) {
  TaskSpec t;
  t.game = games::parse_game_id(j.at("game").get<std::string>());
  t.task = parse_task_kind(j.at("task").get<std::string>());
  t.name = j.value("name", std::string(games::to_string(t.game)) + "-" + std::string(to_string(t.task)));
  t.players = j.value("players", games::default_players(t.game));
  t.games_per_class = j.value("gamesPerClass", t.games_per_class);
  t.seed = j.value("seed", t.seed);
  t.mode = j.contains("mode") ? parse_mode(j["mode"].get<std::string>()) : default_mode(t.game);
  t.filters = j.value("filters", t.filters);
  t.train_fraction = j.value("trainFraction", t.train_fraction);
  if (j.contains("agents")) {
    for (const auto& a : j["agents"]) t.roster.push_back(agents::agent_from_json(a));
  } else if (t.task == TaskKind::Agents) {
    t.roster = agents::default_roster();
  }
  if (j.contains("generator")) t.generator = agents::agent_from_json(j["generator"]);
  if (j.contains("parameterClasses")) {
    std::size_t i = 0;
    for (const auto& c : j["parameterClasses"]) {
      ParameterClass pc;
      pc.label = c.value("label", "P" + std::to_string(i));
      if (c.contains("params")) pc.params = c["params"];
      t.parameter_classes.push_back(std::move(pc));
      ++i;
    }
  }
  if (j.contains("seeds")) t.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  else if (t.task == TaskKind::Seeds) t.seeds = {1, 2, 3, 4};
  if (j.contains("methods")) {
    t.methods.clear();
    for (const auto& m : j["methods"]) {
      auto parsed = parse_methods(m.get<std::string>());
      t.methods.insert(t.methods.end(), parsed.begin(), parsed.end());
    }
  }
  if (j.contains("forest")) t.forest = forest_config_from_json(j["forest"]);
  if (j.contains("nshot")) {
    t.nshot_n = j["nshot"].value("n", t.nshot_n);
    t.nshot_trials = j["nshot"].value("trials", t.nshot_trials);
  }
  if (j.contains("policyDistance")) {
    const auto& p = j["policyDistance"];
    t.policy.games = p.value("games", t.policy.games);
    t.policy.states = p.value("states", t.policy.states);
    t.policy.samples = p.value("samples", t.policy.samples);
  }
  t.validate();
  return t;
}

inline TaskSpec load_task(const fs::path& path) {
  if (!fs::exists(path)) throw Error("config file not found: " + path.string());
  try {
    return task_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Classes

struct ClassSpec {
  std::string label;
  games::GameSpec base;
  agents::AgentSpec agent;
  /// Seeds task: every game of the class reuses base.seed.
  bool fixed_game_seed = false;
};

inline std::vector<ClassSpec> resolve_classes(const TaskSpec& t) {
  std::vector<ClassSpec> out;
  auto base = games::default_spec(t.game);
  base.players = t.players;
  switch (t.task) {
    case TaskKind::Agents:
      for (const auto& a : t.roster) out.push_back({a.name, base, a, false});
      break;
    case TaskKind::Parameters: {
      Rng rng(derive_seed(t.seed, 0x7061726d));
      std::vector<games::GameParams> taken;
      for (const auto& c : t.parameter_classes)
        if (c.params) taken.push_back(games::params_from_json(t.game, *c.params));
      for (const auto& c : t.parameter_classes) {
        ClassSpec cs{c.label, base, t.generator, false};
        if (c.params) {
          cs.base.params = games::params_from_json(t.game, *c.params);
        } else {
          // Resample until the draw differs from every other class.
          for (int tries = 0;; ++tries) {
            if (tries > 1000) throw Error("could not sample a distinct parameter set for class '" + c.label + "'");
            auto draw = games::sample_parameters(t.game, rng).params;
            if (std::find(taken.begin(), taken.end(), draw) == taken.end()) {
              cs.base.params = draw;
              taken.push_back(draw);
              break;
            }
          }
        }
        out.push_back(std::move(cs));
      }
      break;
    }
    case TaskKind::Seeds:
      for (auto s : t.seeds) {
        ClassSpec cs{"seed" + std::to_string(s), base, t.generator, true};
        cs.base.seed = s;
        out.push_back(std::move(cs));
      }
      break;
  }
  std::set<std::string> labels;
  for (const auto& c : out)
    if (!labels.insert(c.label).second) throw Error("duplicate class label '" + c.label + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Baseline features

struct LinearFit {
  double w = 0.0;
  double b = 0.0;
};

/// Least-squares line through (i, ys[i]). One point gives slope 0.
inline LinearFit fit_line(std::span<const double> ys) {
  if (ys.empty()) throw Error("fit_line: empty score vector");
  const auto n = static_cast<double>(ys.size());
  if (ys.size() == 1) return {0.0, ys[0]};
  const double mean_x = (n - 1.0) / 2.0;
  double mean_y = 0.0;
  for (double y : ys) mean_y += y;
  mean_y /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double dx = static_cast<double>(i) - mean_x;
    sxy += dx * (ys[i] - mean_y);
    sxx += dx * dx;
  }
  const double w = sxy / sxx;
  return {w, mean_y - w * mean_x};
}

/// Duration plus, for Connect4, the outcome (P0 win, P1 win, draw); for the
/// scored games, final scores and per-player (w, b) of the score history.
inline std::vector<double> baseline_features(GameId game, int players, int decisions, const games::Outcome& outcome,
                                             const std::vector<std::vector<double>>& score_history) {
  std::vector<double> f = {static_cast<double>(decisions)};
  if (game == GameId::Connect4) {
    f.push_back(outcome.winner == 0 ? 1.0 : 0.0);
    f.push_back(outcome.winner == 1 ? 1.0 : 0.0);
    f.push_back(outcome.winner == games::kDraw ? 1.0 : 0.0);
    return f;
  }
  if (score_history.empty()) throw Error("baseline_features: no recorded scores");
  const auto p = static_cast<std::size_t>(players);
  for (std::size_t q = 0; q < p; ++q) f.push_back(score_history.back().at(q));
  std::vector<LinearFit> fits;
  for (std::size_t q = 0; q < p; ++q) {
    std::vector<double> ys;
    for (const auto& row : score_history) ys.push_back(row.at(q));
    fits.push_back(fit_line(ys));
  }
  for (const auto& fit : fits) f.push_back(fit.w);
  for (const auto& fit : fits) f.push_back(fit.b);
  return f;
}

// ---------------------------------------------------------------------------
// Dataset

struct GameRecord {
  std::size_t class_index = 0;
  std::size_t game_index = 0;
  std::string label;
  games::GameSpec spec;
  std::uint64_t agent_seed = 0;
  games::Outcome outcome;
  int decisions = 0;
  std::size_t states = 0;
  std::size_t tokens = 0;
  std::vector<std::vector<double>> score_history;
  /// Relative to the run directory; empty when not written.
  std::string trajectory_file;
  NormalizedBag bag;
  NormalizedBag char_bag;
  std::vector<double> baseline;
};

struct Dataset {
  TaskSpec task;
  std::vector<ClassSpec> classes;
  std::vector<GameRecord> records;
  Split split;

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& r : records) out.push_back(r.label);
    return out;
  }
  std::vector<NormalizedBag> bags() const {
    std::vector<NormalizedBag> out;
    for (const auto& r : records) out.push_back(r.bag);
    return out;
  }
  std::vector<NormalizedBag> char_bags() const {
    std::vector<NormalizedBag> out;
    for (const auto& r : records) out.push_back(r.char_bag);
    return out;
  }
  std::vector<std::vector<double>> baseline_rows() const {
    std::vector<std::vector<double>> out;
    for (const auto& r : records) out.push_back(r.baseline);
    return out;
  }
};

inline std::uint64_t game_seed(const TaskSpec& t, const ClassSpec& c, std::size_t cls, std::size_t game) {
  return c.fixed_game_seed ? c.base.seed : derive_seed(t.seed, 1, cls, game);
}

inline std::uint64_t agent_seed(const TaskSpec& t, std::size_t cls, std::size_t game) {
  return derive_seed(t.seed, 2, cls, game);
}

/// Tokenizes and bags the trajectory; the states themselves are not kept.
inline GameRecord make_record(const TaskSpec& t, const PathFilter& filter, std::size_t cls, std::size_t game,
                              std::string label, std::uint64_t agent_seed_value, const games::Trajectory& traj) {
  GameRecord r;
  r.class_index = cls;
  r.game_index = game;
  r.label = std::move(label);
  r.spec = traj.spec;
  r.agent_seed = agent_seed_value;
  r.outcome = traj.outcome;
  r.decisions = traj.decisions;
  r.states = traj.states.size();
  r.score_history = traj.score_history;
  const auto tokens = tokenize_trajectory(traj.states, t.mode, filter);
  r.tokens = tokens.size();
  r.bag = normalize(build_bag(tokens));
  r.char_bag = normalize(build_bag(tokenize_trajectory(traj.states, TokenizationMode::Char)));
  r.baseline = baseline_features(t.game, t.players, traj.decisions, traj.outcome, traj.score_history);
  return r;
}

inline nlohmann::json outcome_json(const games::Outcome& o) { return {{"winner", o.winner}, {"scores", o.scores}}; }

inline std::string trajectory_file_name(std::size_t cls, std::size_t game) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "trajectories/class_%02zu/game_%04zu.jsonl", cls, game);
  return buf;
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

/// One serialized state per line.
inline void write_trajectory(const fs::path& path, const games::Trajectory& traj) {
  std::string text;
  for (const auto& s : traj.states) {
    text += s.dump();
    text += '\n';
  }
  write_text_file(path, text);
}

inline Split dataset_split(const TaskSpec& t, const std::vector<GameRecord>& records) {
  std::vector<std::string> labels;
  for (const auto& r : records) labels.push_back(r.label);
  return stratified_split(labels, derive_seed(t.seed, 3), t.train_fraction);
}

/// Plays every game of the task, `jobs` at a time; records come back in
/// (class, game) order whatever the schedule. With `run_dir` set, each
/// trajectory is also written below it as JSONL.
inline Dataset generate_dataset(const TaskSpec& task, std::size_t jobs = 1, const fs::path* run_dir = nullptr) {
  task.validate();
  Dataset ds;
  ds.task = task;
  ds.classes = resolve_classes(task);
  const PathFilter filter(task.filters);
  const auto per_class = static_cast<std::size_t>(task.games_per_class);
  const std::size_t total = ds.classes.size() * per_class;
  ds.records.resize(total);
  parallel_for(total, jobs, [&](std::size_t idx) {
    const std::size_t cls = idx / per_class;
    const std::size_t game = idx % per_class;
    const auto& c = ds.classes[cls];
    auto spec = c.base;
    spec.seed = game_seed(task, c, cls, game);
    const auto aseed = agent_seed(task, cls, game);
    try {
      const std::vector<agents::AgentSpec> seats(static_cast<std::size_t>(spec.players), c.agent);
      const auto traj = agents::play_game(spec, seats, aseed);
      auto& rec = ds.records[idx];
      rec = make_record(task, filter, cls, game, c.label, aseed, traj);
      if (run_dir) {
        rec.trajectory_file = trajectory_file_name(cls, game);
        write_trajectory(*run_dir / rec.trajectory_file, traj);
      }
    } catch (const std::exception& e) {
      throw Error("generation failed for class '" + c.label + "' game " + std::to_string(game) + " (game seed " +
                  std::to_string(spec.seed) + ", agent seed " + std::to_string(aseed) + "): " + e.what());
    }
  });
  spdlog::debug("{}: {} games", task.name, total);
  ds.split = dataset_split(task, ds.records);
  return ds;
}

inline nlohmann::json manifest_json(const Dataset& ds) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : ds.classes)
    classes.push_back({{"label", c.label}, {"spec", to_json(c.base)}, {"agent", agents::to_json(c.agent)},
                       {"fixedGameSeed", c.fixed_game_seed}});
  std::vector<char> in_train(ds.records.size(), 0);
  for (auto i : ds.split.train) in_train[i] = 1;
  nlohmann::json gamelist = nlohmann::json::array();
  std::map<std::string, std::vector<int>> lengths;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    gamelist.push_back({{"class", r.class_index},
                        {"label", r.label},
                        {"game", r.game_index},
                        {"file", r.trajectory_file},
                        {"spec", to_json(r.spec)},
                        {"agentSeed", r.agent_seed},
                        {"decisions", r.decisions},
                        {"states", r.states},
                        {"tokens", r.tokens},
                        {"outcome", outcome_json(r.outcome)},
                        {"scoreHistory", r.score_history},
                        {"split", in_train[i] ? "train" : "test"}});
    lengths[r.label].push_back(r.decisions);
  }
  nlohmann::json stats = nlohmann::json::object();
  for (auto& [label, ls] : lengths) {
    std::sort(ls.begin(), ls.end());
    double mean = 0.0;
    for (int v : ls) mean += v;
    mean /= static_cast<double>(ls.size());
    stats[label] = {{"min", ls.front()}, {"median", ls[ls.size() / 2]}, {"max", ls.back()}, {"mean", mean}};
  }
  return {{"task", to_json(ds.task)},
          {"classes", std::move(classes)},
          {"games", std::move(gamelist)},
          {"lengthStats", std::move(stats)}};
}

inline fs::path manifest_path(const fs::path& run_dir) { return run_dir / "manifest.json"; }

/// Generates the dataset into `run_dir`: one JSONL file per game, then
/// manifest.json. An existing manifest is only replaced with `force`.
inline Dataset generate_to_dir(const TaskSpec& task, const fs::path& run_dir, std::size_t jobs, bool force) {
  if (fs::exists(manifest_path(run_dir)) && !force)
    throw Error(manifest_path(run_dir).string() + " already exists (use --force to overwrite)");
  fs::create_directories(run_dir);
  fs::remove_all(run_dir / "trajectories");
  auto ds = generate_dataset(task, jobs, &run_dir);
  write_text_file(manifest_path(run_dir), manifest_json(ds).dump(2) + "\n");
  return ds;
}

/// Rebuilds a dataset from a generated run directory.
inline Dataset load_dataset(const fs::path& run_dir, std::size_t jobs = 1) {
  const auto mpath = manifest_path(run_dir);
  if (!fs::exists(mpath)) throw Error("no dataset at " + run_dir.string() + " (missing manifest.json; run generate)");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(mpath));
  } catch (const nlohmann::json::exception& e) {
    throw Error(mpath.string() + ": " + e.what());
  }
  Dataset ds;
  ds.task = task_from_json(manifest.at("task"));
  ds.classes = resolve_classes(ds.task);
  const PathFilter filter(ds.task.filters);
  const auto& entries = manifest.at("games");
  ds.records.resize(entries.size());
  parallel_for(entries.size(), jobs, [&](std::size_t i) {
    const auto& e = entries[i];
    games::Trajectory traj;
    traj.spec = games::spec_from_json(e.at("spec"));
    traj.decisions = e.at("decisions").get<int>();
    traj.outcome.winner = e.at("outcome").at("winner").get<int>();
    traj.outcome.scores = e.at("outcome").at("scores").get<std::vector<double>>();
    traj.score_history = e.at("scoreHistory").get<std::vector<std::vector<double>>>();
    const auto file = e.at("file").get<std::string>();
    traj.states = read_states(run_dir / file);
    auto& rec = ds.records[i];
    rec = make_record(ds.task, filter, e.at("class").get<std::size_t>(), e.at("game").get<std::size_t>(),
                      e.at("label").get<std::string>(), e.at("agentSeed").get<std::uint64_t>(), traj);
    rec.trajectory_file = file;
  });
  ds.split = dataset_split(ds.task, ds.records);
  return ds;
}

// ---------------------------------------------------------------------------
// Classification

struct MethodResult {
  std::string method;
  EvalResult eval;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  /// Random-forest methods: MDI per feature.
  std::vector<std::string> feature_names;
  std::vector<double> importance;
};

namespace detail {

inline std::vector<NormalizedBag> subset(const std::vector<NormalizedBag>& bags, std::span<const std::size_t> idx) {
  std::vector<NormalizedBag> out;
  for (auto i : idx) out.push_back(bags[i]);
  return out;
}

/// Frequencies over the training vocabulary.
inline FeatureMatrix bag_matrix(const std::vector<NormalizedBag>& bags, std::span<const std::size_t> train) {
  return export_matrix(bags, build_vocabulary(subset(bags, train)));
}

inline void scale_by_train(std::vector<std::vector<double>>& rows, std::span<const std::size_t> train) {
  std::vector<std::vector<double>> fit_rows;
  for (auto i : train) fit_rows.push_back(rows[i]);
  MinMaxScaler scaler;
  scaler.fit(fit_rows);
  for (auto& r : rows) r = scaler.transform(r);
}

inline std::uint64_t method_stream(std::string_view method) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : method) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

}  // namespace detail

inline MethodResult run_method(const Dataset& ds, const std::string& method, std::size_t jobs = 1) {
  const auto labels = ds.labels();
  const auto& train = ds.split.train;
  const auto& test = ds.split.test;
  MethodResult res;
  res.method = method;
  res.n_train = train.size();
  res.n_test = test.size();

  auto vector_pnns = [&](std::vector<std::vector<double>> rows, Metric metric) {
    detail::scale_by_train(rows, train);
    const auto protos = fit_vector_prototypes(rows, labels, train);
    return evaluate(rows, labels, test, protos, metric);
  };
  auto forest = [&](const std::vector<std::vector<double>>& rows, std::vector<std::string> names) {
    std::vector<std::vector<double>> x;
    std::vector<std::string> y;
    for (auto i : train) {
      x.push_back(rows[i]);
      y.push_back(labels[i]);
    }
    auto config = ds.task.forest;
    config.seed = derive_seed(ds.task.forest.seed ^ ds.task.seed, detail::method_stream(method));
    config.jobs = jobs;
    const auto model = fit_forest(x, y, config);
    res.importance = model.feature_importance();
    res.feature_names = std::move(names);
    return evaluate(model, rows, labels, test);
  };
  auto baseline_names = [&] {
    std::vector<std::string> names = {"duration"};
    const auto p = static_cast<std::size_t>(ds.task.players);
    if (ds.task.game == GameId::Connect4) {
      names.insert(names.end(), {"win_p0", "win_p1", "draw"});
    } else {
      for (const char* prefix : {"score_p", "w_p", "b_p"})
        for (std::size_t q = 0; q < p; ++q) names.push_back(prefix + std::to_string(q));
    }
    return names;
  };

  if (method == "jsd" || method == "char") {
    const auto bags = method == "jsd" ? ds.bags() : ds.char_bags();
    const auto model = fit_pnns(bags, labels, train);
    if (model.degenerate) spdlog::warn("{}/{}: two classes have identical prototypes", ds.task.name, method);
    res.eval = evaluate(bags, labels, test, model.prototypes);
  } else if (method == "l2" || method == "cosine") {
    auto m = detail::bag_matrix(ds.bags(), train);
    res.eval = vector_pnns(std::move(m.rows), method == "l2" ? Metric::L2 : Metric::Cosine);
  } else if (method == "baseline") {
    res.eval = vector_pnns(ds.baseline_rows(), Metric::L2);
  } else if (method == "rf" || method == "rf-char") {
    auto m = detail::bag_matrix(method == "rf" ? ds.bags() : ds.char_bags(), train);
    res.eval = forest(m.rows, std::move(m.vocabulary));
  } else if (method == "rf-baseline") {
    res.eval = forest(ds.baseline_rows(), baseline_names());
  } else {
    throw Error("unknown method '" + method + "' (valid: " + join(all_methods()) + ")");
  }
  spdlog::info("{} {}: accuracy {:.3f} [{:.3f}, {:.3f}]", ds.task.name, method, res.eval.accuracy,
               res.eval.ci95.low, res.eval.ci95.high);
  return res;
}

inline std::vector<MethodResult> run_task(const Dataset& ds, const std::vector<std::string>& methods,
                                          std::size_t jobs = 1) {
  std::vector<MethodResult> out;
  for (const auto& m : methods) out.push_back(run_method(ds, m, jobs));
  return out;
}

inline std::vector<NShotRow> run_nshot(const Dataset& ds, const std::vector<std::size_t>& n_values,
                                       std::size_t trials, std::size_t jobs = 1) {
  const auto bags = ds.bags();
  const auto labels = ds.labels();
  return n_shot_eval(bags, labels, n_values, trials, derive_seed(ds.task.seed, 4), jobs);
}

// ---------------------------------------------------------------------------
// Policy distance and correlation

struct PolicyStudy {
  std::vector<std::string> agents;
  std::size_t states = 0;
  /// Symmetric, zero diagonal; indexed like `agents`.
  std::vector<std::vector<double>> distance;
};

/// Mean per-state JS distance between two agents' sampled policies.
inline double policy_distance(std::span<const agents::Policy> a, std::span<const agents::Policy> b) {
  if (a.size() != b.size()) throw Error("policy_distance: policy lists differ in length");
  if (a.empty()) throw Error("policy_distance: empty state set");
  double sum = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) sum += js_distance(a[s], b[s]);
  return sum / static_cast<double>(a.size());
}

/// Nonterminal states from random-play games, then a uniform sample of
/// `config.states` of them without replacement.
template <games::Game G>
std::vector<typename G::State> sample_states(const G& game, const PolicyStudyConfig& config, std::uint64_t seed) {
  std::vector<typename G::State> pool;
  for (int g = 0; g < config.games; ++g) {
    Rng rng(derive_seed(seed, 5, static_cast<std::uint64_t>(g)));
    auto s = game.initial_state(derive_seed(seed, 6, static_cast<std::uint64_t>(g)));
    while (!game.is_terminal(s)) {
      pool.push_back(s);
      game.step(s, agents::act_random(game, s, rng));
    }
  }
  if (pool.empty()) throw Error("sample_states: random play produced no nonterminal state");
  Rng rng(derive_seed(seed, 7));
  const auto k = std::min(pool.size(), static_cast<std::size_t>(config.states));
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
  pool.resize(k);
  return pool;
}

/// Pairwise policy distances over one shared state set. Each agent's policy
/// at each state is sampled once and reused for every pair it appears in.
template <games::Game G>
PolicyStudy policy_study(const G& game, const std::vector<typename G::State>& states,
                         const std::vector<agents::AgentSpec>& roster, int samples, std::uint64_t seed,
                         std::size_t jobs = 1) {
  std::vector<typename G::State> usable;
  for (const auto& s : states) {
    if (game.is_terminal(s)) spdlog::warn("policy distance: skipping a terminal state");
    else usable.push_back(s);
  }
  if (usable.empty()) throw Error("policy_study: no nonterminal states");
  const std::size_t n = usable.size();
  std::vector<std::vector<agents::Policy>> policies(roster.size(), std::vector<agents::Policy>(n));
  parallel_for(roster.size() * n, jobs, [&](std::size_t k) {
    const std::size_t a = k / n, s = k % n;
    Rng rng(derive_seed(seed, 8, a, s));
    policies[a][s] = agents::extract_policy(roster[a], game, usable[s], rng, samples);
  });
  PolicyStudy out;
  out.states = n;
  out.distance.assign(roster.size(), std::vector<double>(roster.size(), 0.0));
  for (std::size_t a = 0; a < roster.size(); ++a) {
    out.agents.push_back(roster[a].name);
    for (std::size_t b = a + 1; b < roster.size(); ++b)
      out.distance[a][b] = out.distance[b][a] = policy_distance(policies[a], policies[b]);
  }
  return out;
}

inline PolicyStudy policy_study(const TaskSpec& task, std::size_t jobs = 1) {
  if (task.task != TaskKind::Agents) throw Error("policy distance needs an agents task");
  auto spec = games::default_spec(task.game);
  spec.players = task.players;
  return games::visit_game(spec, [&](const auto& game) {
    const auto states = sample_states(game, task.policy, derive_seed(task.seed, 9));
    return policy_study(game, states, task.roster, task.policy.samples, derive_seed(task.seed, 10), jobs);
  });
}

/// Unset for fewer than 3 points or a constant coordinate.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson: length mismatch");
  if (x.size() < 3) return std::nullopt;
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct PairPoint {
  std::string a;
  std::string b;
  double prototype_jsd = 0.0;
  double policy_distance = 0.0;
};

struct CorrelationResult {
  std::string game;
  std::vector<PairPoint> pairs;
  std::optional<double> pearson_r;
};

/// One point per unordered pair of distinct agents: JS distance between the
/// agents' class prototypes (fitted on all of their games) against their
/// policy distance.
inline CorrelationResult correlation_study(const Dataset& ds, const PolicyStudy& study) {
  const auto model = fit_pnns(ds.bags(), ds.labels());
  auto proto = [&](const std::string& label) -> const NormalizedBag& {
    for (const auto& p : model.prototypes)
      if (p.label == label) return p.bag;
    throw Error("correlation_study: no games for agent '" + label + "'");
  };
  CorrelationResult out;
  out.game = std::string(games::to_string(ds.task.game));
  std::vector<double> xs, ys;
  for (std::size_t a = 0; a < study.agents.size(); ++a) {
    for (std::size_t b = a + 1; b < study.agents.size(); ++b) {
      PairPoint p{study.agents[a], study.agents[b], js_distance(proto(study.agents[a]), proto(study.agents[b])),
                  study.distance[a][b]};
      xs.push_back(p.prototype_jsd);
      ys.push_back(p.policy_distance);
      out.pairs.push_back(std::move(p));
    }
  }
  out.pearson_r = pearson(xs, ys);
  return out;
}

// ---------------------------------------------------------------------------
// Output files

inline fs::path results_dir(const fs::path& run_dir, const TaskSpec& t) {
  return run_dir / "results" / std::string(games::to_string(t.game)) / std::string(to_string(t.task));
}

inline std::string method_csv(const MethodResult& r) {
  std::ostringstream os;
  os << "method,accuracy,ci_low,ci_high,n_train,n_test\n"
     << r.method << ',' << format_number(r.eval.accuracy) << ',' << format_number(r.eval.ci95.low) << ','
     << format_number(r.eval.ci95.high) << ',' << r.n_train << ',' << r.n_test << '\n';
  return os.str();
}

inline std::string confusion_csv(const MethodResult& r) {
  std::ostringstream os;
  r.eval.confusion.write_csv(os);
  return os.str();
}

inline std::string importance_csv(const MethodResult& r) {
  std::ostringstream os;
  write_importance_csv(os, r.importance, r.feature_names);
  return os.str();
}

inline std::string nshot_csv(const std::vector<NShotRow>& rows) {
  std::ostringstream os;
  os << "n,mean_accuracy,min_accuracy,max_accuracy,trials\n";
  for (const auto& r : rows)
    os << r.n << ',' << format_number(r.mean_accuracy) << ',' << format_number(r.min_accuracy) << ','
       << format_number(r.max_accuracy) << ',' << r.trials << '\n';
  return os.str();
}

inline std::string correlation_csv(const CorrelationResult& c) {
  std::ostringstream os;
  os << "agent_a,agent_b,prototype_jsd,policy_distance\n";
  for (const auto& p : c.pairs)
    os << csv_escape(p.a) << ',' << csv_escape(p.b) << ',' << format_number(p.prototype_jsd) << ','
       << format_number(p.policy_distance) << '\n';
  return os.str();
}

inline std::string pearson_csv(const CorrelationResult& c) {
  std::ostringstream os;
  os << "game,pairs,pearson_r\n"
     << c.game << ',' << c.pairs.size() << ',' << (c.pearson_r ? format_number(*c.pearson_r) : "undefined") << '\n';
  return os.str();
}

/// Writes `<method>.csv`, `confusion_<method>.csv` and, for forests,
/// `importance_<method>.csv`. Returns the written paths.
inline std::vector<fs::path> write_method_results(const fs::path& dir, const std::vector<MethodResult>& results) {
  std::vector<fs::path> written;
  for (const auto& r : results) {
    written.push_back(dir / (r.method + ".csv"));
    write_text_file(written.back(), method_csv(r));
    written.push_back(dir / ("confusion_" + r.method + ".csv"));
    write_text_file(written.back(), confusion_csv(r));
    if (!r.importance.empty()) {
      written.push_back(dir / ("importance_" + r.method + ".csv"));
      write_text_file(written.back(), importance_csv(r));
    }
  }
  return written;
}

inline std::vector<fs::path> write_correlation(const fs::path& dir, const CorrelationResult& c) {
  const auto a = dir / ("correlation_" + c.game + ".csv");
  const auto b = dir / ("pearson_" + c.game + ".csv");
  write_text_file(a, correlation_csv(c));
  write_text_file(b, pearson_csv(c));
  return {a, b};
}

// ---------------------------------------------------------------------------
// Report

struct Summary {
  std::vector<std::string> columns;  // "<game>/<task>"
  std::vector<std::string> methods;  // in all_methods() order
  std::map<std::pair<std::string, std::string>, double> accuracy;  // (method, column)
  bool empty() const { return accuracy.empty(); }
};

/// Collects every `results/<game>/<task>/<method>.csv` below `root`.
inline Summary collect_results(const fs::path& root) {
  Summary s;
  if (!fs::exists(root)) return s;
  std::set<std::string> columns, methods;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    const auto method = p.stem().string();
    if (std::find(all_methods().begin(), all_methods().end(), method) == all_methods().end()) continue;
    const auto task_dir = p.parent_path();
    const auto game_dir = task_dir.parent_path();
    if (game_dir.parent_path().filename() != "results") continue;
    std::istringstream in(read_text_file(p));
    std::string header, row;
    std::getline(in, header);
    if (!std::getline(in, row)) continue;
    const auto c1 = row.find(',');
    const auto c2 = row.find(',', c1 + 1);
    if (c1 == std::string::npos) continue;
    const double acc = std::stod(row.substr(c1 + 1, c2 - c1 - 1));
    const auto column = game_dir.filename().string() + "/" + task_dir.filename().string();
    columns.insert(column);
    methods.insert(method);
    s.accuracy[{method, column}] = acc;
  }
  s.columns.assign(columns.begin(), columns.end());
  for (const auto& m : all_methods())
    if (methods.count(m)) s.methods.push_back(m);
  return s;
}

/// Methods as rows, game/task runs as columns.
inline std::string summary_csv(const Summary& s) {
  std::ostringstream os;
  os << "method";
  for (const auto& c : s.columns) os << ',' << csv_escape(c);
  os << '\n';
  for (const auto& m : s.methods) {
    os << m;
    for (const auto& c : s.columns) {
      const auto it = s.accuracy.find({m, c});
      os << ',';
      if (it != s.accuracy.end()) os << format_number(it->second);
    }
    os << '\n';
  }
  return os.str();
}

inline std::string summary_table(const Summary& s) {
  std::ostringstream os;
  os << "| method |";
  for (const auto& c : s.columns) os << ' ' << c << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < s.columns.size(); ++i) os << "---|";
  os << '\n';
  for (const auto& m : s.methods) {
    os << "| " << m << " |";
    for (const auto& c : s.columns) {
      const auto it = s.accuracy.find({m, c});
      char buf[16] = "";
      if (it != s.accuracy.end()) std::snprintf(buf, sizeof buf, "%.3f", it->second);
      os << ' ' << buf << " |";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace jsonbag::experiments
