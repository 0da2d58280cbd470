// jsonbag: generate game datasets, classify trajectories, run the N-shot and
// policy-distance studies, and merge results into a summary table.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "jsonbag/jsonbag.hpp"

namespace fs = std::filesystem;
using namespace jsonbag;
using namespace jsonbag::experiments;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = default_jobs();
  std::string methods;
  std::string n_values = "3,5,10,20,40";
  std::size_t trials = 20;
  bool force = false;
  std::string game;
  std::string mode = "ordered";
  std::string filter;
  std::string input;
  bool counts = false;
};

/// Usage errors exit 2, runtime failures 1.
struct UsageError : Error {
  using Error::Error;
};

std::vector<std::size_t> parse_sizes(const std::string& list) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    auto end = list.find(',', start);
    if (end == std::string::npos) end = list.size();
    const auto item = list.substr(start, end - start);
    if (!item.empty()) {
      try {
        std::size_t pos = 0;
        const long v = std::stol(item, &pos);
        if (pos != item.size() || v <= 0) throw std::invalid_argument(item);
        out.push_back(static_cast<std::size_t>(v));
      } catch (const std::exception&) {
        throw UsageError("--n expects positive integers, got '" + item + "'");
      }
    }
    start = end + 1;
  }
  if (out.empty()) throw UsageError("--n is empty");
  return out;
}

std::vector<std::string> methods_or(const Options& o, const std::vector<std::string>& fallback) {
  if (o.methods.empty()) return fallback;
  try {
    return parse_methods(o.methods);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

TaskSpec task_with_overrides(const Options& o) {
  auto task = load_task(o.config);
  if (o.seed) task.seed = *o.seed;
  return task;
}

void print_written(const std::vector<fs::path>& paths) {
  for (const auto& p : paths) std::cout << p.string() << '\n';
}

Dataset open_dataset(const Options& o) {
  auto ds = load_dataset(o.out, o.jobs);
  if (o.seed) {
    ds.task.seed = *o.seed;
    ds.split = dataset_split(ds.task, ds.records);
  }
  return ds;
}

void classify(const Options& o, const Dataset& ds) {
  const auto results = run_task(ds, methods_or(o, ds.task.methods), o.jobs);
  const auto dir = results_dir(o.out, ds.task);
  print_written(write_method_results(dir, results));
  for (const auto& r : results)
    std::cout << r.method << ": accuracy " << format_number(r.eval.accuracy) << " (95% CI "
              << format_number(r.eval.ci95.low) << ", " << format_number(r.eval.ci95.high) << ")\n";
}

void nshot(const Options& o, const Dataset& ds, const std::vector<std::size_t>& n, std::size_t trials) {
  const auto rows = run_nshot(ds, n, trials, o.jobs);
  const auto path = results_dir(o.out, ds.task) / "nshot.csv";
  write_text_file(path, nshot_csv(rows));
  std::cout << path.string() << '\n' << nshot_csv(rows);
}

void correlate(const Options& o, const Dataset& ds) {
  const auto study = policy_study(ds.task, o.jobs);
  const auto corr = correlation_study(ds, study);
  print_written(write_correlation(results_dir(o.out, ds.task), corr));
  std::cout << correlation_csv(corr) << pearson_csv(corr);
}

/// Policy distances for the default roster when no agents dataset exists.
void policy_only(const Options& o) {
  TaskSpec task;
  task.game = games::parse_game_id(o.game);
  task.task = TaskKind::Agents;
  task.players = games::default_players(task.game);
  task.roster = agents::default_roster();
  if (o.seed) task.seed = *o.seed;
  const auto study = policy_study(task, o.jobs);
  std::ostringstream os;
  os << "agent";
  for (const auto& a : study.agents) os << ',' << csv_escape(a);
  os << '\n';
  for (std::size_t i = 0; i < study.agents.size(); ++i) {
    os << csv_escape(study.agents[i]);
    for (double d : study.distance[i]) os << ',' << format_number(d);
    os << '\n';
  }
  if (!o.out.empty()) {
    const auto path = fs::path(o.out) / ("policy_distance_" + o.game + ".csv");
    write_text_file(path, os.str());
    std::cout << path.string() << '\n';
  }
  std::cout << os.str() << "pearson r: undefined (no agents dataset; run generate on an agents config first)\n";
}

int run(int argc, char** argv) {
  Options o;
  CLI::App app{"JSON bag-of-tokens game trajectory analysis"};
  app.require_subcommand(1);
  auto add_jobs = [&](CLI::App* c) {
    c->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "override the config seed"); };

  auto* gen = app.add_subcommand("generate", "play the games of a task and write trajectories plus manifest");
  gen->add_option("--config", o.config, "task config JSON")->required();
  gen->add_option("--out", o.out, "run directory")->required();
  gen->add_flag("--force", o.force, "overwrite an existing manifest");
  add_seed(gen);
  add_jobs(gen);

  auto* cls = app.add_subcommand("classify", "run classification methods on a generated dataset");
  cls->add_option("--out", o.out, "run directory holding the dataset")->required();
  cls->add_option("--methods", o.methods, "comma list: " + join(all_methods()) + " (default: config)");
  add_seed(cls);
  add_jobs(cls);

  auto* ns = app.add_subcommand("nshot", "N-shot P-NNS study on a generated dataset");
  ns->add_option("--out", o.out, "run directory holding the dataset")->required();
  ns->add_option("--n", o.n_values, "comma list of shots per class");
  ns->add_option("--trials", o.trials, "trials per N")->check(CLI::PositiveNumber);
  add_seed(ns);
  add_jobs(ns);

  auto* pd = app.add_subcommand("policy-distance", "policy distances and their correlation with prototype JSD");
  pd->add_option("--out", o.out, "run directory of an agents dataset (or output dir with --game)");
  pd->add_option("--game", o.game, "game for a roster-only study when no dataset is given");
  add_seed(pd);
  add_jobs(pd);

  auto* rep = app.add_subcommand("report", "merge result CSVs below a directory into one summary table");
  rep->add_option("dir", o.out, "directory to scan")->required();

  auto* all = app.add_subcommand("run", "generate, classify, nshot and (agents tasks) policy-distance in one go");
  all->add_option("--config", o.config, "task config JSON")->required();
  all->add_option("--out", o.out, "run directory")->required();
  all->add_flag("--force", o.force, "overwrite an existing manifest");
  add_seed(all);
  add_jobs(all);

  auto* tok = app.add_subcommand("tokenize", "print the tokens of a JSON or JSONL file");
  tok->add_option("input", o.input, "state file (.json or .jsonl)")->required()->check(CLI::ExistingFile);
  tok->add_option("--mode", o.mode, "ordered|unordered|both|char");
  tok->add_option("--filter", o.filter, "JSON array of excluded path prefixes")->check(CLI::ExistingFile);
  tok->add_flag("--counts", o.counts, "print the bag (token counts) instead of the token stream");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    const auto ds = generate_to_dir(task_with_overrides(o), o.out, o.jobs, o.force);
    std::cout << manifest_path(o.out).string() << '\n'
              << ds.records.size() << " trajectories (" << ds.classes.size() << " classes x "
              << ds.task.games_per_class << " games)\n";
  } else if (cls->parsed()) {
    methods_or(o, {});  // reject bad method names before loading
    classify(o, open_dataset(o));
  } else if (ns->parsed()) {
    const auto n = parse_sizes(o.n_values);
    nshot(o, open_dataset(o), n, o.trials);
  } else if (pd->parsed()) {
    if (!o.out.empty() && fs::exists(manifest_path(o.out))) {
      correlate(o, open_dataset(o));
    } else if (!o.game.empty()) {
      policy_only(o);
    } else {
      throw UsageError("policy-distance needs --out with an agents dataset, or --game");
    }
  } else if (rep->parsed()) {
    const auto summary = collect_results(o.out);
    if (summary.empty()) {
      spdlog::warn("no results found below {}", o.out);
      std::cout << "empty summary\n";
      return 0;
    }
    const auto path = fs::path(o.out) / "summary.csv";
    write_text_file(path, summary_csv(summary));
    std::cout << path.string() << '\n' << summary_table(summary);
  } else if (all->parsed()) {
    const auto task = task_with_overrides(o);
    const auto ds = generate_to_dir(task, o.out, o.jobs, o.force);
    classify(o, ds);
    nshot(o, ds, task.nshot_n, task.nshot_trials);
    if (task.task == TaskKind::Agents) correlate(o, ds);
  } else if (tok->parsed()) {
    const auto mode = parse_mode(o.mode);
    const auto filter = o.filter.empty() ? PathFilter{} : read_filter(o.filter);
    const auto tokens = tokenize_trajectory(read_states(o.input), mode, filter);
    if (o.counts) {
      for (const auto& [t, c] : build_bag(tokens).counts) std::cout << c << '\t' << t << '\n';
    } else {
      for (const auto& t : tokens) std::cout << t << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
