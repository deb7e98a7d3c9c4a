// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "capgrpo/config.hpp"
#include "capgrpo/dataio.hpp"
#include "capgrpo/gradcheck.hpp"
#include "capgrpo/sweep.hpp"
#include "capgrpo/trainer.hpp"

namespace capgrpo::cli {

namespace {

namespace fs = std::filesystem;

struct Failure {
  ExitCode code;
  std::string message;
};

[[noreturn]] void fail(ExitCode code, std::string message) { throw Failure{code, std::move(message)}; }

// Options shared by every verb that builds a RunConfig.
struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
};

void add_config_options(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("-c,--config", a.config_path,
                  std::string("config file (default: $") + kConfigEnvVar + ")");
  cmd->add_option("-s,--set", a.overrides, "key=value override, repeatable")->allow_extra_args(false);
}

Settings read_settings_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(kIo, "cannot read config file " + path.string());
  return parse_settings(in, path.string());
}

// Defaults, then the config file (from --config or the environment), then
// --set overrides, then dedicated flags. `output_dir` may be given as a key
// in any of these layers.
RunConfig resolve_config(ConfigArgs& a, const Settings& flag_settings) {
  std::string path = a.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar); env && *env) path = env;
  }
  Settings all;
  if (!path.empty()) all = read_settings_file(path);
  for (auto& kv : parse_overrides(a.overrides)) all.push_back(std::move(kv));
  for (const auto& kv : flag_settings) all.push_back(kv);
  RunConfig cfg;
  for (const auto& [k, v] : all) {
    if (k == "output_dir") {
      a.output_dir = v;
    } else {
      apply_setting(cfg, k, v);
    }
  }
  validate_run_config(cfg);
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(kIo, "failed writing " + path.string());
}

std::string echo_config(const RunConfig& cfg, const std::string& output_dir) {
  return render_config(cfg) + "output_dir = " + output_dir + "\n";
}

std::string fixed4(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << x;
  return os.str();
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  ConfigArgs cfg;
  std::optional<long> steps;
  std::optional<std::uint64_t> seed;
  bool resume = false;
  bool quiet = false;
};

int do_train(TrainArgs& a, std::ostream& out) {
  Settings flags;
  if (a.steps) flags.emplace_back("t_max", std::to_string(*a.steps));
  if (a.seed) flags.emplace_back("seed", std::to_string(*a.seed));
  if (!a.cfg.output_dir.empty()) flags.emplace_back("output_dir", a.cfg.output_dir);
  const auto cfg = resolve_config(a.cfg, flags);
  if (a.cfg.output_dir.empty()) a.cfg.output_dir = "runs/train";
  const fs::path dir = a.cfg.output_dir;
  write_file(dir / "resolved_config.txt", echo_config(cfg, a.cfg.output_dir));

  RunOptions ro;
  ro.output_dir = dir;
  ro.resume = a.resume;
  if (!a.quiet) {
    ro.on_step = [&out](const StepMetrics& m) {
      if (!m.test_accuracy) return;
      out << "step " << m.step << "  reward " << fixed4(m.mean_total_reward) << "  length "
          << fixed4(m.mean_output_length) << "  beta " << fixed4(m.beta_hat) << "  test "
          << fixed4(*m.test_accuracy) << "  hard " << fixed4(*m.test_hard_accuracy) << "\n";
    };
  }
  const auto s = run_experiment(cfg, ro);
  out << "steps " << s.steps << "\n"
      << "train accuracy " << fixed4(s.train.accuracy) << "\n"
      << "test accuracy " << fixed4(s.test.accuracy) << " (easy " << fixed4(s.test.easy_accuracy)
      << ", hard " << fixed4(s.test.hard_accuracy) << ")\n"
      << "test output length " << fixed4(s.test.mean_output_length) << "\n"
      << "hard text-only ceiling " << fixed4(s.hard_test_bayes_accuracy) << "\n"
      << "metrics " << s.metrics_path.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string run_dir;
  std::string checkpoint;
  std::string split = "both";
  bool sampled = false;
  std::uint64_t seed = 0;
};

int do_eval(const EvalArgs& a, std::ostream& out) {
  const fs::path dir = a.run_dir;
  const fs::path config_path = dir / "config.txt";
  if (!fs::exists(config_path)) fail(kIo, "no config.txt in " + dir.string());
  RunConfig cfg = load_run_config(config_path);
  validate_run_config(cfg);
  const fs::path ck_path = a.checkpoint.empty() ? dir / "checkpoint.txt" : fs::path(a.checkpoint);
  std::ifstream ck(ck_path);
  if (!ck) fail(kIo, "cannot read checkpoint " + ck_path.string());
  auto vocab = std::make_shared<const Vocabulary>(make_vocabulary(cfg.env));
  TrainerState state;
  try {
    state = load_checkpoint(ck, cfg, vocab);
  } catch (const std::exception& e) {
    fail(kData, ck_path.string() + ": " + e.what());
  }
  const auto split = generate_split(cfg.env);
  EvalOptions eo;
  eo.mode = cfg.trainer.format_mode;
  eo.reveal_image = cfg.trainer.reveal_image;
  eo.max_tokens = cfg.trainer.max_tokens;
  eo.greedy = !a.sampled;
  eo.temperature = cfg.trainer.temperature;
  eo.seed = a.seed;

  out << "checkpoint step " << state.step << "\n";
  out << "split  accuracy  easy    hard    length  format\n";
  auto report = [&](const char* name, const std::vector<SyntheticTask>& tasks) {
    const auto r = evaluate(state.params, tasks, eo);
    out << std::left << std::setw(7) << name << fixed4(r.accuracy) << "    " << fixed4(r.easy_accuracy)
        << "  " << fixed4(r.hard_accuracy) << "  " << fixed4(r.mean_output_length) << "  "
        << fixed4(r.format_rate) << "\n";
  };
  if (a.split == "train" || a.split == "both") report("train", split.train);
  if (a.split == "test" || a.split == "both") report("test", split.test);
  return kOk;
}

// ---------------------------------------------------------------- sweeps

struct SweepArgs {
  ConfigArgs cfg;
  std::string env = "default";
  int seeds = 5;
  std::uint64_t first_seed = 0;
  int jobs = 0;
  std::optional<long> steps;
};

RunConfig sweep_base(SweepArgs& a, const char* default_dir) {
  Settings flags;
  if (a.env != "default") {
    // An environment file contributes only its env_* keys.
    for (const auto& [k, v] : read_settings_file(a.env)) {
      if (k.rfind("env_", 0) != 0) fail(kConfig, k + ": only env_* keys are allowed in --env files");
      flags.emplace_back(k, v);
    }
  }
  if (a.steps) flags.emplace_back("t_max", std::to_string(*a.steps));
  if (!a.cfg.output_dir.empty()) flags.emplace_back("output_dir", a.cfg.output_dir);
  auto cfg = resolve_config(a.cfg, flags);
  if (a.cfg.output_dir.empty()) a.cfg.output_dir = default_dir;
  return cfg;
}

int run_rows(SweepArgs& a, const RunConfig& base, const std::vector<NamedConfig>& rows,
             std::ostream& out) {
  const fs::path root = a.cfg.output_dir;
  write_file(root / "resolved_config.txt", echo_config(base, a.cfg.output_dir));
  SweepOptions so;
  so.num_seeds = a.seeds;
  so.first_seed = a.first_seed;
  so.jobs = a.jobs > 0 ? a.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  so.output_root = root;
  const auto runs = run_sweep(rows, so);
  const auto summary = summarize(rows, runs);
  write_file(root / "runs.csv", runs_csv(runs));
  write_file(root / "summary.csv", sweep_csv(summary));
  const auto text = sweep_text(summary);
  write_file(root / "summary.txt", text);
  out << text;
  return kOk;
}

int do_ablate(SweepArgs& a, std::ostream& out) {
  const auto base = sweep_base(a, "runs/ablate");
  return run_rows(a, base, ablation_rows(base), out);
}

// ---------------------------------------------------------------- schedule

struct ScheduleArgs {
  double beta = 0.04;
  long t_max = 1000;
  std::string strategy = "all";
  bool sweep = false;
  SweepArgs sweep_args;
};

int do_schedule(ScheduleArgs& a, std::ostream& out) {
  if (a.sweep) {
    auto& s = a.sweep_args;
    s.cfg.overrides.push_back("beta=" + format_double(a.beta));
    if (!s.steps) s.steps = a.t_max;
    const auto base = sweep_base(s, "runs/schedule");
    return run_rows(s, base, schedule_rows(base), out);
  }
  std::vector<KlStrategy> strategies;
  if (a.strategy == "all") {
    strategies = {KlStrategy::kStatic, KlStrategy::kLinearDecay, KlStrategy::kCosineAnnealing};
  } else if (auto s = parse_kl_strategy(a.strategy)) {
    strategies = {*s};
  } else {
    fail(kConfig, "kl_strategy: expected static, linear, cosine or all");
  }
  std::vector<KlSchedule> scheds;
  for (auto s : strategies) {
    KlSchedule k{a.beta, s, a.t_max};
    try {
      validate(k);
    } catch (const std::exception& e) {
      fail(kConfig, std::string("schedule: ") + e.what());
    }
    scheds.push_back(k);
  }
  if (scheds.size() == 1) {
    for (long t = 0; t <= a.t_max; ++t) out << format_double(beta_at(scheds[0], t)) << "\n";
    return kOk;
  }
  out << "step";
  for (const auto& k : scheds) out << "," << to_string(k.strategy);
  out << "\n";
  for (long t = 0; t <= a.t_max; ++t) {
    out << t;
    for (const auto& k : scheds) out << "," << format_double(beta_at(k, t));
    out << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  int trials = 20;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  double step = 1e-5;
  int coordinates = 200;
};

int do_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  if (a.trials < 1) fail(kUsage, "--trials must be >= 1");
  int failures = 0;
  out << "trial  hidden  ratio     beta   clip  clip_frac  rel_error\n";
  const auto cases = gradcheck_cases(a.trials, a.seed);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto r = run_gradcheck(cases[i], a.step, a.coordinates);
    const bool ok = r.relative_error < a.tolerance;
    failures += ok ? 0 : 1;
    std::ostringstream err;
    err << std::scientific << std::setprecision(2) << r.relative_error;
    out << std::left << std::setw(7) << i << std::setw(8) << r.config.hidden_dim << std::setw(10)
        << to_string(r.config.ratio_level) << std::setw(7) << format_double(r.config.beta_hat)
        << std::setw(6) << (r.config.clip_active ? "on" : "off") << std::setw(11)
        << fixed4(r.clip_fraction) << err.str() << (ok ? "" : "  FAIL") << "\n";
  }
  out << (failures ? "FAIL " : "PASS ") << cases.size() - static_cast<std::size_t>(failures) << "/"
      << cases.size() << " below " << format_double(a.tolerance) << "\n";
  return failures ? kCheckFailed : kOk;
}

// ---------------------------------------------------------------- export-metrics

struct ExportArgs {
  std::vector<std::string> inputs;
  std::string output;
  std::string text;
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

int do_export(const ExportArgs& a, std::ostream& out) {
  const std::string header = metrics_header();
  const auto columns = split_csv(header);
  std::ostringstream merged;
  merged << "run," << header << "\n";
  std::vector<std::vector<std::string>> finals;
  for (const auto& in : a.inputs) {
    fs::path p = in;
    if (fs::is_directory(p)) p /= "metrics.csv";
    std::ifstream f(p);
    if (!f) fail(kIo, "cannot read metrics log " + p.string());
    std::string line;
    if (!std::getline(f, line) || line != header) {
      fail(kData, p.string() + ": header does not match the metrics log format");
    }
    const std::string run = fs::path(in).filename().empty() ? fs::path(in).parent_path().filename().string()
                                                            : fs::path(in).filename().string();
    std::vector<std::string> last_eval;
    int lineno = 1;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      if (cells.size() != columns.size()) {
        fail(kData, p.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(columns.size()) + " columns");
      }
      merged << run << "," << line << "\n";
      if (!cells.back().empty()) last_eval = cells;
    }
    if (!last_eval.empty()) {
      last_eval.insert(last_eval.begin(), run);
      finals.push_back(std::move(last_eval));
    }
  }
  if (a.output.empty()) {
    out << merged.str();
  } else {
    write_file(a.output, merged.str());
  }
  if (!a.text.empty()) {
    // Last evaluated row of each log.
    std::vector<std::string> cols = {"run"};
    cols.insert(cols.end(), columns.begin(), columns.end());
    const std::vector<std::string> keep = {"run",          "step",          "mean_output_length",
                                           "train_accuracy", "test_accuracy", "test_hard_accuracy",
                                           "caption_reward_rate"};
    std::vector<std::size_t> idx;
    for (const auto& k : keep) idx.push_back(static_cast<std::size_t>(std::find(cols.begin(), cols.end(), k) - cols.begin()));
    std::vector<std::vector<std::string>> table = {keep};
    for (const auto& r : finals) {
      std::vector<std::string> row;
      for (auto i : idx) row.push_back(i < r.size() ? r[i] : "");
      table.push_back(std::move(row));
    }
    std::vector<std::size_t> width(keep.size(), 0);
    for (const auto& r : table) {
      for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    std::ostringstream os;
    for (const auto& r : table) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        os << (i ? "  " : "") << std::left << std::setw(static_cast<int>(width[i])) << r[i];
      }
      os << "\n";
    }
    write_file(a.text, os.str());
  }
  return kOk;
}

// ---------------------------------------------------------------- gen-data

int do_gen_data(ConfigArgs& a, std::ostream& out) {
  Settings flags;
  if (!a.output_dir.empty()) flags.emplace_back("output_dir", a.output_dir);
  const auto cfg = resolve_config(a, flags);
  if (a.output_dir.empty()) a.output_dir = "data";
  const fs::path dir = a.output_dir;
  write_file(dir / "resolved_config.txt", echo_config(cfg, a.output_dir));
  const auto split = generate_split(cfg.env);
  fs::create_directories(dir);
  try {
    save_records(tasks_to_records(split.train), dir / "train.jsonl");
    save_records(tasks_to_records(split.test), dir / "test.jsonl");
  } catch (const std::runtime_error& e) {
    fail(kIo, e.what());
  }
  out << "train " << split.train.size() << " records -> " << (dir / "train.jsonl").string() << "\n"
      << "test " << split.test.size() << " records -> " << (dir / "test.jsonl").string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Caption-regularized GRPO on a synthetic shortcut environment", "capgrpo"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "run one training experiment");
  add_config_options(c_train, train.cfg);
  c_train->add_option("-o,--output-dir", train.cfg.output_dir, "run directory (default runs/train)");
  c_train->add_option("--steps", train.steps, "same as --set t_max=N");
  c_train->add_option("--seed", train.seed, "same as --set seed=N");
  c_train->add_flag("--resume", train.resume, "continue from checkpoint.txt in the run directory");
  c_train->add_flag("-q,--quiet", train.quiet, "no per-evaluation progress lines");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on its environment");
  c_eval->add_option("run_dir", eval.run_dir, "directory written by train")->required();
  c_eval->add_option("--checkpoint", eval.checkpoint, "checkpoint file (default run_dir/checkpoint.txt)");
  c_eval->add_option("--split", eval.split, "train, test or both")
      ->check(CLI::IsMember({"train", "test", "both"}));
  c_eval->add_flag("--sampled", eval.sampled, "sample at the training temperature instead of greedy");
  c_eval->add_option("--seed", eval.seed, "sampling seed");

  SweepArgs ablate;
  auto* c_ablate = app.add_subcommand("ablate", "GRPO / +Caption / +LengthReward / +CaptionReward matrix");
  add_config_options(c_ablate, ablate.cfg);
  c_ablate->add_option("-o,--output-dir", ablate.cfg.output_dir, "output root (default runs/ablate)");
  c_ablate->add_option("--env", ablate.env, "'default' or a file of env_* keys");
  c_ablate->add_option("--seeds", ablate.seeds, "seeds per configuration")->check(CLI::PositiveNumber);
  c_ablate->add_option("--first-seed", ablate.first_seed);
  c_ablate->add_option("-j,--jobs", ablate.jobs, "parallel runs (default: hardware threads)");
  c_ablate->add_option("--steps", ablate.steps, "same as --set t_max=N");

  ScheduleArgs sched;
  auto* c_sched = app.add_subcommand("schedule", "print the KL coefficient per step, or run the schedule sweep");
  c_sched->add_option("--beta", sched.beta);
  c_sched->add_option("--t-max", sched.t_max);
  c_sched->add_option("--strategy", sched.strategy, "static, linear, cosine or all");
  c_sched->add_flag("--sweep", sched.sweep, "train Static(beta), Static(beta/5), Linear and Cosine");
  add_config_options(c_sched, sched.sweep_args.cfg);
  c_sched->add_option("-o,--output-dir", sched.sweep_args.cfg.output_dir, "sweep output root");
  c_sched->add_option("--env", sched.sweep_args.env, "'default' or a file of env_* keys");
  c_sched->add_option("--seeds", sched.sweep_args.seeds)->check(CLI::PositiveNumber);
  c_sched->add_option("-j,--jobs", sched.sweep_args.jobs);

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "finite-difference check of the objective gradient");
  c_gc->add_option("--trials", gc.trials);
  c_gc->add_option("--seed", gc.seed);
  c_gc->add_option("--tolerance", gc.tolerance);
  c_gc->add_option("--step", gc.step)->check(CLI::PositiveNumber);
  c_gc->add_option("--coordinates", gc.coordinates)->check(CLI::PositiveNumber);

  ExportArgs ex;
  auto* c_ex = app.add_subcommand("export-metrics", "merge metrics logs into one table");
  c_ex->add_option("inputs", ex.inputs, "run directories or metrics.csv files")->required();
  c_ex->add_option("-o,--output", ex.output, "merged CSV (default stdout)");
  c_ex->add_option("--text", ex.text, "aligned table of each run's last evaluated step");

  ConfigArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "write the synthetic splits as record files");
  add_config_options(c_gen, gen);
  c_gen->add_option("-o,--output-dir", gen.output_dir, "destination (default data)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "capgrpo: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (c_train->parsed()) return do_train(train, out);
    if (c_eval->parsed()) return do_eval(eval, out);
    if (c_ablate->parsed()) return do_ablate(ablate, out);
    if (c_sched->parsed()) return do_schedule(sched, out);
    if (c_gc->parsed()) return do_gradcheck(gc, out);
    if (c_ex->parsed()) return do_export(ex, out);
    if (c_gen->parsed()) return do_gen_data(gen, out);
  } catch (const Failure& f) {
    err << "capgrpo: " << f.message << "\n";
    return f.code;
  } catch (const ConfigError& e) {
    err << "capgrpo: config error: " << e.what() << "\n";
    return kConfig;
  } catch (const fs::filesystem_error& e) {
    err << "capgrpo: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "capgrpo: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace capgrpo::cli
