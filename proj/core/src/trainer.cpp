// SPDX-License-Identifier: Apache-2.0

#include "capgrpo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "capgrpo/config.hpp"
#include "capgrpo/prompts.hpp"

namespace capgrpo {

namespace {

std::string opt_cell(const std::optional<double>& x) { return x ? format_double(*x) : ""; }

KlSchedule schedule_of(const TrainerConfig& cfg) {
  return KlSchedule{cfg.beta, cfg.kl_strategy, cfg.t_max};
}

std::vector<double> context_for(const SyntheticTask& task, FormatMode mode, bool reveal_image) {
  return policy_context(mode, task_context_features(task, reveal_image));
}

std::string fmt_stats(const std::vector<RolloutGroup>& groups) {
  std::ostringstream out;
  for (const auto& g : groups) {
    out << "  group " << g.task_id << " rewards:";
    for (double r : g.rewards) out << " " << format_double(r);
    out << " advantages:";
    for (double a : g.advantages) out << " " << format_double(a);
    out << "\n";
  }
  return out.str();
}

}  // namespace

std::string_view to_string(JudgeKind kind) {
  return kind == JudgeKind::kExternal ? "external" : "oracle";
}

std::optional<JudgeKind> parse_judge_kind(std::string_view text) {
  if (text == "oracle") return JudgeKind::kOracle;
  if (text == "external") return JudgeKind::kExternal;
  return std::nullopt;
}

void validate(const TrainerConfig& cfg) {
  auto bad = [](const std::string& what) { throw std::invalid_argument(what); };
  if (cfg.group_size < 2) bad("group_size must be >= 2");
  if (!(cfg.temperature > 0.0)) bad("temperature must be > 0");
  if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha)) bad("alpha must be >= 0");
  if (!(cfg.beta >= 0.0) || !std::isfinite(cfg.beta)) bad("beta must be >= 0");
  if (!(cfg.clip_epsilon > 0.0 && cfg.clip_epsilon < 1.0)) bad("clip_epsilon must be in (0, 1)");
  if (cfg.t_max < 1) bad("t_max must be >= 1");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    bad("learning_rate must be >= 0");
  }
  if (!(cfg.length_weight >= 0.0)) bad("length_weight must be >= 0");
  if (cfg.length_target < 1) bad("length_target must be >= 1");
  if (cfg.judge_max_in_flight < 1) bad("judge_max_in_flight must be >= 1");
  if (cfg.old_policy_refresh_every < 1) bad("old_policy_refresh_every must be >= 1");
  if (cfg.tasks_per_step < 1) bad("tasks_per_step must be >= 1");
  if (cfg.eval_every < 1) bad("eval_every must be >= 1");
  if (cfg.checkpoint_every < 1) bad("checkpoint_every must be >= 1");
  if (cfg.max_tokens < 1) bad("max_tokens must be >= 1");
  if (cfg.hidden_dim < 0) bad("hidden_dim must be >= 0");
}

std::string metrics_header() {
  return "step,mean_output_length,format_reward_rate,caption_reward_rate,accuracy_reward_rate,"
         "mean_total_reward,kl_value,beta_hat,empty_think_rate,train_accuracy,judge_error_rate,"
         "clip_fraction,test_accuracy,test_easy_accuracy,test_hard_accuracy,"
         "test_mean_output_length";
}

std::string metrics_row(const StepMetrics& m) {
  std::string row = std::to_string(m.step);
  for (double x : {m.mean_output_length, m.format_reward_rate, m.caption_reward_rate,
                   m.accuracy_reward_rate, m.mean_total_reward, m.kl_value, m.beta_hat,
                   m.empty_think_rate, m.train_accuracy, m.judge_error_rate, m.clip_fraction}) {
    row += "," + format_double(x);
  }
  for (const auto& x : {m.test_accuracy, m.test_easy_accuracy, m.test_hard_accuracy,
                        m.test_mean_output_length}) {
    row += "," + opt_cell(x);
  }
  return row;
}

int output_length(const Vocabulary& vocab, std::span<const int> tokens) {
  int n = 0;
  for (int t : tokens) {
    if (t == vocab.end_id()) break;
    ++n;
  }
  return n;
}

EvalResult evaluate(const PolicyParams& params, std::span<const SyntheticTask> split,
                    const EvalOptions& opts) {
  if (split.empty()) throw std::invalid_argument("evaluate: empty split");
  const auto& vocab = *params.vocab;
  EvalResult r;
  int correct = 0, easy_correct = 0, hard_correct = 0, formatted = 0;
  long length = 0;
  GenerationConfig gen{opts.temperature, opts.max_tokens, opts.mode};
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto& task = split[i];
    const auto ctx = context_for(task, opts.mode, opts.reveal_image);
    const auto seq = opts.greedy ? greedy_sequence(params, ctx, opts.max_tokens)
                                 : sample_sequence(params, ctx, gen, mix_seed(opts.seed, i));
    length += output_length(vocab, seq.tokens);
    const auto parsed = parse_response(vocab.detokenize(seq.tokens), opts.mode);
    int ok = 0;
    if (const auto* resp = std::get_if<StructuredResponse>(&parsed)) {
      ++formatted;
      ok = accuracy_reward(resp->answer, task.gold);
    }
    correct += ok;
    if (task.difficulty == Difficulty::kEasy) {
      ++r.num_easy;
      easy_correct += ok;
    } else {
      ++r.num_hard;
      hard_correct += ok;
    }
  }
  const double n = static_cast<double>(split.size());
  r.accuracy = correct / n;
  r.easy_accuracy = r.num_easy ? static_cast<double>(easy_correct) / r.num_easy : 0.0;
  r.hard_accuracy = r.num_hard ? static_cast<double>(hard_correct) / r.num_hard : 0.0;
  r.mean_output_length = static_cast<double>(length) / n;
  r.format_rate = formatted / n;
  return r;
}

TrainerState init_state(const RunConfig& cfg, std::shared_ptr<const Vocabulary> vocab) {
  PriorConfig prior = cfg.trainer.prior;
  prior.seed = mix_seed(cfg.trainer.seed, 0x7072);
  auto params = make_prior_policy(std::move(vocab), cfg.env.num_attributes, cfg.env.num_symbols,
                                  cfg.trainer.hidden_dim, prior);
  auto reference = std::make_shared<const PolicySnapshot>(params, SnapshotRole::kReference);
  return TrainerState{params, params, std::move(reference), 0,
                      Rng(mix_seed(cfg.trainer.seed, 0x7274))};
}

std::unique_ptr<Judge> make_judge(const TrainerConfig& cfg) {
  if (cfg.judge == JudgeKind::kOracle) return std::make_unique<OracleJudge>();
  ExternalJudgeConfig ext = cfg.external_judge;
  if (!cfg.judge_template_file.empty()) {
    ext.judge_template = load_template_file(cfg.judge_template_file);
  }
  return std::make_unique<ExternalJudge>(std::move(ext));
}

std::vector<SyntheticTask> sample_batch(TrainerState& state, std::span<const SyntheticTask> train,
                                        int tasks_per_step) {
  if (train.empty()) throw std::invalid_argument("empty training split");
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto take = std::min(static_cast<std::size_t>(tasks_per_step), idx.size());
  std::vector<SyntheticTask> batch;
  batch.reserve(static_cast<std::size_t>(tasks_per_step));
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + state.rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
    batch.push_back(train[idx[i]]);
  }
  // More tasks than the split holds: draw the rest with replacement.
  while (batch.size() < static_cast<std::size_t>(tasks_per_step)) {
    batch.push_back(train[state.rng.below(train.size())]);
  }
  return batch;
}

StepResult train_step(TrainerState& state, std::span<const SyntheticTask> batch,
                      const TrainerConfig& cfg, Judge& judge) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const auto& vocab = *state.params.vocab;
  const int n = cfg.group_size;
  const double beta_hat = beta_at(schedule_of(cfg), state.step);
  const GenerationConfig gen{cfg.temperature, cfg.max_tokens, cfg.format_mode};
  const bool caption_terms =
      cfg.caption_reward_enabled && cfg.format_mode == FormatMode::kCaptionReasonAnswer;

  struct Rollout {
    std::vector<int> tokens;
    std::optional<StructuredResponse> resp;
    int r_f = 0;
    int r_a = 0;
    double r_len = 0.0;
    int query = -1;
  };
  std::vector<std::vector<Rollout>> rollouts(batch.size());
  std::vector<std::vector<double>> contexts;
  std::vector<CaptionQuery> queries;

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& task = batch[b];
    contexts.push_back(context_for(task, cfg.format_mode, cfg.reveal_image));
    for (int i = 0; i < n; ++i) {
      Rollout ro;
      ro.tokens = sample_sequence(state.old_params, contexts.back(), gen, state.rng.next()).tokens;
      const auto text = vocab.detokenize(ro.tokens);
      auto parsed = parse_response(text, cfg.format_mode);
      if (auto* resp = std::get_if<StructuredResponse>(&parsed)) ro.resp = std::move(*resp);
      ro.r_f = format_reward(text, cfg.format_mode, cfg.strict_format);
      if (ro.resp) {
        ro.r_a = accuracy_reward(ro.resp->answer, task.gold);
        if (cfg.length_reward_enabled) ro.r_len = length_reward(*ro.resp, cfg.length_target);
        if (caption_terms) {
          ro.query = static_cast<int>(queries.size());
          queries.push_back({ro.resp->info.value_or(""), task.question.text, &task.gold});
        }
      }
      rollouts[b].push_back(std::move(ro));
    }
  }

  const auto verdicts = caption_rewards(queries, judge, cfg.judge_max_in_flight);

  StepMetrics m;
  m.step = state.step;
  m.beta_hat = beta_hat;
  std::vector<RolloutGroup> groups;
  double total_len = 0.0;
  int total = 0, formats = 0, captions = 0, accurate = 0, empty_think = 0, judge_errors = 0;
  double reward_sum = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    RolloutGroup g;
    g.task_id = batch[b].task_id;
    g.context = contexts[b];
    for (const auto& ro : rollouts[b]) {
      int r_c = 0;
      if (ro.query >= 0) {
        const auto& v = verdicts[static_cast<std::size_t>(ro.query)];
        r_c = v.reward;
        judge_errors += v.verdict.error ? 1 : 0;
      }
      const auto rb = cfg.length_reward_enabled
                          ? composite_reward(ro.r_a, ro.r_f, r_c, cfg.alpha, ro.r_len,
                                             cfg.length_weight)
                          : composite_reward(ro.r_a, ro.r_f, r_c, cfg.alpha);
      g.rewards.push_back(rb.total);
      g.sequences.push_back({ro.tokens, logprob_sequence(state.old_params, g.context, ro.tokens),
                             logprob_sequence(state.reference->params(), g.context, ro.tokens)});
      ++total;
      total_len += output_length(vocab, ro.tokens);
      formats += ro.r_f;
      captions += r_c;
      accurate += ro.r_a;
      reward_sum += rb.total;
      if (ro.resp && is_blank(ro.resp->think)) ++empty_think;
    }
    g.advantages = compute_advantages(g.rewards);
    groups.push_back(std::move(g));
  }
  m.mean_output_length = total_len / total;
  m.format_reward_rate = static_cast<double>(formats) / total;
  m.caption_reward_rate = static_cast<double>(captions) / total;
  m.accuracy_reward_rate = static_cast<double>(accurate) / total;
  m.mean_total_reward = reward_sum / total;
  m.empty_think_rate = static_cast<double>(empty_think) / total;
  m.judge_error_rate = queries.empty() ? 0.0 : static_cast<double>(judge_errors) / queries.size();

  EvalOptions eo;
  eo.mode = cfg.format_mode;
  eo.reveal_image = cfg.reveal_image;
  eo.max_tokens = cfg.max_tokens;
  m.train_accuracy = evaluate(state.params, batch, eo).accuracy;

  const ClipConfig clip{cfg.clip_epsilon, cfg.ratio_level};
  if (!state.params.all_finite()) {
    throw std::runtime_error("non-finite policy parameters at step " + std::to_string(state.step) +
                             "\n" + fmt_stats(groups));
  }
  auto og = objective_gradient(state.params, groups, clip, beta_hat);
  if (!std::isfinite(og.objective) || !og.gradient.all_finite()) {
    throw std::runtime_error("non-finite gradient at step " + std::to_string(state.step) +
                             " (objective " + format_double(og.objective) + ", kl " +
                             format_double(og.kl) + ", beta_hat " + format_double(beta_hat) +
                             ")\n" + fmt_stats(groups));
  }
  m.kl_value = og.kl;
  m.clip_fraction = og.clip_fraction;
  apply_update(state.params, og.gradient, cfg.learning_rate);
  ++state.step;
  if (state.step % cfg.old_policy_refresh_every == 0) state.old_params = state.params;
  return StepResult{m, std::move(groups)};
}

void save_checkpoint(const TrainerState& state, const RunConfig& cfg, std::ostream& out) {
  out << "capgrpo-checkpoint 1\n";
  out << "step " << state.step << "\n";
  out << "rng " << state.rng.state() << "\n";
  std::istringstream lines(render_config(cfg));
  std::string line;
  int count = 0;
  std::vector<std::string> cfg_lines;
  while (std::getline(lines, line)) cfg_lines.push_back(line);
  count = static_cast<int>(cfg_lines.size());
  out << "config " << count << "\n";
  for (const auto& l : cfg_lines) out << l << "\n";
  out << "policy\n";
  save_params(state.params, out);
  out << "old_policy\n";
  save_params(state.old_params, out);
  if (!out) throw std::runtime_error("failed to write checkpoint");
}

TrainerState load_checkpoint(std::istream& in, const RunConfig& cfg,
                             std::shared_ptr<const Vocabulary> vocab) {
  auto fail = [](const std::string& what) {
    throw std::runtime_error("malformed checkpoint: " + what);
  };
  std::string line;
  if (!std::getline(in, line) || line != "capgrpo-checkpoint 1") fail("header");
  TrainerState st = init_state(cfg, vocab);
  std::string word;
  if (!(in >> word >> st.step) || word != "step" || st.step < 0) fail("step");
  in >> std::ws;
  if (!std::getline(in, line) || line.rfind("rng ", 0) != 0) fail("rng state");
  st.rng.set_state(line.substr(4));
  int count = 0;
  if (!(in >> word >> count) || word != "config" || count < 0) fail("config block");
  in >> std::ws;
  std::string stored;
  for (int i = 0; i < count; ++i) {
    if (!std::getline(in, line)) fail("config block");
    stored += line + "\n";
  }
  if (stored != render_config(cfg)) {
    throw std::runtime_error("checkpoint was written under a different configuration");
  }
  if (!(in >> word) || word != "policy") fail("policy block");
  st.params = load_params(in, vocab);
  if (!(in >> word) || word != "old_policy") fail("old policy block");
  st.old_params = load_params(in, vocab);
  return st;
}

RunSummary run_experiment(const RunConfig& cfg, const RunOptions& opts) {
  validate(cfg.trainer);
  validate(cfg.env);
  const auto split = generate_split(cfg.env);
  auto vocab = std::make_shared<const Vocabulary>(make_vocabulary(cfg.env));
  auto judge = make_judge(cfg.trainer);
  TrainerState state = init_state(cfg, vocab);

  RunSummary summary;
  const bool write = !opts.output_dir.empty();
  std::ofstream metrics;
  if (write) {
    std::filesystem::create_directories(opts.output_dir);
    summary.metrics_path = opts.output_dir / "metrics.csv";
    summary.checkpoint_path = opts.output_dir / "checkpoint.txt";
    {
      std::ofstream c(opts.output_dir / "config.txt");
      c << render_config(cfg);
    }
    std::vector<std::string> kept;
    if (opts.resume && std::filesystem::exists(summary.checkpoint_path)) {
      std::ifstream ck(summary.checkpoint_path);
      state = load_checkpoint(ck, cfg, vocab);
      std::ifstream old(summary.metrics_path);
      std::string line;
      std::getline(old, line);
      while (std::getline(old, line)) {
        if (std::stol(line.substr(0, line.find(','))) < state.step) kept.push_back(line);
      }
    }
    metrics.open(summary.metrics_path, std::ios::trunc);
    metrics << metrics_header() << "\n";
    for (const auto& l : kept) metrics << l << "\n";
    metrics.flush();
  }

  EvalOptions eo;
  eo.mode = cfg.trainer.format_mode;
  eo.reveal_image = cfg.trainer.reveal_image;
  eo.max_tokens = cfg.trainer.max_tokens;

  long ran = 0;
  while (state.step < cfg.trainer.t_max) {
    if (opts.stop_after && ran >= *opts.stop_after) break;
    const auto batch = sample_batch(state, split.train, cfg.trainer.tasks_per_step);
    auto res = train_step(state, batch, cfg.trainer, *judge);
    ++ran;
    if (state.step % cfg.trainer.eval_every == 0 || state.step == cfg.trainer.t_max) {
      const auto ev = evaluate(state.params, split.test, eo);
      res.metrics.test_accuracy = ev.accuracy;
      res.metrics.test_easy_accuracy = ev.easy_accuracy;
      res.metrics.test_hard_accuracy = ev.hard_accuracy;
      res.metrics.test_mean_output_length = ev.mean_output_length;
    }
    if (opts.on_step) opts.on_step(res.metrics);
    if (write) {
      metrics << metrics_row(res.metrics) << "\n";
      metrics.flush();
      if (state.step % cfg.trainer.checkpoint_every == 0 || state.step == cfg.trainer.t_max) {
        const auto tmp = summary.checkpoint_path.string() + ".tmp";
        {
          std::ofstream ck(tmp);
          save_checkpoint(state, cfg, ck);
        }
        std::filesystem::rename(tmp, summary.checkpoint_path);
      }
    }
  }

  summary.steps = state.step;
  summary.train = evaluate(state.params, split.train, eo);
  summary.test = evaluate(state.params, split.test, eo);
  std::vector<SyntheticTask> hard;
  for (const auto& t : split.test) {
    if (t.difficulty == Difficulty::kHard) hard.push_back(t);
  }
  summary.hard_test_bayes_accuracy = hard.empty() ? 0.0 : text_only_bayes_accuracy(hard);
  return summary;
}

}  // namespace capgrpo
