// SPDX-License-Identifier: Apache-2.0
//
// The RL loop: group rollouts from the old-policy snapshot, parsing and
// scoring, group-relative advantages, one ascent step on the clipped
// surrogate, KL-coefficient scheduling, metrics and checkpoints.

#ifndef CAPGRPO_TRAINER_HPP_
#define CAPGRPO_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capgrpo/grpo.hpp"
#include "capgrpo/judge.hpp"
#include "capgrpo/policy.hpp"
#include "capgrpo/random.hpp"
#include "capgrpo/shortcut_env.hpp"
#include "capgrpo/structured_output.hpp"

namespace capgrpo {

enum class JudgeKind { kOracle, kExternal };

std::string_view to_string(JudgeKind kind);
std::optional<JudgeKind> parse_judge_kind(std::string_view text);

struct TrainerConfig {
  int group_size = 8;
  double temperature = 0.9;
  double alpha = 0.1;
  double beta = 0.04;
  double clip_epsilon = 0.2;
  RatioLevel ratio_level = RatioLevel::kPerToken;
  long t_max = 1000;
  KlStrategy kl_strategy = KlStrategy::kCosineAnnealing;
  FormatMode format_mode = FormatMode::kCaptionReasonAnswer;
  double learning_rate = 3.0;
  bool caption_reward_enabled = true;
  bool length_reward_enabled = false;
  double length_weight = 0.5;
  int length_target = 12;
  bool strict_format = false;
  JudgeKind judge = JudgeKind::kOracle;
  ExternalJudgeConfig external_judge;
  std::string judge_template_file;  // empty: built-in judge prompt
  int judge_max_in_flight = 4;
  int old_policy_refresh_every = 1;
  std::uint64_t seed = 0;
  int tasks_per_step = 8;
  int eval_every = 25;
  int checkpoint_every = 250;
  int max_tokens = 24;
  int hidden_dim = 0;
  bool reveal_image = true;
  PriorConfig prior;
};

// Throws std::invalid_argument naming the offending field.
void validate(const TrainerConfig& cfg);

struct RunConfig {
  TrainerConfig trainer;
  EnvConfig env;
};

struct StepMetrics {
  long step = 0;
  double mean_output_length = 0.0;
  double format_reward_rate = 0.0;
  double caption_reward_rate = 0.0;
  double accuracy_reward_rate = 0.0;
  double mean_total_reward = 0.0;
  double kl_value = 0.0;
  double beta_hat = 0.0;
  double empty_think_rate = 0.0;
  double train_accuracy = 0.0;  // greedy, on the step's batch, before the update
  double judge_error_rate = 0.0;
  double clip_fraction = 0.0;
  std::optional<double> test_accuracy;
  std::optional<double> test_easy_accuracy;
  std::optional<double> test_hard_accuracy;
  std::optional<double> test_mean_output_length;
};

// Fixed CSV header of the metrics log.
std::string metrics_header();
std::string metrics_row(const StepMetrics& m);

struct EvalResult {
  double accuracy = 0.0;
  double easy_accuracy = 0.0;  // 0 when the split has no easy tasks
  double hard_accuracy = 0.0;
  int num_easy = 0;
  int num_hard = 0;
  double mean_output_length = 0.0;
  double format_rate = 0.0;
};

struct EvalOptions {
  FormatMode mode = FormatMode::kCaptionReasonAnswer;
  bool reveal_image = true;
  bool greedy = true;
  double temperature = 0.9;  // sampled evaluation only
  int max_tokens = 24;
  std::uint64_t seed = 0;
};

EvalResult evaluate(const PolicyParams& params, std::span<const SyntheticTask> split,
                    const EvalOptions& opts);

// Generated tokens before the end marker.
int output_length(const Vocabulary& vocab, std::span<const int> tokens);

struct TrainerState {
  PolicyParams params;
  PolicyParams old_params;
  std::shared_ptr<const PolicySnapshot> reference;
  long step = 0;
  Rng rng;
};

// Fresh state: prior weights, old snapshot = reference = initial weights.
TrainerState init_state(const RunConfig& cfg, std::shared_ptr<const Vocabulary> vocab);

std::unique_ptr<Judge> make_judge(const TrainerConfig& cfg);

struct StepResult {
  StepMetrics metrics;
  std::vector<RolloutGroup> groups;
};

// One training step on `batch`. Throws std::runtime_error (with a dump of the
// offending statistics) if the gradient is not finite.
StepResult train_step(TrainerState& state, std::span<const SyntheticTask> batch,
                      const TrainerConfig& cfg, Judge& judge);

// Picks tasks_per_step tasks from the training split using state.rng.
std::vector<SyntheticTask> sample_batch(TrainerState& state, std::span<const SyntheticTask> train,
                                        int tasks_per_step);

void save_checkpoint(const TrainerState& state, const RunConfig& cfg, std::ostream& out);
// Throws std::runtime_error when the file is malformed or was written under a
// different configuration.
TrainerState load_checkpoint(std::istream& in, const RunConfig& cfg,
                             std::shared_ptr<const Vocabulary> vocab);

struct RunSummary {
  long steps = 0;
  EvalResult train;
  EvalResult test;
  double hard_test_bayes_accuracy = 0.0;  // text-only ceiling on the hard test tasks
  std::filesystem::path metrics_path;
  std::filesystem::path checkpoint_path;
};

struct RunOptions {
  std::filesystem::path output_dir;  // empty: nothing is written
  bool resume = false;
  // Stop after this many steps in this invocation (simulates an interrupt).
  std::optional<long> stop_after;
  // Called after every step, test columns filled on evaluation steps.
  std::function<void(const StepMetrics&)> on_step;
};

// Runs t_max steps with evaluation every eval_every steps (and after the last
// step). Writes metrics.csv, config.txt and checkpoint.txt into output_dir.
RunSummary run_experiment(const RunConfig& cfg, const RunOptions& opts);

}  // namespace capgrpo

#endif  // CAPGRPO_TRAINER_HPP_
