// SPDX-License-Identifier: Apache-2.0
//
// Multi-seed experiment matrices: the incremental ablation (baseline GRPO,
// then caption format, then length or caption reward) and the KL schedule
// comparison. Runs execute on a bounded pool of worker threads; each run owns
// its output subdirectory.

#ifndef CAPGRPO_SWEEP_HPP_
#define CAPGRPO_SWEEP_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "capgrpo/trainer.hpp"

namespace capgrpo {

struct NamedConfig {
  std::string name;
  RunConfig config;
};

// GRPO, GRPO+Caption, GRPO+Caption+LengthReward, GRPO+Caption+CaptionReward.
// Everything not named by the row is taken from `base`.
std::vector<NamedConfig> ablation_rows(const RunConfig& base);

// Static(beta), Static(beta/5), Linear, Cosine on top of `base`.
std::vector<NamedConfig> schedule_rows(const RunConfig& base);

struct SweepRun {
  std::string name;
  std::uint64_t seed = 0;
  RunSummary summary;
};

struct SweepOptions {
  int num_seeds = 5;
  std::uint64_t first_seed = 0;
  int jobs = 1;
  std::filesystem::path output_root;  // empty: nothing written
};

// Seeds first_seed .. first_seed + num_seeds - 1 set both the trainer and
// environment seeds. Results are ordered by row, then seed, regardless of
// scheduling.
std::vector<SweepRun> run_sweep(std::span<const NamedConfig> rows, const SweepOptions& opts);

struct SweepRowSummary {
  std::string name;
  int runs = 0;
  double median_train_accuracy = 0.0;
  double median_test_accuracy = 0.0;
  double median_hard_accuracy = 0.0;
  double median_output_length = 0.0;  // greedy, test split
  double median_hard_bayes = 0.0;
};

std::vector<SweepRowSummary> summarize(std::span<const NamedConfig> rows,
                                       std::span<const SweepRun> runs);

// Middle element, or the mean of the two middle ones. Throws on empty input.
double median(std::vector<double> xs);

std::string sweep_csv(std::span<const SweepRowSummary> rows);
std::string sweep_text(std::span<const SweepRowSummary> rows);
std::string runs_csv(std::span<const SweepRun> runs);

}  // namespace capgrpo

#endif  // CAPGRPO_SWEEP_HPP_
