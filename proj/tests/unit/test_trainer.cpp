#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "capgrpo/config.hpp"
#include "capgrpo/trainer.hpp"

namespace capgrpo {
namespace {

namespace fs = std::filesystem;

RunConfig small_config() {
  RunConfig c;
  c.env.train_size = 60;
  c.env.test_size = 30;
  c.trainer.t_max = 12;
  c.trainer.eval_every = 4;
  c.trainer.checkpoint_every = 5;
  c.trainer.tasks_per_step = 3;
  c.trainer.group_size = 4;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / "capgrpo_trainer_test" / name;
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

struct Harness {
  RunConfig cfg = small_config();
  Split split = generate_split(cfg.env);
  std::shared_ptr<const Vocabulary> vocab = std::make_shared<const Vocabulary>(make_vocabulary(cfg.env));
};

TEST(Trainer, MetricsHeaderNamesStepMetricsFields) {
  EXPECT_EQ(metrics_header(),
            "step,mean_output_length,format_reward_rate,caption_reward_rate,accuracy_reward_rate,"
            "mean_total_reward,kl_value,beta_hat,empty_think_rate,train_accuracy,judge_error_rate,"
            "clip_fraction,test_accuracy,test_easy_accuracy,test_hard_accuracy,test_mean_output_length");
}

TEST(Trainer, BetaHatColumnFollowsSchedule) {
  const auto dir = fresh_dir("beta");
  const auto cfg = small_config();
  run_experiment(cfg, {dir, false, std::nullopt, nullptr});
  const auto rows = csv_rows(dir / "metrics.csv");
  ASSERT_EQ(rows.size(), 13u);
  const KlSchedule sched{cfg.trainer.beta, cfg.trainer.kl_strategy, cfg.trainer.t_max};
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const long step = std::stol(rows[i][0]);
    EXPECT_EQ(step, static_cast<long>(i - 1));
    EXPECT_EQ(std::stod(rows[i][7]), beta_at(sched, step));
    EXPECT_EQ(rows[i][7], format_double(beta_at(sched, step)));
    for (std::size_t c : {2u, 3u, 4u, 8u, 9u, 10u, 11u}) {
      const double v = std::stod(rows[i][c]);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    // Test columns appear on evaluation steps (after steps 4, 8 and the last).
    const bool eval_row = (step + 1) % 4 == 0 || step + 1 == cfg.trainer.t_max;
    EXPECT_EQ(!rows[i][12].empty(), eval_row) << step;
  }
}

TEST(Trainer, IdenticalRunsWriteIdenticalLogs) {
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  const auto cfg = small_config();
  run_experiment(cfg, {a, false, std::nullopt, nullptr});
  run_experiment(cfg, {b, false, std::nullopt, nullptr});
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "checkpoint.txt"), slurp(b / "checkpoint.txt"));
  auto other = cfg;
  other.trainer.seed = 1;
  const auto c = fresh_dir("det_c");
  run_experiment(other, {c, false, std::nullopt, nullptr});
  EXPECT_NE(slurp(a / "metrics.csv"), slurp(c / "metrics.csv"));
}

TEST(Trainer, ResumeAfterInterruptMatchesUninterruptedRun) {
  const auto full = fresh_dir("full"), cut = fresh_dir("cut");
  const auto cfg = small_config();
  const auto s_full = run_experiment(cfg, {full, false, std::nullopt, nullptr});
  run_experiment(cfg, {cut, false, 7, nullptr});  // checkpoint at step 5, stopped at 7
  const auto s_cut = run_experiment(cfg, {cut, true, std::nullopt, nullptr});
  EXPECT_EQ(slurp(full / "metrics.csv"), slurp(cut / "metrics.csv"));
  EXPECT_EQ(slurp(full / "checkpoint.txt"), slurp(cut / "checkpoint.txt"));
  EXPECT_EQ(s_full.test.accuracy, s_cut.test.accuracy);
}

TEST(Trainer, CheckpointRejectsOtherConfig) {
  Harness h;
  auto st = init_state(h.cfg, h.vocab);
  std::stringstream ss;
  save_checkpoint(st, h.cfg, ss);
  auto other = h.cfg;
  other.trainer.alpha = 0.5;
  EXPECT_THROW(load_checkpoint(ss, other, h.vocab), std::runtime_error);
  std::stringstream garbage("not a checkpoint");
  EXPECT_THROW(load_checkpoint(garbage, h.cfg, h.vocab), std::runtime_error);
}

TEST(Trainer, OldSnapshotRefreshAndFixedReference) {
  Harness h;
  auto st = init_state(h.cfg, h.vocab);
  const auto initial = st.params.w_out;
  auto judge = make_judge(h.cfg.trainer);
  auto batch = sample_batch(st, h.split.train, 3);
  train_step(st, batch, h.cfg.trainer, *judge);
  EXPECT_EQ(st.old_params.w_out, st.params.w_out);
  EXPECT_NE(st.params.w_out, initial);
  EXPECT_EQ(st.reference->params().w_out, initial);

  // Right after a refresh the importance ratios are exactly one.
  batch = sample_batch(st, h.split.train, 3);
  const auto res = train_step(st, batch, h.cfg.trainer, *judge);
  EXPECT_EQ(res.metrics.clip_fraction, 0.0);

  auto lag = h.cfg.trainer;
  lag.old_policy_refresh_every = 3;
  auto st2 = init_state(h.cfg, h.vocab);
  batch = sample_batch(st2, h.split.train, 3);
  train_step(st2, batch, lag, *judge);
  EXPECT_NE(st2.old_params.w_out, st2.params.w_out);
  EXPECT_EQ(st2.old_params.w_out, initial);
}

TEST(Trainer, BaselineRewardsHaveNoCaptionTerm) {
  Harness h;
  auto cfg = h.cfg.trainer;
  cfg.format_mode = FormatMode::kReasonAnswer;
  cfg.caption_reward_enabled = false;
  auto st = init_state(h.cfg, h.vocab);
  auto judge = make_judge(cfg);
  for (int i = 0; i < 3; ++i) {
    const auto batch = sample_batch(st, h.split.train, 3);
    const auto res = train_step(st, batch, cfg, *judge);
    EXPECT_EQ(res.metrics.caption_reward_rate, 0.0);
    for (const auto& g : res.groups) {
      for (double r : g.rewards) EXPECT_EQ(r, std::floor(r)) << "reward carries a fractional caption term";
    }
  }
}

TEST(Trainer, CaptionSwitchOffIgnoresCaptions) {
  Harness h;
  auto cfg = h.cfg.trainer;
  cfg.caption_reward_enabled = false;
  auto st = init_state(h.cfg, h.vocab);
  auto judge = make_judge(cfg);
  const auto batch = sample_batch(st, h.split.train, 3);
  const auto res = train_step(st, batch, cfg, *judge);
  EXPECT_EQ(res.metrics.caption_reward_rate, 0.0);
  for (const auto& g : res.groups) {
    for (double r : g.rewards) EXPECT_EQ(r, std::floor(r));
  }
}

TEST(Trainer, UnreachableJudgeNeverAbortsAStep) {
  Harness h;
  auto cfg = h.cfg.trainer;
  cfg.judge = JudgeKind::kExternal;
  cfg.external_judge.endpoint = "http://127.0.0.1:1";
  cfg.external_judge.timeout_ms = 100;
  auto st = init_state(h.cfg, h.vocab);
  auto judge = make_judge(cfg);
  const auto batch = sample_batch(st, h.split.train, 2);
  StepResult res;
  ASSERT_NO_THROW(res = train_step(st, batch, cfg, *judge));
  EXPECT_EQ(res.metrics.caption_reward_rate, 0.0);
  EXPECT_GT(res.metrics.judge_error_rate, 0.0);
  EXPECT_EQ(st.step, 1);
}

TEST(Trainer, NonFiniteParametersAbortWithDiagnostics) {
  Harness h;
  auto st = init_state(h.cfg, h.vocab);
  st.params.w_out[0] = NAN;
  auto judge = make_judge(h.cfg.trainer);
  const auto batch = sample_batch(st, h.split.train, 2);
  try {
    train_step(st, batch, h.cfg.trainer, *judge);
    FAIL() << "expected an abort";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos);
  }
}

TEST(Trainer, GreedyEvaluationIsDeterministic) {
  Harness h;
  const auto st = init_state(h.cfg, h.vocab);
  EvalOptions eo;
  const auto a = evaluate(st.params, h.split.test, eo);
  const auto b = evaluate(st.params, h.split.test, eo);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.mean_output_length, b.mean_output_length);
  EXPECT_EQ(a.num_easy + a.num_hard, 30);
  EXPECT_NEAR(a.accuracy, (a.easy_accuracy * a.num_easy + a.hard_accuracy * a.num_hard) / 30.0, 1e-12);
}

TEST(Trainer, TextOnlyPolicyStaysBelowTheTextOnlyCeiling) {
  RunConfig cfg;
  cfg.trainer.reveal_image = false;
  cfg.trainer.t_max = 150;
  cfg.trainer.format_mode = FormatMode::kReasonAnswer;
  cfg.trainer.caption_reward_enabled = false;
  const auto s = run_experiment(cfg, {});
  const int n = s.test.num_hard;
  const double b = s.hard_test_bayes_accuracy;
  EXPECT_LE(s.test.hard_accuracy, b + 3 * std::sqrt(b * (1 - b) / n));
}

TEST(Trainer, ConfigValidationNamesField) {
  TrainerConfig c;
  c.group_size = 1;
  try {
    validate(c);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("group_size"), std::string::npos);
  }
  c = TrainerConfig{};
  c.t_max = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
}

}  // namespace
}  // namespace capgrpo
