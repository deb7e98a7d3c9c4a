// SPDX-License-Identifier: Apache-2.0

#include "capgrpo/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "capgrpo/config.hpp"

namespace capgrpo {

std::vector<NamedConfig> ablation_rows(const RunConfig& base) {
  auto row = [&](std::string name, FormatMode mode, bool caption, bool length) {
    NamedConfig nc{std::move(name), base};
    nc.config.trainer.format_mode = mode;
    nc.config.trainer.caption_reward_enabled = caption;
    nc.config.trainer.length_reward_enabled = length;
    return nc;
  };
  return {
      row("GRPO", FormatMode::kReasonAnswer, false, false),
      row("GRPO+Caption", FormatMode::kCaptionReasonAnswer, false, false),
      row("GRPO+Caption+LengthReward", FormatMode::kCaptionReasonAnswer, false, true),
      row("GRPO+Caption+CaptionReward", FormatMode::kCaptionReasonAnswer, true, false),
  };
}

std::vector<NamedConfig> schedule_rows(const RunConfig& base) {
  const double beta = base.trainer.beta;
  auto row = [&](std::string name, KlStrategy s, double b) {
    NamedConfig nc{std::move(name), base};
    nc.config.trainer.kl_strategy = s;
    nc.config.trainer.beta = b;
    return nc;
  };
  return {
      row("Static(" + format_double(beta) + ")", KlStrategy::kStatic, beta),
      row("Static(" + format_double(beta / 5.0) + ")", KlStrategy::kStatic, beta / 5.0),
      row("Linear", KlStrategy::kLinearDecay, beta),
      row("Cosine", KlStrategy::kCosineAnnealing, beta),
  };
}

std::vector<SweepRun> run_sweep(std::span<const NamedConfig> rows, const SweepOptions& opts) {
  if (opts.num_seeds < 1) throw std::invalid_argument("num_seeds must be >= 1");
  struct Job {
    std::size_t row;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int s = 0; s < opts.num_seeds; ++s) {
      jobs.push_back({r, opts.first_seed + static_cast<std::uint64_t>(s)});
    }
  }
  std::vector<SweepRun> out(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const auto& job = jobs[i];
        RunConfig cfg = rows[job.row].config;
        cfg.trainer.seed = job.seed;
        cfg.env.seed = job.seed;
        RunOptions ro;
        if (!opts.output_root.empty()) {
          ro.output_dir = opts.output_root / rows[job.row].name / ("seed" + std::to_string(job.seed));
        }
        out[i] = {rows[job.row].name, job.seed, run_experiment(cfg, ro)};
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(jobs.size());
        return;
      }
    }
  };
  const int n_threads = std::clamp(opts.jobs, 1, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of an empty list");
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

std::vector<SweepRowSummary> summarize(std::span<const NamedConfig> rows,
                                       std::span<const SweepRun> runs) {
  std::vector<SweepRowSummary> out;
  for (const auto& row : rows) {
    std::vector<double> train, test, hard, len, bayes;
    for (const auto& r : runs) {
      if (r.name != row.name) continue;
      train.push_back(r.summary.train.accuracy);
      test.push_back(r.summary.test.accuracy);
      hard.push_back(r.summary.test.hard_accuracy);
      len.push_back(r.summary.test.mean_output_length);
      bayes.push_back(r.summary.hard_test_bayes_accuracy);
    }
    SweepRowSummary s;
    s.name = row.name;
    s.runs = static_cast<int>(train.size());
    if (s.runs > 0) {
      s.median_train_accuracy = median(train);
      s.median_test_accuracy = median(test);
      s.median_hard_accuracy = median(hard);
      s.median_output_length = median(len);
      s.median_hard_bayes = median(bayes);
    }
    out.push_back(s);
  }
  return out;
}

namespace {

const char* const kSummaryColumns[] = {"config",        "runs",          "train_accuracy",
                                       "test_accuracy", "hard_accuracy", "output_length",
                                       "hard_bayes"};

std::vector<std::string> summary_cells(const SweepRowSummary& s) {
  return {s.name,
          std::to_string(s.runs),
          format_double(s.median_train_accuracy),
          format_double(s.median_test_accuracy),
          format_double(s.median_hard_accuracy),
          format_double(s.median_output_length),
          format_double(s.median_hard_bayes)};
}

}  // namespace

std::string sweep_csv(std::span<const SweepRowSummary> rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < std::size(kSummaryColumns); ++i) {
    os << (i ? "," : "") << kSummaryColumns[i];
  }
  os << '\n';
  for (const auto& s : rows) {
    const auto cells = summary_cells(s);
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  }
  return os.str();
}

std::string sweep_text(std::span<const SweepRowSummary> rows) {
  std::vector<std::vector<std::string>> table;
  table.emplace_back(std::begin(kSummaryColumns), std::end(kSummaryColumns));
  for (const auto& s : rows) {
    auto fixed = [](double x) {
      std::ostringstream v;
      v.setf(std::ios::fixed);
      v.precision(4);
      v << x;
      return v.str();
    };
    table.push_back({s.name, std::to_string(s.runs), fixed(s.median_train_accuracy),
                     fixed(s.median_test_accuracy), fixed(s.median_hard_accuracy),
                     fixed(s.median_output_length), fixed(s.median_hard_bayes)});
  }
  std::vector<std::size_t> width(table.front().size(), 0);
  for (const auto& r : table) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::ostringstream os;
  for (const auto& r : table) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i == 0) {
        os << r[i] << std::string(width[i] - r[i].size(), ' ');
      } else {
        os << "  " << std::string(width[i] - r[i].size(), ' ') << r[i];
      }
    }
    os << '\n';
  }
  return os.str();
}

std::string runs_csv(std::span<const SweepRun> runs) {
  std::ostringstream os;
  os << "config,seed,steps,train_accuracy,test_accuracy,easy_accuracy,hard_accuracy,"
        "output_length,hard_bayes\n";
  for (const auto& r : runs) {
    const auto& s = r.summary;
    os << r.name << ',' << r.seed << ',' << s.steps << ',' << format_double(s.train.accuracy)
       << ',' << format_double(s.test.accuracy) << ',' << format_double(s.test.easy_accuracy)
       << ',' << format_double(s.test.hard_accuracy) << ','
       << format_double(s.test.mean_output_length) << ','
       << format_double(s.hard_test_bayes_accuracy) << '\n';
  }
  return os.str();
}

}  // namespace capgrpo
