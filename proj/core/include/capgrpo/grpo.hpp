// SPDX-License-Identifier: Apache-2.0
//
// Group-relative policy optimization math: within-group advantage
// normalization, the x - log x - 1 KL estimator, the clipped surrogate
// objective and KL-coefficient schedules.

#ifndef CAPGRPO_GRPO_HPP_
#define CAPGRPO_GRPO_HPP_

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace capgrpo {

inline constexpr double kDefaultStdFloor = 1e-8;

/// A_i = (R_i - mean(R)) / max(std(R), std_floor) with the population standard
/// deviation. Groups whose rewards are all equal, or whose deviation falls
/// below the floor, get all-zero advantages. Throws on n < 2 or non-finite
/// rewards.
std::vector<double> compute_advantages(std::span<const double> rewards,
                                       double std_floor = kDefaultStdFloor);

double mean_of(std::span<const double> xs);
double population_std(std::span<const double> xs);

// Mean over tokens of x - log x - 1 with x = exp(logp_ref - logp_theta).
double kl_penalty(std::span<const double> logp_ref,
                  std::span<const double> logp_theta);

// Per-token value of x - log x - 1 for d = logp_ref - logp_theta, evaluated
// as expm1(d) - d to avoid cancellation near d = 0.
inline double kl_term(double d) { return std::expm1(d) - d; }

enum class RatioLevel { kPerToken, kPerSequence };

std::string_view to_string(RatioLevel level);
std::optional<RatioLevel> parse_ratio_level(std::string_view text);

struct ClipConfig {
  double epsilon = 0.2;
  RatioLevel ratio_level = RatioLevel::kPerToken;
};

void validate(const ClipConfig& clip);

/// Log-probabilities of one sampled sequence under the live, old and
/// reference policies. All three spans have the sequence length.
struct SequenceLogProbs {
  std::span<const double> theta;
  std::span<const double> old;
  std::span<const double> ref;
};

struct SurrogateResult {
  double objective = 0.0;
  double surrogate = 0.0;  // (1/n) sum of the clipped terms
  double kl = 0.0;         // (1/n) sum of per-sequence KL penalties
  double clip_fraction = 0.0;
  // d objective / d logp_theta[t] for every token of every sequence.
  std::vector<std::vector<double>> dlogp;
};

/// Clipped surrogate objective for one group, maximized by training.
///
/// Per-token ratios (default): term_i = mean_t min(r_t A_i, clip(r_t) A_i)
/// - beta_hat * kl_penalty(ref_i, theta_i).
/// Per-sequence ratios: r_i = pi_theta(o_i) / pi_old(o_i) and the KL term is
/// evaluated on whole-sequence probabilities, x_i = pi_ref(o_i) / pi_theta(o_i).
///
/// objective = (1/n) sum_i term_i. Where the clipped branch is selected by
/// the min, its derivative is zero. Throws on non-finite inputs, size
/// mismatches, empty sequences or negative beta_hat.
SurrogateResult clipped_surrogate(std::span<const SequenceLogProbs> seqs,
                                  std::span<const double> advantages,
                                  const ClipConfig& clip, double beta_hat,
                                  bool want_gradient = true);

/// n sampled sequences for one task. Log-probabilities under the old and
/// reference snapshots are constants of the objective. All lists have the
/// same length n >= 2.
struct RolloutSequence {
  std::vector<int> tokens;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
};

struct RolloutGroup {
  std::string task_id;
  std::vector<double> context;
  std::vector<RolloutSequence> sequences;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

// Throws std::invalid_argument when the group violates its invariants.
void validate(const RolloutGroup& group);

enum class KlStrategy { kStatic, kLinearDecay, kCosineAnnealing };

std::string_view to_string(KlStrategy strategy);
std::optional<KlStrategy> parse_kl_strategy(std::string_view text);

struct KlSchedule {
  double beta = 0.04;
  KlStrategy strategy = KlStrategy::kCosineAnnealing;
  long t_max = 1;
};

void validate(const KlSchedule& sched);

// Static: beta. Linear: beta (1 - t/T). Cosine: beta/2 (1 + cos(pi t/T)).
// Throws std::out_of_range unless 0 <= t_cur <= t_max.
double beta_at(const KlSchedule& sched, long t_cur);

}  // namespace capgrpo

#endif  // CAPGRPO_GRPO_HPP_
