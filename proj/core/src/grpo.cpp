// SPDX-License-Identifier: Apache-2.0

#include "capgrpo/grpo.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

namespace capgrpo {

namespace {

void require_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument(std::string("non-finite value in ") + what);
    }
  }
}

}  // namespace

double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty span");
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double population_std(std::span<const double> xs) {
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

std::vector<double> compute_advantages(std::span<const double> rewards,
                                       double std_floor) {
  if (rewards.size() < 2) {
    throw std::invalid_argument("advantage normalization needs n >= 2");
  }
  if (!(std_floor > 0.0)) throw std::invalid_argument("std_floor must be > 0");
  require_finite(rewards, "rewards");

  std::vector<double> adv(rewards.size(), 0.0);
  auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return adv;

  const double m = mean_of(rewards);
  const double sd = population_std(rewards);
  if (sd < std_floor) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    adv[i] = (rewards[i] - m) / sd;
  }
  return adv;
}

double kl_penalty(std::span<const double> logp_ref,
                  std::span<const double> logp_theta) {
  if (logp_ref.size() != logp_theta.size()) {
    throw std::invalid_argument("kl_penalty: length mismatch");
  }
  if (logp_ref.empty()) return 0.0;
  require_finite(logp_ref, "logp_ref");
  require_finite(logp_theta, "logp_theta");
  double sum = 0.0;
  for (std::size_t t = 0; t < logp_ref.size(); ++t) {
    sum += kl_term(logp_ref[t] - logp_theta[t]);
  }
  return sum / static_cast<double>(logp_ref.size());
}

std::string_view to_string(RatioLevel level) {
  return level == RatioLevel::kPerSequence ? "sequence" : "token";
}

std::optional<RatioLevel> parse_ratio_level(std::string_view text) {
  if (text == "token") return RatioLevel::kPerToken;
  if (text == "sequence") return RatioLevel::kPerSequence;
  return std::nullopt;
}

void validate(const ClipConfig& clip) {
  if (!(clip.epsilon > 0.0 && clip.epsilon < 1.0)) {
    throw std::invalid_argument("clip epsilon must lie in (0, 1)");
  }
}

SurrogateResult clipped_surrogate(std::span<const SequenceLogProbs> seqs,
                                  std::span<const double> advantages,
                                  const ClipConfig& clip, double beta_hat,
                                  bool want_gradient) {
  validate(clip);
  if (seqs.size() != advantages.size()) {
    throw std::invalid_argument("clipped_surrogate: one advantage per sequence");
  }
  if (seqs.empty()) throw std::invalid_argument("clipped_surrogate: empty group");
  if (!(beta_hat >= 0.0) || !std::isfinite(beta_hat)) {
    throw std::invalid_argument("beta_hat must be finite and nonnegative");
  }
  require_finite(advantages, "advantages");
  for (const auto& s : seqs) {
    if (s.theta.size() != s.old.size() || s.theta.size() != s.ref.size()) {
      throw std::invalid_argument("clipped_surrogate: log-prob length mismatch");
    }
    if (s.theta.empty()) throw std::invalid_argument("clipped_surrogate: empty sequence");
    require_finite(s.theta, "logp_theta");
    require_finite(s.old, "logp_old");
    require_finite(s.ref, "logp_ref");
  }

  const double lo = 1.0 - clip.epsilon;
  const double hi = 1.0 + clip.epsilon;
  const double inv_n = 1.0 / static_cast<double>(seqs.size());

  // Returns (value, d value / d ratio-exponent, clipped?).
  auto clipped_term = [&](double log_ratio, double a) {
    const double r = std::exp(log_ratio);
    const double unclipped = r * a;
    const double clipped = std::clamp(r, lo, hi) * a;
    struct Out { double value; double deriv; bool clipped; };
    if (unclipped <= clipped) return Out{unclipped, unclipped, false};
    return Out{clipped, 0.0, true};
  };

  SurrogateResult out;
  if (want_gradient) out.dlogp.resize(seqs.size());
  std::size_t clipped_count = 0;
  std::size_t ratio_count = 0;

  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto& s = seqs[i];
    const double a = advantages[i];
    const std::size_t len = s.theta.size();
    double surr = 0.0;
    double kl = 0.0;
    if (want_gradient) out.dlogp[i].assign(len, 0.0);

    if (clip.ratio_level == RatioLevel::kPerToken) {
      const double inv_len = 1.0 / static_cast<double>(len);
      for (std::size_t t = 0; t < len; ++t) {
        auto term = clipped_term(s.theta[t] - s.old[t], a);
        const double d = s.ref[t] - s.theta[t];
        surr += term.value;
        kl += kl_term(d);
        clipped_count += term.clipped ? 1 : 0;
        ++ratio_count;
        if (want_gradient) {
          out.dlogp[i][t] =
              inv_n * inv_len * (term.deriv - beta_hat * (1.0 - std::exp(d)));
        }
      }
      surr *= inv_len;
      kl *= inv_len;
    } else {
      double log_ratio = 0.0;
      double d = 0.0;
      for (std::size_t t = 0; t < len; ++t) {
        log_ratio += s.theta[t] - s.old[t];
        d += s.ref[t] - s.theta[t];
      }
      auto term = clipped_term(log_ratio, a);
      surr = term.value;
      kl = kl_term(d);
      clipped_count += term.clipped ? 1 : 0;
      ++ratio_count;
      if (want_gradient) {
        const double g = inv_n * (term.deriv - beta_hat * (1.0 - std::exp(d)));
        std::fill(out.dlogp[i].begin(), out.dlogp[i].end(), g);
      }
    }
    out.surrogate += surr;
    out.kl += kl;
  }
  out.surrogate *= inv_n;
  out.kl *= inv_n;
  out.objective = out.surrogate - beta_hat * out.kl;
  out.clip_fraction =
      static_cast<double>(clipped_count) / static_cast<double>(ratio_count);
  return out;
}

void validate(const RolloutGroup& group) {
  const std::size_t n = group.sequences.size();
  if (n < 2) throw std::invalid_argument("rollout group needs n >= 2 sequences");
  if (group.rewards.size() != n || group.advantages.size() != n) {
    throw std::invalid_argument("rollout group lists differ in length");
  }
  for (const auto& s : group.sequences) {
    if (s.tokens.empty() || s.logp_old.size() != s.tokens.size() ||
        s.logp_ref.size() != s.tokens.size()) {
      throw std::invalid_argument("rollout sequence log-probs do not match its tokens");
    }
  }
}

std::string_view to_string(KlStrategy strategy) {
  switch (strategy) {
    case KlStrategy::kStatic: return "static";
    case KlStrategy::kLinearDecay: return "linear";
    case KlStrategy::kCosineAnnealing: return "cosine";
  }
  return "static";
}

std::optional<KlStrategy> parse_kl_strategy(std::string_view text) {
  if (text == "static") return KlStrategy::kStatic;
  if (text == "linear") return KlStrategy::kLinearDecay;
  if (text == "cosine") return KlStrategy::kCosineAnnealing;
  return std::nullopt;
}

void validate(const KlSchedule& sched) {
  if (!(sched.beta >= 0.0) || !std::isfinite(sched.beta)) {
    throw std::invalid_argument("KL beta must be finite and nonnegative");
  }
  if (sched.t_max < 1) throw std::invalid_argument("KL t_max must be >= 1");
}

double beta_at(const KlSchedule& sched, long t_cur) {
  validate(sched);
  if (t_cur < 0 || t_cur > sched.t_max) {
    throw std::out_of_range("step " + std::to_string(t_cur) +
                            " outside [0, " + std::to_string(sched.t_max) + "]");
  }
  const double progress =
      static_cast<double>(t_cur) / static_cast<double>(sched.t_max);
  switch (sched.strategy) {
    case KlStrategy::kStatic:
      return sched.beta;
    case KlStrategy::kLinearDecay:
      return sched.beta * (1.0 - progress);
    case KlStrategy::kCosineAnnealing:
      return sched.beta / 2.0 * (1.0 + std::cos(std::numbers::pi * progress));
  }
  return sched.beta;
}

}  // namespace capgrpo
