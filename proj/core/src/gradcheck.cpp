// SPDX-License-Identifier: Apache-2.0

#include "capgrpo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "capgrpo/policy.hpp"
#include "capgrpo/random.hpp"
#include "capgrpo/shortcut_env.hpp"

namespace capgrpo {

std::vector<GradCheckCase> gradcheck_cases(int trials, std::uint64_t seed) {
  std::vector<GradCheckCase> out;
  for (int i = 0; i < trials; ++i) {
    GradCheckCase c;
    c.beta_hat = (i & 1) ? 0.04 : 0.0;
    c.ratio_level = (i & 2) ? RatioLevel::kPerSequence : RatioLevel::kPerToken;
    c.clip_active = (i & 4) != 0;
    c.hidden_dim = (i & 8) ? 3 : 0;
    c.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    out.push_back(c);
  }
  return out;
}

GradCheckResult run_gradcheck(const GradCheckCase& c, double step, int coordinates) {
  EnvConfig env;
  env.train_size = 16;
  env.test_size = 4;
  env.seed = c.seed;
  const auto split = generate_split(env);
  auto vocab = std::make_shared<const Vocabulary>(make_vocabulary(env));

  Rng rng(mix_seed(c.seed, 0x6763));
  PriorConfig prior;
  prior.seed = rng.next();
  auto theta = make_prior_policy(vocab, env.num_attributes, env.num_symbols, c.hidden_dim, prior);
  auto jitter = [&rng](std::vector<double>& w, double scale) {
    for (auto& x : w) x += scale * (rng.uniform() - 0.5);
  };
  jitter(theta.w_out, 0.3);
  jitter(theta.w_hidden, 0.3);
  auto old = theta;
  // A small offset keeps every ratio inside [1 - eps, 1 + eps]; a large one
  // pushes many outside.
  jitter(old.w_out, c.clip_active ? 2.0 : 0.002);
  auto ref = theta;
  jitter(ref.w_out, 0.2);

  ClipConfig clip;
  clip.ratio_level = c.ratio_level;
  GenerationConfig gen;
  gen.max_tokens = c.ratio_level == RatioLevel::kPerSequence ? 10 : 24;

  std::vector<RolloutGroup> groups;
  for (int g = 0; g < 2; ++g) {
    RolloutGroup group;
    group.task_id = split.train[static_cast<std::size_t>(g)].task_id;
    group.context = policy_context(FormatMode::kCaptionReasonAnswer,
                                   task_context_features(split.train[static_cast<std::size_t>(g)], true));
    for (int i = 0; i < 4; ++i) {
      auto s = sample_sequence(old, group.context, gen, rng.next());
      group.sequences.push_back({s.tokens, logprob_sequence(old, group.context, s.tokens),
                                 logprob_sequence(ref, group.context, s.tokens)});
      group.rewards.push_back(rng.uniform());
    }
    group.advantages = compute_advantages(group.rewards);
    groups.push_back(std::move(group));
  }

  const auto og = objective_gradient(theta, groups, clip, c.beta_hat);
  GradCheckResult res;
  res.config = c;
  res.clip_fraction = og.clip_fraction;
  res.objective = og.objective;

  const std::size_t n = theta.num_parameters();
  std::vector<std::size_t> nonzero;
  for (std::size_t i = 0; i < n; ++i) {
    if (og.gradient.at(i) != 0.0) nonzero.push_back(i);
  }
  double err2 = 0.0, fd2 = 0.0, an2 = 0.0;
  for (int k = 0; k < coordinates; ++k) {
    // Half the probes land on coordinates the analytic gradient says matter.
    const std::size_t i = (k % 2 == 0 && !nonzero.empty())
                              ? nonzero[rng.below(nonzero.size())]
                              : static_cast<std::size_t>(rng.below(n));
    auto plus = theta;
    plus.at(i) += step;
    auto minus = theta;
    minus.at(i) -= step;
    const double fd = (batch_objective(plus, groups, clip, c.beta_hat) -
                       batch_objective(minus, groups, clip, c.beta_hat)) /
                      (2.0 * step);
    const double an = og.gradient.at(i);
    err2 += (fd - an) * (fd - an);
    fd2 += fd * fd;
    an2 += an * an;
  }
  res.coordinates = coordinates;
  const double scale = std::sqrt(std::max(fd2, an2));
  res.relative_error = scale > 0.0 ? std::sqrt(err2) / scale : std::sqrt(err2);
  return res;
}

}  // namespace capgrpo
