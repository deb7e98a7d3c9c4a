#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "capgrpo/grpo.hpp"
#include "capgrpo/random.hpp"

namespace capgrpo {
namespace {

// Reference statistics in long double, written independently of the library.
long double ref_mean(const std::vector<double>& xs) {
  long double s = 0;
  for (double x : xs) s += x;
  return s / xs.size();
}
long double ref_pop_std(const std::vector<double>& xs) {
  const long double m = ref_mean(xs);
  long double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / xs.size());
}

std::vector<double> random_rewards(Rng& rng, int n) {
  std::vector<double> r(static_cast<std::size_t>(n));
  for (auto& x : r) x = std::floor(rng.uniform() * 5) * 0.5 + (rng.uniform() < 0.5 ? 0.1 : 0.0);
  return r;
}

TEST(Advantages, MatchReferenceNormalization) {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = std::array{2, 8, 16}[static_cast<std::size_t>(trial % 3)];
    const auto r = random_rewards(rng, n);
    const auto a = compute_advantages(r);
    const long double m = ref_mean(r), sd = ref_pop_std(r);
    for (int i = 0; i < n; ++i) {
      const double want = sd == 0 ? 0.0 : static_cast<double>((r[i] - m) / sd);
      EXPECT_NEAR(a[static_cast<std::size_t>(i)], want, 1e-12);
    }
  }
}

TEST(Advantages, ZeroMeanUnitStd) {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> r(static_cast<std::size_t>(2 + rng.below_int(15)));
    for (auto& x : r) x = 10 * rng.uniform() - 5;
    const auto a = compute_advantages(r);
    EXPECT_LE(std::abs(static_cast<double>(ref_mean(a))), 1e-9);
    EXPECT_LE(std::abs(static_cast<double>(ref_pop_std(a)) - 1.0), 1e-6);
  }
}

TEST(Advantages, DegenerateGroupsAreZero) {
  for (int n : {2, 8, 16}) {
    for (double v : {0.0, 1.0, 2.1, -3.5}) {
      const auto a = compute_advantages(std::vector<double>(static_cast<std::size_t>(n), v));
      for (double x : a) EXPECT_EQ(x, 0.0);
    }
  }
  // Spread below the floor also counts as degenerate.
  const auto a = compute_advantages(std::vector<double>{1.0, 1.0 + 1e-12});
  EXPECT_EQ(a[0], 0.0);
  EXPECT_EQ(a[1], 0.0);
}

TEST(Advantages, InvariantToShiftAndPositiveScale) {
  // Dyadic rewards, shifts and scales keep every intermediate exact.
  const std::vector<double> r = {0.0, 1.0, 1.0, 2.0, 0.5, 2.0, 1.5, 0.0};
  const auto a = compute_advantages(r);
  for (double shift : {-3.0, 0.25, 8.0}) {
    for (double scale : {0.5, 1.0, 4.0}) {
      std::vector<double> t(r.size());
      for (std::size_t i = 0; i < r.size(); ++i) t[i] = scale * r[i] + shift;
      EXPECT_EQ(compute_advantages(t), a);
    }
  }
}

TEST(Advantages, Preconditions) {
  EXPECT_THROW(compute_advantages(std::vector<double>{1.0}), std::invalid_argument);
  EXPECT_THROW(compute_advantages(std::vector<double>{1.0, NAN}), std::invalid_argument);
}

TEST(Kl, MatchesDirectFormula) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double ref = -6 * rng.uniform(), theta = -6 * rng.uniform();
    const double x = std::exp(ref - theta);
    const double direct = x - std::log(x) - 1;
    const double v = kl_term(ref - theta);
    EXPECT_GE(v, 0.0);
    EXPECT_NEAR(v, direct, 1e-12 * std::max(1.0, direct));
  }
}

TEST(Kl, IdentityAndLnTwo) {
  for (double lp : {-0.1, -2.0, -9.0}) {
    const std::vector<double> p(5, lp);
    EXPECT_LE(std::abs(kl_penalty(p, p)), 1e-12);
  }
  // ratio 2: 2 - ln 2 - 1
  EXPECT_NEAR(kl_term(std::numbers::ln2), 2.0 - std::numbers::ln2 - 1.0, 1e-12);
  const std::vector<double> ref = {std::log(0.5)}, theta = {std::log(0.25)};
  EXPECT_NEAR(kl_penalty(ref, theta), 2.0 - std::numbers::ln2 - 1.0, 1e-12);
}

TEST(Kl, MeanOverTokens) {
  const std::vector<double> ref = {-1.0, -2.0, -0.5}, theta = {-1.5, -1.0, -0.5};
  double want = 0;
  for (int t = 0; t < 3; ++t) {
    const double x = std::exp(ref[static_cast<std::size_t>(t)] - theta[static_cast<std::size_t>(t)]);
    want += x - std::log(x) - 1;
  }
  EXPECT_NEAR(kl_penalty(ref, theta), want / 3, 1e-15);
  EXPECT_THROW(kl_penalty(ref, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Schedule, EndpointsAndMidpoint) {
  KlSchedule cos{0.04, KlStrategy::kCosineAnnealing, 1000};
  EXPECT_EQ(beta_at(cos, 0), 0.04);
  EXPECT_EQ(beta_at(cos, 1000), 0.0);
  EXPECT_EQ(beta_at(cos, 500), 0.02);
  KlSchedule lin{0.04, KlStrategy::kLinearDecay, 1000};
  EXPECT_EQ(beta_at(lin, 0), 0.04);
  EXPECT_EQ(beta_at(lin, 1000), 0.0);
  KlSchedule st{0.008, KlStrategy::kStatic, 10};
  for (long t = 0; t <= 10; ++t) EXPECT_EQ(beta_at(st, t), 0.008);
}

TEST(Schedule, CosineMatchesClosedForm) {
  KlSchedule s{0.04, KlStrategy::kCosineAnnealing, 777};
  for (long t = 0; t <= 777; ++t) {
    const double want = 0.02 * (1 + std::cos(std::numbers::pi * t / 777.0));
    EXPECT_NEAR(beta_at(s, t), want, 1e-15);
  }
}

TEST(Schedule, MonotoneNonIncreasing) {
  for (auto strat : {KlStrategy::kCosineAnnealing, KlStrategy::kLinearDecay, KlStrategy::kStatic}) {
    KlSchedule s{0.04, strat, 10000};
    double prev = beta_at(s, 0);
    for (long t = 1; t <= 10000; ++t) {
      const double b = beta_at(s, t);
      EXPECT_LE(b, prev);
      EXPECT_GE(b, 0.0);
      prev = b;
    }
  }
}

TEST(Schedule, RejectsOutOfRange) {
  KlSchedule s{0.04, KlStrategy::kCosineAnnealing, 10};
  EXPECT_THROW(beta_at(s, -1), std::out_of_range);
  EXPECT_THROW(beta_at(s, 11), std::out_of_range);
  for (auto k : {KlStrategy::kStatic, KlStrategy::kLinearDecay, KlStrategy::kCosineAnnealing}) {
    EXPECT_EQ(parse_kl_strategy(to_string(k)), k);
  }
}

struct Group {
  std::vector<std::vector<double>> theta, old, ref;
  std::vector<double> adv;
  std::vector<SequenceLogProbs> views() const {
    std::vector<SequenceLogProbs> v;
    for (std::size_t i = 0; i < theta.size(); ++i) v.push_back({theta[i], old[i], ref[i]});
    return v;
  }
};

Group random_group(Rng& rng, double spread) {
  Group g;
  const int n = 4;
  std::vector<double> rewards;
  for (int i = 0; i < n; ++i) {
    const int len = 1 + rng.below_int(6);
    std::vector<double> th, ol, rf;
    for (int t = 0; t < len; ++t) {
      th.push_back(-3 * rng.uniform() - 0.05);
      ol.push_back(th.back() + spread * (rng.uniform() - 0.5));
      rf.push_back(th.back() + 0.5 * (rng.uniform() - 0.5));
    }
    g.theta.push_back(th);
    g.old.push_back(ol);
    g.ref.push_back(rf);
    rewards.push_back(rng.uniform());
  }
  g.adv = compute_advantages(rewards);
  return g;
}

TEST(Surrogate, HandComputedTokenLevel) {
  // One token per sequence: ratios 1.5 (clipped for A > 0) and 0.5 (clipped for A < 0).
  const std::vector<double> t1 = {std::log(0.3)}, o1 = {std::log(0.2)}, r1 = {std::log(0.3)};
  const std::vector<double> t2 = {std::log(0.1)}, o2 = {std::log(0.2)}, r2 = {std::log(0.2)};
  const std::vector<SequenceLogProbs> seqs = {{t1, o1, r1}, {t2, o2, r2}};
  const std::vector<double> adv = {1.0, -1.0};
  const auto res = clipped_surrogate(seqs, adv, ClipConfig{0.2, RatioLevel::kPerToken}, 0.04);
  const double s1 = std::min(1.5 * 1.0, 1.2 * 1.0);
  const double s2 = std::min(0.5 * -1.0, 0.8 * -1.0);
  const double kl2 = 2.0 - std::log(2.0) - 1.0;
  EXPECT_NEAR(res.surrogate, (s1 + s2) / 2, 1e-15);
  EXPECT_NEAR(res.kl, kl2 / 2, 1e-15);
  EXPECT_NEAR(res.objective, (s1 + s2) / 2 - 0.04 * kl2 / 2, 1e-15);
  EXPECT_EQ(res.clip_fraction, 1.0);
  // Clipped branch has no surrogate gradient; only the KL term remains.
  EXPECT_NEAR(res.dlogp[0][0], 0.0, 1e-15);
  EXPECT_NEAR(res.dlogp[1][0], 0.5 * (-0.04 * (1.0 - 2.0)), 1e-15);
}

TEST(Surrogate, UnclippedRatioOneReducesToMeanAdvantage) {
  Rng rng(4);
  auto g = random_group(rng, 0.0);
  g.old = g.theta;
  const auto res = clipped_surrogate(g.views(), g.adv, ClipConfig{}, 0.0);
  EXPECT_NEAR(res.surrogate, 0.0, 1e-12);  // advantages have zero mean
  EXPECT_EQ(res.clip_fraction, 0.0);
  EXPECT_EQ(res.objective, res.surrogate);
}

double objective_at(const Group& g, const ClipConfig& c, double beta) {
  return clipped_surrogate(g.views(), g.adv, c, beta, false).objective;
}

TEST(Surrogate, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const ClipConfig c{0.2, trial % 2 ? RatioLevel::kPerSequence : RatioLevel::kPerToken};
    const double beta = (trial / 2) % 2 ? 0.04 : 0.0;
    auto g = random_group(rng, (trial / 4) % 2 ? 1.5 : 0.05);
    const auto res = clipped_surrogate(g.views(), g.adv, c, beta);
    for (std::size_t i = 0; i < g.theta.size(); ++i) {
      for (std::size_t t = 0; t < g.theta[i].size(); ++t) {
        auto plus = g, minus = g;
        plus.theta[i][t] += 1e-6;
        minus.theta[i][t] -= 1e-6;
        const double fd = (objective_at(plus, c, beta) - objective_at(minus, c, beta)) / 2e-6;
        EXPECT_NEAR(res.dlogp[i][t], fd, 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(Surrogate, ObjectiveDecreasesWithBeta) {
  Rng rng(6);
  const auto g = random_group(rng, 0.3);
  double prev = objective_at(g, ClipConfig{}, 0.0);
  for (double b : {0.01, 0.04, 0.1}) {
    const double o = objective_at(g, ClipConfig{}, b);
    EXPECT_LE(o, prev);
    prev = o;
  }
}

TEST(Surrogate, Preconditions) {
  Rng rng(7);
  const auto g = random_group(rng, 0.1);
  EXPECT_THROW(clipped_surrogate(g.views(), g.adv, ClipConfig{1.5}, 0.0), std::invalid_argument);
  EXPECT_THROW(clipped_surrogate(g.views(), g.adv, ClipConfig{}, -0.1), std::invalid_argument);
  std::vector<double> short_adv(g.adv.begin(), g.adv.end() - 1);
  EXPECT_THROW(clipped_surrogate(g.views(), short_adv, ClipConfig{}, 0.0), std::invalid_argument);
}

TEST(RolloutGroup, Validation) {
  RolloutGroup g;
  g.sequences = {{{1, 0}, {-0.1, -0.2}, {-0.1, -0.2}}, {{2, 0}, {-0.3, -0.1}, {-0.3, -0.1}}};
  g.rewards = {1, 0};
  g.advantages = {1, -1};
  EXPECT_NO_THROW(validate(g));
  g.sequences[1].logp_ref.pop_back();
  EXPECT_THROW(validate(g), std::invalid_argument);
  g.sequences.pop_back();
  EXPECT_THROW(validate(g), std::invalid_argument);
}

}  // namespace
}  // namespace capgrpo
