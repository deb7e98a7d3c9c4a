// Microbenchmarks for the hot paths of one training step.

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "capgrpo/grpo.hpp"
#include "capgrpo/policy.hpp"
#include "capgrpo/random.hpp"
#include "capgrpo/shortcut_env.hpp"
#include "capgrpo/structured_output.hpp"

namespace {

using namespace capgrpo;

void BM_Advantages(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> r(static_cast<std::size_t>(state.range(0)));
  for (auto& x : r) x = static_cast<double>(rng.below(3)) + 0.1 * static_cast<double>(rng.below(2));
  for (auto _ : state) benchmark::DoNotOptimize(compute_advantages(r));
}
BENCHMARK(BM_Advantages)->Arg(8)->Arg(64);

void BM_ParseResponse(benchmark::State& state) {
  const std::string text = "<info>s1=A s2=C s3=B</info><think>s2 is C so the answer is C</think><answer>C</answer>";
  for (auto _ : state) benchmark::DoNotOptimize(parse_response(text, FormatMode::kCaptionReasonAnswer));
}
BENCHMARK(BM_ParseResponse);

struct Fixture {
  EnvConfig env;
  Split split = generate_split(env);
  std::shared_ptr<const Vocabulary> vocab = std::make_shared<const Vocabulary>(make_vocabulary(env));
  PolicyParams params = make_prior_policy(vocab, env.num_attributes, env.num_symbols, 0, PriorConfig{});
  std::vector<double> context =
      policy_context(FormatMode::kCaptionReasonAnswer, task_context_features(split.train[0], true));

  std::vector<RolloutGroup> groups(int tasks, int n) {
    std::vector<RolloutGroup> out;
    Rng rng(5);
    GenerationConfig gen;
    for (int g = 0; g < tasks; ++g) {
      RolloutGroup group;
      group.context = policy_context(FormatMode::kCaptionReasonAnswer,
                                     task_context_features(split.train[static_cast<std::size_t>(g)], true));
      for (int i = 0; i < n; ++i) {
        auto s = sample_sequence(params, group.context, gen, static_cast<std::uint64_t>(g * n + i));
        auto lp = logprob_sequence(params, group.context, s.tokens);
        group.sequences.push_back({s.tokens, lp, lp});
        group.rewards.push_back(static_cast<double>(rng.below(3)));
      }
      group.advantages = compute_advantages(group.rewards);
      out.push_back(std::move(group));
    }
    return out;
  }
};

void BM_SampleSequence(benchmark::State& state) {
  Fixture f;
  GenerationConfig gen;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_sequence(f.params, f.context, gen, seed++));
}
BENCHMARK(BM_SampleSequence);

void BM_ObjectiveGradient(benchmark::State& state) {
  Fixture f;
  const auto groups = f.groups(static_cast<int>(state.range(0)), 8);
  const ClipConfig clip;
  for (auto _ : state) benchmark::DoNotOptimize(objective_gradient(f.params, groups, clip, 0.04));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 8);
}
BENCHMARK(BM_ObjectiveGradient)->Arg(1)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
