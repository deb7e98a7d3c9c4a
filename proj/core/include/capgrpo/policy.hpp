// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale stochastic sequence policy standing in for a vision-language
// model. Next-token logits are linear in a step feature vector built from the
// task context (prompt, question, image) and a summary of what has been
// generated so far: the last token, per-segment bags of emitted tokens, the
// symbols already stated for slots the question refers to, the current
// segment and its length. An optional tanh hidden layer sits on the same
// features. Every gradient is written out by hand.

#ifndef CAPGRPO_POLICY_HPP_
#define CAPGRPO_POLICY_HPP_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "capgrpo/grpo.hpp"
#include "capgrpo/structured_output.hpp"
#include "capgrpo/vocab.hpp"

namespace capgrpo {

inline constexpr int kNumPromptFeatures = 2;  // reason-answer, caption-reason-answer
inline constexpr int kNumSegments = 4;        // outside, info, think, answer
inline constexpr int kNumLengthBuckets = 6;   // 0..4, 5+

// Prompt block prepended to task features.
std::vector<double> policy_context(FormatMode mode, std::span<const double> task_features);

struct PolicyLayout {
  int context_dim = 0;
  int vocab_size = 0;
  int num_slots = 0;
  int num_symbols = 0;
  // Context index of the first "question refers to slot s" feature; -1 when
  // the context carries none (the evidence block then stays inactive).
  int slot_feature_offset = -1;
  int last_token_offset = 0;  // vocab_size + 1 entries; the last is "start"
  int info_bag_offset = 0;
  int think_bag_offset = 0;
  int evidence_offset = 0;  // num_symbols entries
  int segment_offset = 0;
  int length_offset = 0;
  int bias_offset = 0;
  int dim = 0;

  static PolicyLayout make(int context_dim, const Vocabulary& vocab, int slot_feature_offset = -1);
};

struct PolicyParams {
  std::shared_ptr<const Vocabulary> vocab;
  PolicyLayout layout;
  int hidden_dim = 0;
  std::vector<double> w_out;     // (layout.dim + hidden_dim) x vocab, row-major
  std::vector<double> w_hidden;  // layout.dim x hidden_dim, row-major
  std::vector<double> b_hidden;  // hidden_dim

  static PolicyParams zeros(std::shared_ptr<const Vocabulary> vocab, int context_dim,
                            int hidden_dim = 0, int slot_feature_offset = -1);
  PolicyParams zeros_like() const;

  int vocab_size() const { return layout.vocab_size; }
  std::size_t num_parameters() const {
    return w_out.size() + w_hidden.size() + b_hidden.size();
  }
  double& out(int row, int token) {
    return w_out[static_cast<std::size_t>(row) * static_cast<std::size_t>(layout.vocab_size) +
                 static_cast<std::size_t>(token)];
  }
  double out(int row, int token) const {
    return w_out[static_cast<std::size_t>(row) * static_cast<std::size_t>(layout.vocab_size) +
                 static_cast<std::size_t>(token)];
  }

  // Flat view over all parameters, in a fixed order.
  double& at(std::size_t i);
  double at(std::size_t i) const;
  bool all_finite() const;
};

enum class SnapshotRole { kOld, kReference };

/// Frozen copy of the parameters used for importance ratios (old) or the KL
/// anchor (reference).
class PolicySnapshot {
 public:
  PolicySnapshot(const PolicyParams& params, SnapshotRole role)
      : params_(std::make_shared<const PolicyParams>(params)), role_(role) {}

  const PolicyParams& params() const { return *params_; }
  SnapshotRole role() const { return role_; }

 private:
  std::shared_ptr<const PolicyParams> params_;
  SnapshotRole role_;
};

struct GenerationConfig {
  double temperature = 0.9;
  int max_tokens = 24;
  FormatMode mode = FormatMode::kCaptionReasonAnswer;
};

struct SampledSequence {
  std::vector<int> tokens;
  std::vector<double> logprobs;  // under the tempered distribution sampled from
};

// Autoregressive sampling from softmax(logits / temperature). Stops after the
// end token or max_tokens tokens. Deterministic in rng_seed.
SampledSequence sample_sequence(const PolicyParams& params, std::span<const double> context,
                                const GenerationConfig& cfg, std::uint64_t rng_seed);

// Argmax decoding (identical for every temperature).
SampledSequence greedy_sequence(const PolicyParams& params, std::span<const double> context,
                                int max_tokens);

// Per-token log-probabilities at temperature 1. Throws std::out_of_range on a
// token outside the vocabulary.
std::vector<double> logprob_sequence(const PolicyParams& params, std::span<const double> context,
                                     std::span<const int> tokens);

// Next-token distribution after `prefix` at the given temperature.
std::vector<double> next_token_distribution(const PolicyParams& params,
                                            std::span<const double> context,
                                            std::span<const int> prefix,
                                            double temperature = 1.0);

struct ObjectiveGradient {
  double objective = 0.0;
  double kl = 0.0;  // mean over groups
  double clip_fraction = 0.0;
  PolicyParams gradient;
};

// Mean over groups of clipped_surrogate, with log-probabilities under `params`
// recomputed from the stored tokens.
double batch_objective(const PolicyParams& params, std::span<const RolloutGroup> groups,
                       const ClipConfig& clip, double beta_hat);

// Exact gradient of batch_objective with respect to every parameter. Groups
// are accumulated in a fixed order. Throws std::invalid_argument on
// non-finite inputs.
ObjectiveGradient objective_gradient(const PolicyParams& params,
                                     std::span<const RolloutGroup> groups,
                                     const ClipConfig& clip, double beta_hat);

// Gradient ascent: params + learning_rate * gradient.
void apply_update(PolicyParams& params, const PolicyParams& gradient, double learning_rate);

/// Initial weights that make the policy follow the prompted format, copy image
/// attributes into free text somewhat more often than not, and emit answers of
/// the right kind at random. Stands in for a pretrained base model.
struct PriorConfig {
  double grammar_strength = 8.0;
  double copy_bias = 1.5;
  double attribute_bias = 0.0;
  double evidence_bias = 0.0;  // described symbol -> same answer label
  // Added to attribute tokens inside <think>: unprompted reasoning rarely
  // describes the image.
  double reasoning_attribute_bias = -3.0;
  double filler_bias = 0.0;
  double close_slope = 2.5;
  double close_offset = -4.0;
  double repeat_penalty = 3.0;
  double hidden_init_scale = 0.1;
  std::uint64_t seed = 0;
};

// `num_attributes`/`num_symbols` describe the task feature block that follows
// the prompt block in the context.
PolicyParams make_prior_policy(std::shared_ptr<const Vocabulary> vocab, int num_attributes,
                               int num_symbols, int hidden_dim, const PriorConfig& prior);

// Text checkpoint with a shape header. Values use the shortest round-trip
// decimal form, so save then load is exact.
void save_params(const PolicyParams& params, std::ostream& out);
PolicyParams load_params(std::istream& in, std::shared_ptr<const Vocabulary> vocab);

}  // namespace capgrpo

#endif  // CAPGRPO_POLICY_HPP_
