// SPDX-License-Identifier: Apache-2.0
//
// Synthetic visual question answering with a planted text shortcut.
//
// Each "image" is a set of k slots holding distinct symbols out of v. A
// question asks about one or more slots (lookup, comparison, count). Easy
// tasks append a hint token that equals the gold answer with probability rho;
// hard tasks carry no hint, so only the image determines the answer.

#ifndef CAPGRPO_SHORTCUT_ENV_HPP_
#define CAPGRPO_SHORTCUT_ENV_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "capgrpo/judge.hpp"
#include "capgrpo/rewards.hpp"
#include "capgrpo/vocab.hpp"

namespace capgrpo {

enum class QuestionTemplate { kLookup, kComparison, kCount };
inline constexpr int kNumTemplates = 3;

std::string_view to_string(QuestionTemplate t);

enum class Difficulty { kEasy, kHard };

std::string_view to_string(Difficulty d);

struct Question {
  QuestionTemplate tmpl = QuestionTemplate::kLookup;
  std::vector<int> slots;  // 0-based slots the question refers to
  int threshold = -1;      // count template: "greater than" symbol
  std::string text;        // question wording without the hint

  friend bool operator==(const Question&, const Question&) = default;
};

struct SyntheticTask {
  std::string task_id;
  std::vector<int> attributes;  // slot -> symbol, all distinct
  int num_symbols = 0;
  Question question;
  Answer gold;
  int gold_label = 0;  // index into the environment's label list
  Difficulty difficulty = Difficulty::kHard;
  std::optional<int> shortcut_cue;  // label index, easy tasks only
  double cue_correlation = 0.0;

  // Question as shown to the policy, hint included.
  std::string prompt_text() const;

  friend bool operator==(const SyntheticTask&, const SyntheticTask&) = default;
};

struct EnvConfig {
  int num_attributes = 4;
  int num_symbols = 4;
  int train_size = 500;
  int test_size = 200;
  double easy_fraction_train = 0.8;
  double easy_fraction_test = 0.2;
  double shortcut_correlation = 0.95;
  std::array<double, kNumTemplates> template_weights = {1.0, 1.0, 1.0};
  std::uint64_t seed = 0;
};

void validate(const EnvConfig& cfg);

struct Split {
  std::vector<SyntheticTask> train;
  std::vector<SyntheticTask> test;
};

// Deterministic in cfg. The exact share of easy tasks is
// round(easy_fraction * size), placed at random positions.
Split generate_split(const EnvConfig& cfg);

// Number of slots a count question covers.
int count_span(int num_attributes);
int num_answer_labels(int num_attributes, int num_symbols);
// Symbol names followed by the counts 0..count_span.
std::vector<std::string> answer_labels(int num_attributes, int num_symbols);
// Label indices a template can produce.
std::pair<int, int> label_range(QuestionTemplate t, int num_attributes, int num_symbols);

std::vector<std::string> default_fillers();
Vocabulary make_vocabulary(const EnvConfig& cfg);

/// Index layout of the task feature vector.
struct TaskFeatureLayout {
  int num_attributes = 0;
  int num_symbols = 0;
  int num_labels = 0;
  int template_offset = 0;
  int slot_offset = 0;
  int threshold_offset = 0;
  int cue_offset = 0;
  int attribute_offset = 0;
  int dim = 0;

  static TaskFeatureLayout make(int num_attributes, int num_symbols);
  int attribute_index(int slot, int symbol) const {
    return attribute_offset + slot * num_symbols + symbol;
  }
};

// Question block (template, referenced slots, threshold, hint) always; the
// attribute block only when reveal_image is set.
std::vector<double> task_context_features(const SyntheticTask& task, bool reveal_image);

// Gold-consistent answer text, or nullopt ("insufficient") when the mentions
// do not cover every slot the question needs or mention a needed slot with
// conflicting symbols. Throws std::invalid_argument for unknown templates.
using AttributeMention = std::pair<int, int>;  // (slot, symbol), 0-based
std::optional<std::string> oracle_answer(std::string_view question,
                                         std::span<const AttributeMention> caption_tokens);

std::vector<AttributeMention> caption_mentions(std::string_view caption);

// Parses question wording (hint stripped or not). Throws on unknown templates.
Question parse_question(std::string_view text);

// Answer (label index) implied by a full attribute assignment.
int answer_label(const Question& q, std::span<const int> attributes, int num_symbols);

// Expected accuracy of the Bayes-optimal predictor that reads only the
// question text: max_a P(a | question, hint), by enumeration over all
// attribute assignments. Averaged over the split.
double text_only_bayes_accuracy(std::span<const SyntheticTask> split);
double text_only_bayes_accuracy(const SyntheticTask& task);

// Answers from caption attribute tokens only.
class OracleJudge final : public Judge {
 public:
  JudgeVerdict ask(std::string_view caption, std::string_view question) override;
  std::string id() const override { return "oracle"; }
};

inline constexpr std::string_view kInsufficient = "insufficient";

}  // namespace capgrpo

#endif  // CAPGRPO_SHORTCUT_ENV_HPP_
