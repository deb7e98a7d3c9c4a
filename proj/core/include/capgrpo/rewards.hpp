// SPDX-License-Identifier: Apache-2.0

#ifndef CAPGRPO_REWARDS_HPP_
#define CAPGRPO_REWARDS_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "capgrpo/structured_output.hpp"

namespace capgrpo {

enum class AnswerKind { kMultiChoice, kNumeric, kOpenText };

std::string_view to_string(AnswerKind kind);
std::optional<AnswerKind> parse_answer_kind(std::string_view text);

inline constexpr double kDefaultNumericRelTol = 1e-6;
inline constexpr double kNumericAbsTol = 1e-9;

struct Answer {
  AnswerKind kind = AnswerKind::kOpenText;
  std::string value;
  std::vector<std::string> choices;         // multi-choice labels only
  std::optional<double> numeric_tolerance;  // relative; numeric only

  friend bool operator==(const Answer&, const Answer&) = default;
};

// Throws std::invalid_argument describing the first violated invariant.
void validate(const Answer& answer);

/// Per-sequence reward terms. `total` is r_a + r_f + alpha * r_c, plus
/// length_weight * r_len when the length-reward ablation is switched on
/// (r_len and length_weight are zero otherwise).
struct RewardBreakdown {
  int r_a = 0;
  int r_f = 0;
  int r_c = 0;
  double alpha = 0.0;
  double r_len = 0.0;
  double length_weight = 0.0;
  double total = 0.0;
};

// Lower-cases ASCII, drops punctuation and whitespace.
std::string normalize_choice_label(std::string_view text);
// Lower-cases ASCII, trims, collapses internal whitespace runs to one space.
std::string normalize_open_text(std::string_view text);
// Locale-independent; accepts surrounding whitespace only.
std::optional<double> parse_number(std::string_view text);

int accuracy_reward(std::string_view answer_text, const Answer& gold);

// Linear ramp over the whitespace-separated token count of caption plus
// reasoning, saturating at 1 when the count reaches target_length.
double length_reward(const StructuredResponse& resp, int target_length);
int count_words(std::string_view text);

// Throws std::invalid_argument on negative alpha or out-of-range terms.
RewardBreakdown composite_reward(int r_a, int r_f, int r_c, double alpha);
RewardBreakdown composite_reward(int r_a, int r_f, int r_c, double alpha,
                                 double r_len, double length_weight);

}  // namespace capgrpo

#endif  // CAPGRPO_REWARDS_HPP_
