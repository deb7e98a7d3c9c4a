// SPDX-License-Identifier: Apache-2.0

#include "capgrpo/rewards.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace capgrpo {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool is_ascii_punct(char c) {
  auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u) != 0;
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::string_view to_string(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::kMultiChoice: return "multi-choice";
    case AnswerKind::kNumeric: return "numeric";
    case AnswerKind::kOpenText: return "open-text";
  }
  return "open-text";
}

std::optional<AnswerKind> parse_answer_kind(std::string_view text) {
  if (text == "multi-choice") return AnswerKind::kMultiChoice;
  if (text == "numeric") return AnswerKind::kNumeric;
  if (text == "open-text") return AnswerKind::kOpenText;
  return std::nullopt;
}

void validate(const Answer& answer) {
  switch (answer.kind) {
    case AnswerKind::kMultiChoice: {
      if (answer.choices.empty()) {
        throw std::invalid_argument("multi-choice answer without choices");
      }
      auto it = std::find(answer.choices.begin(), answer.choices.end(),
                          answer.value);
      if (it == answer.choices.end()) {
        throw std::invalid_argument("multi-choice value '" + answer.value +
                                    "' is not one of its choices");
      }
      break;
    }
    case AnswerKind::kNumeric: {
      auto v = parse_number(answer.value);
      if (!v || !std::isfinite(*v)) {
        throw std::invalid_argument("numeric answer '" + answer.value +
                                    "' is not a finite number");
      }
      if (answer.numeric_tolerance && !(*answer.numeric_tolerance >= 0.0)) {
        throw std::invalid_argument("numeric tolerance must be nonnegative");
      }
      break;
    }
    case AnswerKind::kOpenText:
      break;
  }
  if (answer.kind != AnswerKind::kMultiChoice && !answer.choices.empty()) {
    throw std::invalid_argument("choices are only valid for multi-choice");
  }
  if (answer.kind != AnswerKind::kNumeric && answer.numeric_tolerance) {
    throw std::invalid_argument("numeric tolerance on a non-numeric answer");
  }
}

std::string normalize_choice_label(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (is_space(c) || is_ascii_punct(c)) continue;
    out.push_back(ascii_lower(c));
  }
  return out;
}

std::string normalize_open_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(text)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ascii_lower(c));
  }
  return out;
}

std::optional<double> parse_number(std::string_view text) {
  auto t = trim(text);
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

int accuracy_reward(std::string_view answer_text, const Answer& gold) {
  switch (gold.kind) {
    case AnswerKind::kMultiChoice: {
      auto got = normalize_choice_label(answer_text);
      return !got.empty() && got == normalize_choice_label(gold.value) ? 1 : 0;
    }
    case AnswerKind::kNumeric: {
      auto got = parse_number(answer_text);
      auto want = parse_number(gold.value);
      if (!got || !want) return 0;
      double rel = gold.numeric_tolerance.value_or(kDefaultNumericRelTol);
      double tol = std::max(rel * std::abs(*want), kNumericAbsTol);
      return std::abs(*got - *want) <= tol ? 1 : 0;
    }
    case AnswerKind::kOpenText:
      return normalize_open_text(answer_text) == normalize_open_text(gold.value)
                 ? 1
                 : 0;
  }
  return 0;
}

int count_words(std::string_view text) {
  int n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

double length_reward(const StructuredResponse& resp, int target_length) {
  if (target_length <= 0) return 1.0;
  int len = count_words(resp.think);
  if (resp.info) len += count_words(*resp.info);
  return std::min(1.0, static_cast<double>(len) / target_length);
}

RewardBreakdown composite_reward(int r_a, int r_f, int r_c, double alpha) {
  return composite_reward(r_a, r_f, r_c, alpha, 0.0, 0.0);
}

RewardBreakdown composite_reward(int r_a, int r_f, int r_c, double alpha,
                                 double r_len, double length_weight) {
  auto binary = [](int v) { return v == 0 || v == 1; };
  if (!binary(r_a) || !binary(r_f) || !binary(r_c)) {
    throw std::invalid_argument("reward terms must be 0 or 1");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("alpha must be a finite nonnegative weight");
  }
  if (!(r_len >= 0.0 && r_len <= 1.0) || !(length_weight >= 0.0)) {
    throw std::invalid_argument("length reward must lie in [0, 1] with a "
                                "nonnegative weight");
  }
  RewardBreakdown b;
  b.r_a = r_a;
  b.r_f = r_f;
  b.r_c = r_c;
  b.alpha = alpha;
  b.r_len = r_len;
  b.length_weight = length_weight;
  b.total = static_cast<double>(r_a) + static_cast<double>(r_f) +
            alpha * static_cast<double>(r_c);
  if (length_weight != 0.0) b.total += length_weight * r_len;
  return b;
}

}  // namespace capgrpo
