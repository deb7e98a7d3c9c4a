// SPDX-License-Identifier: Apache-2.0
//
// Tagged output grammar: <info>...</info><think>...</think><answer>...</answer>
// (caption-reason-answer) or <think>...</think><answer>...</answer>
// (reason-answer). Parsing never throws; the format reward is binary.

#ifndef CAPGRPO_STRUCTURED_OUTPUT_HPP_
#define CAPGRPO_STRUCTURED_OUTPUT_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace capgrpo {

enum class FormatMode { kReasonAnswer, kCaptionReasonAnswer };

std::string_view to_string(FormatMode mode);
// Accepts "reason-answer" / "caption-reason-answer" (also "ra" / "cra").
std::optional<FormatMode> parse_format_mode(std::string_view text);

inline constexpr std::string_view kInfoOpen = "<info>";
inline constexpr std::string_view kInfoClose = "</info>";
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

inline constexpr std::array<std::string_view, 6> kTagLiterals = {
    kInfoOpen, kInfoClose, kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose};

/// Parsed segments of one generated sequence. `info` is engaged only for
/// caption-reason-answer responses. Equality compares segments, not `raw`.
struct StructuredResponse {
  std::optional<std::string> info;
  std::string think;
  std::string answer;
  std::string raw;

  friend bool operator==(const StructuredResponse& a,
                         const StructuredResponse& b) {
    return a.info == b.info && a.think == b.think && a.answer == b.answer;
  }
};

enum class ParseFailureKind {
  kMissingTag,
  kWrongOrder,
  kDuplicateTag,
  kUnclosedTag,
  kStrayContent,
};

std::string_view to_string(ParseFailureKind kind);

struct ParseFailure {
  ParseFailureKind kind;
  std::size_t position;  // character offset into raw, in [0, raw.size()]

  friend bool operator==(const ParseFailure&, const ParseFailure&) = default;
};

using ParseResult = std::variant<StructuredResponse, ParseFailure>;

// Reports the first failure found scanning left to right. Whitespace between
// and around tags is tolerated; segment contents are returned verbatim.
ParseResult parse_response(std::string_view raw, FormatMode mode);

inline bool parsed_ok(const ParseResult& r) {
  return std::holds_alternative<StructuredResponse>(r);
}

// 1 iff the text parses under `mode`; with `strict_nonempty` every required
// segment must additionally contain a non-whitespace character.
int format_reward(std::string_view raw, FormatMode mode,
                  bool strict_nonempty = false);

// Canonical form without inter-tag whitespace. Throws std::invalid_argument
// when a segment contains a tag literal or `info` presence does not match
// the mode.
std::string serialize_response(const StructuredResponse& resp,
                               FormatMode mode);

bool contains_tag_literal(std::string_view text);
bool is_blank(std::string_view text);

}  // namespace capgrpo

#endif  // CAPGRPO_STRUCTURED_OUTPUT_HPP_
