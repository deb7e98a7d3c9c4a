// SPDX-License-Identifier: Apache-2.0

#include "capgrpo/structured_output.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace capgrpo {

namespace {

struct SegmentSpec {
  std::string_view open;
  std::string_view close;
};

constexpr SegmentSpec kInfo{kInfoOpen, kInfoClose};
constexpr SegmentSpec kThink{kThinkOpen, kThinkClose};
constexpr SegmentSpec kAnswer{kAnswerOpen, kAnswerClose};

std::vector<SegmentSpec> segments_for(FormatMode mode) {
  if (mode == FormatMode::kCaptionReasonAnswer) return {kInfo, kThink, kAnswer};
  return {kThink, kAnswer};
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::size_t skip_space(std::string_view s, std::size_t pos) {
  while (pos < s.size() && is_space(s[pos])) ++pos;
  return pos;
}

// Tag literal starting exactly at `pos`, if any.
std::optional<std::string_view> tag_at(std::string_view s, std::size_t pos) {
  for (auto tag : kTagLiterals) {
    if (s.substr(pos, tag.size()) == tag) return tag;
  }
  return std::nullopt;
}

struct TagHit {
  std::size_t pos;
  std::string_view tag;
};

// Earliest tag literal at or after `pos`.
std::optional<TagHit> next_tag(std::string_view s, std::size_t pos) {
  std::optional<TagHit> best;
  for (auto tag : kTagLiterals) {
    auto found = s.find(tag, pos);
    if (found != std::string_view::npos && (!best || found < best->pos)) {
      best = TagHit{found, tag};
    }
  }
  return best;
}

bool is_open_tag(std::string_view tag) {
  return tag == kInfoOpen || tag == kThinkOpen || tag == kAnswerOpen;
}

}  // namespace

std::string_view to_string(FormatMode mode) {
  return mode == FormatMode::kCaptionReasonAnswer ? "caption-reason-answer"
                                                  : "reason-answer";
}

std::optional<FormatMode> parse_format_mode(std::string_view text) {
  if (text == "caption-reason-answer" || text == "cra") {
    return FormatMode::kCaptionReasonAnswer;
  }
  if (text == "reason-answer" || text == "ra") return FormatMode::kReasonAnswer;
  return std::nullopt;
}

std::string_view to_string(ParseFailureKind kind) {
  switch (kind) {
    case ParseFailureKind::kMissingTag: return "missing-tag";
    case ParseFailureKind::kWrongOrder: return "wrong-order";
    case ParseFailureKind::kDuplicateTag: return "duplicate-tag";
    case ParseFailureKind::kUnclosedTag: return "unclosed-tag";
    case ParseFailureKind::kStrayContent: return "stray-content";
  }
  return "unknown";
}

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(), is_space);
}

bool contains_tag_literal(std::string_view text) {
  return next_tag(text, 0).has_value();
}

ParseResult parse_response(std::string_view raw, FormatMode mode) {
  const auto expected = segments_for(mode);
  std::vector<std::string> contents;
  contents.reserve(expected.size());

  auto seen_open = [&](std::string_view tag) {
    for (std::size_t i = 0; i < contents.size(); ++i) {
      if (expected[i].open == tag) return true;
    }
    return false;
  };
  auto expected_later = [&](std::string_view tag, std::size_t from) {
    for (std::size_t i = from; i < expected.size(); ++i) {
      if (expected[i].open == tag || expected[i].close == tag) return true;
    }
    return false;
  };

  std::size_t pos = 0;
  for (std::size_t seg = 0; seg < expected.size(); ++seg) {
    const auto& spec = expected[seg];
    pos = skip_space(raw, pos);
    if (pos >= raw.size()) return ParseFailure{ParseFailureKind::kMissingTag, pos};

    auto tag = tag_at(raw, pos);
    if (!tag) return ParseFailure{ParseFailureKind::kStrayContent, pos};
    if (*tag != spec.open) {
      if (is_open_tag(*tag) && seen_open(*tag)) {
        return ParseFailure{ParseFailureKind::kDuplicateTag, pos};
      }
      if (expected_later(*tag, seg)) {
        // The expected tag showing up further along means the order is off;
        // otherwise it is simply absent.
        bool appears_later = raw.find(spec.open, pos) != std::string_view::npos;
        return ParseFailure{appears_later ? ParseFailureKind::kWrongOrder
                                          : ParseFailureKind::kMissingTag,
                            pos};
      }
      return ParseFailure{ParseFailureKind::kStrayContent, pos};
    }

    const std::size_t body = pos + spec.open.size();
    auto hit = next_tag(raw, body);
    if (!hit) return ParseFailure{ParseFailureKind::kUnclosedTag, pos};
    if (hit->tag != spec.close) {
      auto kind = hit->tag == spec.open ? ParseFailureKind::kDuplicateTag
                                        : ParseFailureKind::kUnclosedTag;
      return ParseFailure{kind, hit->pos};
    }
    contents.emplace_back(raw.substr(body, hit->pos - body));
    pos = hit->pos + spec.close.size();
  }

  pos = skip_space(raw, pos);
  if (pos < raw.size()) {
    auto tag = tag_at(raw, pos);
    if (tag && is_open_tag(*tag) && seen_open(*tag)) {
      return ParseFailure{ParseFailureKind::kDuplicateTag, pos};
    }
    return ParseFailure{ParseFailureKind::kStrayContent, pos};
  }

  StructuredResponse out;
  out.raw = std::string(raw);
  std::size_t i = 0;
  if (mode == FormatMode::kCaptionReasonAnswer) out.info = std::move(contents[i++]);
  out.think = std::move(contents[i++]);
  out.answer = std::move(contents[i]);
  return out;
}

int format_reward(std::string_view raw, FormatMode mode, bool strict_nonempty) {
  auto parsed = parse_response(raw, mode);
  const auto* resp = std::get_if<StructuredResponse>(&parsed);
  if (resp == nullptr) return 0;
  if (!strict_nonempty) return 1;
  if (resp->info && is_blank(*resp->info)) return 0;
  if (is_blank(resp->think) || is_blank(resp->answer)) return 0;
  return 1;
}

std::string serialize_response(const StructuredResponse& resp, FormatMode mode) {
  const bool wants_info = mode == FormatMode::kCaptionReasonAnswer;
  if (wants_info != resp.info.has_value()) {
    throw std::invalid_argument(
        wants_info ? "caption-reason-answer response requires an info segment"
                   : "reason-answer response must not carry an info segment");
  }
  auto check = [](std::string_view name, std::string_view text) {
    if (contains_tag_literal(text)) {
      throw std::invalid_argument(std::string(name) +
                                  " segment contains a tag literal");
    }
  };
  std::string out;
  if (resp.info) {
    check("info", *resp.info);
    out.append(kInfoOpen).append(*resp.info).append(kInfoClose);
  }
  check("think", resp.think);
  check("answer", resp.answer);
  out.append(kThinkOpen).append(resp.think).append(kThinkClose);
  out.append(kAnswerOpen).append(resp.answer).append(kAnswerClose);
  return out;
}

}  // namespace capgrpo
