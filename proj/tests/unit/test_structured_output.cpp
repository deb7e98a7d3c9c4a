#include <gtest/gtest.h>

#include <variant>

#include "capgrpo/structured_output.hpp"
#include "corpus.hpp"

namespace capgrpo {
namespace {

using testing::CRA;
using testing::RA;

ParseFailure failure_of(std::string_view raw, FormatMode mode) {
  auto r = parse_response(raw, mode);
  EXPECT_TRUE(std::holds_alternative<ParseFailure>(r)) << raw;
  return std::holds_alternative<ParseFailure>(r) ? std::get<ParseFailure>(r) : ParseFailure{};
}

TEST(Parser, CaptionReasonAnswerSegments) {
  auto r = parse_response("<info>s1=A s2=B</info><think>slot 1</think><answer>A</answer>", CRA);
  ASSERT_TRUE(parsed_ok(r));
  const auto& s = std::get<StructuredResponse>(r);
  EXPECT_EQ(s.info, "s1=A s2=B");
  EXPECT_EQ(s.think, "slot 1");
  EXPECT_EQ(s.answer, "A");
}

TEST(Parser, ReasonAnswerHasNoInfo) {
  auto r = parse_response("<think>t</think><answer>2</answer>", RA);
  ASSERT_TRUE(parsed_ok(r));
  EXPECT_FALSE(std::get<StructuredResponse>(r).info.has_value());
}

TEST(Parser, WhitespaceBetweenTagsIsTolerated) {
  EXPECT_EQ(format_reward("\n <info> a </info>\n\t<think>b</think>  <answer> C </answer>\n", CRA), 1);
  auto r = parse_response(" <think> b </think> <answer> C </answer> ", RA);
  ASSERT_TRUE(parsed_ok(r));
  EXPECT_EQ(std::get<StructuredResponse>(r).think, " b ");
  EXPECT_EQ(std::get<StructuredResponse>(r).answer, " C ");
}

TEST(Parser, FailureKinds) {
  EXPECT_EQ(failure_of("<info>x</info><answer>B</answer>", CRA).kind, ParseFailureKind::kMissingTag);
  EXPECT_EQ(failure_of("<think>y</think><info>x</info><answer>B</answer>", CRA).kind,
            ParseFailureKind::kWrongOrder);
  EXPECT_EQ(failure_of("<info>x</info><info>x</info><think>y</think><answer>B</answer>", CRA).kind,
            ParseFailureKind::kDuplicateTag);
  EXPECT_EQ(failure_of("<info>x</info><think>y</think><answer>B", CRA).kind,
            ParseFailureKind::kUnclosedTag);
  EXPECT_EQ(failure_of("<think>y</think><answer>B</answer> extra", RA).kind,
            ParseFailureKind::kStrayContent);
}

TEST(Parser, FailurePositionPointsIntoRaw) {
  const std::string raw = "<think>y</think><answer>B</answer> extra";
  const auto f = failure_of(raw, RA);
  EXPECT_EQ(f.position, raw.find("extra"));
  EXPECT_EQ(failure_of("", CRA).position, 0u);
}

TEST(Parser, EmptyThinkHackPassesDefaultFailsStrict) {
  const std::string hack = "<info>slot 2 holds C so the answer is C</info><think></think><answer>C</answer>";
  EXPECT_EQ(format_reward(hack, CRA), 1);
  EXPECT_EQ(format_reward(hack, CRA, /*strict_nonempty=*/true), 0);
  EXPECT_EQ(format_reward("<info>a</info><think> \n</think><answer>C</answer>", CRA, true), 0);
  EXPECT_EQ(format_reward("<info>a</info><think>b</think><answer>C</answer>", CRA, true), 1);
}

TEST(Parser, MalformedCorpusAllScoreZero) {
  for (const auto& c : testing::kMalformedCorpus) {
    EXPECT_EQ(format_reward(c.text, c.mode), 0) << c.text;
    EXPECT_EQ(format_reward(c.text, c.mode, true), 0) << c.text;
  }
}

TEST(Parser, RoundTripRandomResponses) {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto mode = i % 2 ? CRA : RA;
    const auto resp = testing::random_response(rng, mode);
    const auto text = serialize_response(resp, mode);
    auto parsed = parse_response(text, mode);
    ASSERT_TRUE(parsed_ok(parsed)) << text;
    EXPECT_EQ(std::get<StructuredResponse>(parsed), resp);
    EXPECT_EQ(std::get<StructuredResponse>(parsed).raw, text);
    EXPECT_EQ(format_reward(text, mode), 1);
  }
}

TEST(Parser, TotalOverArbitraryBytes) {
  Rng rng(5);
  const std::string alphabet = "<>/infothkaswer \n\x01\xff";
  for (int i = 0; i < 5000; ++i) {
    std::string s;
    const int len = rng.below_int(40);
    for (int k = 0; k < len; ++k) s += alphabet[rng.below(alphabet.size())];
    for (auto mode : {CRA, RA}) {
      const int r = format_reward(s, mode);
      EXPECT_TRUE(r == 0 || r == 1);
      auto p = parse_response(s, mode);
      if (auto* f = std::get_if<ParseFailure>(&p)) {
        EXPECT_LE(f->position, s.size());
      }
    }
  }
}

TEST(Parser, SerializeRejectsTagLiteralsAndModeMismatch) {
  StructuredResponse r;
  r.think = "has </think> inside";
  EXPECT_THROW(serialize_response(r, RA), std::invalid_argument);
  r.think = "ok";
  EXPECT_THROW(serialize_response(r, CRA), std::invalid_argument);
  r.info = "x";
  EXPECT_THROW(serialize_response(r, RA), std::invalid_argument);
  EXPECT_EQ(serialize_response(r, CRA), "<info>x</info><think>ok</think><answer></answer>");
}

TEST(Parser, ModeNames) {
  EXPECT_EQ(parse_format_mode("cra"), CRA);
  EXPECT_EQ(parse_format_mode("reason-answer"), RA);
  EXPECT_EQ(parse_format_mode(to_string(CRA)), CRA);
  EXPECT_FALSE(parse_format_mode("caption").has_value());
}

}  // namespace
}  // namespace capgrpo
