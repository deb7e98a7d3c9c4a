// Fixed malformed-response corpus and a generator of well-formed responses.

#ifndef CAPGRPO_TESTS_CORPUS_HPP_
#define CAPGRPO_TESTS_CORPUS_HPP_

#include <array>
#include <string>
#include <string_view>

#include "capgrpo/random.hpp"
#include "capgrpo/structured_output.hpp"

namespace capgrpo::testing {

struct MalformedCase {
  FormatMode mode;
  std::string_view text;
};

inline constexpr auto CRA = FormatMode::kCaptionReasonAnswer;
inline constexpr auto RA = FormatMode::kReasonAnswer;

inline constexpr std::array<MalformedCase, 50> kMalformedCorpus = {{
    {CRA, ""},
    {CRA, "   \n\t "},
    {CRA, "B"},
    {CRA, "<think>x</think><answer>B</answer>"},
    {CRA, "<info>x</info><answer>B</answer>"},
    {CRA, "<info>x</info><think>y</think>"},
    {CRA, "<think>y</think><info>x</info><answer>B</answer>"},
    {CRA, "<info>x</info><answer>B</answer><think>y</think>"},
    {CRA, "<answer>B</answer><info>x</info><think>y</think>"},
    {CRA, "<info>x</info><info>x</info><think>y</think><answer>B</answer>"},
    {CRA, "<info>x</info><think>y</think><think>y</think><answer>B</answer>"},
    {CRA, "<info>x</info><think>y</think><answer>B</answer><answer>B</answer>"},
    {CRA, "<info>x<think>y</think><answer>B</answer>"},
    {CRA, "<info>x</info><think>y<answer>B</answer>"},
    {CRA, "<info>x</info><think>y</think><answer>B"},
    {CRA, "<info>x</info><think>y</think><answer>B</think>"},
    {CRA, "<info>x</info><think>y</think><answer>B</answer> trailing"},
    {CRA, "leading <info>x</info><think>y</think><answer>B</answer>"},
    {CRA, "<info>x</info> between <think>y</think><answer>B</answer>"},
    {CRA, "<info>x</info><think>y</think> between <answer>B</answer>"},
    {CRA, "<info>x</info><think>y</think><answer>B</answer></answer>"},
    {CRA, "<info>x</info></info><think>y</think><answer>B</answer>"},
    {CRA, "<info>x<info>z</info><think>y</think><answer>B</answer>"},
    {CRA, "<Info>x</Info><think>y</think><answer>B</answer>"},
    {CRA, "<info >x</info><think>y</think><answer>B</answer>"},
    {CRA, "<info>x</info ><think>y</think><answer>B</answer>"},
    {CRA, "<info>x</info><think>y</think><answer>B</answer"},
    {CRA, "<info>x</info><think>y</think>answer>B</answer>"},
    {CRA, "</info>x<info><think>y</think><answer>B</answer>"},
    {CRA, "<info>x</info><think>y</think><answer>B</answer><info>z</info>"},
    {CRA, "<info>x</info><think>y</think><answer>B</answer><think>z</think>"},
    {CRA, "<info></info><think></think>"},
    {CRA, "<info>x</info><think>y</answer><answer>B</think>"},
    {CRA, "<info>x</think><think>y</info><answer>B</answer>"},
    {CRA, "<think>y</think><answer>B</answer><info>x</info>"},
    {CRA, "<info>x</info>\n<think>y</think>\n<answer>B</answer>\n."},
    {CRA, "<info>x</info><think>y</think><answer>B</answer>\n<answer>C</answer>"},
    {CRA, "<answer>B</answer>"},
    {CRA, "<info>x</info>"},
    {CRA, "<info>x"},
    {RA, ""},
    {RA, "<answer>B</answer>"},
    {RA, "<think>y</think>"},
    {RA, "<info>x</info><think>y</think><answer>B</answer>"},
    {RA, "<answer>B</answer><think>y</think>"},
    {RA, "<think>y</think><think>z</think><answer>B</answer>"},
    {RA, "<think>y<answer>B</answer>"},
    {RA, "<think>y</think><answer>B</answer>extra"},
    {RA, "<think>y</think><info>x</info><answer>B</answer>"},
    {RA, "think>y</think><answer>B</answer>"},
}};

// Segment text that never contains a complete tag literal but is rich in
// near misses: angle brackets, partial tags, whitespace and multi-byte UTF-8.
inline std::string random_segment(Rng& rng, int max_len) {
  static constexpr std::array<std::string_view, 20> kPieces = {
      "a", "B", "7", " ", "\n", "\t", "<", ">", "/", "<thin", "</answe", "info>", "think",
      "<INFO>", "s1=A", "é", "→", "数", "<answer ", "x"};
  std::string out;
  for (;;) {
    out.clear();
    const int len = rng.below_int(max_len + 1);
    for (int i = 0; i < len; ++i) out += kPieces[rng.below(kPieces.size())];
    if (!contains_tag_literal(out)) return out;
  }
}

inline StructuredResponse random_response(Rng& rng, FormatMode mode) {
  StructuredResponse r;
  if (mode == FormatMode::kCaptionReasonAnswer) r.info = random_segment(rng, 12);
  r.think = random_segment(rng, 12);
  r.answer = random_segment(rng, 4);
  return r;
}

}  // namespace capgrpo::testing

#endif  // CAPGRPO_TESTS_CORPUS_HPP_
