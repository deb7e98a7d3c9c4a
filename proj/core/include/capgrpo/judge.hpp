// SPDX-License-Identifier: Apache-2.0
//
// Caption judging: a judge answers the question from the caption alone and the
// caption is rewarded when that answer is correct. Judge failures never pay.

#ifndef CAPGRPO_JUDGE_HPP_
#define CAPGRPO_JUDGE_HPP_

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capgrpo/rewards.hpp"

namespace capgrpo {

struct JudgeVerdict {
  std::string answered;
  bool correct = false;
  std::string judge_id;
  bool error = false;  // transport failure, timeout, malformed reply
  std::string error_message;
};

class Judge {
 public:
  virtual ~Judge() = default;

  // Answer `question` using only `caption`. Implementations report failures
  // through JudgeVerdict::error rather than throwing. `correct` is filled in
  // by caption_reward.
  virtual JudgeVerdict ask(std::string_view caption,
                           std::string_view question) = 0;
  virtual std::string id() const = 0;
};

struct CaptionRewardResult {
  int reward = 0;
  JudgeVerdict verdict;
};

CaptionRewardResult caption_reward(std::string_view caption,
                                   std::string_view question,
                                   const Answer& gold, Judge& judge);

struct CaptionQuery {
  std::string caption;
  std::string question;
  const Answer* gold = nullptr;
};

// Runs caption_reward for every query with at most `max_in_flight` judge calls
// outstanding. Results come back in query order.
std::vector<CaptionRewardResult> caption_rewards(std::span<const CaptionQuery> queries,
                                                 Judge& judge, int max_in_flight);

struct ExternalJudgeConfig {
  std::string endpoint = "http://127.0.0.1:8080";  // scheme://host:port
  std::string path = "/v1/chat/completions";
  std::string model = "judge";
  std::string judge_template;  // empty -> default_judge_prompt()
  int timeout_ms = 2000;
  std::string api_key;  // sent as a bearer token when non-empty
};

// Chat-completion request body for one judge call.
std::string build_judge_request(const ExternalJudgeConfig& cfg,
                                std::string_view caption,
                                std::string_view question);

// Pulls the final answer out of a chat-completion response body. Returns an
// error verdict for malformed JSON or a missing message.
JudgeVerdict parse_judge_response(std::string_view body);

// Strips an <answer> wrapper, a leading "Answer:" and surrounding whitespace.
std::string extract_final_answer(std::string_view content);

class ExternalJudge final : public Judge {
 public:
  // Throws std::invalid_argument when the template lacks {caption} or
  // {question}, or the endpoint cannot be parsed.
  explicit ExternalJudge(ExternalJudgeConfig cfg);

  JudgeVerdict ask(std::string_view caption, std::string_view question) override;
  std::string id() const override;

  const ExternalJudgeConfig& config() const { return cfg_; }

 private:
  ExternalJudgeConfig cfg_;
};

// One-shot helper mirroring ExternalJudge::ask.
JudgeVerdict judge_via_external(const std::string& endpoint,
                                const std::string& prompt_template,
                                std::string_view caption,
                                std::string_view question, int timeout_ms = 2000);

}  // namespace capgrpo

#endif  // CAPGRPO_JUDGE_HPP_
