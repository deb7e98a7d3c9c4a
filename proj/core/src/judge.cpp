// SPDX-License-Identifier: Apache-2.0

#include "capgrpo/judge.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "capgrpo/prompts.hpp"

namespace capgrpo {

using json = nlohmann::json;

CaptionRewardResult caption_reward(std::string_view caption,
                                   std::string_view question,
                                   const Answer& gold, Judge& judge) {
  CaptionRewardResult out;
  if (is_blank(caption)) {
    // Nothing to judge; not a judge failure.
    out.verdict.judge_id = judge.id();
    return out;
  }
  out.verdict = judge.ask(caption, question);
  if (out.verdict.error) {
    out.verdict.correct = false;
    return out;
  }
  out.verdict.correct = accuracy_reward(out.verdict.answered, gold) == 1;
  out.reward = out.verdict.correct ? 1 : 0;
  return out;
}

std::vector<CaptionRewardResult> caption_rewards(std::span<const CaptionQuery> queries,
                                                 Judge& judge, int max_in_flight) {
  std::vector<CaptionRewardResult> out(queries.size());
  auto run_one = [&](std::size_t i) {
    const auto& q = queries[i];
    out[i] = caption_reward(q.caption, q.question, *q.gold, judge);
  };
  const std::size_t workers =
      std::min<std::size_t>(std::max(1, max_in_flight), queries.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < queries.size(); ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < queries.size();
           i = next.fetch_add(1)) {
        run_one(i);
      }
    });
  }
  pool.clear();  // joins
  return out;
}

std::string build_judge_request(const ExternalJudgeConfig& cfg,
                                std::string_view caption,
                                std::string_view question) {
  const std::string tmpl =
      cfg.judge_template.empty() ? default_judge_prompt() : cfg.judge_template;
  std::string system = render_template(
      tmpl, {{"caption", std::string(caption)}, {"question", std::string(question)}});
  json body = {
      {"model", cfg.model},
      {"temperature", 0.0},
      {"messages",
       json::array({json{{"role", "system"}, {"content", system}},
                    json{{"role", "user"}, {"content", std::string(question)}}})},
  };
  return body.dump();
}

std::string extract_final_answer(std::string_view content) {
  auto open = content.find(kAnswerOpen);
  if (open != std::string_view::npos) {
    auto start = open + kAnswerOpen.size();
    auto close = content.find(kAnswerClose, start);
    content = content.substr(start, close == std::string_view::npos
                                        ? std::string_view::npos
                                        : close - start);
  } else {
    // Last non-empty line.
    auto end = content.find_last_not_of(" \t\r\n");
    if (end == std::string_view::npos) return {};
    content = content.substr(0, end + 1);
    auto nl = content.find_last_of('\n');
    if (nl != std::string_view::npos) content = content.substr(nl + 1);
  }
  auto b = content.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = content.find_last_not_of(" \t\r\n");
  content = content.substr(b, e - b + 1);
  constexpr std::string_view kPrefix = "Answer:";
  if (content.substr(0, kPrefix.size()) == kPrefix) {
    content.remove_prefix(kPrefix.size());
    auto b2 = content.find_first_not_of(" \t");
    content = b2 == std::string_view::npos ? std::string_view{} : content.substr(b2);
  }
  return std::string(content);
}

JudgeVerdict parse_judge_response(std::string_view body) {
  JudgeVerdict v;
  json doc = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    v.error = true;
    v.error_message = "malformed judge response";
    return v;
  }
  const json* content = nullptr;
  if (doc.contains("choices") && doc["choices"].is_array() &&
      !doc["choices"].empty()) {
    const auto& choice = doc["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      content = &choice["message"]["content"];
    }
  }
  if (content == nullptr) {
    v.error = true;
    v.error_message = "judge response has no message content";
    return v;
  }
  v.answered = extract_final_answer(content->get<std::string>());
  return v;
}

ExternalJudge::ExternalJudge(ExternalJudgeConfig cfg) : cfg_(std::move(cfg)) {
  const std::string tmpl =
      cfg_.judge_template.empty() ? default_judge_prompt() : cfg_.judge_template;
  if (!has_placeholder(tmpl, "caption") || !has_placeholder(tmpl, "question")) {
    throw std::invalid_argument(
        "judge template must contain {caption} and {question} placeholders");
  }
  if (cfg_.endpoint.rfind("http://", 0) != 0) {
    throw std::invalid_argument("judge endpoint must start with http://: " +
                                cfg_.endpoint);
  }
  if (cfg_.timeout_ms <= 0) {
    throw std::invalid_argument("judge timeout must be positive");
  }
}

std::string ExternalJudge::id() const { return "external:" + cfg_.model; }

JudgeVerdict ExternalJudge::ask(std::string_view caption,
                                std::string_view question) {
  JudgeVerdict v;
  httplib::Client client(cfg_.endpoint);
  const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + cfg_.api_key);
  }
  auto res = client.Post(cfg_.path, headers,
                         build_judge_request(cfg_, caption, question),
                         "application/json");
  if (!res) {
    v.error = true;
    v.error_message = "judge request failed: " + httplib::to_string(res.error());
  } else if (res->status != 200) {
    v.error = true;
    v.error_message = "judge returned HTTP " + std::to_string(res->status);
  } else {
    v = parse_judge_response(res->body);
  }
  v.judge_id = id();
  return v;
}

JudgeVerdict judge_via_external(const std::string& endpoint,
                                const std::string& prompt_template,
                                std::string_view caption,
                                std::string_view question, int timeout_ms) {
  ExternalJudgeConfig cfg;
  cfg.endpoint = endpoint;
  cfg.judge_template = prompt_template;
  cfg.timeout_ms = timeout_ms;
  try {
    ExternalJudge judge(cfg);
    return judge.ask(caption, question);
  } catch (const std::invalid_argument& e) {
    JudgeVerdict v;
    v.error = true;
    v.error_message = e.what();
    v.judge_id = "external:" + cfg.model;
    return v;
  }
}

}  // namespace capgrpo
