// Chat-completions server answering from the caption with the oracle judge.
// Every `stall_every`-th request waits `stall_ms` before replying, which a
// client with a shorter timeout sees as a timeout.

#ifndef CAPGRPO_TESTS_MOCK_JUDGE_HPP_
#define CAPGRPO_TESTS_MOCK_JUDGE_HPP_

#include <atomic>
#include <chrono>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "capgrpo/shortcut_env.hpp"

namespace capgrpo::testing {

class MockJudgeServer {
 public:
  MockJudgeServer(int stall_every, int stall_ms) : stall_every_(stall_every), stall_ms_(stall_ms) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++requests_;
      if (stall_every_ > 0 && n % stall_every_ == 0) {
        ++stalled_;
        std::this_thread::sleep_for(std::chrono::milliseconds(stall_ms_));
      }
      const auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.contains("messages") || body["messages"].size() < 2) {
        res.status = 400;
        return;
      }
      const std::string system = body["messages"][0]["content"].get<std::string>();
      const std::string question = body["messages"][1]["content"].get<std::string>();
      const std::string key = "Description: ";
      const auto start = system.rfind(key);
      const auto end = system.rfind("\nQuestion: ");
      std::string caption;
      if (start != std::string::npos && end != std::string::npos && end >= start + key.size()) {
        caption = system.substr(start + key.size(), end - start - key.size());
      }
      OracleJudge oracle;
      const auto verdict = oracle.ask(caption, question);
      nlohmann::json reply = {
          {"id", "mock-" + std::to_string(n)},
          {"choices",
           nlohmann::json::array({{{"index", 0},
                                   {"message",
                                    {{"role", "assistant"},
                                     {"content", "<answer>" + verdict.answered + "</answer>"}}}}})}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockJudgeServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  MockJudgeServer(const MockJudgeServer&) = delete;
  MockJudgeServer& operator=(const MockJudgeServer&) = delete;

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_.load(); }
  int stalled() const { return stalled_.load(); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int stall_every_;
  int stall_ms_;
  std::atomic<int> requests_{0};
  std::atomic<int> stalled_{0};
};

}  // namespace capgrpo::testing

#endif  // CAPGRPO_TESTS_MOCK_JUDGE_HPP_
