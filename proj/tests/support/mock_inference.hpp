#pragma once

// In-process HTTP server standing in for the captioning / VQA / embedding
// backend. Handlers see the decoded JSON request and the per-path call count.

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

namespace tti::fixture {

struct MockReply {
  int status = 200;
  nlohmann::json body;
};

class MockInference {
 public:
  using Handler = std::function<MockReply(const nlohmann::json& request, int call)>;

  MockInference();
  ~MockInference();
  MockInference(const MockInference&) = delete;
  MockInference& operator=(const MockInference&) = delete;

  /// Route for "/caption", "/vqa" or "/embed". Unrouted paths answer 404.
  void on(const std::string& path, Handler handler);
  void start();
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int calls(const std::string& path) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace tti::fixture
