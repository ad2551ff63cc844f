#include "mock_inference.hpp"

#include <httplib.h>

namespace tti::fixture {

struct MockInference::Impl {
  httplib::Server server;
  mutable std::mutex mu;
  std::map<std::string, Handler> handlers;
  std::map<std::string, int> calls;
};

MockInference::MockInference() : impl_(std::make_unique<Impl>()) {}

MockInference::~MockInference() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

void MockInference::on(const std::string& path, Handler handler) {
  std::lock_guard lock(impl_->mu);
  impl_->handlers[path] = std::move(handler);
}

int MockInference::calls(const std::string& path) const {
  std::lock_guard lock(impl_->mu);
  auto it = impl_->calls.find(path);
  return it == impl_->calls.end() ? 0 : it->second;
}

void MockInference::start() {
  auto* impl = impl_.get();
  impl->server.Post(R"(/.*)", [impl](const httplib::Request& req, httplib::Response& res) {
    Handler h;
    int call = 0;
    {
      std::lock_guard lock(impl->mu);
      auto it = impl->handlers.find(req.path);
      if (it != impl->handlers.end()) h = it->second;
      call = impl->calls[req.path]++;
    }
    if (!h) {
      res.status = 404;
      res.set_content(R"({"error":"no route"})", "application/json");
      return;
    }
    const MockReply r = h(nlohmann::json::parse(req.body, nullptr, false), call);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  });
  port_ = impl->server.bind_to_any_port("127.0.0.1");
  thread_ = std::thread([impl] { impl->server.listen_after_bind(); });
  impl->server.wait_until_ready();
}

}  // namespace tti::fixture
