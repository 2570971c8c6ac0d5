#include <atomic>
#include <thread>

#include "httplib.h"

#include "examgrid/service.hpp"

namespace examgrid::service {

namespace {

std::string bearer(const httplib::Request& req) {
  const auto h = req.get_header_value("Authorization");
  constexpr std::string_view kPrefix = "Bearer ";
  if (h.size() > kPrefix.size() && h.compare(0, kPrefix.size(), kPrefix) == 0) return h.substr(kPrefix.size());
  return {};
}

}  // namespace

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;
  std::jthread ticker;
  std::thread background;

  explicit Impl(Service& s) : service(s) {}

  // Drives expiry roughly once a second.
  void start_ticker() {
    ticker = std::jthread([this](std::stop_token stop) {
      while (!stop.stop_requested()) {
        service.tick_all();
        for (int i = 0; i < 10 && !stop.stop_requested(); ++i)
          std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
    });
  }
};

HttpServer::HttpServer(Service& service, std::optional<std::filesystem::path> ui_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  auto* svc = &service;

  auto api = [svc](const httplib::Request& req, httplib::Response& res) {
    Request r{req.method, req.path, bearer(req), req.body};
    const auto out = svc->handle_request(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };

  // The feed streams; everything else goes through handle_request.
  srv.Get(R"(/api/returns/([^/]+)/events)", [svc](const httplib::Request& req, httplib::Response& res) {
    Response refusal;
    auto cursor = svc->open_feed(bearer(req), req.matches[1], &refusal);
    if (!cursor) {
      res.status = refusal.status;
      res.set_content(refusal.body, refusal.content_type);
      return;
    }
    res.set_chunked_content_provider("application/x-ndjson",
                                     [cursor](std::size_t, httplib::DataSink& sink) {
                                       while (sink.is_writable()) {
                                         if (auto line = cursor->next(Service::kFeedPoll)) {
                                           sink.write(line->data(), line->size());
                                           return true;
                                         }
                                         if (cursor->ended()) {
                                           sink.done();
                                           return true;
                                         }
                                       }
                                       return false;
                                     });
  });
  srv.Get(R"(/api/.*)", api);
  srv.Post(R"(/api/.*)", api);
  srv.Put(R"(/api/.*)", api);
  srv.Delete(R"(/api/.*)", api);

  if (ui_dir) srv.set_mount_point("/", ui_dir->string());
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) {
  impl_->start_ticker();
  const bool ok = impl_->server.listen(host, port);
  impl_->ticker.request_stop();
  return ok;
}

int HttpServer::start_background(const std::string& host) {
  const int port = impl_->server.bind_to_any_port(host);
  if (port < 0) return -1;
  impl_->start_ticker();
  impl_->background = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->background.joinable()) impl_->background.join();
  impl_->ticker.request_stop();
  if (impl_->ticker.joinable()) impl_->ticker.join();
}

}  // namespace examgrid::service
