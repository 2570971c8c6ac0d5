#pragma once

// HTTP+JSON front of the system. handle_request() is the whole API as a pure
// function of (method, path, token, body); the httplib server is a thin
// shell around it plus the NDJSON event feed and static UI assets.
//
//   LECTURER  POST /api/papers                 {paper} | {source}
//             GET  /api/papers/{id}
//             PUT  /api/papers/{id}             {paper} | {source}
//             POST /api/papers/{id}/publish     {passkey?, locators[]}
//             GET  /api/returns
//             POST /api/returns/{id}/mark
//             POST /api/returns/{id}/manual     {q, score}
//             GET  /api/returns/{id}/report
//             GET  /api/returns/{id}/events     NDJSON feed
//   STUDENT   GET  /api/inbox
//             POST /api/session/start           {paper, passkey?}
//             GET  /api/session/state
//             POST /api/session/answer          {q, response}
//             POST /api/session/submit
//             GET  /api/materials
//
// A return id is "<paper-id>.<student-id>".

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "examgrid/envcheck.hpp"
#include "examgrid/gesture/record.hpp"
#include "examgrid/marking.hpp"
#include "examgrid/session.hpp"
#include "examgrid/transport.hpp"
#include "examgrid/vqp.hpp"

namespace examgrid::service {

using json = nlohmann::json;

enum class Role { Lecturer, Student };
std::string_view to_string(Role r);

struct Principal {
  std::string id;
  Role role = Role::Student;
  std::string token;

  bool operator==(const Principal&) const = default;
};

// {"accounts": [{"id": "...", "role": "LECTURER"|"STUDENT", "token": "..."}]}
// Throws std::invalid_argument on a malformed fixture or a repeated token.
std::vector<Principal> parse_accounts(std::string_view text);
std::vector<Principal> load_accounts(const std::filesystem::path& path);

// --- JSON mirrors of module types --------------------------------------------

json to_json(const vqp::QuestionPaper& p);
// Throws std::invalid_argument on a wrong shape.
vqp::QuestionPaper paper_from_json(const json& j);
json to_json(const gesture::GestureEvent& e);
json to_json(const gesture::SessionReport& r);
json to_json(const marking::MarkReport& r);
json to_json(const envcheck::AttestationRecord& a);
json to_json(const session::Snapshot& s, session::TimePoint now);
json to_json(const session::PublishResult& r);
std::string iso8601(session::TimePoint t);

// --- endpoint table ----------------------------------------------------------

struct Endpoint {
  std::string method;
  std::string pattern;  // "{id}" matches one path segment
  Role role;
};

const std::vector<Endpoint>& endpoints();

struct Request {
  std::string method;
  std::string path;  // without query string
  std::string token;  // bearer token, empty when absent
  std::string body;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// --- event feed --------------------------------------------------------------

// Ordered event log of one session. Writers append, readers follow by index;
// close() marks the end of the stream.
class EventLog {
 public:
  void append(const gesture::GestureEvent& e);
  void close();
  bool closed() const;
  std::vector<gesture::GestureEvent> events() const;

  // Waits up to `wait` for event `index`. nullopt with *ended = true once
  // closed and drained; nullopt with *ended = false on timeout.
  std::optional<gesture::GestureEvent> wait_next(std::size_t index, std::chrono::milliseconds wait,
                                                  bool* ended) const;

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<gesture::GestureEvent> events_;
  bool closed_ = false;
};

// A reader's position in an EventLog.
class FeedCursor {
 public:
  explicit FeedCursor(std::shared_ptr<const EventLog> log) : log_(std::move(log)) {}
  // Next NDJSON line (with trailing '\n'), nullopt on timeout or end.
  std::optional<std::string> next(std::chrono::milliseconds wait);
  bool ended() const { return ended_; }

 private:
  std::shared_ptr<const EventLog> log_;
  std::size_t index_ = 0;
  bool ended_ = false;
};

// --- service -----------------------------------------------------------------

struct ServiceConfig {
  std::vector<Principal> accounts;
  transport::Locator inbox = transport::Locator::dir("inbox");      // exams are published here
  transport::Locator returns = transport::Locator::dir("returns");  // students upload here
  std::optional<std::filesystem::path> materials;                   // LMS directory
  envcheck::Fixture environment;  // simulated probe fixture for student sessions
  // Simulated camera for a student's session; nullptr means no frames.
  std::function<std::unique_ptr<gesture::FrameSource>(const std::string& student)> frames;
  std::function<session::TimePoint()> clock = [] { return std::chrono::system_clock::now(); };
  gesture::AnalysisOptions analysis;
};

class Service {
 public:
  static constexpr std::chrono::milliseconds kFeedPoll{250};

  explicit Service(ServiceConfig config);
  ~Service();

  Response handle_request(const Request& req);

  // Feed for GET /api/returns/{id}/events. On refusal, fills *refusal and
  // returns nullptr.
  std::shared_ptr<FeedCursor> open_feed(const std::string& token, const std::string& return_id,
                                        Response* refusal);

  // Expires every session whose deadline has passed and retries pending
  // uploads. The HTTP server calls this once a second.
  void tick_all();

  // Blocks until the student's recording thread finished.
  void wait_for_recording(const std::string& student);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Serves the API and, when ui_dir is set, static files under /. Blocks until
// stop() is called from another thread or a signal handler.
class HttpServer {
 public:
  explicit HttpServer(Service& service, std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~HttpServer();
  // Binds and serves; returns false when the port cannot be bound.
  bool listen(const std::string& host, int port);
  // Binds to a free port and serves on a background thread; returns the port.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace examgrid::service
