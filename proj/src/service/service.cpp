#include <algorithm>
#include <stdexcept>

#include "examgrid/service.hpp"

namespace examgrid::service {

namespace {

using session::Phase;

// Raised inside handlers to leave with a given status.
struct HttpError {
  int status;
  std::string code;
  std::string detail;
};

Response reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }

Response error_reply(int status, const std::string& code, const std::string& detail) {
  json body = {{"error", code}};
  if (!detail.empty()) body["detail"] = detail;
  return reply(status, body);
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < path.size()) {
    auto slash = path.find('/', pos);
    if (slash == std::string_view::npos) slash = path.size();
    if (slash > pos) out.emplace_back(path.substr(pos, slash - pos));
    pos = slash + 1;
  }
  return out;
}

// Matches "{id}" segments and collects them.
bool match(const std::string& pattern, const std::vector<std::string>& segs, std::vector<std::string>* args) {
  const auto pat = split_path(pattern);
  if (pat.size() != segs.size()) return false;
  std::vector<std::string> captured;
  for (std::size_t i = 0; i < pat.size(); ++i) {
    if (pat[i] == "{id}") captured.push_back(segs[i]);
    else if (pat[i] != segs[i]) return false;
  }
  if (args) *args = std::move(captured);
  return true;
}

json parse_body(const std::string& body, bool required) {
  if (body.empty()) {
    if (required) throw HttpError{400, "BadRequest", "a JSON body is required"};
    return json::object();
  }
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw HttpError{400, "BadRequest", "body must be a JSON object"};
    return j;
  } catch (const json::exception& e) {
    throw HttpError{400, "BadRequest", e.what()};
  }
}

// "<paper>.<student>", split at the last dot.
std::pair<std::string, std::string> split_return_id(const std::string& id) {
  const auto dot = id.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == id.size())
    throw HttpError{404, "NotFound", "return id is <paper>.<student>"};
  return {id.substr(0, dot), id.substr(dot + 1)};
}

vqp::QuestionPaper paper_from_body(const json& body) {
  if (body.contains("source")) {
    if (!body["source"].is_string()) throw HttpError{400, "BadRequest", "source must be a string"};
    return vqp::parse_vqp(body["source"].get<std::string>());
  }
  if (!body.contains("paper")) throw HttpError{400, "BadRequest", "expected paper or source"};
  vqp::QuestionPaper p;
  try {
    p = paper_from_json(body["paper"]);
  } catch (const std::invalid_argument& e) {
    throw HttpError{400, "BadRequest", e.what()};
  }
  const auto violations = vqp::validate(p);
  if (!violations.empty()) {
    json list = json::array();
    for (const auto& v : violations)
      list.push_back({{"question", v.question}, {"rule", std::string(vqp::to_string(v.rule))}, {"detail", v.detail}});
    throw HttpError{422, "ConstraintError", list.dump()};
  }
  return p;
}

int status_for(const Error& e) {
  const auto& c = e.code();
  if (dynamic_cast<const session::SessionError*>(&e)) {
    if (c == "Denied") return 403;
    return 409;
  }
  if (dynamic_cast<const transport::TransportError*>(&e)) {
    if (c == "NotFound") return 404;
    if (c == "InvalidLocator" || c == "InvalidName") return 400;
    return 502;
  }
  return 422;
}

}  // namespace

// --- event log ---------------------------------------------------------------

void EventLog::append(const gesture::GestureEvent& e) {
  {
    std::lock_guard lk(mu_);
    if (closed_) return;
    events_.push_back(e);
  }
  cv_.notify_all();
}

void EventLog::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool EventLog::closed() const {
  std::lock_guard lk(mu_);
  return closed_;
}

std::vector<gesture::GestureEvent> EventLog::events() const {
  std::lock_guard lk(mu_);
  return events_;
}

std::optional<gesture::GestureEvent> EventLog::wait_next(std::size_t index, std::chrono::milliseconds wait,
                                                          bool* ended) const {
  std::unique_lock lk(mu_);
  cv_.wait_for(lk, wait, [&] { return index < events_.size() || closed_; });
  if (index < events_.size()) {
    *ended = false;
    return events_[index];
  }
  *ended = closed_;
  return std::nullopt;
}

std::optional<std::string> FeedCursor::next(std::chrono::milliseconds wait) {
  if (ended_) return std::nullopt;
  bool ended = false;
  auto ev = log_->wait_next(index_, wait, &ended);
  if (!ev) {
    ended_ = ended;
    return std::nullopt;
  }
  ++index_;
  return to_json(*ev).dump() + "\n";
}

// --- endpoint table ----------------------------------------------------------

const std::vector<Endpoint>& endpoints() {
  static const std::vector<Endpoint> table = {
      {"POST", "/api/papers", Role::Lecturer},
      {"GET", "/api/papers/{id}", Role::Lecturer},
      {"PUT", "/api/papers/{id}", Role::Lecturer},
      {"POST", "/api/papers/{id}/publish", Role::Lecturer},
      {"GET", "/api/returns", Role::Lecturer},
      {"POST", "/api/returns/{id}/mark", Role::Lecturer},
      {"POST", "/api/returns/{id}/manual", Role::Lecturer},
      {"GET", "/api/returns/{id}/report", Role::Lecturer},
      {"GET", "/api/returns/{id}/events", Role::Lecturer},
      {"GET", "/api/inbox", Role::Student},
      {"POST", "/api/session/start", Role::Student},
      {"GET", "/api/session/state", Role::Student},
      {"POST", "/api/session/answer", Role::Student},
      {"POST", "/api/session/submit", Role::Student},
      {"GET", "/api/materials", Role::Student},
  };
  return table;
}

// --- service -----------------------------------------------------------------

struct Service::Impl {
  struct PaperRecord {
    std::string owner;
    vqp::QuestionPaper design;
    std::shared_ptr<session::LecturerWorkflow> workflow;  // set once published
  };
  struct StudentRecord {
    std::shared_ptr<session::StudentSession> session;
    std::shared_ptr<EventLog> log;
  };

  ServiceConfig config;
  std::map<std::string, Principal> by_token;

  std::mutex mu;
  std::map<std::string, PaperRecord> papers;
  std::map<std::string, marking::MarkReport> marks;  // by return id
  std::map<std::string, std::shared_ptr<EventLog>> analysed;  // by return id
  std::map<std::string, StudentRecord> students;

  using Args = std::vector<std::string>;

  Response dispatch(const Endpoint& ep, const Principal& who, const Args& args, const Request& req);

  // lecturer
  PaperRecord& owned_paper(const Principal& who, const std::string& id);
  Response create_paper(const Principal& who, const json& body);
  Response get_paper(const Principal& who, const std::string& id);
  Response put_paper(const Principal& who, const std::string& id, const json& body);
  Response publish(const Principal& who, const std::string& id, const json& body);
  Response list_returns(const Principal& who);
  std::pair<std::shared_ptr<session::LecturerWorkflow>, session::CollectedReturn> owned_return(
      const Principal& who, const std::string& return_id);
  Response mark(const Principal& who, const std::string& return_id);
  Response manual(const Principal& who, const std::string& return_id, const json& body);
  Response report(const Principal& who, const std::string& return_id);
  std::shared_ptr<EventLog> feed_log(const Principal& who, const std::string& return_id);

  // student
  std::optional<StudentRecord> find_student(const std::string& id);
  void advance(StudentRecord& rec);
  Response state(const Principal& who);
  Response inbox();
  Response start(const Principal& who, const json& body);
  Response answer(const Principal& who, const json& body);
  Response submit(const Principal& who);
  Response materials(const Principal& who);
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
  for (const auto& p : impl_->config.accounts) impl_->by_token[p.token] = p;
}

Service::~Service() = default;

Response Service::handle_request(const Request& req) {
  const auto segs = split_path(req.path);
  if (segs.empty() || segs[0] != "api") return error_reply(404, "NotFound", req.path);

  auto who = impl_->by_token.find(req.token);
  if (req.token.empty() || who == impl_->by_token.end())
    return error_reply(401, "Unauthorized", req.token.empty() ? "missing token" : "unknown token");

  const Endpoint* ep = nullptr;
  bool path_known = false;
  Impl::Args args;
  for (const auto& e : endpoints()) {
    Impl::Args a;
    if (!match(e.pattern, segs, &a)) continue;
    path_known = true;
    if (e.method == req.method) {
      ep = &e;
      args = std::move(a);
      break;
    }
  }
  if (!ep) {
    if (path_known) return error_reply(405, "MethodNotAllowed", req.method + " " + req.path);
    return error_reply(404, "NotFound", req.path);
  }
  if (ep->role != who->second.role)
    return error_reply(403, "Forbidden", std::string(to_string(ep->role)) + " only");

  try {
    return impl_->dispatch(*ep, who->second, args, req);
  } catch (const HttpError& e) {
    return error_reply(e.status, e.code, e.detail);
  } catch (const Error& e) {
    return error_reply(status_for(e), e.code(), e.what());
  } catch (const std::invalid_argument& e) {
    return error_reply(400, "BadRequest", e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "InternalError", e.what());
  }
}

Response Service::Impl::dispatch(const Endpoint& ep, const Principal& who, const Args& args,
                                 const Request& req) {
  const std::string& p = ep.pattern;
  const std::string id = args.empty() ? "" : args[0];
  if (p == "/api/papers") return create_paper(who, parse_body(req.body, true));
  if (p == "/api/papers/{id}")
    return ep.method == "GET" ? get_paper(who, id) : put_paper(who, id, parse_body(req.body, true));
  if (p == "/api/papers/{id}/publish") return publish(who, id, parse_body(req.body, false));
  if (p == "/api/returns") return list_returns(who);
  if (p == "/api/returns/{id}/mark") return mark(who, id);
  if (p == "/api/returns/{id}/manual") return manual(who, id, parse_body(req.body, true));
  if (p == "/api/returns/{id}/report") return report(who, id);
  if (p == "/api/returns/{id}/events") {
    FeedCursor cursor(feed_log(who, id));
    std::string body;
    while (!cursor.ended())
      if (auto line = cursor.next(Service::kFeedPoll)) body += *line;
    return {200, body, "application/x-ndjson"};
  }
  if (p == "/api/inbox") return inbox();
  if (p == "/api/session/start") return start(who, parse_body(req.body, true));
  if (p == "/api/session/state") return state(who);
  if (p == "/api/session/answer") return answer(who, parse_body(req.body, true));
  if (p == "/api/session/submit") return submit(who);
  if (p == "/api/materials") return materials(who);
  throw HttpError{404, "NotFound", req.path};
}

// --- lecturer endpoints ------------------------------------------------------

Service::Impl::PaperRecord& Service::Impl::owned_paper(const Principal& who, const std::string& id) {
  auto it = papers.find(id);
  if (it == papers.end()) throw HttpError{404, "NotFound", "no paper " + id};
  if (it->second.owner != who.id) throw HttpError{403, "Forbidden", "paper belongs to another lecturer"};
  return it->second;
}

Response Service::Impl::create_paper(const Principal& who, const json& body) {
  auto paper = paper_from_body(body);
  if (paper.variant != vqp::Variant::Design)
    throw vqp::PaperError("WrongVariant", "only DESIGN papers can be created");
  std::lock_guard lk(mu);
  if (papers.count(paper.id)) throw HttpError{409, "PaperExists", "paper " + paper.id + " exists"};
  const std::string id = paper.id;
  papers[id] = {who.id, std::move(paper), nullptr};
  return reply(201, {{"id", id}});
}

Response Service::Impl::get_paper(const Principal& who, const std::string& id) {
  std::lock_guard lk(mu);
  return reply(200, to_json(owned_paper(who, id).design));
}

Response Service::Impl::put_paper(const Principal& who, const std::string& id, const json& body) {
  auto paper = paper_from_body(body);
  if (paper.variant != vqp::Variant::Design)
    throw vqp::PaperError("WrongVariant", "only DESIGN papers can be stored");
  if (paper.id != id) throw HttpError{400, "BadRequest", "paper id does not match the path"};
  std::lock_guard lk(mu);
  auto& rec = owned_paper(who, id);
  if (rec.workflow) throw HttpError{409, "AlreadyPublished", "published papers are frozen"};
  rec.design = std::move(paper);
  return reply(200, to_json(rec.design));
}

Response Service::Impl::publish(const Principal& who, const std::string& id, const json& body) {
  std::optional<std::string> passkey;
  if (body.contains("passkey") && !body["passkey"].is_null()) {
    if (!body["passkey"].is_string()) throw HttpError{400, "BadRequest", "passkey must be a string"};
    passkey = body["passkey"].get<std::string>();
  }
  std::vector<transport::Locator> to;
  if (body.contains("locators")) {
    if (!body["locators"].is_array()) throw HttpError{400, "BadRequest", "locators must be an array"};
    for (const auto& l : body["locators"]) {
      if (!l.is_string()) throw HttpError{400, "BadRequest", "locators must be strings"};
      to.push_back(transport::Locator::parse(l.get<std::string>()));
    }
  }
  if (to.empty()) to.push_back(config.inbox);

  std::shared_ptr<session::LecturerWorkflow> wf;
  {
    std::lock_guard lk(mu);
    auto& rec = owned_paper(who, id);
    wf = std::make_shared<session::LecturerWorkflow>(rec.design, passkey);
    rec.workflow = wf;
  }
  return reply(200, to_json(wf->publish(to)));
}

Response Service::Impl::list_returns(const Principal& who) {
  std::vector<std::shared_ptr<session::LecturerWorkflow>> flows;
  {
    std::lock_guard lk(mu);
    for (auto& [id, rec] : papers)
      if (rec.owner == who.id && rec.workflow) flows.push_back(rec.workflow);
  }
  json returns = json::array(), issues = json::array();
  for (const auto& wf : flows) {
    try {
      wf->collect(config.returns);
    } catch (const transport::TransportError& e) {
      issues.push_back({{"name", nullptr}, {"source", config.returns.redacted()}, {"code", e.code()},
                        {"detail", e.what()}});
    }
    for (const auto& r : wf->returns()) {
      const std::string rid = wf->design().id + "." + r.student_id;
      std::lock_guard lk(mu);
      returns.push_back({{"id", rid},
                         {"paper", wf->design().id},
                         {"student", r.student_id},
                         {"name", r.name},
                         {"source", r.source},
                         {"marked", marks.count(rid) > 0}});
    }
    for (const auto& i : wf->issues())
      issues.push_back({{"name", i.name}, {"source", i.source}, {"code", i.code}, {"detail", i.detail}});
  }
  return reply(200, {{"returns", returns}, {"issues", issues}});
}

std::pair<std::shared_ptr<session::LecturerWorkflow>, session::CollectedReturn>
Service::Impl::owned_return(const Principal& who, const std::string& return_id) {
  const auto [paper, student] = split_return_id(return_id);
  std::shared_ptr<session::LecturerWorkflow> wf;
  {
    std::lock_guard lk(mu);
    wf = owned_paper(who, paper).workflow;
  }
  if (!wf) throw HttpError{404, "NotFound", "paper " + paper + " is not published"};
  auto r = wf->find_return(student);
  if (!r) {
    wf->collect(config.returns);
    r = wf->find_return(student);
  }
  if (!r) throw HttpError{404, "NotFound", "no return " + return_id};
  return {wf, std::move(*r)};
}

Response Service::Impl::mark(const Principal& who, const std::string& return_id) {
  auto [wf, r] = owned_return(who, return_id);
  auto report = marking::auto_mark(wf->design(), r.answered);
  std::lock_guard lk(mu);
  marks[return_id] = report;
  return reply(200, to_json(report));
}

Response Service::Impl::manual(const Principal& who, const std::string& return_id, const json& body) {
  if (!body.contains("q") || !body["q"].is_number_integer() || !body.contains("score") ||
      !body["score"].is_number())
    throw HttpError{400, "BadRequest", "expected {q: integer, score: number}"};
  auto [wf, r] = owned_return(who, return_id);
  std::lock_guard lk(mu);
  auto it = marks.find(return_id);
  marking::MarkReport current = it != marks.end() ? it->second : marking::auto_mark(wf->design(), r.answered);
  auto updated = marking::apply_manual(current, body["q"].get<int>(), body["score"].get<double>());
  marks[return_id] = updated;
  return reply(200, to_json(updated));
}

Response Service::Impl::report(const Principal& who, const std::string& return_id) {
  auto [wf, r] = owned_return(who, return_id);
  std::optional<marking::MarkReport> marked;
  {
    std::lock_guard lk(mu);
    if (auto it = marks.find(return_id); it != marks.end()) marked = it->second;
  }
  json out = {{"id", return_id}, {"paper", wf->design().id}, {"student", r.student_id}};
  out["marks"] = marked ? to_json(*marked) : json(nullptr);
  out["summary"] = marked ? json(marking::summarize(*marked)) : json(nullptr);
  out["answered"] = to_json(r.answered);
  if (const auto* env = rts::find(r.entries, rts::EntryType::EnvRec)) {
    try {
      out["attestation"] = to_json(envcheck::parse_envrec(examgrid::to_string(env->data)));
    } catch (const Error& e) {
      out["attestation"] = {{"error", e.code()}, {"detail", e.what()}};
    }
  }
  if (const auto* media = rts::find(r.entries, rts::EntryType::Media)) {
    try {
      out["gestures"] = to_json(gesture::analyze_frameset(media->data, config.analysis));
    } catch (const Error& e) {
      out["gestures"] = {{"error", e.code()}, {"detail", e.what()}};
    }
  }
  return reply(200, out);
}

std::shared_ptr<EventLog> Service::Impl::feed_log(const Principal& who, const std::string& return_id) {
  const auto [paper, student] = split_return_id(return_id);
  {
    std::lock_guard lk(mu);
    owned_paper(who, paper);
    if (auto it = students.find(student); it != students.end()) {
      const auto snap = it->second.session->snapshot();
      if (snap.paper && snap.paper->id == paper && snap.started) return it->second.log;
    }
    if (auto it = analysed.find(return_id); it != analysed.end()) return it->second;
  }
  auto [wf, r] = owned_return(who, return_id);
  const auto* media = rts::find(r.entries, rts::EntryType::Media);
  auto log = std::make_shared<EventLog>();
  for (const auto& e : gesture::analyze_frameset(media->data, config.analysis).events) log->append(e);
  log->close();
  std::lock_guard lk(mu);
  analysed[return_id] = log;
  return log;
}

// --- student endpoints -------------------------------------------------------

std::optional<Service::Impl::StudentRecord> Service::Impl::find_student(const std::string& id) {
  std::lock_guard lk(mu);
  auto it = students.find(id);
  if (it == students.end()) return std::nullopt;
  return it->second;
}

// Expiry and upload are driven from here so every student request sees a
// current phase.
void Service::Impl::advance(StudentRecord& rec) {
  auto& s = *rec.session;
  try {
    Phase phase = s.snapshot().phase;
    if (phase == Phase::InExam && s.tick(config.clock())) phase = Phase::Expired;
    if (phase == Phase::Submitted || phase == Phase::Expired) {
      rec.log->close();
      s.upload_return(config.returns);
    }
  } catch (const session::SessionError&) {
    // a concurrent request moved the session on first
  }
}

Response Service::Impl::state(const Principal& who) {
  auto rec = find_student(who.id);
  if (!rec) {
    session::Snapshot idle;
    idle.student_id = who.id;
    return reply(200, to_json(idle, config.clock()));
  }
  advance(*rec);
  return reply(200, to_json(rec->session->snapshot(), config.clock()));
}

Response Service::Impl::inbox() {
  json out = json::array();
  for (const auto& name : transport::list(config.inbox)) {
    if (!transport::glob_match("*.rts", name)) continue;
    out.push_back({{"name", name}, {"paper", name.substr(0, name.size() - 4)}});
  }
  return reply(200, {{"papers", out}});
}

Response Service::Impl::start(const Principal& who, const json& body) {
  if (!body.contains("paper") || !body["paper"].is_string())
    throw HttpError{400, "BadRequest", "expected {paper: string, passkey?: string}"};
  const std::string paper = body["paper"].get<std::string>();
  std::optional<std::string> passkey;
  if (body.contains("passkey") && !body["passkey"].is_null()) {
    if (!body["passkey"].is_string()) throw HttpError{400, "BadRequest", "passkey must be a string"};
    passkey = body["passkey"].get<std::string>();
  }

  StudentRecord rec;
  bool fresh = false;
  {
    std::lock_guard lk(mu);
    auto it = students.find(who.id);
    if (it != students.end()) {
      const auto snap = it->second.session->snapshot();
      const bool finished = snap.phase == Phase::Uploaded || snap.phase == Phase::Failed;
      if (!finished && snap.paper && snap.paper->id != paper)
        throw HttpError{409, "InvalidTransition", "another exam is in progress"};
      if (!finished) rec = it->second;
    }
    if (!rec.session) {
      auto log = std::make_shared<EventLog>();
      session::SessionOptions opts;
      opts.analysis = config.analysis;
      opts.on_event = [log](const gesture::GestureEvent& e) { log->append(e); };
      rec = {std::make_shared<session::StudentSession>(who.id, std::move(opts)), log};
      students[who.id] = rec;
      fresh = true;
    }
  }

  auto& s = *rec.session;
  if (fresh) {
    s.await_paper();
    s.on_paper_appeared(transport::get(config.inbox, paper + ".rts"));
  }
  if (s.snapshot().phase == Phase::PasskeyRequired && passkey) s.unlock(*passkey);
  if (s.snapshot().phase == Phase::EnvCheck) {
    envcheck::ProbeOptions probe;
    probe.now = config.clock();
    const auto attestation = envcheck::run_probes(envcheck::simulated_probes(config.environment), probe);
    s.start_exam(attestation, config.clock(), config.frames ? config.frames(who.id) : nullptr);
  } else if (!fresh && s.snapshot().phase != Phase::PasskeyRequired) {
    throw session::SessionError("InvalidTransition", "exam already started");
  }
  return reply(200, to_json(s.snapshot(), config.clock()));
}

Response Service::Impl::answer(const Principal& who, const json& body) {
  if (!body.contains("q") || !body["q"].is_number_integer() || !body.contains("response") ||
      !body["response"].is_string())
    throw HttpError{400, "BadRequest", "expected {q: integer, response: string}"};
  auto rec = find_student(who.id);
  if (!rec) throw session::SessionError("InvalidTransition", "no exam in progress");
  advance(*rec);
  rec->session->answer(body["q"].get<int>(), body["response"].get<std::string>());
  return reply(200, to_json(rec->session->snapshot(), config.clock()));
}

Response Service::Impl::submit(const Principal& who) {
  auto rec = find_student(who.id);
  if (!rec) throw session::SessionError("InvalidTransition", "no exam in progress");
  advance(*rec);
  rec->session->submit();
  advance(*rec);
  return reply(200, to_json(rec->session->snapshot(), config.clock()));
}

Response Service::Impl::materials(const Principal& who) {
  Phase phase = Phase::Idle;
  if (auto rec = find_student(who.id)) {
    advance(*rec);
    phase = rec->session->snapshot().phase;
  }
  json out = json::array();
  if (!config.materials) {
    if (!session::lms_access_allowed(phase)) throw session::SessionError("Denied", "exam in progress");
    return reply(200, {{"materials", out}});
  }
  session::DirectoryMaterials plugin(*config.materials);
  for (const auto& m : session::list_materials(plugin, phase))
    out.push_back({{"title", m.title}, {"locator", m.locator}});
  return reply(200, {{"materials", out}});
}

// --- feed and housekeeping ---------------------------------------------------

std::shared_ptr<FeedCursor> Service::open_feed(const std::string& token, const std::string& return_id,
                                               Response* refusal) {
  auto who = impl_->by_token.find(token);
  if (token.empty() || who == impl_->by_token.end()) {
    *refusal = error_reply(401, "Unauthorized", "missing or unknown token");
    return nullptr;
  }
  if (who->second.role != Role::Lecturer) {
    *refusal = error_reply(403, "Forbidden", "LECTURER only");
    return nullptr;
  }
  try {
    return std::make_shared<FeedCursor>(impl_->feed_log(who->second, return_id));
  } catch (const HttpError& e) {
    *refusal = error_reply(e.status, e.code, e.detail);
  } catch (const Error& e) {
    *refusal = error_reply(status_for(e), e.code(), e.what());
  }
  return nullptr;
}

void Service::tick_all() {
  std::vector<Impl::StudentRecord> recs;
  {
    std::lock_guard lk(impl_->mu);
    for (auto& [id, r] : impl_->students) recs.push_back(r);
  }
  for (auto& r : recs) {
    impl_->advance(r);
  }
}

void Service::wait_for_recording(const std::string& student) {
  if (auto rec = impl_->find_student(student)) rec->session->wait_for_recording();
}

}  // namespace examgrid::service
