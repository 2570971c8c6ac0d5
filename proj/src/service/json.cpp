#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "examgrid/service.hpp"

namespace examgrid::service {

namespace {

template <typename T>
T field(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("field '") + key + "' has the wrong type");
  }
}

json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string_view to_string(Role r) { return r == Role::Lecturer ? "LECTURER" : "STUDENT"; }

std::vector<Principal> parse_accounts(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("accounts: ") + e.what());
  }
  const json& list = doc.is_object() ? doc.value("accounts", json::array()) : doc;
  if (!list.is_array()) throw std::invalid_argument("accounts: expected an array");
  std::vector<Principal> out;
  std::set<std::string> tokens;
  for (const auto& a : list) {
    if (!a.is_object()) throw std::invalid_argument("accounts: expected objects");
    Principal p;
    p.id = field<std::string>(a, "id", "");
    p.token = field<std::string>(a, "token", "");
    const auto role = field<std::string>(a, "role", "");
    if (role == "LECTURER") p.role = Role::Lecturer;
    else if (role == "STUDENT") p.role = Role::Student;
    else throw std::invalid_argument("accounts: role must be LECTURER or STUDENT");
    if (p.id.empty() || p.token.empty()) throw std::invalid_argument("accounts: id and token are required");
    if (p.role == Role::Student && !session::valid_student_id(p.id))
      throw std::invalid_argument("accounts: bad student id '" + p.id + "'");
    if (!tokens.insert(p.token).second) throw std::invalid_argument("accounts: repeated token");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Principal> load_accounts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_accounts(ss.str());
}

json to_json(const vqp::QuestionPaper& p) {
  json qs = json::array();
  for (const auto& q : p.questions) {
    json options = json::array();
    for (const auto& o : q.options) options.push_back({{"label", std::string(1, o.label)}, {"text", o.text}});
    qs.push_back({{"number", q.number},
                  {"kind", std::string(vqp::to_string(q.kind))},
                  {"stem", q.stem},
                  {"options", options},
                  {"key", q.key ? json(std::string(1, *q.key)) : json(nullptr)},
                  {"answer_lines", q.answer_lines},
                  {"model", opt(q.model)},
                  {"response", opt(q.response)}});
  }
  return {{"id", p.id},
          {"title", p.title},
          {"duration_minutes", p.duration_minutes},
          {"variant", std::string(vqp::to_string(p.variant))},
          {"author", p.author},
          {"questions", qs}};
}

vqp::QuestionPaper paper_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("paper must be an object");
  vqp::QuestionPaper p;
  p.id = field<std::string>(j, "id", "");
  p.title = field<std::string>(j, "title", "");
  p.duration_minutes = field<int>(j, "duration_minutes", 0);
  p.author = field<std::string>(j, "author", "");
  const auto variant = vqp::parse_variant(field<std::string>(j, "variant", "DESIGN"));
  if (!variant) throw std::invalid_argument("unknown variant");
  p.variant = *variant;

  const json qs = j.value("questions", json::array());
  if (!qs.is_array()) throw std::invalid_argument("questions must be an array");
  for (const auto& jq : qs) {
    if (!jq.is_object()) throw std::invalid_argument("question must be an object");
    vqp::Question q;
    q.number = field<int>(jq, "number", 0);
    const auto kind = field<std::string>(jq, "kind", "");
    if (kind == "MCQ") q.kind = vqp::QuestionKind::Mcq;
    else if (kind == "STRUCT") q.kind = vqp::QuestionKind::Struct;
    else throw std::invalid_argument("question kind must be MCQ or STRUCT");
    q.stem = field<std::string>(jq, "stem", "");
    for (const auto& jo : jq.value("options", json::array())) {
      const auto label = field<std::string>(jo, "label", "");
      if (label.size() != 1) throw std::invalid_argument("option label must be one letter");
      q.options.push_back({label[0], field<std::string>(jo, "text", "")});
    }
    if (auto key = field<std::string>(jq, "key", ""); !key.empty()) {
      if (key.size() != 1) throw std::invalid_argument("key must be one letter");
      q.key = key[0];
    }
    q.answer_lines = field<int>(jq, "answer_lines", 0);
    if (jq.contains("model") && !jq["model"].is_null()) q.model = field<std::string>(jq, "model", "");
    if (jq.contains("response") && !jq["response"].is_null())
      q.response = field<std::string>(jq, "response", "");
    p.questions.push_back(std::move(q));
  }
  std::sort(p.questions.begin(), p.questions.end(),
            [](const vqp::Question& a, const vqp::Question& b) { return a.number < b.number; });
  return p;
}

json to_json(const gesture::GestureEvent& e) {
  return {{"kind", gesture::to_string(e.kind)},
          {"start_ms", e.start},
          {"end_ms", e.end},
          {"severity", gesture::to_string(e.severity)},
          {"comment", e.comment}};
}

json to_json(const gesture::SessionReport& r) {
  json events = json::array();
  for (const auto& e : r.events) events.push_back(to_json(e));
  return {{"frame_count", r.frame_count}, {"face_frames", r.face_frames}, {"coverage", r.coverage},
          {"mean_energy", r.mean_energy}, {"first_ms", r.first_ms},       {"last_ms", r.last_ms},
          {"events", events}};
}

json to_json(const marking::MarkReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"q", row.number},
                    {"kind", std::string(vqp::to_string(row.kind))},
                    {"status", std::string(marking::to_string(row.status))},
                    {"awarded", row.awarded ? json(*row.awarded) : json(nullptr)},
                    {"max", row.max},
                    {"response", row.response}});
  const auto t = marking::recompute(r.rows);
  return {{"paper", r.paper_id},
          {"rows", rows},
          {"totals",
           {{"auto", t.auto_subtotal},
            {"manual", t.manual_subtotal},
            {"pending", t.pending},
            {"awarded", t.awarded()},
            {"max", t.max}}}};
}

json to_json(const envcheck::AttestationRecord& a) {
  return {{"camera_present", a.camera_present},
          {"camera_active", a.camera_active},
          {"mic_present", a.mic_present},
          {"mic_active", a.mic_active},
          {"recording_tamper", a.recording_tamper},
          {"probe_time", envcheck::format_time(a.probe_time)},
          {"host", a.host},
          {"notes", a.notes}};
}

std::string iso8601(session::TimePoint t) {
  return envcheck::format_time(std::chrono::floor<std::chrono::seconds>(t));
}

json to_json(const session::Snapshot& s, session::TimePoint now) {
  json answers = json::object();
  for (const auto& [q, r] : s.answers) answers[std::to_string(q)] = r;
  json violations = json::array(), warnings = json::array(), events = json::array();
  for (auto v : s.violations) violations.push_back(envcheck::to_string(v));
  for (auto w : s.warnings) warnings.push_back(envcheck::to_string(w));
  for (const auto& e : s.events) events.push_back(to_json(e));
  const auto remaining = s.remaining_seconds(now);
  return {{"student", s.student_id},
          {"phase", std::string(session::to_string(s.phase))},
          {"paper", s.paper ? to_json(*s.paper) : json(nullptr)},
          {"answers", answers},
          {"attempts", s.attempts},
          {"failure", s.failure.empty() ? json(nullptr) : json(s.failure)},
          {"last_error", s.last_error.empty() ? json(nullptr) : json(s.last_error)},
          {"started", s.started ? json(iso8601(*s.started)) : json(nullptr)},
          {"deadline", s.deadline ? json(iso8601(*s.deadline)) : json(nullptr)},
          {"remaining_seconds", remaining ? json(*remaining) : json(nullptr)},
          {"attestation", s.attestation ? to_json(*s.attestation) : json(nullptr)},
          {"violations", violations},
          {"warnings", warnings},
          {"events", events},
          {"recording", s.recording},
          {"return_name", opt(s.return_name)}};
}

json to_json(const session::PublishResult& r) {
  json outcomes = json::array();
  for (const auto& o : r.outcomes)
    outcomes.push_back({{"locator", o.locator}, {"ok", o.ok}, {"error", o.ok ? json(nullptr) : json(o.error)}});
  return {{"name", r.name}, {"outcomes", outcomes}};
}

}  // namespace examgrid::service
