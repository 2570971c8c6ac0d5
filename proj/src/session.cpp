#include "examgrid/session.hpp"

#include <algorithm>
#include <condition_variable>
#include <stdexcept>
#include <thread>

namespace examgrid::session {

namespace {

using rts::EntryType;

bool has_only_exam(const vqp::QuestionPaper& p) { return p.variant == vqp::Variant::Exam; }

// Replays a frame that was pulled early to learn the frame height.
class PeekedSource : public gesture::FrameSource {
 public:
  PeekedSource(gesture::Frame first, gesture::FrameSource& rest) : first_(std::move(first)), rest_(rest) {}
  std::optional<gesture::Frame> next() override {
    if (first_) return std::exchange(first_, std::nullopt);
    return rest_.next();
  }

 private:
  std::optional<gesture::Frame> first_;
  gesture::FrameSource& rest_;
};

}  // namespace

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Idle: return "Idle";
    case Phase::AwaitingPaper: return "AwaitingPaper";
    case Phase::PasskeyRequired: return "PasskeyRequired";
    case Phase::EnvCheck: return "EnvCheck";
    case Phase::InExam: return "InExam";
    case Phase::Submitted: return "Submitted";
    case Phase::Uploaded: return "Uploaded";
    case Phase::Expired: return "Expired";
    case Phase::Failed: return "Failed";
  }
  return "?";
}

std::string_view to_string(Event e) {
  switch (e) {
    case Event::AwaitPaper: return "AwaitPaper";
    case Event::PaperAppeared: return "PaperAppeared";
    case Event::Unlock: return "Unlock";
    case Event::StartExam: return "StartExam";
    case Event::Answer: return "Answer";
    case Event::Submit: return "Submit";
    case Event::Tick: return "Tick";
    case Event::Upload: return "Upload";
    case Event::Fail: return "Fail";
  }
  return "?";
}

bool accepts(Phase phase, Event event) {
  switch (phase) {
    case Phase::Idle: return event == Event::AwaitPaper || event == Event::Fail;
    case Phase::AwaitingPaper: return event == Event::PaperAppeared || event == Event::Fail;
    case Phase::PasskeyRequired: return event == Event::Unlock || event == Event::Fail;
    case Phase::EnvCheck: return event == Event::StartExam || event == Event::Fail;
    case Phase::InExam:
      return event == Event::Answer || event == Event::Submit || event == Event::Tick;
    case Phase::Submitted:
    case Phase::Expired: return event == Event::Upload;
    case Phase::Uploaded:
    case Phase::Failed: return false;
  }
  return false;
}

bool lms_access_allowed(Phase phase) { return phase != Phase::InExam; }

std::string return_name(std::string_view paper_id, std::string_view student_id) {
  return std::string(paper_id) + "." + std::string(student_id) + ".rts";
}

bool valid_student_id(std::string_view id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
           c == '_';
  });
}

std::optional<long long> Snapshot::remaining_seconds(TimePoint now) const {
  if (phase != Phase::InExam || !deadline) return std::nullopt;
  if (now >= *deadline) return 0;
  return std::chrono::floor<std::chrono::seconds>(*deadline - now).count();
}

// --- StudentSession ----------------------------------------------------------

struct StudentSession::Recorder {
  std::unique_ptr<gesture::FrameSource> source;
  std::mutex mu;
  std::condition_variable cv;
  bool done = false;
  std::optional<gesture::RecordResult> result;
  std::string error;  // set when the source failed
  std::jthread thread;  // last: joins before the rest is destroyed
};

StudentSession::StudentSession(std::string student_id, SessionOptions options)
    : student_id_(std::move(student_id)), options_(std::move(options)) {
  if (!valid_student_id(student_id_))
    throw std::invalid_argument("student id must be letters, digits, '-' or '_'");
  state_.student_id = student_id_;
}

StudentSession::~StudentSession() {
  if (recorder_) {
    recorder_->thread.request_stop();
    if (recorder_->thread.joinable()) recorder_->thread.join();
  }
}

Phase StudentSession::phase() const {
  std::lock_guard lk(mu_);
  return state_.phase;
}

void StudentSession::require(Event e) const {
  const Phase p = phase();
  if (!accepts(p, e))
    throw SessionError("InvalidTransition",
                       std::string(to_string(e)) + " not allowed in " + std::string(to_string(p)));
}

void StudentSession::set_phase(Phase p) {
  std::lock_guard lk(mu_);
  state_.phase = p;
}

void StudentSession::emit(const gesture::GestureEvent& ev) {
  {
    std::lock_guard lk(mu_);
    state_.events.push_back(ev);
  }
  if (options_.on_event) options_.on_event(ev);
}

void StudentSession::await_paper() {
  std::lock_guard op(op_mu_);
  require(Event::AwaitPaper);
  set_phase(Phase::AwaitingPaper);
}

void StudentSession::on_paper_appeared(ByteView container) {
  std::lock_guard op(op_mu_);
  require(Event::PaperAppeared);

  auto failed = [&](std::string reason) {
    std::lock_guard lk(mu_);
    state_.phase = Phase::Failed;
    state_.failure = std::move(reason);
  };

  std::vector<rts::Entry> entries;
  try {
    entries = rts::unpack(container, std::nullopt);
  } catch (const rts::RtsError& e) {
    if (e.code() == "NeedPasskey") {
      container_.assign(container.begin(), container.end());
      set_phase(Phase::PasskeyRequired);
    } else {
      failed("BadContainer");
    }
    return;
  }

  const auto* vqp_entry = rts::find(entries, EntryType::Vqp);
  if (!vqp_entry) return failed("BadContainer");
  vqp::QuestionPaper paper;
  try {
    paper = vqp::parse_vqp(examgrid::to_string(vqp_entry->data));
  } catch (const Error&) {
    return failed("BadContainer");
  }
  if (!has_only_exam(paper)) return failed("WrongVariant");

  container_.assign(container.begin(), container.end());
  std::lock_guard lk(mu_);
  state_.paper = std::move(paper);
  state_.phase = Phase::EnvCheck;
}

bool StudentSession::unlock(std::string_view passkey) {
  std::lock_guard op(op_mu_);
  require(Event::Unlock);

  std::vector<rts::Entry> entries;
  try {
    entries = rts::unpack(container_, std::string(passkey));
  } catch (const rts::RtsError& e) {
    if (e.code() == "TagMismatch" || e.code() == "EmptyPasskey") {
      std::lock_guard lk(mu_);
      ++state_.attempts;
      return false;
    }
    std::lock_guard lk(mu_);
    state_.phase = Phase::Failed;
    state_.failure = "BadContainer";
    return false;
  }

  std::lock_guard lk(mu_);
  const auto* vqp_entry = rts::find(entries, EntryType::Vqp);
  std::optional<vqp::QuestionPaper> paper;
  if (vqp_entry) {
    try {
      paper = vqp::parse_vqp(examgrid::to_string(vqp_entry->data));
    } catch (const Error&) {
    }
  }
  if (!paper) {
    state_.phase = Phase::Failed;
    state_.failure = "BadContainer";
    return false;
  }
  if (!has_only_exam(*paper)) {
    state_.phase = Phase::Failed;
    state_.failure = "WrongVariant";
    return false;
  }
  passkey_ = std::string(passkey);
  state_.paper = std::move(paper);
  state_.phase = Phase::EnvCheck;
  return true;
}

bool StudentSession::start_exam(const envcheck::AttestationRecord& attestation, TimePoint now,
                                std::unique_ptr<gesture::FrameSource> frames) {
  std::lock_guard op(op_mu_);
  require(Event::StartExam);

  const auto policy = envcheck::check_policy(attestation);
  {
    std::lock_guard lk(mu_);
    state_.attestation = attestation;
    state_.violations = policy.violations;
    state_.warnings = policy.warnings;
    if (!policy.ok()) return false;
    state_.started = now;
    state_.deadline = now + std::chrono::minutes(state_.paper->duration_minutes);
    state_.phase = Phase::InExam;
    state_.recording = frames != nullptr;
  }
  if (!frames) return true;

  recorder_ = std::make_unique<Recorder>();
  recorder_->source = std::move(frames);
  auto* rec = recorder_.get();
  rec->thread = std::jthread([this, rec](std::stop_token stop) {
    gesture::AnalysisOptions analysis = options_.analysis;
    analysis.on_event = [this](const gesture::GestureEvent& ev) { emit(ev); };
    std::optional<gesture::RecordResult> result;
    std::string error;
    try {
      auto first = rec->source->next();
      if (!first) {
        result = gesture::RecordResult{gesture::FramesetWriter().finish(), {}};
      } else {
        auto recognizers = options_.recognizers(first->height);
        PeekedSource src(std::move(*first), *rec->source);
        result = gesture::record_session(src, std::move(analysis), std::move(recognizers), stop);
      }
    } catch (const gesture::RecordingFailed& e) {
      result = e.partial();
      error = e.what();
    } catch (const std::exception& e) {
      result = gesture::RecordResult{gesture::FramesetWriter().finish(), {}};
      error = e.what();
    }
    {
      std::lock_guard lk(mu_);
      state_.recording = false;
    }
    std::lock_guard lk(rec->mu);
    rec->result = std::move(result);
    rec->error = std::move(error);
    rec->done = true;
    rec->cv.notify_all();
  });
  return true;
}

void StudentSession::answer(int question, std::string response) {
  std::lock_guard op(op_mu_);
  require(Event::Answer);
  std::lock_guard lk(mu_);
  if (response.empty()) {
    if (!state_.paper->find(question))
      throw vqp::PaperError("UnknownQuestion", "no question " + std::to_string(question));
    state_.answers.erase(question);
    return;
  }
  vqp::check_response(*state_.paper, question, response);
  state_.answers[question] = std::move(response);
}

void StudentSession::submit() {
  std::lock_guard op(op_mu_);
  require(Event::Submit);
  finish_exam(Phase::Submitted);
}

bool StudentSession::tick(TimePoint now) {
  std::lock_guard op(op_mu_);
  require(Event::Tick);
  {
    std::lock_guard lk(mu_);
    if (now < *state_.deadline) return false;
  }
  finish_exam(Phase::Expired);
  return true;
}

void StudentSession::finish_exam(Phase to) {
  std::optional<gesture::RecordResult> recorded;
  std::string recording_error;
  if (recorder_) {
    recorder_->thread.request_stop();
    if (recorder_->thread.joinable()) recorder_->thread.join();
    recorded = std::move(recorder_->result);
    recording_error = recorder_->error;
  }

  std::lock_guard lk(mu_);
  auto attestation = *state_.attestation;
  if (!recording_error.empty()) {
    std::replace(recording_error.begin(), recording_error.end(), '\n', ' ');
    attestation.recording_tamper = true;
    attestation.notes.push_back("recording stopped early: " + recording_error);
  }
  state_.attestation = attestation;

  const Bytes frameset = recorded ? recorded->frameset : gesture::FramesetWriter().finish();
  const auto answered = vqp::merge_answers(*state_.paper, state_.answers);
  std::vector<rts::Entry> entries;
  entries.push_back(rts::make_entry(std::string(kPaperEntry), EntryType::Vqp,
                                    to_bytes(vqp::serialize_vqp(answered))));
  entries.push_back(rts::make_entry(std::string(kMediaEntry), EntryType::Media, frameset));
  entries.push_back(rts::make_entry(std::string(kEnvEntry), EntryType::EnvRec,
                                    to_bytes(envcheck::serialize_envrec(attestation))));
  return_ = rts::pack(entries, passkey_);
  state_.return_name = return_name(state_.paper->id, student_id_);
  state_.recording = false;
  state_.phase = to;
}

bool StudentSession::upload_return(const transport::Locator& to) {
  std::lock_guard op(op_mu_);
  require(Event::Upload);
  std::string name;
  {
    std::lock_guard lk(mu_);
    name = *state_.return_name;
  }
  try {
    transport::put(to, name, return_);
  } catch (const transport::TransportError& e) {
    std::lock_guard lk(mu_);
    state_.last_error = e.what();
    return false;
  }
  std::lock_guard lk(mu_);
  state_.last_error.clear();
  state_.phase = Phase::Uploaded;
  return true;
}

void StudentSession::fail(std::string reason) {
  std::lock_guard op(op_mu_);
  require(Event::Fail);
  std::lock_guard lk(mu_);
  state_.phase = Phase::Failed;
  state_.failure = std::move(reason);
}

void StudentSession::wait_for_recording() {
  Recorder* rec = nullptr;
  {
    std::lock_guard op(op_mu_);
    rec = recorder_.get();
  }
  if (!rec) return;
  std::unique_lock lk(rec->mu);
  rec->cv.wait(lk, [&] { return rec->done; });
}

Snapshot StudentSession::snapshot() const {
  std::lock_guard lk(mu_);
  return state_;
}

Bytes StudentSession::return_container() const {
  std::lock_guard lk(mu_);
  if (!state_.return_name) throw SessionError("NoReturn", "no return before submission or expiry");
  return return_;
}

// --- LecturerWorkflow --------------------------------------------------------

LecturerWorkflow::LecturerWorkflow(vqp::QuestionPaper design, std::optional<std::string> passkey)
    : design_(std::move(design)), passkey_(std::move(passkey)) {
  if (design_.variant != vqp::Variant::Design)
    throw vqp::PaperError("WrongVariant", "publishing needs the DESIGN paper");
  if (passkey_ && passkey_->empty()) throw rts::RtsError("EmptyPasskey", "");
}

Bytes LecturerWorkflow::exam_container() const {
  return rts::pack({rts::make_entry(std::string(kPaperEntry), EntryType::Vqp,
                                    to_bytes(vqp::serialize_vqp(vqp::to_exam(design_))))},
                   passkey_);
}

std::string LecturerWorkflow::exam_name() const { return design_.id + ".rts"; }

PublishResult LecturerWorkflow::publish(const std::vector<transport::Locator>& to) const {
  PublishResult out;
  out.name = exam_name();
  const Bytes blob = exam_container();
  for (const auto& loc : to) {
    PublishOutcome o;
    o.locator = loc.redacted();
    try {
      transport::put(loc, out.name, blob);
      o.ok = true;
    } catch (const transport::TransportError& e) {
      o.error = e.what();
    }
    out.outcomes.push_back(std::move(o));
  }
  return out;
}

std::optional<CollectedReturn> LecturerWorkflow::ingest(const std::string& name, ByteView blob,
                                                        const std::string& source) {
  auto issue = [&](std::string code, std::string detail) -> std::optional<CollectedReturn> {
    std::lock_guard lk(mu_);
    issues_.push_back({name, source, std::move(code), std::move(detail)});
    return std::nullopt;
  };

  const std::string prefix = design_.id + ".", suffix = ".rts";
  if (name.size() <= prefix.size() + suffix.size() || !name.starts_with(prefix) ||
      !name.ends_with(suffix))
    return issue("BadName", "expected " + return_name(design_.id, "<student>"));
  std::string student = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
  if (!valid_student_id(student)) return issue("BadName", "bad student id '" + student + "'");

  CollectedReturn r;
  r.student_id = student;
  r.name = name;
  r.source = source;
  try {
    r.entries = rts::unpack(blob, passkey_);
  } catch (const rts::RtsError& e) {
    return issue(e.code(), e.what());
  }
  const auto* paper = rts::find(r.entries, EntryType::Vqp);
  if (!paper || !rts::find(r.entries, EntryType::Media) || !rts::find(r.entries, EntryType::EnvRec))
    return issue("BadReturn", "expected VQP, MEDIA and ENVREC entries");
  try {
    r.answered = vqp::parse_vqp(examgrid::to_string(paper->data));
  } catch (const Error& e) {
    return issue(e.code(), e.what());
  }
  if (r.answered.variant != vqp::Variant::Answered)
    return issue("WrongVariant", "return paper is " + std::string(vqp::to_string(r.answered.variant)));
  if (r.answered.id != design_.id)
    return issue("PaperMismatch", "paper id '" + r.answered.id + "'");

  std::lock_guard lk(mu_);
  auto dup = std::find_if(returns_.begin(), returns_.end(),
                          [&](const CollectedReturn& c) { return c.student_id == student; });
  if (dup != returns_.end()) {
    issues_.push_back({name, source, "Duplicate", "student " + student + " already returned"});
    return std::nullopt;
  }
  returns_.push_back(r);
  return r;
}

std::vector<CollectedReturn> LecturerWorkflow::collect(const transport::Locator& from) {
  const std::string source = from.redacted();
  const std::string pattern = design_.id + ".*.rts";
  std::vector<CollectedReturn> accepted;
  for (const auto& name : transport::list(from)) {
    if (!transport::glob_match(pattern, name)) continue;
    {
      std::lock_guard lk(mu_);
      if (seen_.count({source, name})) continue;
    }
    Bytes blob;
    try {
      blob = transport::get(from, name);
    } catch (const transport::TransportError& e) {
      std::lock_guard lk(mu_);
      issues_.push_back({name, source, e.code(), e.what()});
      continue;  // not marked seen; retried next time
    }
    {
      std::lock_guard lk(mu_);
      seen_.insert({source, name});
    }
    if (auto r = ingest(name, blob, source)) accepted.push_back(std::move(*r));
  }
  return accepted;
}

std::unique_ptr<transport::Watcher> LecturerWorkflow::watch_returns(
    const transport::Locator& from, std::function<void(const CollectedReturn&)> on_return,
    std::chrono::milliseconds interval) {
  const std::string source = from.redacted();
  auto sink = [this, from, source, on_return = std::move(on_return)](const transport::WatchEvent& ev) {
    if (ev.kind == transport::WatchEvent::Kind::Degraded) {
      std::lock_guard lk(mu_);
      issues_.push_back({"", source, "Degraded", ev.detail});
      return;
    }
    {
      std::lock_guard lk(mu_);
      if (!seen_.insert({source, ev.name}).second) return;
    }
    Bytes blob;
    try {
      blob = transport::get(from, ev.name);
    } catch (const transport::TransportError& e) {
      std::lock_guard lk(mu_);
      issues_.push_back({ev.name, source, e.code(), e.what()});
      return;
    }
    if (auto r = ingest(ev.name, blob, source); r && on_return) on_return(*r);
  };
  return std::make_unique<transport::Watcher>(from, design_.id + ".*.rts", interval, std::move(sink));
}

std::vector<CollectedReturn> LecturerWorkflow::returns() const {
  std::lock_guard lk(mu_);
  return returns_;
}

std::vector<CollectIssue> LecturerWorkflow::issues() const {
  std::lock_guard lk(mu_);
  return issues_;
}

std::optional<CollectedReturn> LecturerWorkflow::find_return(const std::string& student_id) const {
  std::lock_guard lk(mu_);
  for (const auto& r : returns_)
    if (r.student_id == student_id) return r;
  return std::nullopt;
}

// --- materials ---------------------------------------------------------------

DirectoryMaterials::DirectoryMaterials(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::vector<Material> DirectoryMaterials::list_materials() {
  std::vector<Material> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir_, ec)) return out;
  const std::string loc = transport::Locator::dir(dir_).to_string();
  for (const auto& e : std::filesystem::directory_iterator(dir_, ec))
    if (e.is_regular_file()) out.push_back({e.path().filename().string(), loc});
  std::sort(out.begin(), out.end(), [](const Material& a, const Material& b) { return a.title < b.title; });
  return out;
}

std::vector<Material> list_materials(MaterialsPlugin& plugin, Phase phase) {
  if (!lms_access_allowed(phase)) throw SessionError("Denied", "materials are closed during the exam");
  return plugin.list_materials();
}

}  // namespace examgrid::session
