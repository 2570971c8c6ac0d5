#pragma once

// Student exam lifecycle and the lecturer's publish/collect workflow.
//
//   Idle -> AwaitingPaper -> [PasskeyRequired ->] EnvCheck -> InExam
//        -> Submitted | Expired -> Uploaded
//   Idle, AwaitingPaper, PasskeyRequired, EnvCheck -> Failed
//
// Any other (state, event) pair throws SessionError InvalidTransition.

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "examgrid/bytes.hpp"
#include "examgrid/envcheck.hpp"
#include "examgrid/error.hpp"
#include "examgrid/gesture/record.hpp"
#include "examgrid/rts.hpp"
#include "examgrid/transport.hpp"
#include "examgrid/vqp.hpp"

namespace examgrid::session {

using TimePoint = std::chrono::system_clock::time_point;

// InvalidTransition, Denied, NoReturn.
class SessionError : public Error {
 public:
  using Error::Error;
};

enum class Phase {
  Idle,
  AwaitingPaper,
  PasskeyRequired,
  EnvCheck,
  InExam,
  Submitted,
  Uploaded,
  Expired,
  Failed,
};

enum class Event { AwaitPaper, PaperAppeared, Unlock, StartExam, Answer, Submit, Tick, Upload, Fail };

std::string_view to_string(Phase p);
std::string_view to_string(Event e);
inline constexpr Phase kAllPhases[] = {Phase::Idle,      Phase::AwaitingPaper, Phase::PasskeyRequired,
                                       Phase::EnvCheck,  Phase::InExam,        Phase::Submitted,
                                       Phase::Uploaded,  Phase::Expired,       Phase::Failed};
inline constexpr Event kAllEvents[] = {Event::AwaitPaper, Event::PaperAppeared, Event::Unlock,
                                       Event::StartExam,  Event::Answer,        Event::Submit,
                                       Event::Tick,       Event::Upload,        Event::Fail};

// Whether the event is accepted at all in that phase (its outcome may still
// keep the phase, e.g. a wrong passkey).
bool accepts(Phase phase, Event event);

bool lms_access_allowed(Phase phase);

// `<paper-id>.<student-id>.rts`
std::string return_name(std::string_view paper_id, std::string_view student_id);
// Letters, digits, '-' and '_'.
bool valid_student_id(std::string_view id);

inline constexpr std::string_view kPaperEntry = "paper.vqp";
inline constexpr std::string_view kMediaEntry = "recording.frs";
inline constexpr std::string_view kEnvEntry = "environment.envrec";

struct Snapshot {
  Phase phase = Phase::Idle;
  std::string student_id;
  std::optional<vqp::QuestionPaper> paper;  // EXAM variant once decoded
  vqp::Responses answers;
  std::optional<TimePoint> started;
  std::optional<TimePoint> deadline;
  int attempts = 0;  // wrong passkeys
  std::string failure;  // reason code in Failed
  std::string last_error;  // last upload error, code: detail
  std::optional<envcheck::AttestationRecord> attestation;
  std::vector<envcheck::Violation> violations;
  std::vector<envcheck::Warning> warnings;
  std::vector<gesture::GestureEvent> events;  // emitted so far
  bool recording = false;
  std::optional<std::string> return_name;

  // Whole seconds to the deadline, floored at 0; nullopt outside an exam.
  std::optional<long long> remaining_seconds(TimePoint now) const;
};

struct SessionOptions {
  gesture::AnalysisOptions analysis;
  // Called with each gesture event as it is detected.
  std::function<void(const gesture::GestureEvent&)> on_event;
  // Builds recognizers once the first frame's height is known.
  std::function<gesture::Recognizers(int frame_height)> recognizers = gesture::default_recognizers;
};

// One student's exam. Mutations are serialized by an internal lock;
// snapshot() returns an immutable copy. A frame source handed to
// start_exam() is recorded on a background thread until submit, expiry or
// exhaustion.
class StudentSession {
 public:
  explicit StudentSession(std::string student_id, SessionOptions options = {});
  ~StudentSession();
  StudentSession(const StudentSession&) = delete;
  StudentSession& operator=(const StudentSession&) = delete;

  void await_paper();
  // Encrypted -> PasskeyRequired; plain EXAM paper -> EnvCheck; anything
  // unreadable -> Failed(BadContainer), non-EXAM paper -> Failed(WrongVariant).
  void on_paper_appeared(ByteView container);
  // True on success. A wrong passkey counts an attempt and keeps the phase.
  bool unlock(std::string_view passkey);
  // True when the exam started; otherwise the violations are exposed.
  bool start_exam(const envcheck::AttestationRecord& attestation, TimePoint now,
                  std::unique_ptr<gesture::FrameSource> frames = nullptr);
  // Empty response clears the answer. Throws vqp::PaperError on a bad
  // question or option.
  void answer(int question, std::string response);
  void submit();
  // True when the deadline has passed and the session expired.
  bool tick(TimePoint now);
  // True on success; transport errors are kept in last_error.
  bool upload_return(const transport::Locator& to);
  void fail(std::string reason);

  // Blocks until the frame source is exhausted (or recording stopped).
  void wait_for_recording();

  Snapshot snapshot() const;
  const std::string& student_id() const { return student_id_; }
  // Throws SessionError NoReturn before submission or expiry.
  Bytes return_container() const;

 private:
  struct Recorder;

  Phase phase() const;
  void require(Event e) const;
  void set_phase(Phase p);
  void finish_exam(Phase to);  // joins recording, builds the return
  void emit(const gesture::GestureEvent& ev);

  const std::string student_id_;
  SessionOptions options_;
  std::mutex op_mu_;  // serializes mutators; never held by the recorder
  mutable std::mutex mu_;  // guards state_
  Snapshot state_;
  Bytes container_;  // the paper as received
  std::optional<std::string> passkey_;
  Bytes return_;
  std::unique_ptr<Recorder> recorder_;
};

// --- lecturer side ----------------------------------------------------------

struct PublishOutcome {
  std::string locator;  // redacted
  bool ok = false;
  std::string error;
};

struct PublishResult {
  std::string name;
  std::vector<PublishOutcome> outcomes;
};

struct CollectedReturn {
  std::string student_id;
  std::string name;
  std::string source;  // redacted locator it came from
  std::vector<rts::Entry> entries;
  vqp::QuestionPaper answered;
};

struct CollectIssue {
  std::string name;
  std::string source;
  std::string code;  // TagMismatch, PaperMismatch, Duplicate, ...
  std::string detail;
};

class LecturerWorkflow {
 public:
  // Throws vqp::PaperError WrongVariant unless design is a DESIGN paper.
  LecturerWorkflow(vqp::QuestionPaper design, std::optional<std::string> passkey);

  const vqp::QuestionPaper& design() const { return design_; }
  const std::optional<std::string>& passkey() const { return passkey_; }

  // The distributable container: EXAM paper, packed with the passkey.
  Bytes exam_container() const;
  std::string exam_name() const;  // <paper-id>.rts

  // Puts the exam container on every locator; failures are reported per
  // locator, not thrown.
  PublishResult publish(const std::vector<transport::Locator>& to) const;

  // Fetches and verifies every `<paper-id>.*.rts` return not seen before
  // from this locator. Returns the newly accepted ones.
  std::vector<CollectedReturn> collect(const transport::Locator& from);
  // Verifies one blob as if it had arrived under `name`.
  std::optional<CollectedReturn> ingest(const std::string& name, ByteView blob,
                                        const std::string& source = "");

  // Polls the locator and ingests returns as they appear.
  std::unique_ptr<transport::Watcher> watch_returns(
      const transport::Locator& from, std::function<void(const CollectedReturn&)> on_return,
      std::chrono::milliseconds interval = transport::Watcher::kDefaultInterval);

  std::vector<CollectedReturn> returns() const;
  std::vector<CollectIssue> issues() const;
  std::optional<CollectedReturn> find_return(const std::string& student_id) const;

 private:
  vqp::QuestionPaper design_;
  std::optional<std::string> passkey_;
  mutable std::mutex mu_;
  std::vector<CollectedReturn> returns_;
  std::vector<CollectIssue> issues_;
  std::set<std::pair<std::string, std::string>> seen_;  // (source, name)
};

// --- LMS materials ----------------------------------------------------------

struct Material {
  std::string title;
  std::string locator;

  bool operator==(const Material&) const = default;
};

class MaterialsPlugin {
 public:
  virtual ~MaterialsPlugin() = default;
  virtual std::string name() const = 0;
  virtual std::vector<Material> list_materials() = 0;
};

// Every regular file in a directory, titled by file name, located by the
// directory's dir: locator.
class DirectoryMaterials : public MaterialsPlugin {
 public:
  explicit DirectoryMaterials(std::filesystem::path dir);
  std::string name() const override { return "directory"; }
  std::vector<Material> list_materials() override;

 private:
  std::filesystem::path dir_;
};

// Throws SessionError Denied while an exam is active.
std::vector<Material> list_materials(MaterialsPlugin& plugin, Phase phase);

}  // namespace examgrid::session
