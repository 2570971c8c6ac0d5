#include "doctest.h"

#include <algorithm>
#include <condition_variable>
#include <map>
#include <set>

#include "examgrid/session.hpp"
#include "generators.hpp"

using namespace examgrid;
using namespace examgrid::session;
using namespace std::chrono_literals;
using testsupport::TempDir;

namespace {

std::string error_code(auto&& fn) {
  try {
    fn();
  } catch (const examgrid::Error& e) {
    return e.code();
  }
  return "none";
}

const char* kDesign = R"(%VQP 1
@id: chem-2
@title: Chemistry
@duration: 30
@variant: DESIGN
@author: R. Boyle

#Q 1 MCQ
?: Symbol for sodium?
A) S
B) Na
C) So
!key: B

#Q 2 MCQ
?: Noble gas?
A) Neon
B) Nitrogen
!key: A

#Q 3 STRUCT
?: Balance H2 + O2.
lines: 3
!model: 2H2 + O2 -> 2H2O
)";

vqp::QuestionPaper design_paper() { return vqp::parse_vqp(kDesign); }

const TimePoint kStart = std::chrono::sys_days{std::chrono::year{2026} / 3 / 1} + 9h;

envcheck::AttestationRecord clean() {
  envcheck::AttestationRecord r;
  r.camera_present = r.camera_active = r.mic_present = r.mic_active = true;
  r.host = "desk-07";
  r.probe_time = std::chrono::floor<std::chrono::seconds>(kStart);
  return r;
}

Bytes exam_blob(std::optional<std::string> passkey = "k3y") {
  return LecturerWorkflow(design_paper(), std::move(passkey)).exam_container();
}

// Drives a fresh session into `target` along the normal path.
std::unique_ptr<StudentSession> session_in(Phase target, std::string student = "s1") {
  auto s = std::make_unique<StudentSession>(student);
  auto at = [&] { return s->snapshot().phase == target; };
  if (target == Phase::Failed) {
    s->fail("test");
    return s;
  }
  if (at()) return s;
  s->await_paper();
  if (at()) return s;
  s->on_paper_appeared(exam_blob());
  if (at()) return s;
  REQUIRE(s->unlock("k3y"));
  if (at()) return s;
  REQUIRE(s->start_exam(clean(), kStart));
  if (at()) return s;
  if (target == Phase::Expired) {
    REQUIRE(s->tick(kStart + 31min));
    return s;
  }
  s->submit();
  if (at()) return s;
  TempDir tmp;
  REQUIRE(s->upload_return(transport::Locator::dir(tmp.path())));
  REQUIRE(at());
  return s;
}

// Fires `e` with arguments that would succeed if the phase accepts it.
void fire(StudentSession& s, Event e, const transport::Locator& box) {
  switch (e) {
    case Event::AwaitPaper: s.await_paper(); break;
    case Event::PaperAppeared: s.on_paper_appeared(exam_blob()); break;
    case Event::Unlock: s.unlock("k3y"); break;
    case Event::StartExam: s.start_exam(clean(), kStart); break;
    case Event::Answer: s.answer(1, "B"); break;
    case Event::Submit: s.submit(); break;
    case Event::Tick: s.tick(kStart + 31min); break;
    case Event::Upload: s.upload_return(box); break;
    case Event::Fail: s.fail("forced"); break;
  }
}

std::map<std::string, Bytes> unpack_named(ByteView blob, const std::optional<std::string>& key) {
  std::map<std::string, Bytes> out;
  for (auto& e : rts::unpack(blob, key)) out[e.name] = e.data;
  return out;
}

}  // namespace

TEST_CASE("every (phase, event) pair follows the transition graph") {
  // Written out from the lifecycle, independently of accepts().
  const std::map<std::pair<Phase, Event>, Phase> graph = {
      {{Phase::Idle, Event::AwaitPaper}, Phase::AwaitingPaper},
      {{Phase::Idle, Event::Fail}, Phase::Failed},
      {{Phase::AwaitingPaper, Event::PaperAppeared}, Phase::PasskeyRequired},
      {{Phase::AwaitingPaper, Event::Fail}, Phase::Failed},
      {{Phase::PasskeyRequired, Event::Unlock}, Phase::EnvCheck},
      {{Phase::PasskeyRequired, Event::Fail}, Phase::Failed},
      {{Phase::EnvCheck, Event::StartExam}, Phase::InExam},
      {{Phase::EnvCheck, Event::Fail}, Phase::Failed},
      {{Phase::InExam, Event::Answer}, Phase::InExam},
      {{Phase::InExam, Event::Submit}, Phase::Submitted},
      {{Phase::InExam, Event::Tick}, Phase::Expired},
      {{Phase::Submitted, Event::Upload}, Phase::Uploaded},
      {{Phase::Expired, Event::Upload}, Phase::Uploaded},
  };
  TempDir tmp;
  const auto box = transport::Locator::dir(tmp.path());
  int pairs = 0;
  for (Phase p : kAllPhases) {
    for (Event e : kAllEvents) {
      CAPTURE(to_string(p));
      CAPTURE(to_string(e));
      ++pairs;
      auto s = session_in(p);
      REQUIRE(s->snapshot().phase == p);
      const auto it = graph.find({p, e});
      CHECK(accepts(p, e) == (it != graph.end()));
      if (it == graph.end()) {
        CHECK(error_code([&] { fire(*s, e, box); }) == "InvalidTransition");
        CHECK(s->snapshot().phase == p);
      } else {
        CHECK(error_code([&] { fire(*s, e, box); }) == "none");
        CHECK(s->snapshot().phase == it->second);
      }
    }
  }
  CHECK(pairs == 81);
}

TEST_CASE("paper arrival") {
  auto enc = session_in(Phase::AwaitingPaper);
  enc->on_paper_appeared(exam_blob());
  CHECK(enc->snapshot().phase == Phase::PasskeyRequired);
  CHECK_FALSE(enc->snapshot().paper.has_value());

  auto plain = session_in(Phase::AwaitingPaper);
  plain->on_paper_appeared(exam_blob(std::nullopt));
  const auto snap = plain->snapshot();
  CHECK(snap.phase == Phase::EnvCheck);
  REQUIRE(snap.paper.has_value());
  CHECK(snap.paper->variant == vqp::Variant::Exam);
  CHECK_FALSE(snap.paper->questions[0].key.has_value());

  auto cut = session_in(Phase::AwaitingPaper);
  auto blob = exam_blob();
  blob.resize(20);
  cut->on_paper_appeared(blob);
  CHECK(cut->snapshot().phase == Phase::Failed);
  CHECK(cut->snapshot().failure == "BadContainer");

  auto garbage = session_in(Phase::AwaitingPaper);
  garbage->on_paper_appeared(to_bytes("not a container"));
  CHECK(garbage->snapshot().failure == "BadContainer");
}

TEST_CASE("only EXAM papers may be taken") {
  auto answered = vqp::merge_answers(vqp::to_exam(design_paper()), {});
  const auto entry = rts::make_entry(std::string(kPaperEntry), rts::EntryType::Vqp,
                                     to_bytes(vqp::serialize_vqp(answered)));
  auto enc = session_in(Phase::AwaitingPaper);
  enc->on_paper_appeared(rts::pack({entry}, std::string("k3y")));
  CHECK_FALSE(enc->unlock("k3y"));
  CHECK(enc->snapshot().phase == Phase::Failed);
  CHECK(enc->snapshot().failure == "WrongVariant");

  auto plain = session_in(Phase::AwaitingPaper);
  plain->on_paper_appeared(rts::pack({entry}, std::nullopt));
  CHECK(plain->snapshot().failure == "WrongVariant");

  auto design = session_in(Phase::AwaitingPaper);
  design->on_paper_appeared(rts::pack({rts::make_entry("p.vqp", rts::EntryType::Vqp, to_bytes(kDesign))},
                                      std::nullopt));
  CHECK(design->snapshot().failure == "WrongVariant");
}

TEST_CASE("wrong passkeys count attempts without lockout") {
  auto s = session_in(Phase::PasskeyRequired);
  for (int i = 0; i < 3; ++i) CHECK_FALSE(s->unlock("nope"));
  CHECK(s->snapshot().phase == Phase::PasskeyRequired);
  CHECK(s->snapshot().attempts == 3);
  CHECK_FALSE(s->unlock(""));
  CHECK(s->snapshot().attempts == 4);
  CHECK(s->unlock("k3y"));
  CHECK(s->snapshot().phase == Phase::EnvCheck);
  CHECK(s->snapshot().paper->id == "chem-2");
}

TEST_CASE("environment check gates the start") {
  auto s = session_in(Phase::EnvCheck);
  auto bad = clean();
  bad.camera_active = false;
  CHECK_FALSE(s->start_exam(bad, kStart));
  auto snap = s->snapshot();
  CHECK(snap.phase == Phase::EnvCheck);
  CHECK(snap.violations == std::vector<envcheck::Violation>{envcheck::Violation::CameraInactive});
  CHECK_FALSE(snap.deadline.has_value());

  auto quiet = clean();
  quiet.mic_active = false;
  CHECK(s->start_exam(quiet, kStart));
  snap = s->snapshot();
  CHECK(snap.phase == Phase::InExam);
  CHECK(snap.warnings == std::vector<envcheck::Warning>{envcheck::Warning::MicInactive});
  CHECK(snap.deadline == kStart + 30min);
  CHECK(snap.started == kStart);
  CHECK(error_code([&] { s->start_exam(clean(), kStart + 1min); }) == "InvalidTransition");
  CHECK(s->snapshot().deadline == kStart + 30min);
}

TEST_CASE("answers, remaining time and deadline") {
  auto s = session_in(Phase::InExam);
  s->answer(1, "B");
  s->answer(1, "C");
  s->answer(3, "2H2 + O2 -> 2H2O");
  CHECK(s->snapshot().answers == vqp::Responses{{1, "C"}, {3, "2H2 + O2 -> 2H2O"}});
  s->answer(1, "");
  CHECK(s->snapshot().answers == vqp::Responses{{3, "2H2 + O2 -> 2H2O"}});
  CHECK(error_code([&] { s->answer(2, "Z"); }) == "InvalidOption");
  CHECK(error_code([&] { s->answer(9, "A"); }) == "UnknownQuestion");
  CHECK(error_code([&] { s->answer(9, ""); }) == "UnknownQuestion");

  const auto snap = s->snapshot();
  CHECK(snap.remaining_seconds(kStart + 10s) == 1790);
  CHECK(snap.remaining_seconds(kStart + 10s + 500ms) == 1789);
  CHECK(snap.remaining_seconds(kStart + 2h) == 0);
  CHECK(StudentSession("x").snapshot().remaining_seconds(kStart) == std::nullopt);

  CHECK_FALSE(s->tick(kStart + 29min + 59s));
  CHECK(s->snapshot().phase == Phase::InExam);
  CHECK(s->snapshot().deadline == kStart + 30min);
  CHECK(error_code([&] { s->return_container(); }) == "NoReturn");
}

TEST_CASE("answer then submit puts the response in the returned paper") {
  auto s = session_in(Phase::InExam, "ann");
  s->answer(1, "B");
  s->submit();
  const auto snap = s->snapshot();
  CHECK(snap.phase == Phase::Submitted);
  CHECK(snap.return_name == "chem-2.ann.rts");
  const auto entries = rts::unpack(s->return_container(), std::string("k3y"));
  REQUIRE(entries.size() == 3);
  std::multiset<rts::EntryType> types;
  for (const auto& e : entries) types.insert(e.type);
  CHECK(types == std::multiset<rts::EntryType>{rts::EntryType::Vqp, rts::EntryType::Media,
                                               rts::EntryType::EnvRec});
  const auto paper = vqp::parse_vqp(examgrid::to_string(rts::find(entries, rts::EntryType::Vqp)->data));
  CHECK(paper.variant == vqp::Variant::Answered);
  CHECK(paper.find(1)->response == "B");
  CHECK(error_code([&] { s->answer(2, "A"); }) == "InvalidTransition");
}

TEST_CASE("expiry at deadline + 1 s returns partial answers") {
  auto s = session_in(Phase::InExam);
  s->answer(2, "A");
  CHECK(s->tick(kStart + 30min + 1s));
  CHECK(s->snapshot().phase == Phase::Expired);
  const auto named = unpack_named(s->return_container(), "k3y");
  const auto paper = vqp::parse_vqp(examgrid::to_string(named.at(std::string(kPaperEntry))));
  CHECK_FALSE(paper.find(1)->response.has_value());
  CHECK(paper.find(2)->response == "A");
  CHECK_FALSE(paper.find(3)->response.has_value());
  CHECK(error_code([&] { s->answer(1, "B"); }) == "InvalidTransition");

  auto exact = session_in(Phase::InExam);
  CHECK(exact->tick(kStart + 30min));
}

TEST_CASE("plain exam gives a plain return") {
  auto s = std::make_unique<StudentSession>("p1");
  s->await_paper();
  s->on_paper_appeared(exam_blob(std::nullopt));
  REQUIRE(s->start_exam(clean(), kStart));
  s->submit();
  CHECK_FALSE(rts::is_encrypted(s->return_container()));
  CHECK(rts::unpack(s->return_container(), std::nullopt).size() == 3);
}

TEST_CASE("failed upload keeps the state and can be retried") {
  TempDir tmp;
  auto s = session_in(Phase::Submitted, "bob");
  testsupport::write_file(tmp / "returns", "occupied");
  const auto box = transport::Locator::dir(tmp / "returns");
  CHECK_FALSE(s->upload_return(box));
  auto snap = s->snapshot();
  CHECK(snap.phase == Phase::Submitted);
  CHECK(snap.last_error.starts_with("ConnectionFailed"));

  std::filesystem::remove(tmp / "returns");
  CHECK(s->upload_return(box));
  snap = s->snapshot();
  CHECK(snap.phase == Phase::Uploaded);
  CHECK(snap.last_error.empty());
  CHECK(transport::get(box, "chem-2.bob.rts") == s->return_container());

  auto early = session_in(Phase::InExam);
  CHECK(error_code([&] { early->upload_return(box); }) == "InvalidTransition");
}

TEST_CASE("recording runs alongside the exam") {
  std::vector<gesture::Frame> frames;
  for (int i = 0; i < 30; ++i) {
    gesture::Frame f = (i >= 10 && i <= 19)
                           ? gesture::Frame::filled(160, 120, 1.0)
                           : gesture::render_synthetic({80, 60, 32, 0, 0.45, 0.55}, 160, 120, 0.02, i);
    f.t_ms = i * 40;
    frames.push_back(std::move(f));
  }
  std::vector<gesture::GestureEvent> live;
  std::mutex mu;
  SessionOptions opt;
  opt.on_event = [&](const gesture::GestureEvent& e) {
    std::lock_guard lk(mu);
    live.push_back(e);
  };
  StudentSession s("rec", opt);
  s.await_paper();
  s.on_paper_appeared(exam_blob());
  s.unlock("k3y");
  REQUIRE(s.start_exam(clean(), kStart, std::make_unique<gesture::VectorFrameSource>(frames)));
  s.wait_for_recording();
  CHECK_FALSE(s.snapshot().recording);
  s.submit();

  const auto snap = s.snapshot();
  const auto absent = std::count_if(snap.events.begin(), snap.events.end(), [](const auto& e) {
    return e.kind == gesture::EventKind::FaceAbsent;
  });
  CHECK(absent == 1);
  {
    std::lock_guard lk(mu);
    CHECK(live.size() == snap.events.size());
  }
  const auto named = unpack_named(s.return_container(), "k3y");
  CHECK(gesture::decode_frameset(named.at(std::string(kMediaEntry))).size() == 30);
  const auto env = envcheck::parse_envrec(examgrid::to_string(named.at(std::string(kEnvEntry))));
  CHECK_FALSE(env.recording_tamper);
  CHECK(env.host == "desk-07");
}

namespace {

class BrokenCamera final : public gesture::FrameSource {
 public:
  std::optional<gesture::Frame> next() override {
    if (n_ == 3) throw std::runtime_error("device lost");
    return gesture::Frame::filled(32, 32, 1.0, 40 * ++n_);
  }

 private:
  int n_ = 0;
};

}  // namespace

TEST_CASE("a recording that dies early marks the attestation as tampered") {
  StudentSession s("cam");
  s.await_paper();
  s.on_paper_appeared(exam_blob(std::nullopt));
  REQUIRE(s.start_exam(clean(), kStart, std::make_unique<BrokenCamera>()));
  s.wait_for_recording();
  s.submit();
  const auto named = unpack_named(s.return_container(), std::nullopt);
  CHECK(gesture::decode_frameset(named.at(std::string(kMediaEntry))).size() == 3);
  const auto env = envcheck::parse_envrec(examgrid::to_string(named.at(std::string(kEnvEntry))));
  CHECK(env.recording_tamper);
  REQUIRE_FALSE(env.notes.empty());
  CHECK(env.notes.back().find("device lost") != std::string::npos);
}

TEST_CASE("submitting stops an endless recording") {
  class Endless final : public gesture::FrameSource {
   public:
    std::optional<gesture::Frame> next() override {
      std::this_thread::sleep_for(2ms);
      return gesture::Frame::filled(32, 32, 1.0, ++n_);
    }
    std::uint64_t n_ = 0;
  };
  StudentSession s("loop");
  s.await_paper();
  s.on_paper_appeared(exam_blob(std::nullopt));
  REQUIRE(s.start_exam(clean(), kStart, std::make_unique<Endless>()));
  std::this_thread::sleep_for(50ms);
  s.submit();
  const auto named = unpack_named(s.return_container(), std::nullopt);
  CHECK(gesture::decode_frameset(named.at(std::string(kMediaEntry))).size() > 0);
}

TEST_CASE("materials are closed only during the exam") {
  TempDir tmp;
  testsupport::write_file(tmp / "notes.pdf", "x");
  testsupport::write_file(tmp / "a-syllabus.txt", "y");
  std::filesystem::create_directory(tmp / "subdir");
  DirectoryMaterials shelf(tmp.path());
  for (Phase p : kAllPhases) {
    CAPTURE(to_string(p));
    CHECK(lms_access_allowed(p) == (p != Phase::InExam));
    if (p == Phase::InExam) {
      CHECK(error_code([&] { list_materials(shelf, p); }) == "Denied");
    } else {
      const auto got = list_materials(shelf, p);
      const auto loc = transport::Locator::dir(tmp.path()).to_string();
      CHECK(got == std::vector<Material>{{"a-syllabus.txt", loc}, {"notes.pdf", loc}});
    }
  }
  DirectoryMaterials missing(tmp / "nowhere");
  CHECK(list_materials(missing, Phase::Idle).empty());
}

TEST_CASE("names and ids") {
  CHECK(return_name("chem-2", "s_01") == "chem-2.s_01.rts");
  CHECK(valid_student_id("a-B_9"));
  for (const char* bad : {"", "a.b", "a/b", "a b", "ü"}) CHECK_FALSE(valid_student_id(bad));
  CHECK_THROWS_AS(StudentSession("bad id"), std::invalid_argument);
}

// --- lecturer ---------------------------------------------------------------

namespace {

Bytes take_exam(const LecturerWorkflow& w, const std::string& student, const vqp::Responses& answers,
                std::string* name = nullptr) {
  StudentSession s(student);
  s.await_paper();
  s.on_paper_appeared(w.exam_container());
  if (w.passkey()) s.unlock(*w.passkey());
  REQUIRE(s.start_exam(clean(), kStart));
  for (const auto& [q, a] : answers) s.answer(q, a);
  s.submit();
  if (name) *name = *s.snapshot().return_name;
  return s.return_container();
}

}  // namespace

TEST_CASE("publish reports each destination") {
  TempDir tmp;
  testsupport::write_file(tmp / "blocked", "x");
  LecturerWorkflow w(design_paper(), "k3y");
  CHECK(w.exam_name() == "chem-2.rts");
  const auto res = w.publish({transport::Locator::dir(tmp / "a"), transport::Locator::dir(tmp / "blocked"),
                              transport::Locator::dir(tmp / "b")});
  CHECK(res.name == "chem-2.rts");
  REQUIRE(res.outcomes.size() == 3);
  CHECK(res.outcomes[0].ok);
  CHECK_FALSE(res.outcomes[1].ok);
  CHECK(res.outcomes[1].error.starts_with("ConnectionFailed"));
  CHECK(res.outcomes[2].ok);
  const auto got = transport::get(transport::Locator::dir(tmp / "b"), "chem-2.rts");
  const auto paper = vqp::parse_vqp(examgrid::to_string(rts::unpack(got, std::string("k3y"))[0].data));
  CHECK(paper == vqp::to_exam(design_paper()));
  CHECK_THROWS(LecturerWorkflow(vqp::to_exam(design_paper()), std::nullopt));
}

TEST_CASE("collect: three returns, one tampered") {
  TempDir tmp;
  const auto box = transport::Locator::dir(tmp.path());
  LecturerWorkflow w(design_paper(), "k3y");
  for (const char* who : {"ann", "bob", "cat"}) {
    std::string name;
    auto blob = take_exam(w, who, {{1, "B"}}, &name);
    if (std::string(who) == "bob") blob[blob.size() / 2] ^= 0x01;
    transport::put(box, name, blob);
  }
  transport::put(box, "chem-2.rts", w.exam_container());  // the exam itself is not a return
  transport::put(box, "other-1.dan.rts", to_bytes("x"));

  const auto got = w.collect(box);
  REQUIRE(got.size() == 2);
  CHECK(got[0].student_id == "ann");
  CHECK(got[1].student_id == "cat");
  CHECK(got[0].entries.size() == 3);
  CHECK(got[0].answered.find(1)->response == "B");
  const auto issues = w.issues();
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].code == "TagMismatch");
  CHECK(issues[0].name == "chem-2.bob.rts");

  CHECK(w.collect(box).empty());
  CHECK(w.returns().size() == 2);
  CHECK(w.find_return("cat").has_value());
  CHECK_FALSE(w.find_return("bob").has_value());
}

TEST_CASE("duplicate student: first arrival kept") {
  TempDir tmp;
  const auto a = transport::Locator::dir(tmp / "a"), b = transport::Locator::dir(tmp / "b");
  LecturerWorkflow w(design_paper(), "k3y");
  std::string name;
  transport::put(a, "chem-2.ann.rts", take_exam(w, "ann", {{1, "B"}}, &name));
  transport::put(b, "chem-2.ann.rts", take_exam(w, "ann", {{1, "C"}}));
  CHECK(w.collect(a).size() == 1);
  CHECK(w.collect(b).empty());
  CHECK(w.find_return("ann")->answered.find(1)->response == "B");
  REQUIRE(w.issues().size() == 1);
  CHECK(w.issues()[0].code == "Duplicate");
}

TEST_CASE("ingest checks names, entries and paper identity") {
  LecturerWorkflow w(design_paper(), "k3y");
  const auto good = take_exam(w, "ann", {});
  CHECK_FALSE(w.ingest("ann.rts", good));
  CHECK_FALSE(w.ingest("chem-2.a b.rts", good));
  CHECK(w.ingest("chem-2.ann.rts", good));

  // A return for another paper, misnamed as this one.
  auto other = design_paper();
  other.id = "chem-3";
  LecturerWorkflow w2(other, "k3y");
  CHECK_FALSE(w.ingest("chem-2.zed.rts", take_exam(w2, "zed", {})));

  // Only the paper entry.
  const auto answered = vqp::merge_answers(vqp::to_exam(design_paper()), {});
  const auto thin = rts::pack({rts::make_entry("p.vqp", rts::EntryType::Vqp, to_bytes(vqp::serialize_vqp(answered)))},
                              std::string("k3y"));
  CHECK_FALSE(w.ingest("chem-2.yan.rts", thin));
  std::vector<std::string> codes;
  for (const auto& i : w.issues()) codes.push_back(i.code);
  CHECK(codes == std::vector<std::string>{"BadName", "BadName", "PaperMismatch", "BadReturn"});
}

TEST_CASE("watching the return box hands over each return once") {
  TempDir tmp;
  const auto box = transport::Locator::dir(tmp.path());
  LecturerWorkflow w(design_paper(), "k3y");
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::string> seen;
  auto watcher = w.watch_returns(
      box,
      [&](const CollectedReturn& r) {
        std::lock_guard lk(mu);
        seen.push_back(r.student_id);
        cv.notify_all();
      },
      100ms);
  std::string name;
  transport::put(box, "chem-2.ann.rts", take_exam(w, "ann", {{2, "A"}}, &name));
  {
    std::unique_lock lk(mu);
    REQUIRE(cv.wait_for(lk, 3s, [&] { return !seen.empty(); }));
  }
  std::this_thread::sleep_for(300ms);
  watcher->cancel();
  CHECK(seen == std::vector<std::string>{"ann"});
  CHECK(w.collect(box).empty());
}
