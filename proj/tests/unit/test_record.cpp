#include "doctest.h"

#include <algorithm>

#include "examgrid/gesture/record.hpp"
#include "generators.hpp"

using namespace examgrid;
using namespace examgrid::gesture;

namespace {

constexpr std::uint64_t kStep = 40;

// 30 frames of one face drifting slowly right, with frames [blank_from,
// blank_to] replaced by an empty white frame. Frame i is stamped i * 40 ms.
std::vector<Frame> sequence(int n, int blank_from, int blank_to) {
  std::vector<Frame> frames;
  for (int i = 0; i < n; ++i) {
    const TemplateParams p{70.0 + 0.3 * i, 60, 32, 0.05, 0.45, 0.55};
    Frame f = (i >= blank_from && i <= blank_to) ? Frame::filled(160, 120, 1.0)
                                                 : render_synthetic(p, 160, 120, 0.02, i);
    f.t_ms = i * kStep;
    frames.push_back(std::move(f));
  }
  return frames;
}

// Yields `good` frames, then fails.
class FailingSource final : public FrameSource {
 public:
  FailingSource(std::vector<Frame> frames, std::size_t good) : frames_(std::move(frames)), good_(good) {}
  std::optional<Frame> next() override {
    if (i_ == good_) throw std::runtime_error("camera unplugged");
    return frames_.at(i_++);
  }

 private:
  std::vector<Frame> frames_;
  std::size_t good_, i_ = 0;
};

// Never ends; asks for a stop after `limit` frames.
class EndlessSource final : public FrameSource {
 public:
  EndlessSource(std::stop_source& stop, int limit) : stop_(stop), limit_(limit) {}
  std::optional<Frame> next() override {
    if (++n_ == limit_) stop_.request_stop();
    return Frame::filled(32, 32, 1.0, n_ * kStep);
  }
  int served() const { return n_; }

 private:
  std::stop_source& stop_;
  int limit_, n_ = 0;
};

std::vector<GestureEvent> of_kind(const SessionReport& r, EventKind k) {
  std::vector<GestureEvent> out;
  std::copy_if(r.events.begin(), r.events.end(), std::back_inserter(out),
               [&](const GestureEvent& e) { return e.kind == k; });
  return out;
}

}  // namespace

TEST_CASE("blank frames 10-19 of 30 give a covering FACE_ABSENT") {
  VectorFrameSource src(sequence(30, 10, 19));
  const auto res = record_session(src, {}, default_recognizers(120));
  CHECK(res.report.frame_count == 30);
  CHECK(res.report.face_frames == 20);
  CHECK(res.report.coverage == doctest::Approx(20.0 / 30));

  const auto absent = of_kind(res.report, EventKind::FaceAbsent);
  REQUIRE(absent.size() == 1);
  const std::uint64_t d = kDebounce * kStep;
  CHECK(absent[0].start + d >= 10 * kStep);
  CHECK(absent[0].start <= 10 * kStep + d);
  CHECK(absent[0].end + d >= 19 * kStep);
  CHECK(absent[0].end <= 19 * kStep + d);
  // Hand-simulated: third blank frame opens it, last blank frame closes it.
  CHECK(absent[0].start == 12 * kStep);
  CHECK(absent[0].end == 19 * kStep);

  const auto present = of_kind(res.report, EventKind::FacePresent);
  REQUIRE(present.size() == 1);
  CHECK(present[0].start == 22 * kStep);
  CHECK(of_kind(res.report, EventKind::MovementBurst).empty());
  CHECK(of_kind(res.report, EventKind::LookAway).empty());
}

TEST_CASE("one-frame source") {
  VectorFrameSource src(sequence(1, -1, -1));
  const auto res = record_session(src, {}, default_recognizers(120));
  CHECK(decode_frameset(res.frameset).size() == 1);
  CHECK(res.report.frame_count == 1);
  CHECK(res.report.events.empty());
  CHECK(res.report.coverage == 1.0);
  CHECK(res.report.to_text().find("no events") != std::string::npos);
}

TEST_CASE("recorded frameset parses back and re-analyses the same way") {
  const auto frames = sequence(30, 10, 19);
  VectorFrameSource src(frames);
  const auto res = record_session(src, {}, default_recognizers(120));
  const auto back = decode_frameset(res.frameset);
  REQUIRE(back.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(back[i].t_ms == frames[i].t_ms);
    CHECK(back[i].width == frames[i].width);
    CHECK(back[i].height == frames[i].height);
    CHECK(back[i] == quantized(frames[i]));
  }
  const auto again = analyze_frameset(res.frameset);
  CHECK(again.frame_count == 30);
  REQUIRE(of_kind(again, EventKind::FaceAbsent).size() == 1);
  CHECK(of_kind(again, EventKind::FaceAbsent)[0].start == of_kind(res.report, EventKind::FaceAbsent)[0].start);
}

TEST_CASE("a failing source keeps what was recorded") {
  FailingSource src(sequence(30, 2, 6), 8);
  try {
    record_session(src, {}, default_recognizers(120));
    FAIL("expected RecordingFailed");
  } catch (const RecordingFailed& e) {
    CHECK(std::string(e.code()) == "FrameSourceFailed");
    CHECK(std::string(e.what()).find("camera unplugged") != std::string::npos);
    CHECK(decode_frameset(e.partial().frameset).size() == 8);
    CHECK(e.partial().report.frame_count == 8);
    // The open absence was flushed into the partial report.
    const auto absent = of_kind(e.partial().report, EventKind::FaceAbsent);
    REQUIRE(absent.size() == 1);
    CHECK(absent[0].start == 4 * kStep);
  }
}

TEST_CASE("invalid or out-of-order frames end the recording with partial results") {
  auto frames = sequence(5, -1, -1);
  frames[3] = Frame::filled(31, 32, 1.0, frames[3].t_ms);
  VectorFrameSource bad_size(frames);
  try {
    record_session(bad_size, {}, default_recognizers(120));
    FAIL("expected RecordingFailed");
  } catch (const RecordingFailed& e) {
    CHECK(e.partial().report.frame_count == 3);
  }

  frames = sequence(5, -1, -1);
  frames[2].t_ms = frames[1].t_ms;
  VectorFrameSource stuck_clock(frames);
  try {
    record_session(stuck_clock, {}, default_recognizers(120));
    FAIL("expected RecordingFailed");
  } catch (const RecordingFailed& e) {
    CHECK(decode_frameset(e.partial().frameset).size() == 2);
  }
}

TEST_CASE("stop token ends the recording cleanly") {
  std::stop_source stop;
  EndlessSource src(stop, 7);
  const auto res = record_session(src, {}, default_recognizers(32), stop.get_token());
  CHECK(res.report.frame_count == 7);
  CHECK(decode_frameset(res.frameset).size() == 7);
}

TEST_CASE("events reach the live callback as they are emitted") {
  std::vector<GestureEvent> live;
  AnalysisOptions opt;
  opt.on_event = [&](const GestureEvent& e) { live.push_back(e); };
  VectorFrameSource src(sequence(30, 10, 19));
  const auto res = record_session(src, opt, default_recognizers(120));
  sort_events(live);
  CHECK(live == res.report.events);
}

TEST_CASE("analyzer snapshot shows events before finish") {
  SessionAnalyzer a({}, default_recognizers(120));
  const auto frames = sequence(30, 10, 29);
  for (int i = 0; i < 25; ++i) a.push(frames[i]);
  // Absence is still open, so only its start is known; nothing is emitted yet.
  CHECK(a.snapshot().events.empty());
  CHECK(a.snapshot().frame_count == 25);
  const auto done = a.finish();
  REQUIRE(done.events.size() == 1);
  CHECK(done.events[0].kind == EventKind::FaceAbsent);
  CHECK(done.events[0].end == 24 * kStep);
  CHECK_THROWS_AS(a.push(frames[25]), std::logic_error);
}

TEST_CASE("warm-started fits track a moving face") {
  SessionAnalyzer a({}, {});
  for (int i = 0; i < 15; ++i) {
    const TemplateParams p{60.0 + 2 * i, 55.0 + i, 30, 0.0, 0.45, 0.55};
    auto f = render_synthetic(p, 160, 120, 0.02, 100 + i);
    f.t_ms = i * kStep;
    const auto& r = a.push(f);
    CHECK(std::abs(r.params.cx - p.cx) <= 1.5);
    CHECK(std::abs(r.params.cy - p.cy) <= 1.5);
  }
}

TEST_CASE("report text lists each event") {
  VectorFrameSource src(sequence(30, 10, 19));
  const auto text = record_session(src, {}, default_recognizers(120)).report.to_text();
  CHECK(text.find("frames 30, face visible in 20") == 0);
  CHECK(text.find("FACE_ABSENT [480, 760] warn: Face not visible from 0.5 s to 0.8 s.") != std::string::npos);
  CHECK(text.find("FACE_PRESENT [880, 1160] info") != std::string::npos);
}
