#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "examgrid/bytes.hpp"
#include "examgrid/gesture/fit.hpp"
#include "examgrid/gesture/frame.hpp"
#include "examgrid/gesture/recognize.hpp"

namespace examgrid::gesture {

struct SessionReport {
  std::vector<GestureEvent> events;  // sorted by start
  std::uint32_t frame_count = 0;
  std::uint32_t face_frames = 0;  // fits at or below tau_absent
  double coverage = 0.0;          // face_frames / frame_count
  double mean_energy = 0.0;
  std::uint64_t first_ms = 0;
  std::uint64_t last_ms = 0;

  // Human-readable summary, one event per line.
  std::string to_text() const;
};

struct AnalysisOptions {
  EnergyConfig energy;
  double tau_absent = kTauAbsent;  // warm-start threshold and coverage cut
  // Called with each event as soon as a recognizer emits it.
  std::function<void(const GestureEvent&)> on_event;
};

// Incremental per-frame pipeline shared by recording and lecturer-side
// analysis. Descent is warm-started from the previous frame's parameters
// when that fit scored below tau_absent; a warm result that lands above tau
// falls back to a full fit.
class SessionAnalyzer {
 public:
  SessionAnalyzer(AnalysisOptions options, Recognizers recognizers);

  // Throws NonMonotonicTimestamps unless t_ms strictly increases.
  const FitResult& push(const Frame& frame);
  SessionReport finish();
  SessionReport snapshot() const;  // events so far, without flushing

 private:
  AnalysisOptions options_;
  Recognizers recognizers_;
  std::optional<FitResult> prev_;
  std::optional<std::uint64_t> last_t_;
  FitResult current_;
  SessionReport report_;
  double energy_sum_ = 0.0;
  bool finished_ = false;

  void emit(std::vector<GestureEvent> evs);
};

struct RecordResult {
  Bytes frameset;
  SessionReport report;
};

// Raised when the frame source throws; partial() holds everything recorded
// before the failure (frameset and report flushed up to that point).
class RecordingFailed : public GestureError {
 public:
  RecordingFailed(const std::string& detail, RecordResult partial)
      : GestureError("FrameSourceFailed", detail), partial_(std::move(partial)) {}
  const RecordResult& partial() const { return partial_; }

 private:
  RecordResult partial_;
};

// Pulls frames until the source ends or stop is requested. Every frame is
// appended to the FRS frameset and analysed.
RecordResult record_session(FrameSource& source, AnalysisOptions options, Recognizers recognizers,
                            std::stop_token stop = {});

// Lecturer side: re-run the pipeline over a stored frameset.
SessionReport analyze_frameset(ByteView frameset, AnalysisOptions options,
                               Recognizers recognizers);
// Same with default_recognizers() sized to the first frame.
SessionReport analyze_frameset(ByteView frameset, AnalysisOptions options = {});

}  // namespace examgrid::gesture
