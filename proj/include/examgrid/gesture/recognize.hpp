#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "examgrid/gesture/fit.hpp"

namespace examgrid::gesture {

enum class EventKind { FaceAbsent, FacePresent, LookAway, LookBack, MovementBurst };
enum class Severity { Info, Warn };

std::string to_string(EventKind k);  // FACE_ABSENT, ...
std::string to_string(Severity s);   // info, warn
EventKind parse_event_kind(std::string_view s);

struct GestureEvent {
  EventKind kind = EventKind::FaceAbsent;
  std::uint64_t start = 0;  // ms
  std::uint64_t end = 0;    // ms, inclusive
  Severity severity = Severity::Info;
  std::string comment;

  bool operator==(const GestureEvent&) const = default;
};

using Settings = std::map<std::string, std::string>;

// A pluggable detector over the fit trajectory. update() sees every frame in
// timestamp order; finish() flushes whatever is still open.
class Recognizer {
 public:
  virtual ~Recognizer() = default;
  virtual std::string name() const = 0;
  // Unknown keys and unparseable values throw std::invalid_argument.
  virtual void configure(const Settings& settings) = 0;
  virtual std::vector<GestureEvent> update(const FitResult& fit, std::uint64_t t_ms) = 0;
  virtual std::vector<GestureEvent> finish() = 0;
};

inline constexpr double kTauAbsent = -0.15;
inline constexpr double kPhiMax = 0.2;
inline constexpr double kDeltaFraction = 0.12;  // of frame height
inline constexpr int kDebounce = 3;
inline constexpr double kVMax = 6.0;
inline constexpr int kMedianWindow = 25;

// FACE_ABSENT once energy > tau_absent for d consecutive frames, starting at
// the d-th such frame and ending at the last one before recovery. Recovery
// (d consecutive frames at or below tau) opens FACE_PRESENT, which runs until
// the next absence begins or the stream ends.
// Keys: tau_absent, d.
class PresenceRecognizer final : public Recognizer {
 public:
  PresenceRecognizer();
  ~PresenceRecognizer() override;
  std::string name() const override { return "presence"; }
  void configure(const Settings& settings) override;
  std::vector<GestureEvent> update(const FitResult& fit, std::uint64_t t_ms) override;
  std::vector<GestureEvent> finish() override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// A frame looks away when |phi| > phi_max or its centre lies more than delta
// px from the median centre of the previous `window` valid frames. Same
// debounce and span rules as presence: LOOK_AWAY then LOOK_BACK. Frames with
// energy above gate (no face) are ignored.
// Keys: phi_max, delta, window, d, gate.
class GazeRecognizer final : public Recognizer {
 public:
  explicit GazeRecognizer(double delta_px = kDeltaFraction * 120);
  ~GazeRecognizer() override;
  std::string name() const override { return "gaze"; }
  void configure(const Settings& settings) override;
  std::vector<GestureEvent> update(const FitResult& fit, std::uint64_t t_ms) override;
  std::vector<GestureEvent> finish() override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Change norm between consecutive valid fits, per elapsed frame:
//   sqrt(dcx^2 + dcy^2 + ds^2 + (s dphi)^2 + (s de)^2 + (s dm)^2)
// with s the later scale. d or more consecutive moving frames (norm > v_max)
// form a MOVEMENT_BURST from the first to the last moving frame. Frames with
// energy above gate are skipped.
// Keys: v_max, d, gate.
class MotionRecognizer final : public Recognizer {
 public:
  MotionRecognizer();
  ~MotionRecognizer() override;
  std::string name() const override { return "motion"; }
  void configure(const Settings& settings) override;
  std::vector<GestureEvent> update(const FitResult& fit, std::uint64_t t_ms) override;
  std::vector<GestureEvent> finish() override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

double change_norm(const TemplateParams& a, const TemplateParams& b);

using Recognizers = std::vector<std::unique_ptr<Recognizer>>;

// Presence, gaze (delta = 0.12 x frame height) and motion with defaults.
Recognizers default_recognizers(int frame_height);

// Registry for plugging in detectors by name; the built-ins are
// pre-registered as "presence", "gaze", "motion".
using RecognizerFactory = std::function<std::unique_ptr<Recognizer>(int frame_height)>;
void register_recognizer(const std::string& name, RecognizerFactory factory);
std::unique_ptr<Recognizer> make_recognizer(const std::string& name, int frame_height);
std::vector<std::string> registered_recognizers();

// Feeds every fit to every recognizer in order, then finish(); the merged
// list is stably sorted by start time. Throws GestureError
// NonMonotonicTimestamps unless timestamps strictly increase.
std::vector<GestureEvent> run_recognizers(
    const std::vector<std::pair<FitResult, std::uint64_t>>& fits, Recognizers& recognizers);

void sort_events(std::vector<GestureEvent>& events);

// "12.3 s"
std::string format_seconds(std::uint64_t ms);

}  // namespace examgrid::gesture
