#include "examgrid/gesture/recognize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>

#include "examgrid/gesture/frame.hpp"

namespace examgrid::gesture {

namespace {

double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(v))
    throw std::invalid_argument(key + ": not a number: '" + value + "'");
  return v;
}

int parse_count(const std::string& key, const std::string& value) {
  const double v = parse_real(key, value);
  if (v < 1 || v != std::floor(v) || v > 1e6)
    throw std::invalid_argument(key + ": expected a positive integer, got '" + value + "'");
  return static_cast<int>(v);
}

[[noreturn]] void unknown_key(const std::string& who, const std::string& key) {
  throw std::invalid_argument(who + ": unknown setting '" + key + "'");
}

// Two-state debounce. A state change needs d consecutive opposing frames and
// happens on the d-th of them. The episode being left ends at the last frame
// that agreed with it.
class Debouncer {
 public:
  struct Transition {
    bool to_alarm;
    std::optional<std::pair<std::uint64_t, std::uint64_t>> closed;  // episode left
  };

  void set_d(int d) { d_ = d; }
  bool alarm() const { return alarm_; }

  std::optional<Transition> observe(bool flag, std::uint64_t t) {
    last_seen_ = t;
    if (flag == alarm_) {
      run_ = 0;
      last_agree_ = t;
      return std::nullopt;
    }
    if (run_ == 0) before_run_ = last_agree_;
    if (++run_ < d_) return std::nullopt;

    Transition tr{!alarm_, std::nullopt};
    if (open_) tr.closed = std::make_pair(*open_, before_run_);
    open_ = t;
    alarm_ = !alarm_;
    run_ = 0;
    last_agree_ = t;
    return tr;
  }

  // Open episode (start, end of stream), if any. A pending opposing run that
  // never reached d does not end it.
  std::optional<std::pair<std::uint64_t, std::uint64_t>> flush() {
    std::optional<std::pair<std::uint64_t, std::uint64_t>> r;
    if (open_) r = std::make_pair(*open_, last_seen_);
    open_.reset();
    return r;
  }

 private:
  int d_ = kDebounce;
  bool alarm_ = false;
  int run_ = 0;
  std::uint64_t last_agree_ = 0;
  std::uint64_t before_run_ = 0;
  std::uint64_t last_seen_ = 0;
  std::optional<std::uint64_t> open_;
};

GestureEvent make_event(EventKind kind, std::uint64_t start, std::uint64_t end) {
  GestureEvent ev;
  ev.kind = kind;
  ev.start = start;
  ev.end = end;
  const std::string from = format_seconds(start), to = format_seconds(end);
  switch (kind) {
    case EventKind::FaceAbsent:
      ev.severity = Severity::Warn;
      ev.comment = "Face not visible from " + from + " to " + to + ".";
      break;
    case EventKind::FacePresent:
      ev.severity = Severity::Info;
      ev.comment = "Face visible again from " + from + ".";
      break;
    case EventKind::LookAway:
      ev.severity = Severity::Warn;
      ev.comment = "Looked away from the screen from " + from + " to " + to + ".";
      break;
    case EventKind::LookBack:
      ev.severity = Severity::Info;
      ev.comment = "Attention back on the screen from " + from + ".";
      break;
    case EventKind::MovementBurst:
      ev.severity = Severity::Warn;
      ev.comment = "Rapid movement from " + from + " to " + to + ".";
      break;
  }
  return ev;
}

std::vector<GestureEvent> from_transition(const std::optional<Debouncer::Transition>& tr,
                                          EventKind alarm_kind, EventKind normal_kind) {
  std::vector<GestureEvent> out;
  if (tr && tr->closed) {
    // Leaving alarm closes an alarm episode and vice versa.
    const EventKind kind = tr->to_alarm ? normal_kind : alarm_kind;
    out.push_back(make_event(kind, tr->closed->first, tr->closed->second));
  }
  return out;
}

std::vector<GestureEvent> flush(Debouncer& db, EventKind alarm_kind, EventKind normal_kind) {
  std::vector<GestureEvent> out;
  if (auto ep = db.flush())
    out.push_back(make_event(db.alarm() ? alarm_kind : normal_kind, ep->first, ep->second));
  return out;
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double hi = v[n / 2];
  if (n % 2) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + n / 2));
}

}  // namespace

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::FaceAbsent: return "FACE_ABSENT";
    case EventKind::FacePresent: return "FACE_PRESENT";
    case EventKind::LookAway: return "LOOK_AWAY";
    case EventKind::LookBack: return "LOOK_BACK";
    case EventKind::MovementBurst: return "MOVEMENT_BURST";
  }
  return "?";
}

std::string to_string(Severity s) { return s == Severity::Warn ? "warn" : "info"; }

EventKind parse_event_kind(std::string_view s) {
  for (auto k : {EventKind::FaceAbsent, EventKind::FacePresent, EventKind::LookAway,
                 EventKind::LookBack, EventKind::MovementBurst})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown event kind '" + std::string(s) + "'");
}

std::string format_seconds(std::uint64_t ms) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f s", static_cast<double>(ms) / 1000.0);
  return buf;
}

double change_norm(const TemplateParams& a, const TemplateParams& b) {
  const double s = b.s;
  const double d[6] = {b.cx - a.cx, b.cy - a.cy, b.s - a.s,
                       s * (b.phi - a.phi), s * (b.e - a.e), s * (b.m - a.m)};
  double acc = 0.0;
  for (double x : d) acc += x * x;
  return std::sqrt(acc);
}

// --- presence ---------------------------------------------------------------

struct PresenceRecognizer::Impl {
  double tau = kTauAbsent;
  Debouncer db;
};

PresenceRecognizer::PresenceRecognizer() : impl_(std::make_unique<Impl>()) {}
PresenceRecognizer::~PresenceRecognizer() = default;

void PresenceRecognizer::configure(const Settings& settings) {
  for (const auto& [k, v] : settings) {
    if (k == "tau_absent") impl_->tau = parse_real(k, v);
    else if (k == "d") impl_->db.set_d(parse_count(k, v));
    else unknown_key(name(), k);
  }
}

std::vector<GestureEvent> PresenceRecognizer::update(const FitResult& fit, std::uint64_t t_ms) {
  const bool absent = fit.energy > impl_->tau;
  return from_transition(impl_->db.observe(absent, t_ms), EventKind::FaceAbsent,
                         EventKind::FacePresent);
}

std::vector<GestureEvent> PresenceRecognizer::finish() {
  return flush(impl_->db, EventKind::FaceAbsent, EventKind::FacePresent);
}

// --- gaze -------------------------------------------------------------------

struct GazeRecognizer::Impl {
  double phi_max = kPhiMax;
  double delta = 0.0;
  int window = kMedianWindow;
  double gate = kTauAbsent;
  Debouncer db;
  std::deque<std::pair<double, double>> history;  // previous valid centres
};

GazeRecognizer::GazeRecognizer(double delta_px) : impl_(std::make_unique<Impl>()) {
  impl_->delta = delta_px;
}
GazeRecognizer::~GazeRecognizer() = default;

void GazeRecognizer::configure(const Settings& settings) {
  for (const auto& [k, v] : settings) {
    if (k == "phi_max") impl_->phi_max = parse_real(k, v);
    else if (k == "delta") impl_->delta = parse_real(k, v);
    else if (k == "window") impl_->window = parse_count(k, v);
    else if (k == "d") impl_->db.set_d(parse_count(k, v));
    else if (k == "gate") impl_->gate = parse_real(k, v);
    else unknown_key(name(), k);
  }
}

std::vector<GestureEvent> GazeRecognizer::update(const FitResult& fit, std::uint64_t t_ms) {
  auto& m = *impl_;
  if (fit.energy > m.gate) return {};
  const auto& p = fit.params;

  bool away = std::abs(p.phi) > m.phi_max;
  if (!m.history.empty()) {
    std::vector<double> xs, ys;
    for (const auto& [x, y] : m.history) {
      xs.push_back(x);
      ys.push_back(y);
    }
    away = away || std::hypot(p.cx - median(xs), p.cy - median(ys)) > m.delta;
  }
  m.history.emplace_back(p.cx, p.cy);
  while (static_cast<int>(m.history.size()) > m.window) m.history.pop_front();

  return from_transition(m.db.observe(away, t_ms), EventKind::LookAway, EventKind::LookBack);
}

std::vector<GestureEvent> GazeRecognizer::finish() {
  return flush(impl_->db, EventKind::LookAway, EventKind::LookBack);
}

// --- motion -----------------------------------------------------------------

struct MotionRecognizer::Impl {
  double v_max = kVMax;
  int d = kDebounce;
  double gate = kTauAbsent;

  std::uint64_t frame = 0;  // frames seen, valid or not
  std::optional<std::pair<TemplateParams, std::uint64_t>> prev;  // params, frame index
  int run = 0;
  std::uint64_t run_start = 0, run_last = 0;

  std::vector<GestureEvent> close_run() {
    std::vector<GestureEvent> out;
    if (run >= d) out.push_back(make_event(EventKind::MovementBurst, run_start, run_last));
    run = 0;
    return out;
  }
};

MotionRecognizer::MotionRecognizer() : impl_(std::make_unique<Impl>()) {}
MotionRecognizer::~MotionRecognizer() = default;

void MotionRecognizer::configure(const Settings& settings) {
  for (const auto& [k, v] : settings) {
    if (k == "v_max") impl_->v_max = parse_real(k, v);
    else if (k == "d") impl_->d = parse_count(k, v);
    else if (k == "gate") impl_->gate = parse_real(k, v);
    else unknown_key(name(), k);
  }
}

std::vector<GestureEvent> MotionRecognizer::update(const FitResult& fit, std::uint64_t t_ms) {
  auto& m = *impl_;
  const std::uint64_t index = m.frame++;
  if (fit.energy > m.gate) return {};

  std::vector<GestureEvent> out;
  if (m.prev) {
    const double speed = change_norm(m.prev->first, fit.params) /
                         static_cast<double>(index - m.prev->second);
    if (speed > m.v_max) {
      if (m.run++ == 0) m.run_start = t_ms;
      m.run_last = t_ms;
    } else {
      out = m.close_run();
    }
  }
  m.prev = std::make_pair(fit.params, index);
  return out;
}

std::vector<GestureEvent> MotionRecognizer::finish() { return impl_->close_run(); }

// --- plumbing ---------------------------------------------------------------

namespace {

struct Registry {
  std::mutex mu;
  std::map<std::string, RecognizerFactory> factories;

  Registry() {
    factories["presence"] = [](int) { return std::make_unique<PresenceRecognizer>(); };
    factories["gaze"] = [](int h) { return std::make_unique<GazeRecognizer>(kDeltaFraction * h); };
    factories["motion"] = [](int) { return std::make_unique<MotionRecognizer>(); };
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_recognizer(const std::string& name, RecognizerFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  r.factories[name] = std::move(factory);
}

std::unique_ptr<Recognizer> make_recognizer(const std::string& name, int frame_height) {
  auto& r = registry();
  RecognizerFactory f;
  {
    std::lock_guard lock(r.mu);
    auto it = r.factories.find(name);
    if (it == r.factories.end()) throw std::invalid_argument("unknown recognizer '" + name + "'");
    f = it->second;
  }
  return f(frame_height);
}

std::vector<std::string> registered_recognizers() {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  std::vector<std::string> names;
  for (const auto& [k, v] : r.factories) names.push_back(k);
  return names;
}

Recognizers default_recognizers(int frame_height) {
  Recognizers out;
  out.push_back(std::make_unique<PresenceRecognizer>());
  out.push_back(std::make_unique<GazeRecognizer>(kDeltaFraction * frame_height));
  out.push_back(std::make_unique<MotionRecognizer>());
  return out;
}

void sort_events(std::vector<GestureEvent>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const GestureEvent& a, const GestureEvent& b) { return a.start < b.start; });
}

std::vector<GestureEvent> run_recognizers(
    const std::vector<std::pair<FitResult, std::uint64_t>>& fits, Recognizers& recognizers) {
  for (std::size_t i = 1; i < fits.size(); ++i) {
    if (fits[i].second <= fits[i - 1].second)
      throw GestureError("NonMonotonicTimestamps",
                         "frame " + std::to_string(i) + " at " + std::to_string(fits[i].second) +
                             " ms does not follow " + std::to_string(fits[i - 1].second) + " ms");
  }
  std::vector<GestureEvent> events;
  for (const auto& [fit, t] : fits) {
    for (auto& r : recognizers) {
      auto evs = r->update(fit, t);
      events.insert(events.end(), evs.begin(), evs.end());
    }
  }
  for (auto& r : recognizers) {
    auto evs = r->finish();
    events.insert(events.end(), evs.begin(), evs.end());
  }
  sort_events(events);
  return events;
}

}  // namespace examgrid::gesture
