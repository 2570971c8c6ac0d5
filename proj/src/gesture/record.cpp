#include "examgrid/gesture/record.hpp"

#include <cstdio>
#include <sstream>

namespace examgrid::gesture {

std::string SessionReport::to_text() const {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "frames %u, face visible in %u (%.1f%%), %s to %s\n",
                frame_count, face_frames, 100.0 * coverage, format_seconds(first_ms).c_str(),
                format_seconds(last_ms).c_str());
  out << buf;
  if (events.empty()) out << "no events\n";
  for (const auto& ev : events)
    out << to_string(ev.kind) << " [" << ev.start << ", " << ev.end << "] " << to_string(ev.severity)
        << ": " << ev.comment << "\n";
  return out.str();
}

SessionAnalyzer::SessionAnalyzer(AnalysisOptions options, Recognizers recognizers)
    : options_(std::move(options)), recognizers_(std::move(recognizers)) {
  check_config(options_.energy);
}

void SessionAnalyzer::emit(std::vector<GestureEvent> evs) {
  for (auto& ev : evs) {
    if (options_.on_event) options_.on_event(ev);
    report_.events.push_back(std::move(ev));
  }
}

const FitResult& SessionAnalyzer::push(const Frame& frame) {
  if (finished_) throw std::logic_error("analyzer already finished");
  if (last_t_ && frame.t_ms <= *last_t_)
    throw GestureError("NonMonotonicTimestamps", "frame at " + std::to_string(frame.t_ms) +
                                                     " ms does not follow " +
                                                     std::to_string(*last_t_) + " ms");

  std::optional<FitResult> r;
  if (prev_ && prev_->energy < options_.tau_absent) {
    const auto fields = compute_potentials(frame, options_.energy.sigma);
    auto warm = refine(fields, options_.energy, prev_->params);
    if (warm.energy < options_.tau_absent) r = std::move(warm);
  }
  if (!r) r = fit(frame, options_.energy);
  current_ = std::move(*r);
  prev_ = current_;

  if (report_.frame_count == 0) report_.first_ms = frame.t_ms;
  report_.last_ms = frame.t_ms;
  last_t_ = frame.t_ms;
  ++report_.frame_count;
  if (current_.energy <= options_.tau_absent) ++report_.face_frames;
  energy_sum_ += current_.energy;

  for (auto& rec : recognizers_) emit(rec->update(current_, frame.t_ms));
  return current_;
}

SessionReport SessionAnalyzer::snapshot() const {
  SessionReport r = report_;
  sort_events(r.events);
  if (r.frame_count) {
    r.coverage = static_cast<double>(r.face_frames) / r.frame_count;
    r.mean_energy = energy_sum_ / r.frame_count;
  }
  return r;
}

SessionReport SessionAnalyzer::finish() {
  if (!finished_) {
    finished_ = true;
    for (auto& rec : recognizers_) emit(rec->finish());
  }
  return snapshot();
}

RecordResult record_session(FrameSource& source, AnalysisOptions options, Recognizers recognizers,
                            std::stop_token stop) {
  SessionAnalyzer analyzer(std::move(options), std::move(recognizers));
  FramesetWriter writer;
  auto partial = [&] { return RecordResult{writer.finish(), analyzer.finish()}; };

  while (!stop.stop_requested()) {
    std::optional<Frame> frame;
    try {
      frame = source.next();
      if (frame) check_frame(*frame);
    } catch (const std::exception& e) {
      throw RecordingFailed(e.what(), partial());
    }
    if (!frame) break;
    try {
      analyzer.push(*frame);
    } catch (const GestureError& e) {
      throw RecordingFailed(e.what(), partial());
    }
    writer.append(*frame);
  }
  return partial();
}

SessionReport analyze_frameset(ByteView frameset, AnalysisOptions options,
                               Recognizers recognizers) {
  const auto frames = decode_frameset(frameset);
  SessionAnalyzer analyzer(std::move(options), std::move(recognizers));
  for (const auto& f : frames) analyzer.push(f);
  return analyzer.finish();
}

SessionReport analyze_frameset(ByteView frameset, AnalysisOptions options) {
  const auto frames = decode_frameset(frameset);
  SessionAnalyzer analyzer(std::move(options),
                           default_recognizers(frames.empty() ? 120 : frames.front().height));
  for (const auto& f : frames) analyzer.push(f);
  return analyzer.finish();
}

}  // namespace examgrid::gesture
