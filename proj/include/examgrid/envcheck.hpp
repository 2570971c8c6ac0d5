#pragma once

// Student environment attestation: simulated camera/microphone probes, the
// start-of-exam policy and the ENVREC text record.
//
//   ENVREC 1
//   camera.present=true
//   camera.active=true
//   mic.present=true
//   mic.active=true
//   recording.tamper=false
//   probe.time=2026-03-01T09:00:00Z
//   host=desk-07
//   note=...            (zero or more)

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "examgrid/error.hpp"

namespace examgrid::envcheck {

using Clock = std::chrono::system_clock;
using Timestamp = std::chrono::sys_seconds;

struct AttestationRecord {
  bool camera_present = false;
  bool camera_active = false;
  bool mic_present = false;
  bool mic_active = false;
  bool recording_tamper = false;
  Timestamp probe_time{};
  std::string host;
  std::vector<std::string> notes;

  bool operator==(const AttestationRecord&) const = default;
};

class SyntaxError : public Error {
 public:
  SyntaxError(int line, const std::string& reason)
      : Error("SyntaxError", "line " + std::to_string(line) + ": " + reason), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// Field keys as they appear in ENVREC.
inline constexpr std::string_view kCameraPresent = "camera.present";
inline constexpr std::string_view kCameraActive = "camera.active";
inline constexpr std::string_view kMicPresent = "mic.present";
inline constexpr std::string_view kMicActive = "mic.active";
inline constexpr std::string_view kRecordingTamper = "recording.tamper";

struct ProbeReading {
  std::map<std::string, bool> fields;  // keyed as above
  std::vector<std::string> notes;
};

class Probe {
 public:
  virtual ~Probe() = default;
  virtual std::string name() const = 0;
  // Fields reset to false when the probe fails or times out.
  virtual std::vector<std::string> covers() const = 0;
  // Throws on probe failure.
  virtual ProbeReading run() = 0;
};

// Probe backed by a fixture. Fixture lines are key=value; '#' starts a
// comment. Recognised keys:
//   camera.present / camera.active / mic.present / mic.active /
//   recording.tamper = true|false
//   <probe>.fail = true|false       make the named probe throw
//   <probe>.delay_ms = N            make the named probe sleep first
//   <probe>.note = text             extra note from that probe
//   host = text
// Probe names are camera, mic and recording.
struct Fixture {
  std::map<std::string, std::string> values;
  std::string get(const std::string& key, const std::string& fallback = "") const;
  bool flag(const std::string& key, bool fallback) const;
};

Fixture parse_fixture(std::string_view text);
Fixture load_fixture(const std::string& path);

class SimulatedProbe : public Probe {
 public:
  SimulatedProbe(std::string name, Fixture fixture);
  std::string name() const override { return name_; }
  std::vector<std::string> covers() const override;
  ProbeReading run() override;

 private:
  std::string name_;
  Fixture fixture_;
};

std::vector<std::shared_ptr<Probe>> simulated_probes(const Fixture& fixture);

struct ProbeOptions {
  std::chrono::milliseconds budget{5000};
  std::string host;  // empty: the machine's host name
  std::chrono::system_clock::time_point now = Clock::now();
};

// Runs probes one after another, each under the time budget. A probe that
// throws or overruns leaves its covered fields false and adds a note. A
// timed-out probe keeps running detached; it holds its own reference.
// Throws std::invalid_argument when no probe is given.
AttestationRecord run_probes(const std::vector<std::shared_ptr<Probe>>& probes,
                             const ProbeOptions& options = {});

std::string serialize_envrec(const AttestationRecord& record);
// Unknown keys are kept as notes of the form "key=value".
AttestationRecord parse_envrec(std::string_view text);

enum class Violation { CameraMissing, CameraInactive, MicMissing, RecordingTampered };
enum class Warning { MicInactive };

std::string to_string(Violation v);
std::string to_string(Warning w);

struct PolicyResult {
  std::vector<Violation> violations;  // blocking
  std::vector<Warning> warnings;

  bool ok() const { return violations.empty(); }
};

// One entry per failing field. Camera absent or off, microphone absent, or
// tampering block the exam; a silent microphone only warns.
PolicyResult check_policy(const AttestationRecord& record);

std::string format_time(Timestamp t);  // 2026-03-01T09:00:00Z
Timestamp parse_time(std::string_view s);  // throws std::invalid_argument

}  // namespace examgrid::envcheck
