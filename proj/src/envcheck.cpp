#include "examgrid/envcheck.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace examgrid::envcheck {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::string local_host() {
  char buf[256] = {};
  if (::gethostname(buf, sizeof buf - 1) != 0) return "unknown";
  return buf;
}

const std::vector<std::string>& bool_keys() {
  static const std::vector<std::string> keys = {
      std::string(kCameraPresent), std::string(kCameraActive), std::string(kMicPresent),
      std::string(kMicActive), std::string(kRecordingTamper)};
  return keys;
}

bool* field(AttestationRecord& r, std::string_view key) {
  if (key == kCameraPresent) return &r.camera_present;
  if (key == kCameraActive) return &r.camera_active;
  if (key == kMicPresent) return &r.mic_present;
  if (key == kMicActive) return &r.mic_active;
  if (key == kRecordingTamper) return &r.recording_tamper;
  return nullptr;
}

}  // namespace

std::string Fixture::get(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

bool Fixture::flag(const std::string& key, bool fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  if (it->second == "true") return true;
  if (it->second == "false") return false;
  throw std::invalid_argument("fixture: " + key + " must be true or false");
}

Fixture parse_fixture(std::string_view text) {
  Fixture f;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("fixture line " + std::to_string(n) + ": expected key=value");
    f.values[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return f;
}

Fixture load_fixture(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read fixture " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_fixture(ss.str());
}

SimulatedProbe::SimulatedProbe(std::string name, Fixture fixture)
    : name_(std::move(name)), fixture_(std::move(fixture)) {
  if (name_ != "camera" && name_ != "mic" && name_ != "recording")
    throw std::invalid_argument("no simulated probe named '" + name_ + "'");
}

std::vector<std::string> SimulatedProbe::covers() const {
  if (name_ == "recording") return {std::string(kRecordingTamper)};
  return {name_ + ".present", name_ + ".active"};
}

ProbeReading SimulatedProbe::run() {
  const auto delay = fixture_.get(name_ + ".delay_ms");
  if (!delay.empty()) std::this_thread::sleep_for(std::chrono::milliseconds(std::stoll(delay)));
  if (fixture_.flag(name_ + ".fail", false)) throw std::runtime_error("simulated failure");

  ProbeReading r;
  for (const auto& key : covers()) r.fields[key] = fixture_.flag(key, key != kRecordingTamper);
  if (auto note = fixture_.get(name_ + ".note"); !note.empty()) r.notes.push_back(note);
  return r;
}

std::vector<std::shared_ptr<Probe>> simulated_probes(const Fixture& fixture) {
  return {std::make_shared<SimulatedProbe>("camera", fixture),
          std::make_shared<SimulatedProbe>("mic", fixture),
          std::make_shared<SimulatedProbe>("recording", fixture)};
}

AttestationRecord run_probes(const std::vector<std::shared_ptr<Probe>>& probes,
                             const ProbeOptions& options) {
  if (probes.empty()) throw std::invalid_argument("at least one probe is required");
  AttestationRecord rec;
  rec.probe_time = std::chrono::floor<std::chrono::seconds>(options.now);
  rec.host = one_line(options.host.empty() ? local_host() : options.host);

  for (const auto& probe : probes) {
    std::packaged_task<ProbeReading()> task([probe] { return probe->run(); });
    auto result = task.get_future();
    std::thread(std::move(task)).detach();

    auto clear = [&] {
      for (const auto& key : probe->covers())
        if (bool* f = field(rec, key)) *f = false;
    };
    if (result.wait_for(options.budget) != std::future_status::ready) {
      clear();
      rec.notes.push_back("probe " + probe->name() + " timed out after " +
                          std::to_string(options.budget.count()) + " ms");
      continue;
    }
    try {
      auto reading = result.get();
      for (const auto& [key, value] : reading.fields)
        if (bool* f = field(rec, key)) *f = value;
      for (auto& n : reading.notes) rec.notes.push_back(one_line(n));
    } catch (const std::exception&) {
      clear();
      rec.notes.push_back("probe " + probe->name() + " failed");
    }
  }
  if (rec.recording_tamper && rec.notes.empty())
    rec.notes.push_back("recording tamper reported");
  return rec;
}

std::string format_time(Timestamp t) {
  const auto days = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{days};
  const std::chrono::hh_mm_ss hms{t - days};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

Timestamp parse_time(std::string_view s) {
  int y, mo, d, h, mi, sec;
  char tail = 0;
  const std::string str(s);
  if (str.size() != 20 ||
      std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &sec, &tail) != 7 ||
      tail != 'Z')
    throw std::invalid_argument("expected YYYY-MM-DDTHH:MM:SSZ, got '" + str + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 59 || h < 0 || mi < 0 || sec < 0)
    throw std::invalid_argument("invalid date or time '" + str + "'");
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} +
         std::chrono::seconds{sec};
}

std::string serialize_envrec(const AttestationRecord& r) {
  auto check = [](const std::string& s, const char* what) {
    if (s.find_first_of("\r\n") != std::string::npos)
      throw std::invalid_argument(std::string(what) + " must be a single line");
  };
  check(r.host, "host");
  for (const auto& n : r.notes) check(n, "note");
  if (r.recording_tamper && r.notes.empty())
    throw std::invalid_argument("recording.tamper=true needs an explanatory note");

  auto b = [](bool v) { return v ? "true" : "false"; };
  std::string out = "ENVREC 1\n";
  out += std::string(kCameraPresent) + "=" + b(r.camera_present) + "\n";
  out += std::string(kCameraActive) + "=" + b(r.camera_active) + "\n";
  out += std::string(kMicPresent) + "=" + b(r.mic_present) + "\n";
  out += std::string(kMicActive) + "=" + b(r.mic_active) + "\n";
  out += std::string(kRecordingTamper) + "=" + b(r.recording_tamper) + "\n";
  out += "probe.time=" + format_time(r.probe_time) + "\n";
  out += "host=" + r.host + "\n";
  for (const auto& n : r.notes) out += "note=" + n + "\n";
  return out;
}

AttestationRecord parse_envrec(std::string_view text) {
  AttestationRecord r;
  std::set<std::string> seen;
  int n = 0;
  std::size_t pos = 0;
  bool header = false;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++n;
    std::string line(raw);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    if (n == 1) {
      if (line != "ENVREC 1") throw SyntaxError(1, "expected 'ENVREC 1'");
      header = true;
      continue;
    }
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) throw SyntaxError(n, "expected key=value");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);

    if (key == "note") {
      r.notes.push_back(value);
      continue;
    }
    const bool known = field(r, key) || key == "probe.time" || key == "host";
    if (!known) {
      r.notes.push_back(line);
      continue;
    }
    if (!seen.insert(key).second) throw SyntaxError(n, "duplicate key '" + key + "'");
    if (bool* f = field(r, key)) {
      if (value == "true") *f = true;
      else if (value == "false") *f = false;
      else throw SyntaxError(n, key + " must be true or false");
    } else if (key == "probe.time") {
      try {
        r.probe_time = parse_time(value);
      } catch (const std::invalid_argument& e) {
        throw SyntaxError(n, e.what());
      }
    } else {
      r.host = value;
    }
  }
  if (!header) throw SyntaxError(1, "expected 'ENVREC 1'");
  for (const auto& key : bool_keys())
    if (!seen.count(key)) throw SyntaxError(n + 1, "missing " + key);
  if (!seen.count("probe.time")) throw SyntaxError(n + 1, "missing probe.time");
  if (!seen.count("host")) throw SyntaxError(n + 1, "missing host");
  if (r.recording_tamper && r.notes.empty())
    throw SyntaxError(n, "recording.tamper=true without a note");
  return r;
}

std::string to_string(Violation v) {
  switch (v) {
    case Violation::CameraMissing: return "CameraMissing";
    case Violation::CameraInactive: return "CameraInactive";
    case Violation::MicMissing: return "MicMissing";
    case Violation::RecordingTampered: return "RecordingTampered";
  }
  return "?";
}

std::string to_string(Warning w) {
  switch (w) {
    case Warning::MicInactive: return "MicInactive";
  }
  return "?";
}

PolicyResult check_policy(const AttestationRecord& r) {
  PolicyResult out;
  if (!r.camera_present) out.violations.push_back(Violation::CameraMissing);
  if (!r.camera_active) out.violations.push_back(Violation::CameraInactive);
  if (!r.mic_present) out.violations.push_back(Violation::MicMissing);
  if (!r.mic_active) out.warnings.push_back(Warning::MicInactive);
  if (r.recording_tamper) out.violations.push_back(Violation::RecordingTampered);
  return out;
}

}  // namespace examgrid::envcheck
