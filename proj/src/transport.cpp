#include "examgrid/transport.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <system_error>

#include "examgrid/ftp_client.hpp"

namespace examgrid::transport {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kPartSuffix = ".part";

FtpLocation parse_ftp(std::string_view text, std::string_view original) {
  auto fail = [&](const std::string& why) {
    return TransportError("InvalidLocator", std::string(original) + ": " + why);
  };
  FtpLocation loc;
  auto slash = text.find('/');
  std::string_view authority = text.substr(0, slash);
  if (slash != std::string_view::npos) {
    std::string_view dir = text.substr(slash + 1);
    while (!dir.empty() && dir.back() == '/') dir.remove_suffix(1);
    loc.directory = dir;
  }
  if (auto at = authority.rfind('@'); at != std::string_view::npos) {
    auto userinfo = authority.substr(0, at);
    authority = authority.substr(at + 1);
    auto colon = userinfo.find(':');
    loc.username = userinfo.substr(0, colon);
    if (colon != std::string_view::npos) loc.password = userinfo.substr(colon + 1);
    if (loc.username.empty()) throw fail("empty user name");
  }
  if (auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    auto port_text = authority.substr(colon + 1);
    unsigned port = 0;
    auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || p != port_text.data() + port_text.size() || port == 0 || port > 65535)
      throw fail("bad port");
    loc.port = static_cast<std::uint16_t>(port);
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) throw fail("missing host");
  loc.host = authority;
  return loc;
}

fs::path require_dir(const DirLocation& d) {
  std::error_code ec;
  auto st = fs::status(d.path, ec);
  if (fs::exists(st) && !fs::is_directory(st))
    throw TransportError("ConnectionFailed", d.path.string() + " is not a directory");
  return d.path;
}

void dir_put(const DirLocation& d, std::string_view name, ByteView blob) {
  const fs::path dir = require_dir(d);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw TransportError("ConnectionFailed", dir.string() + ": " + ec.message());

  const fs::path final_path = dir / std::string(name);
  const fs::path temp_path = dir / (std::string(name) + std::string(kPartSuffix));
  {
    std::ofstream out(temp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw TransportError("WriteFailed", "cannot open " + temp_path.string());
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    out.flush();
    if (!out) {
      fs::remove(temp_path, ec);
      throw TransportError("WriteFailed", "short write to " + temp_path.string());
    }
  }
  fs::rename(temp_path, final_path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(temp_path, ignored);
    throw TransportError("WriteFailed", final_path.string() + ": " + ec.message());
  }
}

Bytes dir_get(const DirLocation& d, std::string_view name) {
  const fs::path path = require_dir(d) / std::string(name);
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw TransportError("NotFound", std::string(name));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TransportError("ReadFailed", "cannot open " + path.string());
  Bytes blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw TransportError("ReadFailed", path.string());
  return blob;
}

std::vector<std::string> dir_list(const DirLocation& d) {
  const fs::path dir = require_dir(d);
  std::vector<std::string> names;
  std::error_code ec;
  if (!fs::exists(dir, ec)) return names;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (!it->is_regular_file(ec)) continue;
    auto name = it->path().filename().string();
    if (name.ends_with(kPartSuffix)) continue;
    names.push_back(std::move(name));
  }
  if (ec) throw TransportError("ConnectionFailed", dir.string() + ": " + ec.message());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

Locator Locator::dir(fs::path path) {
  Locator l;
  l.scheme_ = Scheme::Dir;
  l.dir_.path = std::move(path);
  return l;
}

Locator Locator::ftp(FtpLocation location) {
  Locator l;
  l.scheme_ = Scheme::Ftp;
  l.ftp_ = std::move(location);
  return l;
}

Locator Locator::parse(std::string_view text) {
  if (text.starts_with("dir:")) {
    auto path = text.substr(4);
    if (path.empty()) throw TransportError("InvalidLocator", std::string(text) + ": empty path");
    return dir(fs::path(std::string(path)));
  }
  if (text.starts_with("ftp://")) return ftp(parse_ftp(text.substr(6), text));
  throw TransportError("InvalidLocator", std::string(text) + ": expected dir:<path> or ftp://...");
}

std::string Locator::to_string() const {
  if (scheme_ == Scheme::Dir) return "dir:" + dir_.path.string();
  std::string out = "ftp://" + ftp_.username;
  if (!ftp_.password.empty()) out += ":" + ftp_.password;
  out += "@" + ftp_.host + ":" + std::to_string(ftp_.port) + "/" + ftp_.directory;
  return out;
}

std::string Locator::redacted() const {
  if (scheme_ == Scheme::Dir || ftp_.password.empty()) return to_string();
  Locator copy = *this;
  copy.ftp_.password = "***";
  return copy.to_string();
}

void check_name(std::string_view name) {
  if (name.empty() || name == "." || name == ".." ||
      name.find_first_of("/\\\r\n") != std::string_view::npos || name.ends_with(kPartSuffix))
    throw TransportError("InvalidName", "'" + std::string(name) + "' is not a valid file name");
}

void put(const Locator& at, std::string_view name, ByteView blob) {
  check_name(name);
  if (at.scheme() == Locator::Scheme::Dir) return dir_put(at.as_dir(), name, blob);
  FtpClient(at.as_ftp()).put(name, blob);
}

Bytes get(const Locator& at, std::string_view name) {
  check_name(name);
  if (at.scheme() == Locator::Scheme::Dir) return dir_get(at.as_dir(), name);
  return FtpClient(at.as_ftp()).get(name);
}

std::vector<std::string> list(const Locator& at) {
  if (at.scheme() == Locator::Scheme::Dir) return dir_list(at.as_dir());
  return FtpClient(at.as_ftp()).list();
}

bool glob_match(std::string_view pattern, std::string_view name) {
  // Iterative matcher with single-star backtracking.
  std::size_t p = 0, n = 0, star = std::string_view::npos, mark = 0;
  while (n < name.size()) {
    if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = n;
    } else if (p < pattern.size() && pattern[p] == name[n]) {
      ++p;
      ++n;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      n = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

std::string_view to_string(WatchEvent::Kind k) {
  return k == WatchEvent::Kind::Appeared ? "Appeared" : "Degraded";
}

Watcher::Watcher(Locator at, std::string pattern, std::chrono::milliseconds interval, WatchSink sink)
    : Watcher([at = std::move(at)] { return list(at); }, std::move(pattern), interval,
              std::move(sink)) {}

Watcher::Watcher(ListFn lister, std::string pattern, std::chrono::milliseconds interval,
                 WatchSink sink)
    : lister_(std::move(lister)),
      pattern_(std::move(pattern)),
      interval_(interval),
      sink_(std::move(sink)) {
  if (interval_ < kMinInterval)
    throw std::invalid_argument("watch interval must be at least 100 ms");
  thread_ = std::jthread([this](std::stop_token stop) { run(stop); });
}

Watcher::~Watcher() { cancel(); }

void Watcher::cancel() {
  std::lock_guard lock(cancel_mutex_);
  thread_.request_stop();
  if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
}

void Watcher::run(std::stop_token stop) {
  int failures = 0;
  bool degraded = false;
  auto emit = [&](WatchEvent ev) {
    if (!stop.stop_requested()) sink_(ev);
  };
  while (!stop.stop_requested()) {
    try {
      auto names = lister_();
      ++polls_;
      failures = 0;
      degraded = false;
      std::sort(names.begin(), names.end());
      for (const auto& name : names) {
        if (!glob_match(pattern_, name)) continue;
        if (seen_.insert(name).second) emit({WatchEvent::Kind::Appeared, name, {}});
      }
    } catch (const std::exception& e) {
      ++polls_;
      if (++failures >= kDegradedAfter && !degraded) {
        degraded = true;
        emit({WatchEvent::Kind::Degraded, {}, e.what()});
      }
    }
    std::unique_lock lock(wait_mutex_);
    wake_.wait_for(lock, stop, interval_, [] { return false; });
  }
}

std::unique_ptr<Watcher> watch(const Locator& at, std::string pattern,
                               std::chrono::milliseconds interval, WatchSink sink) {
  return std::make_unique<Watcher>(at, std::move(pattern), interval, std::move(sink));
}

}  // namespace examgrid::transport
