#include "examgrid/ftp_client.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <optional>
#include <sstream>

namespace examgrid::transport {

namespace {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Socket() { close(); }

  int fd() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }

  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  void shutdown_write() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
  }

 private:
  int fd_ = -1;
};

Socket connect_to(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw TransportError("ConnectionFailed", host + ": " + ::gai_strerror(rc));

  std::string last_error = "no address";
  Socket result;
  for (auto* ai = res; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s) continue;
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    ::setsockopt(s.fd(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(s.fd(), SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
      result = std::move(s);
      break;
    }
    last_error = std::strerror(errno);
  }
  ::freeaddrinfo(res);
  if (!result)
    throw TransportError("ConnectionFailed", host + ":" + service + ": " + last_error);
  return result;
}

void send_all(const Socket& s, ByteView data, const char* code) {
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(s.fd(), data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw TransportError(code, std::string("send: ") + std::strerror(errno));
    off += static_cast<std::size_t>(n);
  }
}

struct Reply {
  int code = 0;
  std::string text;

  bool positive_preliminary() const { return code / 100 == 1; }
  bool completion() const { return code / 100 == 2; }
  bool intermediate() const { return code / 100 == 3; }
};

class ControlConnection {
 public:
  ControlConnection(const FtpLocation& loc, std::chrono::milliseconds timeout)
      : host_(loc.host), timeout_(timeout) {
    sock_ = connect_to(loc.host, loc.port, timeout);
    auto greeting = read_reply("ConnectionFailed");
    if (greeting.code != 220)
      throw TransportError("ConnectionFailed", "server greeting: " + greeting.text);

    auto user = command("USER " + loc.username, "ConnectionFailed");
    if (user.intermediate()) {
      auto pass = command("PASS " + loc.password, "ConnectionFailed");
      if (!pass.completion()) throw TransportError("AuthFailed", pass.text);
    } else if (!user.completion()) {
      throw TransportError("AuthFailed", user.text);
    }
    auto type = command("TYPE I", "ConnectionFailed");
    if (!type.completion()) throw TransportError("ProtocolError", "TYPE I refused: " + type.text);
  }

  ~ControlConnection() {
    if (!sock_) return;
    try {
      send_line("QUIT", "ConnectionFailed");
      read_reply("ConnectionFailed");
    } catch (const std::exception&) {
    }
  }

  Reply command(const std::string& line, const char* failure_code) {
    send_line(line, failure_code);
    return read_reply(failure_code);
  }

  Reply read_reply(const char* failure_code) {
    Reply r;
    std::string line = read_line(failure_code);
    if (line.size() < 3) throw TransportError("ProtocolError", "short reply '" + line + "'");
    r.code = parse_code(line);
    r.text = line;
    if (line.size() > 3 && line[3] == '-') {
      const std::string terminator = line.substr(0, 3) + " ";
      while (true) {
        line = read_line(failure_code);
        r.text += "\n" + line;
        if (line.starts_with(terminator)) break;
      }
    }
    return r;
  }

  // Sends PASV and connects to the advertised data port.
  Socket open_data(const char* failure_code) {
    auto r = command("PASV", failure_code);
    if (r.code != 227) throw TransportError(failure_code, "PASV refused: " + r.text);
    auto open = r.text.find('(');
    auto close = r.text.find(')', open == std::string::npos ? 0 : open);
    if (open == std::string::npos || close == std::string::npos)
      throw TransportError("ProtocolError", "unparseable PASV reply: " + r.text);
    std::istringstream in(r.text.substr(open + 1, close - open - 1));
    int v[6];
    char comma = 0;
    for (int i = 0; i < 6; ++i) {
      if (!(in >> v[i]) || v[i] < 0 || v[i] > 255)
        throw TransportError("ProtocolError", "unparseable PASV reply: " + r.text);
      if (i < 5 && (!(in >> comma) || comma != ','))
        throw TransportError("ProtocolError", "unparseable PASV reply: " + r.text);
    }
    const std::string host = std::to_string(v[0]) + "." + std::to_string(v[1]) + "." +
                             std::to_string(v[2]) + "." + std::to_string(v[3]);
    const auto port = static_cast<std::uint16_t>(v[4] * 256 + v[5]);
    return connect_to(host, port, timeout_);
  }

 private:
  static int parse_code(const std::string& line) {
    int code = 0;
    for (int i = 0; i < 3; ++i) {
      if (line[i] < '0' || line[i] > '9') throw TransportError("ProtocolError", "bad reply '" + line + "'");
      code = code * 10 + (line[i] - '0');
    }
    return code;
  }

  void send_line(const std::string& line, const char* failure_code) {
    std::string wire = line + "\r\n";
    send_all(sock_, to_bytes(wire), failure_code);
  }

  std::string read_line(const char* failure_code) {
    while (true) {
      auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      char chunk[1024];
      ssize_t n = ::recv(sock_.fd(), chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0)
        throw TransportError(failure_code, host_ + ": control connection closed");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string host_;
  std::chrono::milliseconds timeout_;
  Socket sock_;
  std::string buffer_;
};

Bytes read_all(const Socket& s, const char* failure_code) {
  Bytes out;
  std::uint8_t chunk[64 * 1024];
  while (true) {
    ssize_t n = ::recv(s.fd(), chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) throw TransportError(failure_code, std::string("data recv: ") + std::strerror(errno));
    if (n == 0) break;
    out.insert(out.end(), chunk, chunk + n);
  }
  return out;
}

constexpr std::string_view kPartSuffix = ".part";

}  // namespace

FtpClient::FtpClient(FtpLocation location, std::chrono::milliseconds timeout)
    : location_(std::move(location)), timeout_(timeout) {}

std::string FtpClient::remote_path(std::string_view name) const {
  if (location_.directory.empty()) return std::string(name);
  return location_.directory + "/" + std::string(name);
}

void FtpClient::put(std::string_view name, ByteView blob) {
  check_name(name);
  const std::string final_path = remote_path(name);
  const std::string temp_path = final_path + std::string(kPartSuffix);

  ControlConnection ctl(location_, timeout_);
  {
    Socket data = ctl.open_data("WriteFailed");
    auto r = ctl.command("STOR " + temp_path, "WriteFailed");
    if (!r.positive_preliminary()) throw TransportError("WriteFailed", r.text);
    send_all(data, blob, "WriteFailed");
    data.close();
    auto done = ctl.read_reply("WriteFailed");
    if (!done.completion()) throw TransportError("WriteFailed", done.text);
  }
  auto from = ctl.command("RNFR " + temp_path, "WriteFailed");
  if (!from.intermediate()) throw TransportError("WriteFailed", "RNFR: " + from.text);
  auto to = ctl.command("RNTO " + final_path, "WriteFailed");
  if (!to.completion()) throw TransportError("WriteFailed", "RNTO: " + to.text);
}

Bytes FtpClient::get(std::string_view name) {
  check_name(name);
  ControlConnection ctl(location_, timeout_);
  Socket data = ctl.open_data("ReadFailed");
  auto r = ctl.command("RETR " + remote_path(name), "ReadFailed");
  if (r.code == 550) throw TransportError("NotFound", std::string(name));
  if (!r.positive_preliminary()) throw TransportError("ReadFailed", r.text);
  Bytes blob = read_all(data, "ReadFailed");
  data.close();
  auto done = ctl.read_reply("ReadFailed");
  if (!done.completion()) throw TransportError("ReadFailed", done.text);
  return blob;
}

std::vector<std::string> FtpClient::list() {
  ControlConnection ctl(location_, timeout_);
  Socket data = ctl.open_data("ConnectionFailed");
  auto r = ctl.command(location_.directory.empty() ? "NLST" : "NLST " + location_.directory,
                       "ConnectionFailed");
  // Many servers answer NLST on an empty directory with 450/550.
  if (r.code == 450 || r.code == 550) return {};
  if (!r.positive_preliminary()) throw TransportError("ConnectionFailed", "NLST: " + r.text);
  Bytes raw = read_all(data, "ConnectionFailed");
  data.close();
  auto done = ctl.read_reply("ConnectionFailed");
  if (!done.completion()) throw TransportError("ConnectionFailed", "NLST: " + done.text);

  std::vector<std::string> names;
  std::istringstream in(examgrid::to_string(raw));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (auto slash = line.rfind('/'); slash != std::string::npos) line.erase(0, slash + 1);
    if (line.empty() || line.ends_with(kPartSuffix)) continue;
    names.push_back(line);
  }
  return names;
}

}  // namespace examgrid::transport
