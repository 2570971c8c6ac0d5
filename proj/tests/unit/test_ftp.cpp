#include "doctest.h"

#include <algorithm>
#include <condition_variable>

#include "examgrid/ftp_client.hpp"
#include "examgrid/transport.hpp"
#include "fake_ftp.hpp"
#include "generators.hpp"

using namespace examgrid;
using namespace examgrid::transport;
using namespace std::chrono_literals;
using testsupport::FakeFtpServer;
using Lines = std::vector<std::string>;

namespace {

FtpLocation at(const FakeFtpServer& srv, std::string dir = "") {
  FtpLocation loc;
  loc.host = "127.0.0.1";
  loc.port = srv.port();
  loc.username = "alice";
  loc.password = "pw";
  loc.directory = std::move(dir);
  return loc;
}

std::string error_code(auto&& fn) {
  try {
    fn();
  } catch (const examgrid::Error& e) {
    return e.code();
  }
  return "none";
}

// The server records commands as it reads them; the client's QUIT reply is
// read before the client returns, so the transcript is complete by then.
Lines login() { return {"USER alice", "PASS pw", "TYPE I", "PASV"}; }

Lines concat(Lines a, const Lines& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("put sends the temp-name STOR and renames into place") {
  FakeFtpServer srv;
  FtpClient(at(srv)).put("exam.rts", to_bytes("payload"));
  CHECK(srv.last_session() ==
        concat(login(), {"STOR exam.rts.part", "RNFR exam.rts.part", "RNTO exam.rts", "QUIT"}));
  const auto files = srv.files();
  REQUIRE(files.size() == 1);
  CHECK(files.begin()->first == "exam.rts");
  CHECK(files.begin()->second == to_bytes("payload"));
}

TEST_CASE("remote directory prefixes every path") {
  FakeFtpServer srv;
  FtpClient c(at(srv, "inbox"));
  c.put("a.rts", to_bytes("1"));
  CHECK(srv.last_session() ==
        concat(login(), {"STOR inbox/a.rts.part", "RNFR inbox/a.rts.part", "RNTO inbox/a.rts", "QUIT"}));
  CHECK(c.get("a.rts") == to_bytes("1"));
  CHECK(srv.last_session() == concat(login(), {"RETR inbox/a.rts", "QUIT"}));
  CHECK(c.list() == Lines{"a.rts"});
  CHECK(srv.last_session() == concat(login(), {"NLST inbox", "QUIT"}));
}

TEST_CASE("get transcript and 1 MiB round trip") {
  FakeFtpServer srv;
  testsupport::Rng rng(99);
  const auto blob = testsupport::random_bytes(rng, 1 << 20);
  FtpClient c(at(srv));
  c.put("big.bin", blob);
  CHECK(c.get("big.bin") == blob);
  CHECK(srv.last_session() == concat(login(), {"RETR big.bin", "QUIT"}));
}

TEST_CASE("missing file is NotFound, empty file is empty") {
  FakeFtpServer srv;
  FtpClient c(at(srv));
  CHECK(error_code([&] { c.get("nope.rts"); }) == "NotFound");
  srv.add_file("empty.rts", {});
  CHECK(c.get("empty.rts").empty());
}

TEST_CASE("NLST of three names") {
  FakeFtpServer srv;
  srv.add_file("a.rts", to_bytes("1"));
  srv.add_file("b.rts", to_bytes("2"));
  srv.add_file("c.txt", to_bytes("3"));
  srv.add_file("d.rts.part", to_bytes("in flight"));
  srv.add_file("sub/e.rts", to_bytes("elsewhere"));
  FtpClient c(at(srv));
  CHECK(c.list() == Lines{"a.rts", "b.rts", "c.txt"});
  CHECK(srv.last_session() == concat(login(), {"NLST", "QUIT"}));
}

TEST_CASE("TYPE I precedes every transfer command") {
  FakeFtpServer srv;
  FtpClient c(at(srv));
  c.put("x", to_bytes("1"));
  c.get("x");
  c.list();
  for (const auto& session : srv.sessions()) {
    const auto type = std::find(session.begin(), session.end(), "TYPE I");
    REQUIRE(type != session.end());
    for (auto it = session.begin(); it != session.end(); ++it) {
      const bool transfer = it->starts_with("STOR") || it->starts_with("RETR") || it->starts_with("NLST");
      if (transfer) CHECK(it > type);
    }
  }
}

TEST_CASE("login failure and refused connections") {
  FakeFtpServer srv;
  srv.require_login("alice", "other");
  CHECK(error_code([&] { FtpClient(at(srv)).list(); }) == "AuthFailed");

  FakeFtpServer down;
  down.refuse_next(1, FakeFtpServer::Refusal::Reply421);
  CHECK(error_code([&] { FtpClient(at(down)).list(); }) == "ConnectionFailed");
  down.refuse_next(1, FakeFtpServer::Refusal::Close);
  CHECK(error_code([&] { FtpClient(at(down)).list(); }) == "ConnectionFailed");
  CHECK(down.refused() == 2);

  FtpLocation nowhere = at(srv);
  {
    FakeFtpServer gone;
    nowhere.port = gone.port();
  }
  CHECK(error_code([&] { FtpClient(nowhere, 2s).list(); }) == "ConnectionFailed");
}

TEST_CASE("transport front end dispatches to the FTP backend") {
  FakeFtpServer srv;
  const auto loc = Locator::ftp(at(srv, "box"));
  put(loc, "exam.rts", to_bytes("e"));
  CHECK(list(loc) == Lines{"exam.rts"});
  CHECK(get(loc, "exam.rts") == to_bytes("e"));
}

TEST_CASE("watcher over FTP: three refusals degrade, then the file appears once") {
  FakeFtpServer srv;
  srv.add_file("exam.rts", to_bytes("e"));
  srv.refuse_next(3);
  std::mutex mu;
  std::condition_variable cv;
  std::vector<WatchEvent> events;
  Watcher w(Locator::ftp(at(srv)), "*.rts", 100ms, [&](const WatchEvent& e) {
    std::lock_guard lock(mu);
    events.push_back(e);
    cv.notify_all();
  });
  {
    std::unique_lock lock(mu);
    REQUIRE(cv.wait_for(lock, 5s, [&] { return events.size() >= 2; }));
  }
  std::this_thread::sleep_for(400ms);
  w.cancel();
  REQUIRE(events.size() == 2);
  CHECK(events[0].kind == WatchEvent::Kind::Degraded);
  CHECK(events[1].kind == WatchEvent::Kind::Appeared);
  CHECK(events[1].name == "exam.rts");
  CHECK(srv.refused() == 3);
}
