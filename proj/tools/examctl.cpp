// examctl: headless driver for every step of the exam flow.
//
// Exit codes: 0 success, 1 domain error (code on stderr), 2 usage error.

#include <unistd.h>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "examgrid/envcheck.hpp"
#include "examgrid/gesture/record.hpp"
#include "examgrid/marking.hpp"
#include "examgrid/rts.hpp"
#include "examgrid/service.hpp"
#include "examgrid/session.hpp"
#include "examgrid/transport.hpp"
#include "examgrid/vqp.hpp"

namespace fs = std::filesystem;
using namespace examgrid;

namespace {

// Non-domain failure that still maps to exit 1 (unreadable file, bad script).
struct CliError : Error {
  using Error::Error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("IoError", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Bytes read_bytes(const fs::path& path) { return to_bytes(read_text(path)); }

void write_bytes(const fs::path& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError("IoError", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw CliError("IoError", "cannot write " + path.string());
}

// dir:$EXAMGRID_HOME/<sub> when the flag was not given.
transport::Locator locator_or_home(const std::string& given, const char* sub) {
  if (!given.empty()) return transport::Locator::parse(given);
  const char* home = std::getenv("EXAMGRID_HOME");
  if (!home || !*home)
    throw CliError("NoLocator", std::string("give a locator or set EXAMGRID_HOME (") + sub + ")");
  return transport::Locator::dir(fs::path(home) / sub);
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char n = s[++i];
      out += n == 'n' ? '\n' : n;
    } else {
      out += s[i];
    }
  }
  return out;
}

// `q=response` per line; '#' comments; "\n" in a response is a line break.
vqp::Responses parse_answer_script(const std::string& text) {
  vqp::Responses out;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    int q = 0;
    try {
      std::size_t used = 0;
      q = std::stoi(line.substr(0, eq), &used);
      if (eq == std::string::npos || used != eq) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw CliError("BadAnswerScript", "line " + std::to_string(n) + ": expected q=response");
    }
    out[q] = unescape(std::string_view(line).substr(eq + 1));
  }
  return out;
}

std::optional<std::string> prompt_passkey() {
  if (!::isatty(STDIN_FILENO)) return std::nullopt;
  std::cerr << "Passkey: " << std::flush;
  std::string key;
  if (!std::getline(std::cin, key)) return std::nullopt;
  return key;
}

std::vector<rts::Entry> open_return(const fs::path& path, const std::string& key) {
  const Bytes blob = read_bytes(path);
  std::optional<std::string> passkey;
  if (!key.empty()) passkey = key;
  return rts::unpack(blob, passkey);
}

vqp::QuestionPaper paper_entry(const std::vector<rts::Entry>& entries) {
  const auto* e = rts::find(entries, rts::EntryType::Vqp);
  if (!e) throw CliError("BadReturn", "no VQP entry");
  return vqp::parse_vqp(examgrid::to_string(e->data));
}

volatile std::sig_atomic_t g_interrupted = 0;
void on_signal(int) { g_interrupted = 1; }

// --- subcommands ---------------------------------------------------------------

int cmd_validate(const std::string& file) {
  const auto paper = vqp::parse_vqp(read_text(file));
  std::cout << "OK " << paper.id << " " << vqp::to_string(paper.variant) << " "
            << paper.questions.size() << " questions\n";
  return 0;
}

int cmd_pack(const std::string& file, const std::string& out, const std::string& passkey, bool keep) {
  auto paper = vqp::parse_vqp(read_text(file));
  if (!keep && paper.variant == vqp::Variant::Design) paper = vqp::to_exam(paper);
  std::optional<std::string> key;
  if (!passkey.empty()) key = passkey;
  const auto blob = rts::pack({rts::make_entry(std::string(session::kPaperEntry), rts::EntryType::Vqp,
                                               to_bytes(vqp::serialize_vqp(paper)))},
                              key);
  write_bytes(out, blob);
  std::cout << out << "\n";
  return 0;
}

int cmd_publish(const std::string& file, const std::vector<std::string>& to) {
  const Bytes blob = read_bytes(file);
  rts::is_encrypted(blob);  // rejects non-RTS input early
  std::vector<transport::Locator> targets;
  for (const auto& t : to) targets.push_back(transport::Locator::parse(t));
  if (targets.empty()) targets.push_back(locator_or_home("", "inbox"));
  const std::string name = fs::path(file).filename().string();
  int failed = 0;
  for (const auto& t : targets) {
    try {
      transport::put(t, name, blob);
      std::cout << "published " << name << " " << t.redacted() << "\n";
    } catch (const transport::TransportError& e) {
      ++failed;
      std::cerr << e.code() << ": " << t.redacted() << ": " << e.what() << "\n";
    }
  }
  return failed ? 1 : 0;
}

int cmd_watch(const std::string& at, const std::string& pattern, int count, int interval_ms, int timeout_ms) {
  const auto loc = locator_or_home(at, "inbox");
  std::mutex mu;
  std::condition_variable cv;
  int seen = 0;
  transport::Watcher w(loc, pattern, std::chrono::milliseconds(interval_ms), [&](const transport::WatchEvent& ev) {
    std::lock_guard lk(mu);
    if (ev.kind == transport::WatchEvent::Kind::Appeared) {
      std::cout << "APPEARED " << ev.name << std::endl;
      ++seen;
    } else {
      std::cerr << "DEGRADED " << ev.detail << std::endl;
    }
    cv.notify_all();
  });
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  std::unique_lock lk(mu);
  while (!g_interrupted && (count <= 0 || seen < count)) {
    if (timeout_ms > 0 && std::chrono::steady_clock::now() >= deadline) break;
    cv.wait_for(lk, std::chrono::milliseconds(100));
  }
  lk.unlock();
  w.cancel();
  if (count > 0 && seen < count) {
    std::cerr << "Timeout: " << seen << " of " << count << " expected files appeared\n";
    return 1;
  }
  return 0;
}

struct TakeOptions {
  std::string rts;
  std::string passkey;
  std::string frames;
  std::string answers;
  std::string out;
  std::string env;
  std::string student = "student";
  std::string upload;
  bool upload_set = false;
};

int cmd_take(const TakeOptions& o) {
  const Bytes blob = read_bytes(o.rts);
  const auto answers = o.answers.empty() ? vqp::Responses{} : parse_answer_script(read_text(o.answers));

  session::StudentSession s(o.student);
  s.await_paper();
  s.on_paper_appeared(blob);
  auto snap = s.snapshot();
  if (snap.phase == session::Phase::PasskeyRequired) {
    std::optional<std::string> key;
    if (!o.passkey.empty()) key = o.passkey;
    else key = prompt_passkey();
    if (!key) throw rts::RtsError("NeedPasskey", "the paper is encrypted; pass --passkey");
    if (!s.unlock(*key)) {
      snap = s.snapshot();
      if (snap.phase == session::Phase::Failed) throw session::SessionError(snap.failure, "cannot open the paper");
      throw rts::RtsError("TagMismatch", "wrong passkey");
    }
    snap = s.snapshot();
  }
  if (snap.phase == session::Phase::Failed) throw session::SessionError(snap.failure, "cannot open the paper");

  const auto fixture = o.env.empty() ? envcheck::Fixture{} : envcheck::load_fixture(o.env);
  const auto attestation = envcheck::run_probes(envcheck::simulated_probes(fixture));
  std::unique_ptr<gesture::FrameSource> frames;
  if (!o.frames.empty()) frames = std::make_unique<gesture::PgmDirectorySource>(o.frames);
  if (!s.start_exam(attestation, std::chrono::system_clock::now(), std::move(frames))) {
    std::string list;
    for (auto v : s.snapshot().violations) list += (list.empty() ? "" : ",") + envcheck::to_string(v);
    throw session::SessionError("EnvCheckFailed", list);
  }
  for (const auto& [q, r] : answers) s.answer(q, r);
  s.wait_for_recording();
  s.submit();

  snap = s.snapshot();
  write_bytes(o.out, s.return_container());
  std::cout << "return " << *snap.return_name << " " << o.out << "\n";
  std::cout << "answered " << snap.answers.size() << " of " << snap.paper->questions.size() << "\n";
  for (const auto& ev : snap.events)
    std::cout << "event " << gesture::to_string(ev.kind) << " " << ev.start << " " << ev.end << "\n";

  if (o.upload_set) {
    const auto to = locator_or_home(o.upload, "returns");
    if (!s.upload_return(to)) {
      std::cerr << s.snapshot().last_error << "\n";
      return 1;
    }
    std::cout << "uploaded " << *snap.return_name << " " << to.redacted() << "\n";
  }
  return 0;
}

int cmd_collect(const std::string& at, const std::string& key, const std::string& design_file,
                const std::string& paper_id, const std::string& out_dir) {
  const auto loc = locator_or_home(at, "returns");
  std::optional<std::string> passkey;
  if (!key.empty()) passkey = key;

  // One workflow per paper id: from the design, the flag, or the names found.
  std::vector<vqp::QuestionPaper> papers;
  if (!design_file.empty()) {
    papers.push_back(vqp::parse_vqp(read_text(design_file)));
  } else {
    std::set<std::string> ids;
    for (const auto& name : transport::list(loc)) {
      if (!transport::glob_match("*.*.rts", name)) continue;
      const std::string stem = name.substr(0, name.size() - 4);
      const std::string id = stem.substr(0, stem.rfind('.'));
      if (paper_id.empty() || id == paper_id) ids.insert(id);
    }
    if (!paper_id.empty()) ids.insert(paper_id);
    for (const auto& id : ids) {
      vqp::QuestionPaper p;
      p.id = id;
      p.variant = vqp::Variant::Design;
      papers.push_back(std::move(p));
    }
  }
  if (!out_dir.empty()) fs::create_directories(out_dir);

  for (const auto& paper : papers) {
    session::LecturerWorkflow wf(paper, passkey);
    for (const auto& r : wf.collect(loc)) {
      std::cout << "RETURN " << paper.id << " " << r.student_id << " " << r.name << "\n";
      if (!out_dir.empty()) write_bytes(fs::path(out_dir) / r.name, transport::get(loc, r.name));
    }
    for (const auto& i : wf.issues()) std::cout << "ISSUE " << i.code << " " << i.name << " " << i.detail << "\n";
  }
  return 0;
}

int cmd_mark(const std::string& design_file, const std::string& ret, const std::string& key,
             const std::vector<std::string>& manual, bool rows) {
  const auto design = vqp::parse_vqp(read_text(design_file));
  auto report = marking::auto_mark(design, paper_entry(open_return(ret, key)));
  for (const auto& m : manual) {
    const auto eq = m.find('=');
    double score = 0;
    int q = 0;
    try {
      q = std::stoi(m.substr(0, eq));
      score = std::stod(m.substr(eq + 1));
    } catch (const std::exception&) {
      throw CliError("BadManualScore", "expected q=score, got '" + m + "'");
    }
    if (eq == std::string::npos) throw CliError("BadManualScore", "expected q=score, got '" + m + "'");
    report = marking::apply_manual(report, q, score);
  }
  std::cout << marking::summarize(report);
  if (rows) std::cout << "\n" << marking::export_rows(report);
  return 0;
}

int cmd_report(const std::string& ret, const std::string& key) {
  const auto entries = open_return(ret, key);
  const auto paper = paper_entry(entries);
  std::cout << "Paper: " << paper.id << " (" << vqp::to_string(paper.variant) << ")\n";
  int answered = 0;
  for (const auto& q : paper.questions) answered += q.response.has_value();
  std::cout << "Answered: " << answered << " of " << paper.questions.size() << "\n";
  if (const auto* env = rts::find(entries, rts::EntryType::EnvRec)) {
    const auto att = envcheck::parse_envrec(examgrid::to_string(env->data));
    std::cout << "Environment: camera " << (att.camera_present ? "present" : "missing") << "/"
              << (att.camera_active ? "active" : "inactive") << ", microphone "
              << (att.mic_present ? "present" : "missing") << "/" << (att.mic_active ? "active" : "inactive")
              << ", tamper " << (att.recording_tamper ? "yes" : "no") << ", host " << att.host << ", probed "
              << envcheck::format_time(att.probe_time) << "\n";
    for (const auto& n : att.notes) std::cout << "  note: " << n << "\n";
  }
  if (const auto* media = rts::find(entries, rts::EntryType::Media)) {
    std::cout << "Recording: " << gesture::analyze_frameset(media->data).to_text();
  }
  return 0;
}

struct ServeOptions {
  std::string accounts;
  std::string inbox;
  std::string returns;
  std::string materials;
  std::string env;
  std::string frames;
  std::string ui;
  std::string host = "127.0.0.1";
  int port = 8080;
};

int cmd_serve(const ServeOptions& o) {
  service::ServiceConfig cfg;
  cfg.accounts = service::load_accounts(o.accounts);
  cfg.inbox = locator_or_home(o.inbox, "inbox");
  cfg.returns = locator_or_home(o.returns, "returns");
  if (!o.materials.empty()) cfg.materials = o.materials;
  if (!o.env.empty()) cfg.environment = envcheck::load_fixture(o.env);
  if (!o.frames.empty()) {
    const std::string dir = o.frames;
    cfg.frames = [dir](const std::string&) { return std::make_unique<gesture::PgmDirectorySource>(dir); };
  }
  service::Service svc(std::move(cfg));
  std::optional<fs::path> ui;
  if (!o.ui.empty()) ui = o.ui;
  service::HttpServer server(svc, ui);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::jthread stopper([&](std::stop_token stop) {
    while (!stop.stop_requested() && !g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  });
  std::cerr << "listening on " << o.host << ":" << o.port << "\n";
  const bool ok = server.listen(o.host, o.port);
  stopper.request_stop();
  if (!ok) throw CliError("BindFailed", o.host + ":" + std::to_string(o.port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"examctl - drive the exam workflow from the command line"};
  app.require_subcommand(1);

  auto* design = app.add_subcommand("design", "Question paper authoring");
  design->require_subcommand(1);
  std::string validate_file;
  auto* validate = design->add_subcommand("validate", "Parse and validate a VQP file");
  validate->add_option("file", validate_file, "VQP file")->required();

  std::string pack_in, pack_out, pack_key;
  bool pack_keep = false;
  auto* pack = app.add_subcommand("pack", "Pack a paper into an RTS container (DESIGN becomes EXAM)");
  pack->add_option("vqp", pack_in, "VQP file")->required();
  pack->add_option("-o,--out", pack_out, "Output RTS file")->required();
  pack->add_option("--passkey", pack_key, "Encrypt with this passkey");
  pack->add_flag("--keep-variant", pack_keep, "Pack the paper as is");

  std::string pub_in;
  std::vector<std::string> pub_to;
  auto* publish = app.add_subcommand("publish", "Put an RTS container on drop-boxes");
  publish->add_option("rts", pub_in, "RTS file")->required();
  publish->add_option("--to", pub_to, "Locator (dir:<path> or ftp://...); default $EXAMGRID_HOME/inbox");

  std::string watch_at, watch_pattern = "*";
  int watch_count = 0, watch_interval = 2000, watch_timeout = 0;
  auto* watch = app.add_subcommand("watch", "Report files as they appear in a drop-box");
  watch->add_option("--at", watch_at, "Locator; default $EXAMGRID_HOME/inbox");
  watch->add_option("--pattern", watch_pattern, "Glob over names ('*' only)");
  watch->add_option("--count", watch_count, "Exit after this many files");
  watch->add_option("--interval", watch_interval, "Poll interval in ms")->check(CLI::Range(100, 3600000));
  watch->add_option("--timeout", watch_timeout, "Give up after this many ms (with --count)");

  TakeOptions take_o;
  auto* take = app.add_subcommand("take", "Sit an exam headlessly and write the return container");
  take->add_option("rts", take_o.rts, "Exam RTS file")->required();
  take->add_option("--passkey", take_o.passkey, "Passkey for an encrypted paper");
  take->add_option("--frames", take_o.frames, "PGM directory with manifest.txt (simulated camera)");
  take->add_option("--answers", take_o.answers, "Answer script, q=response per line");
  take->add_option("--out", take_o.out, "Return RTS file")->required();
  take->add_option("--env", take_o.env, "Environment probe fixture");
  take->add_option("--student", take_o.student, "Student id")->check([](const std::string& s) {
    return session::valid_student_id(s) ? std::string() : std::string("letters, digits, '-' and '_' only");
  });
  auto* upload = take->add_option("--upload", take_o.upload, "Upload the return; default $EXAMGRID_HOME/returns")
                     ->expected(0, 1);

  std::string col_at, col_key, col_design, col_paper, col_out;
  auto* collect = app.add_subcommand("collect", "Fetch and verify returns from a drop-box");
  collect->add_option("--at", col_at, "Locator; default $EXAMGRID_HOME/returns");
  collect->add_option("--key", col_key, "Passkey the returns were packed with");
  collect->add_option("--design", col_design, "DESIGN paper; restricts to its id");
  collect->add_option("--paper-id", col_paper, "Restrict to this paper id");
  collect->add_option("--out", col_out, "Copy accepted returns here");

  std::string mark_design, mark_ret, mark_key;
  std::vector<std::string> mark_manual;
  bool mark_rows = false;
  auto* mark = app.add_subcommand("mark", "Auto-mark a return against the DESIGN paper");
  mark->add_option("design", mark_design, "DESIGN VQP file")->required();
  mark->add_option("return", mark_ret, "Return RTS file")->required();
  mark->add_option("--key", mark_key, "Passkey of the return");
  mark->add_option("--manual", mark_manual, "Manual score q=score for a STRUCT question");
  mark->add_flag("--rows", mark_rows, "Also print key=value rows");

  std::string rep_ret, rep_key;
  auto* report = app.add_subcommand("report", "Show the environment record and gesture report of a return");
  report->add_option("return", rep_ret, "Return RTS file")->required();
  report->add_option("--key", rep_key, "Passkey of the return");

  ServeOptions serve_o;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--accounts", serve_o.accounts, "Account fixture (JSON)")->required();
  serve->add_option("--inbox", serve_o.inbox, "Exam drop-box; default $EXAMGRID_HOME/inbox");
  serve->add_option("--returns", serve_o.returns, "Return drop-box; default $EXAMGRID_HOME/returns");
  serve->add_option("--materials", serve_o.materials, "LMS materials directory");
  serve->add_option("--env", serve_o.env, "Environment probe fixture for student sessions");
  serve->add_option("--frames", serve_o.frames, "PGM directory used as every student's camera");
  serve->add_option("--ui", serve_o.ui, "Static UI assets served under /");
  serve->add_option("--host", serve_o.host, "Bind address");
  serve->add_option("--port", serve_o.port, "Port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  take_o.upload_set = upload->count() > 0;

  try {
    if (*validate) return cmd_validate(validate_file);
    if (*pack) return cmd_pack(pack_in, pack_out, pack_key, pack_keep);
    if (*publish) return cmd_publish(pub_in, pub_to);
    if (*watch) return cmd_watch(watch_at, watch_pattern, watch_count, watch_interval, watch_timeout);
    if (*take) return cmd_take(take_o);
    if (*collect) return cmd_collect(col_at, col_key, col_design, col_paper, col_out);
    if (*mark) return cmd_mark(mark_design, mark_ret, mark_key, mark_manual, mark_rows);
    if (*report) return cmd_report(rep_ret, rep_key);
    if (*serve) return cmd_serve(serve_o);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "Error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
