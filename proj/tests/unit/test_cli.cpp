#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>

#include "examgrid/marking.hpp"
#include "examgrid/session.hpp"
#include "generators.hpp"

using namespace examgrid;
using testsupport::TempDir;

namespace {

const char* kDesign = R"(%VQP 1
@id: geo-1
@title: Geography
@duration: 20
@variant: DESIGN
@author: A. Humboldt

#Q 1 MCQ
?: Longest river?
A) Nile
B) Thames
C) Rhine
!key: A

#Q 2 MCQ
?: Capital of Peru?
A) Quito
B) Lima
!key: B

#Q 3 STRUCT
?: Describe a delta.
lines: 4
!model: Sediment deposited at a river mouth.
)";

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

Run run(const std::string& exe, const std::string& args, const std::string& env = "") {
  TempDir tmp;
  const auto err_file = tmp / "stderr";
  const std::string cmd = env + " " + quote(exe) + " " + args + " 2>" + quote(err_file.string()) + " </dev/null";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = ::pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  r.err = testsupport::read_file(err_file);
  return r;
}

Run examctl(const std::string& args, const std::string& env = "") { return run(EXAMCTL_PATH, args, env); }

// A working directory holding the design, a recording and an answer script.
struct Desk {
  TempDir tmp;
  std::string p(const std::string& name) const { return quote((tmp / name).string()); }

  Desk() {
    testsupport::write_file(tmp / "design.vqp", kDesign);
    testsupport::write_file(tmp / "answers.txt", "# scripted\n1=A\n2=A\n3=Mud builds up\\nwhere the river slows.\n");
    const auto fg = run(FRAMEGEN_PATH, "--out " + p("frames") + " --count 30 --gap-start 10 --gap-len 10 --step 40");
    REQUIRE(fg.status == 0);
  }
  Run pack(const std::string& key = "s3") { return examctl("pack " + p("design.vqp") + " -o " + p("exam.rts") + " --passkey " + key); }
  Run take(const std::string& key, const std::string& extra = "") {
    return examctl("take " + p("exam.rts") + " --passkey " + key + " --frames " + p("frames") + " --answers " +
                   p("answers.txt") + " --out " + p("return.rts") + " --student ann " + extra);
  }
};

}  // namespace

TEST_CASE("pack then take writes an answered return") {
  Desk d;
  const auto packed = d.pack();
  CHECK(packed.status == 0);
  const auto exam = rts::unpack(to_bytes(testsupport::read_file(d.tmp / "exam.rts")), std::string("s3"));
  CHECK(vqp::parse_vqp(examgrid::to_string(exam.at(0).data)) == vqp::to_exam(vqp::parse_vqp(kDesign)));

  const auto taken = d.take("s3");
  INFO(taken.err);
  REQUIRE(taken.status == 0);
  CHECK(taken.out.find("return geo-1.ann.rts") == 0);
  CHECK(taken.out.find("answered 3 of 3") != std::string::npos);
  CHECK(taken.out.find("event FACE_ABSENT") != std::string::npos);

  const auto entries = rts::unpack(to_bytes(testsupport::read_file(d.tmp / "return.rts")), std::string("s3"));
  REQUIRE(entries.size() == 3);
  const auto answered = vqp::parse_vqp(examgrid::to_string(rts::find(entries, rts::EntryType::Vqp)->data));
  CHECK(answered.variant == vqp::Variant::Answered);
  CHECK(answered.find(1)->response == "A");
  CHECK(answered.find(3)->response == "Mud builds up\nwhere the river slows.");
  CHECK(gesture::decode_frameset(rts::find(entries, rts::EntryType::Media)->data).size() == 30);
}

TEST_CASE("wrong passkey exits 1 with TagMismatch") {
  Desk d;
  REQUIRE(d.pack().status == 0);
  const auto r = d.take("wrong");
  CHECK(r.status == 1);
  CHECK(r.err.find("TagMismatch") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(d.tmp / "return.rts"));

  const auto no_key = examctl("take " + d.p("exam.rts") + " --out " + d.p("r.rts"));
  CHECK(no_key.status == 1);
  CHECK(no_key.err.find("NeedPasskey") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  Desk d;
  CHECK(examctl("").status == 2);
  CHECK(examctl("frobnicate").status == 2);
  CHECK(examctl("pack " + d.p("design.vqp")).status == 2);
  CHECK(examctl("pack " + d.p("design.vqp") + " -o x.rts --bogus").status == 2);
  CHECK(examctl("take x.rts --out y.rts --student 'a b'").status == 2);
  CHECK(examctl("watch --interval 5").status == 2);
  CHECK(run(FRAMEGEN_PATH, "--count 3").status == 2);
  CHECK(examctl("--help").status == 0);
}

TEST_CASE("domain errors exit 1 with the error name") {
  Desk d;
  testsupport::write_file(d.tmp / "bad.vqp", "%VQP 1\n@id geo\n");
  auto r = examctl("design validate " + d.p("bad.vqp"));
  CHECK(r.status == 1);
  CHECK(r.err.find("SyntaxError") != std::string::npos);

  r = examctl("design validate " + d.p("design.vqp"));
  CHECK(r.status == 0);
  CHECK(r.out == "OK geo-1 DESIGN 3 questions\n");

  REQUIRE(d.pack().status == 0);
  testsupport::write_file(d.tmp / "answers.txt", "one=A\n");
  r = d.take("s3");
  CHECK(r.status == 1);
  CHECK(r.err.find("BadAnswerScript") != std::string::npos);

  testsupport::write_file(d.tmp / "answers.txt", "2=Z\n");
  r = d.take("s3");
  CHECK(r.status == 1);
  CHECK(r.err.find("InvalidOption") != std::string::npos);

  testsupport::write_file(d.tmp / "env.txt", "camera.active=false\n");
  testsupport::write_file(d.tmp / "answers.txt", "1=A\n");
  r = d.take("s3", "--env " + d.p("env.txt"));
  CHECK(r.status == 1);
  CHECK(r.err.find("EnvCheckFailed: CameraInactive") != std::string::npos);

  r = examctl("publish " + d.p("exam.rts"), "env -u EXAMGRID_HOME");
  CHECK(r.status == 1);
  CHECK(r.err.find("NoLocator") != std::string::npos);
}

TEST_CASE("mark prints exactly the library summary") {
  Desk d;
  REQUIRE(d.pack().status == 0);
  REQUIRE(d.take("s3").status == 0);

  const auto design = vqp::parse_vqp(kDesign);
  const auto entries = rts::unpack(to_bytes(testsupport::read_file(d.tmp / "return.rts")), std::string("s3"));
  const auto answered = vqp::parse_vqp(examgrid::to_string(rts::find(entries, rts::EntryType::Vqp)->data));
  const auto report = marking::auto_mark(design, answered);

  const auto r = examctl("mark " + d.p("design.vqp") + " " + d.p("return.rts") + " --key s3");
  CHECK(r.status == 0);
  CHECK(r.out == marking::summarize(report));
  CHECK(report.totals.auto_subtotal == 1.0);

  const auto manual = marking::apply_manual(report, 3, 0.5);
  const auto m = examctl("mark " + d.p("design.vqp") + " " + d.p("return.rts") + " --key s3 --manual 3=0.5 --rows");
  CHECK(m.status == 0);
  CHECK(m.out == marking::summarize(manual) + "\n" + marking::export_rows(manual));

  const auto nokey = examctl("mark " + d.p("design.vqp") + " " + d.p("return.rts"));
  CHECK(nokey.status == 1);
  CHECK(nokey.err.find("NeedPasskey") != std::string::npos);
}

TEST_CASE("publish, watch, upload, collect and report through EXAMGRID_HOME") {
  Desk d;
  const std::string home = "EXAMGRID_HOME=" + quote((d.tmp / "home").string());
  REQUIRE(d.pack().status == 0);

  auto r = examctl("publish " + d.p("exam.rts") + " --to dir:" + (d.tmp / "extra").string(), home);
  CHECK(r.status == 0);
  r = examctl("publish " + d.p("exam.rts"), home);
  CHECK(r.status == 0);
  CHECK(std::filesystem::exists(d.tmp / "home" / "inbox" / "exam.rts"));
  CHECK(std::filesystem::exists(d.tmp / "extra" / "exam.rts"));

  r = examctl("watch --pattern '*.rts' --count 1 --interval 100 --timeout 5000", home);
  CHECK(r.status == 0);
  CHECK(r.out == "APPEARED exam.rts\n");
  r = examctl("watch --pattern '*.pdf' --count 1 --interval 100 --timeout 300", home);
  CHECK(r.status == 1);

  r = examctl("take " + d.p("exam.rts") + " --passkey s3 --frames " + d.p("frames") + " --answers " +
                  d.p("answers.txt") + " --out " + d.p("return.rts") + " --student ann --upload",
              home);
  INFO(r.err);
  CHECK(r.status == 0);
  CHECK(r.out.find("uploaded geo-1.ann.rts") != std::string::npos);

  // A second, damaged return next to it.
  auto blob = to_bytes(testsupport::read_file(d.tmp / "return.rts"));
  blob[blob.size() - 5] ^= 0x40;
  testsupport::write_file(d.tmp / "home" / "returns" / "geo-1.bob.rts", examgrid::to_string(blob));

  r = examctl("collect --key s3 --out " + d.p("got"), home);
  CHECK(r.status == 0);
  CHECK(r.out.find("RETURN geo-1 ann geo-1.ann.rts\n") != std::string::npos);
  CHECK(r.out.find("ISSUE TagMismatch geo-1.bob.rts") != std::string::npos);
  CHECK(std::filesystem::exists(d.tmp / "got" / "geo-1.ann.rts"));
  CHECK_FALSE(std::filesystem::exists(d.tmp / "got" / "geo-1.bob.rts"));

  r = examctl("report " + d.p("return.rts") + " --key s3");
  CHECK(r.status == 0);
  CHECK(r.out.find("Paper: geo-1 (ANSWERED)\nAnswered: 3 of 3\n") == 0);
  CHECK(r.out.find("Environment: camera present/active") != std::string::npos);
  CHECK(r.out.find("FACE_ABSENT") != std::string::npos);
}
