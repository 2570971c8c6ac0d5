#include "doctest.h"

#include "examgrid/gesture/frame.hpp"
#include "examgrid/gesture/template.hpp"
#include "generators.hpp"

using namespace examgrid;
using namespace examgrid::gesture;
using testsupport::TempDir;

namespace {

std::string error_code(auto&& fn) {
  try {
    fn();
  } catch (const examgrid::Error& e) {
    return e.code();
  }
  return "none";
}

std::vector<Frame> sample_frames(int n) {
  testsupport::Rng rng(5);
  std::vector<Frame> out;
  for (int i = 0; i < n; ++i) {
    Frame f = Frame::filled(32 + i * 3, 40 + i, 0.0, 1000 + i * 40);
    for (auto& v : f.pixels) v = static_cast<double>(rng() % 256) / 255.0;
    out.push_back(f);
  }
  return out;
}

}  // namespace

TEST_CASE("FRS round trip keeps count, sizes, timestamps and quantized pixels") {
  const auto frames = sample_frames(5);
  const auto back = decode_frameset(encode_frameset(frames));
  REQUIRE(back.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(back[i].width == frames[i].width);
    CHECK(back[i].height == frames[i].height);
    CHECK(back[i].t_ms == frames[i].t_ms);
    CHECK(back[i] == quantized(frames[i]));
  }
  CHECK(encode_frameset(back) == encode_frameset(frames));
}

TEST_CASE("FRS layout") {
  Frame f = Frame::filled(32, 33, 1.0, 0x0102030405060708ull);
  f.at(0, 0) = 0.0;
  const auto b = encode_frameset({f});
  REQUIRE(b.size() == 4 + 4 + 8 + 2 + 2 + 32 * 33);
  CHECK(to_string(ByteView(b).first(4)) == "FRS1");
  CHECK(b[4] == 1);
  CHECK(b[5] == 0);
  CHECK(b[8] == 0x08);
  CHECK(b[15] == 0x01);
  CHECK(b[16] == 32);
  CHECK(b[18] == 33);
  CHECK(b[20] == 0);
  CHECK(b[21] == 255);
}

TEST_CASE("incremental writer matches the one-shot encoder") {
  const auto frames = sample_frames(3);
  FramesetWriter w;
  CHECK(decode_frameset(w.finish()).empty());
  for (const auto& f : frames) w.append(f);
  CHECK(w.count() == 3);
  CHECK(w.finish() == encode_frameset(frames));
}

TEST_CASE("bad framesets") {
  CHECK(error_code([] { decode_frameset(to_bytes("FRS0\0\0\0\0")); }) == "BadFrameset");
  auto b = encode_frameset(sample_frames(2));
  auto cut = b;
  cut.pop_back();
  CHECK(error_code([&] { decode_frameset(cut); }) == "BadFrameset");
  b.push_back(0);
  CHECK(error_code([&] { decode_frameset(b); }) == "BadFrameset");
}

TEST_CASE("frame validation") {
  CHECK_NOTHROW(check_frame(Frame::filled(32, 32, 0.5)));
  CHECK(error_code([] { check_frame(Frame::filled(31, 32, 0.5)); }) == "InvalidFrame");
  auto f = Frame::filled(32, 32, 0.5);
  f.at(3, 3) = 1.5;
  CHECK(error_code([&] { check_frame(f); }) == "InvalidFrame");
  CHECK(quantize(0.0) == 0);
  CHECK(quantize(1.0) == 255);
  CHECK(quantize(0.5) == 128);
}

TEST_CASE("PGM directory round trip through the frame source") {
  TempDir tmp;
  const auto frames = sample_frames(4);
  write_pgm_directory(tmp.path(), frames);
  PgmDirectorySource src(tmp.path());
  CHECK(src.size() == 4);
  for (const auto& f : frames) {
    auto got = src.next();
    REQUIRE(got);
    CHECK(*got == quantized(f));
  }
  CHECK_FALSE(src.next());
}

TEST_CASE("PGM source errors") {
  TempDir tmp;
  CHECK(error_code([&] { PgmDirectorySource s(tmp.path()); }) == "FrameSourceFailed");
  testsupport::write_file(tmp / "manifest.txt", "0 missing.pgm\n");
  PgmDirectorySource s(tmp.path());
  CHECK(error_code([&] { s.next(); }) == "FrameSourceFailed");
  testsupport::write_file(tmp / "manifest.txt", "zero frame.pgm\n");
  CHECK(error_code([&] { PgmDirectorySource t(tmp.path()); }) == "FrameSourceFailed");
  testsupport::write_file(tmp / "p2.pgm", "P2\n32 32\n255\n");
  CHECK(error_code([&] { read_pgm(tmp / "p2.pgm", 0); }) == "FrameSourceFailed");
}

TEST_CASE("PGM reader accepts comments and odd whitespace") {
  TempDir tmp;
  std::string img = "P5\n# made by hand\n32  32\n255\n";
  for (int i = 0; i < 32 * 32; ++i) img += static_cast<char>(i % 256);
  testsupport::write_file(tmp / "x.pgm", img);
  const auto f = read_pgm(tmp / "x.pgm", 7);
  CHECK(f.t_ms == 7);
  CHECK(f.width == 32);
  CHECK(f.at(5, 0) == doctest::Approx(5 / 255.0));
}

TEST_CASE("vector source yields in order then ends") {
  VectorFrameSource src(sample_frames(2));
  CHECK(src.next()->t_ms == 1000);
  CHECK(src.next()->t_ms == 1040);
  CHECK_FALSE(src.next());
}
