#include "examgrid/gesture/frame.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace examgrid::gesture {

namespace fs = std::filesystem;

namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'R', 'S', '1'};

template <typename T>
void put_le(Bytes& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(ByteView data, std::size_t& pos) {
  if (data.size() - pos < sizeof(T)) throw GestureError("BadFrameset", "truncated");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(data[pos + i]) << (8 * i));
  pos += sizeof(T);
  return v;
}

}  // namespace

Frame Frame::filled(int width, int height, double value, std::uint64_t t_ms) {
  Frame f;
  f.width = width;
  f.height = height;
  f.pixels.assign(static_cast<std::size_t>(width) * height, value);
  f.t_ms = t_ms;
  return f;
}

void check_frame(const Frame& f) {
  if (f.width < kMinFrameSide || f.height < kMinFrameSide)
    throw GestureError("InvalidFrame", "frame must be at least 32x32, got " +
                                           std::to_string(f.width) + "x" + std::to_string(f.height));
  if (f.pixels.size() != static_cast<std::size_t>(f.width) * f.height)
    throw GestureError("InvalidFrame", "pixel count does not match dimensions");
  for (double v : f.pixels) {
    if (!(v >= 0.0 && v <= 1.0)) throw GestureError("InvalidFrame", "intensity outside [0,1]");
  }
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Frame quantized(const Frame& f) {
  Frame q = f;
  for (double& v : q.pixels) v = quantize(v) / 255.0;
  return q;
}

FramesetWriter::FramesetWriter() {
  buffer_.assign(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(buffer_, 0);
}

void FramesetWriter::append(const Frame& f) {
  check_frame(f);
  if (f.width > std::numeric_limits<std::uint16_t>::max() ||
      f.height > std::numeric_limits<std::uint16_t>::max())
    throw GestureError("InvalidFrame", "frame too large for FRS");
  if (count_ == std::numeric_limits<std::uint32_t>::max())
    throw GestureError("InvalidFrame", "too many frames");
  put_le<std::uint64_t>(buffer_, f.t_ms);
  put_le<std::uint16_t>(buffer_, static_cast<std::uint16_t>(f.width));
  put_le<std::uint16_t>(buffer_, static_cast<std::uint16_t>(f.height));
  for (double v : f.pixels) buffer_.push_back(quantize(v));
  ++count_;
}

Bytes FramesetWriter::finish() const {
  Bytes out = buffer_;
  for (int i = 0; i < 4; ++i) out[4 + i] = static_cast<std::uint8_t>(count_ >> (8 * i));
  return out;
}

Bytes encode_frameset(const std::vector<Frame>& frames) {
  FramesetWriter w;
  for (const auto& f : frames) w.append(f);
  return w.finish();
}

std::vector<Frame> decode_frameset(ByteView data) {
  if (data.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), data.begin()))
    throw GestureError("BadFrameset", "missing FRS1 magic");
  std::size_t pos = 4;
  const auto count = get_le<std::uint32_t>(data, pos);
  std::vector<Frame> frames;
  for (std::uint32_t i = 0; i < count; ++i) {
    Frame f;
    f.t_ms = get_le<std::uint64_t>(data, pos);
    f.width = get_le<std::uint16_t>(data, pos);
    f.height = get_le<std::uint16_t>(data, pos);
    const std::size_t n = static_cast<std::size_t>(f.width) * f.height;
    if (data.size() - pos < n) throw GestureError("BadFrameset", "truncated pixel data");
    f.pixels.resize(n);
    for (std::size_t k = 0; k < n; ++k) f.pixels[k] = data[pos + k] / 255.0;
    pos += n;
    frames.push_back(std::move(f));
  }
  if (pos != data.size()) throw GestureError("BadFrameset", "trailing bytes");
  return frames;
}

std::optional<Frame> VectorFrameSource::next() {
  if (pos_ >= frames_.size()) return std::nullopt;
  return frames_[pos_++];
}

PgmDirectorySource::PgmDirectorySource(fs::path dir) : dir_(std::move(dir)) {
  std::ifstream in(dir_ / "manifest.txt");
  if (!in) throw GestureError("FrameSourceFailed", "cannot read " + (dir_ / "manifest.txt").string());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream ls(line);
    std::uint64_t t = 0;
    std::string name;
    if (!(ls >> t >> name))
      throw GestureError("FrameSourceFailed", "manifest.txt line " + std::to_string(n) + ": expected '<t_ms> <file>'");
    entries_.emplace_back(t, name);
  }
}

std::optional<Frame> PgmDirectorySource::next() {
  if (pos_ >= entries_.size()) return std::nullopt;
  const auto& [t, name] = entries_[pos_++];
  return read_pgm(dir_ / name, t);
}

Frame read_pgm(const fs::path& path, std::uint64_t t_ms) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GestureError("FrameSourceFailed", "cannot open " + path.string());
  auto token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
      } else {
        tok += c;
      }
    }
    return tok;
  };
  auto number = [&](const char* what) {
    auto tok = token();
    int v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size() || v <= 0)
      throw GestureError("FrameSourceFailed", path.string() + ": bad PGM " + what);
    return v;
  };
  if (token() != "P5") throw GestureError("FrameSourceFailed", path.string() + ": not a binary PGM");
  Frame f;
  f.width = number("width");
  f.height = number("height");
  const int maxval = number("maxval");
  if (maxval > 255) throw GestureError("FrameSourceFailed", path.string() + ": 16-bit PGM unsupported");
  f.t_ms = t_ms;
  const std::size_t n = static_cast<std::size_t>(f.width) * f.height;
  std::vector<char> raw(n);
  if (!in.read(raw.data(), static_cast<std::streamsize>(n)))
    throw GestureError("FrameSourceFailed", path.string() + ": truncated pixel data");
  f.pixels.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    f.pixels[k] = std::min(1.0, static_cast<unsigned char>(raw[k]) / static_cast<double>(maxval));
  check_frame(f);
  return f;
}

void write_pgm(const fs::path& path, const Frame& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw GestureError("FrameSourceFailed", "cannot write " + path.string());
  out << "P5\n" << f.width << " " << f.height << "\n255\n";
  for (double v : f.pixels) out.put(static_cast<char>(quantize(v)));
}

void write_pgm_directory(const fs::path& dir, const std::vector<Frame>& frames) {
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::ostringstream name;
    name << "frame_" << std::setw(4) << std::setfill('0') << i << ".pgm";
    write_pgm(dir / name.str(), frames[i]);
    manifest << frames[i].t_ms << " " << name.str() << "\n";
  }
}

}  // namespace examgrid::gesture
