#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "examgrid/bytes.hpp"
#include "examgrid/error.hpp"

namespace examgrid::gesture {

// InvalidFrame, BadFrameset, FrameSourceFailed.
class GestureError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kMinFrameSide = 32;

// Grayscale frame. Pixel (x, y) sits at integer coordinates; intensities are
// in [0, 1] with 1 = white.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // row-major
  std::uint64_t t_ms = 0;

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

  static Frame filled(int width, int height, double value, std::uint64_t t_ms = 0);

  bool operator==(const Frame&) const = default;
};

// Throws InvalidFrame on bad dimensions or out-of-range intensities.
void check_frame(const Frame& f);

// 8-bit quantization used by the FRS format and PGM input.
std::uint8_t quantize(double v);
Frame quantized(const Frame& f);

// FRS1 frameset: "FRS1" | frame_count u32 | per frame t_ms u64, width u16,
// height u16, width*height intensity bytes. Little-endian.
Bytes encode_frameset(const std::vector<Frame>& frames);
std::vector<Frame> decode_frameset(ByteView data);

// Incremental FRS writer; the frame count is patched on finish().
class FramesetWriter {
 public:
  FramesetWriter();
  void append(const Frame& f);
  std::uint32_t count() const { return count_; }
  Bytes finish() const;

 private:
  Bytes buffer_;
  std::uint32_t count_ = 0;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  // Next frame, or nullopt at end of stream. Throws on source failure.
  virtual std::optional<Frame> next() = 0;
};

class VectorFrameSource : public FrameSource {
 public:
  explicit VectorFrameSource(std::vector<Frame> frames) : frames_(std::move(frames)) {}
  std::optional<Frame> next() override;

 private:
  std::vector<Frame> frames_;
  std::size_t pos_ = 0;
};

// Directory of binary PGM (P5) files listed by manifest.txt as
// "<t_ms> <filename>" lines. The manifest is read eagerly, images lazily.
class PgmDirectorySource : public FrameSource {
 public:
  explicit PgmDirectorySource(std::filesystem::path dir);
  std::optional<Frame> next() override;
  std::size_t size() const { return entries_.size(); }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::uint64_t, std::string>> entries_;
  std::size_t pos_ = 0;
};

Frame read_pgm(const std::filesystem::path& path, std::uint64_t t_ms);
void write_pgm(const std::filesystem::path& path, const Frame& f);

// Writes frames as frame_NNNN.pgm plus manifest.txt.
void write_pgm_directory(const std::filesystem::path& dir, const std::vector<Frame>& frames);

}  // namespace examgrid::gesture
