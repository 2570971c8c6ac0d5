// framegen: writes a synthetic camera recording (PGM directory + manifest)
// with an optional blank stretch where the face is gone.

#include <iostream>
#include <random>

#include "CLI11.hpp"

#include "examgrid/gesture/frame.hpp"
#include "examgrid/gesture/template.hpp"

using namespace examgrid::gesture;

int main(int argc, char** argv) {
  CLI::App app{"framegen - synthetic face sequence for examctl take --frames"};
  std::string out;
  int count = 100, gap_start = -1, gap_len = 0, width = 160, height = 120, step_ms = 100;
  double noise = 0.02;
  std::uint64_t seed = 1;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--count", count, "Number of frames")->check(CLI::PositiveNumber);
  app.add_option("--gap-start", gap_start, "First blank frame (0-based)");
  app.add_option("--gap-len", gap_len, "Number of blank frames")->check(CLI::NonNegativeNumber);
  app.add_option("--width", width, "Frame width");
  app.add_option("--height", height, "Frame height");
  app.add_option("--step", step_ms, "Milliseconds between frames")->check(CLI::PositiveNumber);
  app.add_option("--noise", noise, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "Noise seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    TemplateParams p{width / 2.0, height / 2.0, height / 4.0, 0.0, 0.45, 0.55};
    std::vector<Frame> frames;
    for (int i = 0; i < count; ++i) {
      const auto t = static_cast<std::uint64_t>(i) * step_ms;
      if (i >= gap_start && i < gap_start + gap_len) {
        frames.push_back(Frame::filled(width, height, 1.0, t));
        continue;
      }
      TemplateParams q = p;
      q.cx += jitter(rng);
      q.cy += jitter(rng);
      frames.push_back(render_synthetic(q, width, height, noise, seed + i, t));
    }
    write_pgm_directory(out, frames);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  std::cout << out << "\n";
  return 0;
}
