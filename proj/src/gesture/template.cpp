#include "examgrid/gesture/template.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace examgrid::gesture {

namespace {

constexpr double kAspect = 0.7;       // horizontal / vertical boundary semi-axis
constexpr double kEyeRise = 0.35;     // eye height above centre, fraction of s
constexpr double kMouthHalf = 0.3;    // mouth half-width, fraction of s
constexpr double kEyeRadius = 0.08;   // rendered eye radius, fraction of s
constexpr double kStrokeHalf = 1.0;   // half thickness of rendered ring and bar, px

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable blur with clamp-to-edge borders.
std::vector<double> blur(const std::vector<double>& in, int w, int h, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(in.size()), out(in.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * in[static_cast<std::size_t>(y) * w + std::clamp(x + i, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

Point place(const TemplateParams& p, double u, double v) {
  const double c = std::cos(p.phi), s = std::sin(p.phi);
  return {p.cx + u * c - v * s, p.cy + u * s + v * c};
}

double mean_sample(const std::vector<double>& field, int w, int h, auto const& points) {
  double acc = 0.0;
  for (const auto& pt : points) acc += sample(field, w, h, pt.x, pt.y);
  return acc / static_cast<double>(std::size(points));
}

}  // namespace

bool in_range(const TemplateParams& p) {
  return p.s > 0.0 && p.e >= kMinEye && p.e <= kMaxEye && p.m >= kMinMouth && p.m <= kMaxMouth &&
         p.phi >= -kMaxPhi && p.phi <= kMaxPhi && std::isfinite(p.cx) && std::isfinite(p.cy);
}

void check_config(const EnergyConfig& c) {
  if (!(c.sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (c.n_ell < 16) throw std::invalid_argument("N_ell must be at least 16");
  for (double w : c.w)
    if (!(w >= 0.0)) throw std::invalid_argument("energy weights must be nonnegative");
}

Landmarks landmarks(const TemplateParams& p, int n_ell) {
  Landmarks lm;
  lm.boundary.reserve(n_ell);
  for (int k = 0; k < n_ell; ++k) {
    const double t = 2.0 * std::numbers::pi * k / n_ell;
    lm.boundary.push_back(place(p, kAspect * p.s * std::cos(t), p.s * std::sin(t)));
  }
  lm.eyes[0] = place(p, -p.e * p.s, -kEyeRise * p.s);
  lm.eyes[1] = place(p, p.e * p.s, -kEyeRise * p.s);
  for (int k = 0; k < 9; ++k) {
    const double u = -kMouthHalf * p.s + k * (2.0 * kMouthHalf * p.s / 8.0);
    lm.mouth[k] = place(p, u, p.m * p.s);
  }
  return lm;
}

PotentialFields compute_potentials(const Frame& frame, double sigma) {
  check_frame(frame);
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const int w = frame.width, h = frame.height;
  PotentialFields f;
  f.width = w;
  f.height = h;

  std::vector<double> inverted(frame.pixels.size());
  std::transform(frame.pixels.begin(), frame.pixels.end(), inverted.begin(),
                 [](double v) { return 1.0 - v; });
  f.valley = blur(inverted, w, h, sigma);
  for (double& v : f.valley) v = std::clamp(v, 0.0, 1.0);

  const auto smooth = blur(frame.pixels, w, h, sigma);
  auto s = [&](int x, int y) {
    return smooth[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };
  f.edge.resize(smooth.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (s(x + 1, y) - s(x - 1, y));
      const double gy = 0.5 * (s(x, y + 1) - s(x, y - 1));
      f.edge[static_cast<std::size_t>(y) * w + x] = std::hypot(gx, gy);
    }
  }
  return f;
}

double sample(const std::vector<double>& field, int w, int h, double x, double y) {
  if (!(x > -1.0 && x < w && y > -1.0 && y < h)) return 0.0;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  auto px = [&](int xi, int yi) {
    if (xi < 0 || yi < 0 || xi >= w || yi >= h) return 0.0;
    return field[static_cast<std::size_t>(yi) * w + xi];
  };
  return (1 - fx) * (1 - fy) * px(x0, y0) + fx * (1 - fy) * px(x0 + 1, y0) +
         (1 - fx) * fy * px(x0, y0 + 1) + fx * fy * px(x0 + 1, y0 + 1);
}

double image_energy(const TemplateParams& p, const PotentialFields& f, const EnergyConfig& c) {
  const auto lm = landmarks(p, c.n_ell);
  const auto& ring = c.boundary == BoundaryField::Edge ? f.edge : f.valley;
  const double edge = mean_sample(ring, f.width, f.height, lm.boundary);
  const double eyes = mean_sample(f.valley, f.width, f.height, lm.eyes);
  const double mouth = mean_sample(f.valley, f.width, f.height, lm.mouth);
  return -c.w[0] * edge - c.w[1] * eyes - c.w[2] * mouth;
}

double energy(const TemplateParams& p, const PotentialFields& f, const EnergyConfig& c) {
  const double de = p.e - c.e0, dm = p.m - c.m0;
  return image_energy(p, f, c) + c.w[3] * (de * de + dm * dm) + c.w[4] * p.phi * p.phi;
}

Point half_extents(const TemplateParams& p) {
  const double a = kAspect * p.s, b = p.s;
  const double c = std::cos(p.phi), s = std::sin(p.phi);
  return {std::sqrt(a * a * c * c + b * b * s * s), std::sqrt(a * a * s * s + b * b * c * c)};
}

Frame render_synthetic(const TemplateParams& p, int width, int height, double noise_sigma,
                       std::uint64_t seed, std::uint64_t t_ms) {
  if (!in_range(p)) throw GestureError("OutOfFrame", "template parameters out of range");
  const auto ext = half_extents(p);
  const double pad = kRenderMargin + kStrokeHalf;
  if (p.cx - ext.x < pad || p.cx + ext.x > width - 1 - pad || p.cy - ext.y < pad ||
      p.cy + ext.y > height - 1 - pad)
    throw GestureError("OutOfFrame", "template does not fit the frame with a 5 px margin");

  Frame f = Frame::filled(width, height, 1.0, t_ms);
  const double a = kAspect * p.s, b = p.s;
  const double c = std::cos(p.phi), sn = std::sin(p.phi);
  const double eye_r2 = (kEyeRadius * p.s) * (kEyeRadius * p.s);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // Into template coordinates.
      const double dx = x - p.cx, dy = y - p.cy;
      const double u = dx * c + dy * sn;
      const double v = -dx * sn + dy * c;

      const double g = std::hypot(u / a, v / b);
      bool dark = false;
      if (g > 0.0) {
        const double grad = std::hypot(u / (a * a), v / (b * b)) / g;
        dark = std::abs(g - 1.0) / grad <= kStrokeHalf;
      }
      for (double ex : {-p.e * p.s, p.e * p.s}) {
        const double du = u - ex, dv = v + kEyeRise * p.s;
        if (du * du + dv * dv <= eye_r2) dark = true;
      }
      if (std::abs(u) <= kMouthHalf * p.s && std::abs(v - p.m * p.s) <= kStrokeHalf) dark = true;
      if (dark) f.at(x, y) = kRenderDark;
    }
  }

  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (double& v : f.pixels) v = std::clamp(v + noise(rng), 0.0, 1.0);
  }
  return f;
}

}  // namespace examgrid::gesture
