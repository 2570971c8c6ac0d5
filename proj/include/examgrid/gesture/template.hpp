#pragma once

// Deformable face template in the style of Yuille's feature templates.
//
// In template coordinates (x right, y down, origin at the face centre):
//   face boundary  ellipse with semi-axes (0.7 s, s)
//   eyes           (+-e s, -0.35 s)
//   mouth bar      y = m s, x in [-0.3 s, 0.3 s]
// The template is rotated by phi and translated to (cx, cy).
//
// Energy (lower is better):
//   E = - w1 mean(B      on N_ell boundary samples)
//       - w2 mean(valley at both eyes)
//       - w3 mean(valley on 9 mouth samples)
//       + w4 ((e - e0)^2 + (m - m0)^2) + w5 phi^2
// B is the valley field by default. A thin dark outline has zero gradient on
// its centre line, so an edge-attracted ellipse settles on one flank of the
// stroke, about sigma off. Real step-edged boundaries can select the edge field.

#include <array>
#include <cstdint>
#include <numbers>
#include <vector>

#include "examgrid/gesture/frame.hpp"

namespace examgrid::gesture {

struct TemplateParams {
  double cx = 0.0;
  double cy = 0.0;
  double s = 1.0;
  double phi = 0.0;
  double e = 0.45;
  double m = 0.55;

  bool operator==(const TemplateParams&) const = default;
};

inline constexpr double kMinEye = 0.2, kMaxEye = 0.7;
inline constexpr double kMinMouth = 0.3, kMaxMouth = 0.8;
inline constexpr double kMaxPhi = std::numbers::pi / 4;

bool in_range(const TemplateParams& p);

enum class BoundaryField { Valley, Edge };

struct EnergyConfig {
  std::array<double, 5> w = {1.0, 1.0, 1.0, 0.5, 0.5};
  BoundaryField boundary = BoundaryField::Valley;
  double sigma = 2.0;
  double e0 = 0.45;
  double m0 = 0.55;
  int n_ell = 64;
};

// Throws std::invalid_argument unless sigma > 0, N_ell >= 16, weights >= 0.
void check_config(const EnergyConfig& c);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Landmarks {
  std::vector<Point> boundary;
  std::array<Point, 2> eyes;
  std::array<Point, 9> mouth;
};

Landmarks landmarks(const TemplateParams& p, int n_ell);

struct PotentialFields {
  int width = 0;
  int height = 0;
  std::vector<double> valley;  // smoothed (1 - I), in [0, 1]
  std::vector<double> edge;    // |grad(smoothed I)|, >= 0

  double valley_at(int x, int y) const { return valley[static_cast<std::size_t>(y) * width + x]; }
  double edge_at(int x, int y) const { return edge[static_cast<std::size_t>(y) * width + x]; }
};

PotentialFields compute_potentials(const Frame& frame, double sigma);

// Bilinear sample of a field; pixels outside the frame read as 0.
double sample(const std::vector<double>& field, int width, int height, double x, double y);

double energy(const TemplateParams& p, const PotentialFields& fields, const EnergyConfig& config);

// Image-driven part of the energy only (the three attraction terms).
double image_energy(const TemplateParams& p, const PotentialFields& fields,
                    const EnergyConfig& config);

// Synthetic face: white background, 2 px dark (0.1) boundary ring, dark eye
// disks of radius 0.08 s, 2 px dark mouth bar, then clamped Gaussian noise.
// Throws OutOfFrame unless the template clears a 5 px margin.
Frame render_synthetic(const TemplateParams& p, int width, int height, double noise_sigma,
                       std::uint64_t seed = 0, std::uint64_t t_ms = 0);

inline constexpr double kRenderDark = 0.1;
inline constexpr int kRenderMargin = 5;

// Axis-aligned half extents of the rotated boundary ellipse.
Point half_extents(const TemplateParams& p);

}  // namespace examgrid::gesture
