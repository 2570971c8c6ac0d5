#pragma once

#include <optional>
#include <string>
#include <vector>

#include "examgrid/gesture/template.hpp"

namespace examgrid::gesture {

struct FitResult {
  TemplateParams params;
  double energy = 0.0;
  bool converged = false;
  int iterations = 0;  // descent sweeps of the winning refinement
  // Set when every coarse seed scored the same energy, i.e. the image gave
  // no positional evidence (blank frame).
  bool degenerate = false;
  std::string comment;
};

// Accepted energies of one descent run, starting with the seed energy.
struct DescentTrace {
  std::vector<double> accepted;
};

struct FitTrace {
  std::vector<DescentTrace> runs;
};

// Global fit.
//  1. Seeds: centres on a 16 px lattice, s in {0.15, 0.25, 0.35} x height,
//     rest shape, scored on potentials smoothed at 2 sigma.
//  2. The best 20 seeds are refined on the 2 sigma potentials, the best 5 of
//     those on the sigma potentials, and the winner is re-refined with fresh
//     steps until that stops helping (at most 3 times).
//  3. A last polish from the winner with quarter-size steps, run down to
//     0.05 px. The 0.25 px stop alone leaves s up to ~2% short on some
//     noise-free renders.
// The returned energy is always under the sigma potentials.
FitResult fit(const Frame& frame, const EnergyConfig& config, FitTrace* trace = nullptr);

// Derivative-free descent from one starting point. Directions are the six
// parameter axes plus every signed pair of them. Initial steps are (8, 8, 4)
// px for (cx, cy, s), 0.05 rad for phi and 0.02 for e and m. A direction
// whose step fails both ways halves its step. Stops when every step is below
// 0.25 px-equivalent (angles and fractions count as step * s) or after 200
// sweeps. Only strict decreases are accepted.
FitResult refine(const PotentialFields& fields, const EnergyConfig& config,
                 const TemplateParams& start, DescentTrace* trace = nullptr);

inline constexpr int kMaxSweeps = 200;
inline constexpr double kStopStepPx = 0.25;
inline constexpr int kLattice = 16;
inline constexpr int kCoarseSeedsRefined = 20;
inline constexpr int kSeedsRefined = 5;
inline constexpr int kMaxRestarts = 3;
inline constexpr double kPolishStepFactor = 0.25;
inline constexpr double kPolishStopPx = 0.05;
inline constexpr double kCoarseSigmaFactor = 2.0;
// Scales below this collapse every landmark onto one dark blob.
inline constexpr double kMinScale = 12.0;

}  // namespace examgrid::gesture
