#include "examgrid/gesture/fit.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace examgrid::gesture {

namespace {

constexpr std::array<double, 3> kSeedScales = {0.15, 0.25, 0.35};
constexpr std::array<double, 6> kInitialSteps = {8.0, 8.0, 4.0, 0.05, 0.02, 0.02};

double& coord(TemplateParams& p, int i) {
  switch (i) {
    case 0: return p.cx;
    case 1: return p.cy;
    case 2: return p.s;
    case 3: return p.phi;
    case 4: return p.e;
    default: return p.m;
  }
}

struct Direction {
  std::array<double, 6> unit{};  // initial step per parameter, signed
  double scale = 1.0;            // halves on failure
};

std::vector<Direction> directions() {
  std::vector<Direction> dirs;
  for (int i = 0; i < 6; ++i) {
    Direction d;
    d.unit[i] = kInitialSteps[i];
    dirs.push_back(d);
  }
  for (int i = 0; i < 6; ++i) {
    for (int j = i + 1; j < 6; ++j) {
      for (double sign : {1.0, -1.0}) {
        Direction d;
        d.unit[i] = kInitialSteps[i];
        d.unit[j] = sign * kInitialSteps[j];
        dirs.push_back(d);
      }
    }
  }
  return dirs;
}

// Largest landmark displacement the step can cause, in pixels.
double pixel_step(const TemplateParams& p, const Direction& d) {
  double px = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double a = std::abs(d.unit[i] * d.scale) * (i < 3 ? 1.0 : p.s);
    px = std::max(px, a);
  }
  return px;
}

bool admissible(const TemplateParams& p) { return in_range(p) && p.s >= kMinScale; }

struct Scored {
  TemplateParams params;
  double energy;
};

void sort_by_energy(std::vector<Scored>& v) {
  std::stable_sort(v.begin(), v.end(),
                   [](const Scored& a, const Scored& b) { return a.energy < b.energy; });
}

FitResult descend(const PotentialFields& fields, const EnergyConfig& config,
                  const TemplateParams& start, DescentTrace* trace, double step_mult,
                  double stop_px) {
  TemplateParams p = start;
  double e_cur = energy(p, fields, config);
  if (trace) trace->accepted.push_back(e_cur);

  static const std::vector<Direction> kDirections = directions();
  auto dirs = kDirections;
  for (auto& d : dirs) d.scale = step_mult;
  auto settled = [&] {
    return std::all_of(dirs.begin(), dirs.end(),
                       [&](const Direction& d) { return pixel_step(p, d) < stop_px; });
  };

  int sweep = 0;
  while (!settled() && sweep < kMaxSweeps) {
    ++sweep;
    for (auto& d : dirs) {
      if (pixel_step(p, d) < stop_px) continue;
      TemplateParams best = p;
      double e_best = e_cur;
      for (double sign : {1.0, -1.0}) {
        TemplateParams q = p;
        for (int i = 0; i < 6; ++i) coord(q, i) += sign * d.scale * d.unit[i];
        if (!admissible(q)) continue;
        const double e_q = energy(q, fields, config);
        if (e_q < e_best) {
          best = q;
          e_best = e_q;
        }
      }
      if (e_best < e_cur) {
        assert(e_best <= e_cur);
        p = best;
        e_cur = e_best;
        if (trace) trace->accepted.push_back(e_cur);
      } else {
        d.scale *= 0.5;
      }
    }
  }

  FitResult r;
  r.params = p;
  r.energy = e_cur;
  r.converged = settled();
  r.iterations = sweep;
  return r;
}

}  // namespace

FitResult refine(const PotentialFields& fields, const EnergyConfig& config,
                 const TemplateParams& start, DescentTrace* trace) {
  return descend(fields, config, start, trace, 1.0, kStopStepPx);
}

FitResult fit(const Frame& frame, const EnergyConfig& config, FitTrace* trace) {
  check_config(config);
  const auto fine = compute_potentials(frame, config.sigma);
  const auto coarse = compute_potentials(frame, config.sigma * kCoarseSigmaFactor);

  std::vector<Scored> seeds;
  for (double scale : kSeedScales) {
    for (int cy = kLattice; cy < frame.height; cy += kLattice) {
      for (int cx = kLattice; cx < frame.width; cx += kLattice) {
        TemplateParams p{static_cast<double>(cx), static_cast<double>(cy), scale * frame.height,
                         0.0, config.e0, config.m0};
        seeds.push_back({p, energy(p, coarse, config)});
      }
    }
  }
  if (seeds.empty()) throw std::invalid_argument("frame too small for the seed lattice");
  const bool flat = std::all_of(seeds.begin(), seeds.end(),
                                [&](const Scored& s) { return s.energy == seeds.front().energy; });
  sort_by_energy(seeds);

  auto run = [&](const PotentialFields& f, const TemplateParams& start) {
    DescentTrace t;
    auto r = refine(f, config, start, trace ? &t : nullptr);
    if (trace) trace->runs.push_back(std::move(t));
    return r;
  };

  std::vector<Scored> stage;
  const std::size_t n_coarse = std::min<std::size_t>(kCoarseSeedsRefined, seeds.size());
  for (std::size_t i = 0; i < n_coarse; ++i) {
    auto r = run(coarse, seeds[i].params);
    stage.push_back({r.params, r.energy});
  }
  sort_by_energy(stage);

  FitResult best;
  bool have = false;
  const std::size_t n_fine = std::min<std::size_t>(kSeedsRefined, stage.size());
  for (std::size_t i = 0; i < n_fine; ++i) {
    auto r = run(fine, stage[i].params);
    if (!have || r.energy < best.energy) {
      best = r;
      have = true;
    }
  }
  for (int i = 0; i < kMaxRestarts; ++i) {
    auto r = run(fine, best.params);
    if (!(r.energy < best.energy)) break;
    best = r;
  }
  {
    DescentTrace t;
    auto r = descend(fine, config, best.params, trace ? &t : nullptr, kPolishStepFactor, kPolishStopPx);
    if (trace) trace->runs.push_back(std::move(t));
    if (r.energy < best.energy) {
      r.iterations += best.iterations;
      best = r;
    }
  }

  if (flat) {
    best.degenerate = true;
    best.comment = "degenerate: flat energy landscape, position and scale are the first seed";
  }
  return best;
}

}  // namespace examgrid::gesture
