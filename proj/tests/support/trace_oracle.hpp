#pragma once

// Test-only oracle for the trajectory integrals. It knows nothing about
// incumbent folding or segment sums: it evaluates the best-so-far log gap
// pointwise from the raw samples and integrates by adaptive bisection, which
// is exact on constant cells because the function is monotone.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dash/rng.hpp"
#include "dash/trajectory.hpp"

namespace dash::testing {

struct RawSample {
  double t;
  double gap;
};

inline double best_log_gap_at(const std::vector<RawSample>& raw, double tau, double floor) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : raw)
    if (s.t <= tau) best = std::min(best, s.gap);
  return std::log(std::max(best, floor));
}

inline double integrate_cell(const std::vector<RawSample>& raw, double a, double b, double floor,
                             int depth) {
  const double la = best_log_gap_at(raw, a, floor);
  const double lb = best_log_gap_at(raw, b, floor);
  if (la == lb || depth >= 60 || b - a <= 0.0) return la * (b - a);
  const double mid = 0.5 * (a + b);
  if (mid <= a || mid >= b) return la * (b - a);
  return integrate_cell(raw, a, mid, floor, depth + 1) +
         integrate_cell(raw, mid, b, floor, depth + 1);
}

/// (1/T) * integral_0^T l(tau) dtau by dense adaptive quadrature.
inline double quadrature_time_avg(const std::vector<RawSample>& raw, double horizon,
                                  double floor) {
  constexpr int kCells = 256;
  double total = 0.0;
  for (int c = 0; c < kCells; ++c) {
    const double a = horizon * c / kCells;
    const double b = c + 1 == kCells ? horizon : horizon * (c + 1) / kCells;
    total += integrate_cell(raw, a, b, floor, 0);
  }
  return total / horizon;
}

inline double quadrature_tldr(const std::vector<RawSample>& raw, double horizon, double floor) {
  const double l0 = best_log_gap_at(raw, 0.0, floor);
  return 2.0 / horizon * (l0 - quadrature_time_avg(raw, horizon, floor));
}

/// Random raw (non-monotone) trace on [0, end] with end <= horizon.
inline std::vector<RawSample> random_raw_trace(Rng& rng, double horizon) {
  const std::size_t m = 1 + rng.index(40);
  const double end = horizon * rng.uniform(0.05, 1.0);
  std::vector<double> times{0.0};
  for (std::size_t i = 1; i < m; ++i) times.push_back(rng.uniform(0.0, end));
  std::sort(times.begin(), times.end());
  std::vector<RawSample> raw;
  double g = std::exp(rng.uniform(-3.0, 1.0));
  for (double t : times) {
    // Mostly improving, sometimes worse, occasionally exactly optimal.
    const double r = rng.uniform();
    if (r < 0.05)
      g = 0.0;
    else if (r < 0.3)
      g = g * rng.uniform(1.0, 3.0) + 1e-3;
    else
      g = g * rng.uniform(0.05, 1.0);
    raw.push_back({t, g});
  }
  return raw;
}

inline std::vector<trajectory::TracePoint> to_points(const std::vector<RawSample>& raw) {
  std::vector<trajectory::TracePoint> pts;
  for (const auto& s : raw) pts.push_back({s.t, s.gap});
  return pts;
}

}  // namespace dash::testing
