#pragma once

// Time-stamped gap trajectories and the metrics computed from them.
//
// A run is summarised by its incumbent (best-so-far) gap as a right-continuous
// piecewise-constant function on [0, T]. All metrics work on the log of the
// floored gap, l(t) = ln max(gap(t), floor).

#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace dash::trajectory {

/// One recorded state: seconds since run start and the relative gap
/// (f - f*) / |f*|, dimensionless.
struct TracePoint {
  double time = 0.0;
  double gap = 0.0;

  /// Throws on negative time or gap (a negative gap means the reference
  /// value was not a valid bound).
  static TracePoint make(double time, double gap);

  friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

struct MetricConfig {
  double floor = 1e-9;
  double horizon = 1.0;

  void validate() const;
};

/// Monotone best-so-far trajectory. Point times strictly increase from 0,
/// gaps strictly decrease after the first point, and the value of the last
/// point is held constant up to the horizon.
class IncumbentTrace {
 public:
  /// Validates every invariant; throws dash::Error on violation.
  IncumbentTrace(std::vector<TracePoint> points, double horizon, double end_time);

  std::span<const TracePoint> points() const { return points_; }
  double horizon() const { return horizon_; }
  /// Time at which the producing run stopped (may be < horizon).
  double end_time() const { return end_time_; }
  double initial_gap() const { return points_.front().gap; }
  double final_gap() const { return points_.back().gap; }

  friend bool operator==(const IncumbentTrace&, const IncumbentTrace&) = default;

 private:
  std::vector<TracePoint> points_;
  double horizon_;
  double end_time_;
};

/// Running-minimum fold of a raw trace. Only strict improvements survive;
/// points past the horizon are outside the evaluation window and dropped.
/// `end_time` defaults to the time of the last raw point.
IncumbentTrace fold_incumbent(std::span<const TracePoint> raw, double horizon);
IncumbentTrace fold_incumbent(std::span<const TracePoint> raw, double horizon, double end_time);

double log_residual(double gap, const MetricConfig& cfg);

/// (1/T) * sum_i l_i (t_{i+1} - t_i), last segment extended to T.
double time_avg_log_residual(const IncumbentTrace& trace, const MetricConfig& cfg);

/// (2/T) * (l_0 - J(T)); the slope of the linear log-trajectory with the same
/// time average. Always >= 0 for an incumbent trace.
double tldr(const IncumbentTrace& trace, const MetricConfig& cfg);

/// l at the horizon.
double terminal_log_residual(const IncumbentTrace& trace, const MetricConfig& cfg);

struct AltMetrics {
  double terminal_time = 0.0;
  /// Earliest time with incumbent gap <= 0.1 * gap(0); horizon if never.
  double time_to_10pct = 0.0;
  /// (1/T) * integral of the incumbent gap (linear space).
  double linear_auc = 0.0;
};

AltMetrics alt_metrics(const IncumbentTrace& trace, const MetricConfig& cfg);

/// True when the initial construction already hit the reference (gap 0). Such
/// runs have tLDR = 0 by definition and are flagged in reports.
bool solved_at_start(const IncumbentTrace& trace);

// Trace file: {"horizon", "delta", "end_time", "points": [{"t", "gap"}...]}.
nlohmann::json to_json(const IncumbentTrace& trace, double delta);
/// Returns the trace and writes the stored floor into `delta` when non-null.
IncumbentTrace trace_from_json(const nlohmann::json& j, double* delta = nullptr);

}  // namespace dash::trajectory
