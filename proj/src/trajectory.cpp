#include "dash/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "dash/errors.hpp"
#include "dash/simd/kernels.hpp"

namespace dash::trajectory {

TracePoint TracePoint::make(double time, double gap) {
  if (!std::isfinite(time) || time < 0.0)
    fail(ErrorKind::InvalidArgument, "trace point time must be finite and >= 0");
  if (!std::isfinite(gap) || gap < 0.0)
    fail(ErrorKind::InvalidArgument,
         "trace point gap must be finite and >= 0 (got " + std::to_string(gap) +
             "); the reference value is not a valid bound");
  return {time, gap};
}

void MetricConfig::validate() const {
  require(floor > 0.0 && std::isfinite(floor), "metric floor must be > 0");
  require(horizon > 0.0 && std::isfinite(horizon), "metric horizon must be > 0");
}

IncumbentTrace::IncumbentTrace(std::vector<TracePoint> points, double horizon, double end_time)
    : points_(std::move(points)), horizon_(horizon), end_time_(end_time) {
  require(!points_.empty(), "incumbent trace is empty");
  require(horizon_ > 0.0 && std::isfinite(horizon_), "trace horizon must be > 0");
  require(end_time_ >= 0.0 && std::isfinite(end_time_), "trace end time must be >= 0");
  require(points_.front().time == 0.0, "incumbent trace must start at time 0");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    require(p.time >= 0.0 && p.gap >= 0.0 && std::isfinite(p.gap), "invalid trace point");
    if (i > 0) {
      require(p.time > points_[i - 1].time, "trace times must strictly increase");
      require(p.gap < points_[i - 1].gap, "incumbent gaps must strictly decrease");
    }
  }
  require(points_.back().time <= horizon_, "trace extends past its horizon");
}

IncumbentTrace fold_incumbent(std::span<const TracePoint> raw, double horizon) {
  require(!raw.empty(), "cannot fold an empty trace");
  return fold_incumbent(raw, horizon, raw.back().time);
}

IncumbentTrace fold_incumbent(std::span<const TracePoint> raw, double horizon, double end_time) {
  require(!raw.empty(), "cannot fold an empty trace");
  require(horizon > 0.0, "horizon must be > 0");
  double prev_time = 0.0;
  for (const auto& p : raw) {
    TracePoint::make(p.time, p.gap);  // validates sign and finiteness
    require(p.time >= prev_time, "raw trace times must be non-decreasing");
    prev_time = p.time;
  }
  require(raw.front().time == 0.0, "raw trace must start at time 0");

  std::vector<TracePoint> out;
  out.push_back(raw.front());
  for (const auto& p : raw.subspan(1)) {
    if (p.time > horizon) break;
    if (p.gap < out.back().gap) {
      if (p.time == out.back().time)
        out.back().gap = p.gap;  // same instant: keep the better value
      else
        out.push_back(p);
    }
  }
  // A same-instant improvement at t=0 can leave the first point improved in
  // place, which is still strictly decreasing afterwards.
  return IncumbentTrace(std::move(out), horizon, end_time);
}

double log_residual(double gap, const MetricConfig& cfg) {
  require(gap >= 0.0, "log_residual: gap must be >= 0");
  return std::log(std::max(gap, cfg.floor));
}

namespace {

void check_horizon(const IncumbentTrace& trace, const MetricConfig& cfg) {
  cfg.validate();
  require(std::abs(trace.horizon() - cfg.horizon) <= 1e-12 * cfg.horizon,
          "trace horizon differs from metric horizon");
}

// sum_i value(p_i) * (t_{i+1} - t_i) with t_m = T, streamed through the dot
// kernel in fixed-size blocks.
template <typename F>
double weighted_segment_sum(std::span<const TracePoint> pts, double horizon, F value) {
  constexpr std::size_t kBlock = 512;
  std::array<double, kBlock> vals{};
  std::array<double, kBlock> widths{};
  double total = 0.0;
  for (std::size_t base = 0; base < pts.size(); base += kBlock) {
    const std::size_t len = std::min(kBlock, pts.size() - base);
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t i = base + k;
      const double next = i + 1 < pts.size() ? pts[i + 1].time : horizon;
      vals[k] = value(pts[i].gap);
      widths[k] = next - pts[i].time;
    }
    total += simd::dot(std::span<const double>(vals.data(), len),
                       std::span<const double>(widths.data(), len));
  }
  return total;
}

}  // namespace

double time_avg_log_residual(const IncumbentTrace& trace, const MetricConfig& cfg) {
  check_horizon(trace, cfg);
  const double floor = cfg.floor;
  const double sum = weighted_segment_sum(trace.points(), cfg.horizon, [floor](double g) {
    return std::log(std::max(g, floor));
  });
  return sum / cfg.horizon;
}

double tldr(const IncumbentTrace& trace, const MetricConfig& cfg) {
  const double l0 = log_residual(trace.initial_gap(), cfg);
  const double j = time_avg_log_residual(trace, cfg);
  // Monotone traces give J <= l0; clip rounding noise at the constant case.
  return std::max(0.0, 2.0 / cfg.horizon * (l0 - j));
}

double terminal_log_residual(const IncumbentTrace& trace, const MetricConfig& cfg) {
  check_horizon(trace, cfg);
  return log_residual(trace.final_gap(), cfg);
}

AltMetrics alt_metrics(const IncumbentTrace& trace, const MetricConfig& cfg) {
  check_horizon(trace, cfg);
  AltMetrics m;
  m.terminal_time = trace.end_time();
  const double threshold = 0.1 * trace.initial_gap();
  m.time_to_10pct = cfg.horizon;
  for (const auto& p : trace.points()) {
    if (p.gap <= threshold) {
      m.time_to_10pct = p.time;
      break;
    }
  }
  m.linear_auc =
      weighted_segment_sum(trace.points(), cfg.horizon, [](double g) { return g; }) /
      cfg.horizon;
  return m;
}

bool solved_at_start(const IncumbentTrace& trace) { return trace.initial_gap() == 0.0; }

nlohmann::json to_json(const IncumbentTrace& trace, double delta) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : trace.points()) pts.push_back({{"t", p.time}, {"gap", p.gap}});
  return {{"horizon", trace.horizon()},
          {"delta", delta},
          {"end_time", trace.end_time()},
          {"points", std::move(pts)}};
}

IncumbentTrace trace_from_json(const nlohmann::json& j, double* delta) {
  try {
    std::vector<TracePoint> pts;
    for (const auto& p : j.at("points"))
      pts.push_back(TracePoint::make(p.at("t").get<double>(), p.at("gap").get<double>()));
    const double horizon = j.at("horizon").get<double>();
    const double end = j.contains("end_time") ? j.at("end_time").get<double>()
                                              : (pts.empty() ? 0.0 : pts.back().time);
    if (delta) *delta = j.at("delta").get<double>();
    return IncumbentTrace(std::move(pts), horizon, end);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, std::string("malformed trace file: ") + e.what());
  }
}

}  // namespace dash::trajectory
