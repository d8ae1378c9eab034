#pragma once

#include <string>
#include <vector>

#include "dash/solvers.hpp"

namespace dash::detail {

/// Raw incumbent log in gap space; improvements below f* are clamped to 0.
class TraceRecorder {
 public:
  explicit TraceRecorder(double f_star) : f_star_(f_star) {}

  void record(double t, double objective) {
    double g = relative_gap(objective, f_star_);
    if (g < 0.0) {
      // Below rounding noise the two values are the same tour length.
      if (g < -1e-9) beat_ = true;
      g = 0.0;
    }
    raw_.push_back({t, g});
  }
  bool beat_reference() const { return beat_; }
  trajectory::IncumbentTrace finish(double horizon, double end_time) const {
    return trajectory::fold_incumbent(raw_, horizon, end_time);
  }

 private:
  double f_star_;
  bool beat_ = false;
  std::vector<trajectory::TracePoint> raw_;
};

/// Accumulates clock time into a named phase for the lifetime of the scope.
class PhaseScope {
 public:
  PhaseScope(const RunClock& clock, std::map<std::string, double>& sink, const char* name)
      : clock_(clock), sink_(sink), name_(name), start_(clock.elapsed()) {}
  ~PhaseScope() { sink_[name_] += clock_.elapsed() - start_; }
  PhaseScope(const PhaseScope&) = delete;
  PhaseScope& operator=(const PhaseScope&) = delete;

 private:
  const RunClock& clock_;
  std::map<std::string, double>& sink_;
  const char* name_;
  double start_;
};

/// True when `cand` improves on `best` by more than rounding noise.
inline bool improves(double cand, double best) {
  return cand < best - 1e-12 * std::max(1.0, std::abs(best));
}

RunResult run_tour_search(const SolverConfig& cfg, const TspInstance& inst, double f_star,
                          std::uint64_t seed, const RunOptions& opts);
RunResult run_aco(const SolverConfig& cfg, const Instance& inst, double f_star,
                  std::uint64_t seed, const RunOptions& opts);
RunResult run_goa(const SolverConfig& cfg, const BppInstance& inst, double f_star,
                  std::uint64_t seed, const RunOptions& opts);

AcoIteration aco_step_cvrp(const CvrpInstance& inst, const DistanceMatrix& d, Pheromone& tau,
                           const AcoMechanism& theta, Rng& rng, RunClock* clock,
                           const Payload* best_so_far, double best_cost);
AcoIteration aco_step_mkp(const MkpInstance& inst, const std::vector<double>& eta,
                          Pheromone& tau, const AcoMechanism& theta, Rng& rng, RunClock* clock,
                          const Payload* best_so_far, double best_cost);
std::vector<double> mkp_heuristic(const MkpInstance& inst);

}  // namespace dash::detail
