#pragma once

// Parameterised metaheuristic backbones. A solver is a (theta, sigma) pair:
// theta fixes which moves exist (neighbourhood, operator, guidance,
// perturbation), sigma fixes when and for how long phases run.
//
//   GLS / ILS  TSP   2-opt (+ Or-opt) over kNN lists, edge penalties, kicks
//   ACO        CVRP  route construction, eta = 1/d
//              MKP   item selection, eta = profit / mean relative weight
//   GOA        BPP   one-pass online placement

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dash/problems.hpp"
#include "dash/rng.hpp"
#include "dash/trajectory.hpp"

namespace dash {

enum class Backbone { GLS, ILS, ACO, GOA };
std::string_view to_string(Backbone b);
Backbone backbone_from_string(std::string_view s);
bool backbone_supports(Backbone b, Task t);

enum class LsOperator { TwoOpt, OrOpt };  // OrOpt = 2-opt plus segment moves
enum class ScanMode { First, Best };
enum class KickOperator { TwoOptKick, DoubleBridge };
enum class GoaRule { BestFit, FirstFit, Scored };
enum class AcoDeposit { IterationBest, BestSoFar };

struct TourMechanism {
  int knn_k = 10;
  LsOperator op = LsOperator::TwoOpt;
  ScanMode scan = ScanMode::First;
  // acceptance is improve-only; the catalog has no other rule.
  bool guidance = true;
  int top_k = 1;
  double gls_lambda = 0.2;
  double weight = 1.0;  // penalty increment
  double lam = 0.0;     // length emphasis in the utility
  KickOperator kick = KickOperator::TwoOptKick;
  int kick_strength = 1;
  friend bool operator==(const TourMechanism&, const TourMechanism&) = default;
};

struct AcoMechanism {
  double alpha = 1.0;
  double beta = 2.0;
  double rho = 0.1;
  int n_ants = 20;
  AcoDeposit deposit = AcoDeposit::IterationBest;
  bool route_2opt = true;  // CVRP only
  friend bool operator==(const AcoMechanism&, const AcoMechanism&) = default;
};

struct GoaMechanism {
  GoaRule rule = GoaRule::BestFit;
  // Scored rule: fill^power - penalty * [0 < residual <= small_gap * C].
  double power = 1.0;
  double penalty = 0.0;
  double small_gap = 0.0;
  friend bool operator==(const GoaMechanism&, const GoaMechanism&) = default;
};

struct Schedule {
  double time_limit_s = 10.0;
  int loop_max = 1000;
  int max_no_improve = 50;
  int guidance_update_every = 1;
  int perturb_period = 1;  // stagnation_mod: kick when no_improve % period == 0
  int inner_steps = 20;    // local-search + guidance steps per outer loop
  int ls_max_moves = 1000000;
  friend bool operator==(const Schedule&, const Schedule&) = default;
};

struct SolverConfig {
  Backbone backbone = Backbone::GLS;
  TourMechanism tour;
  AcoMechanism aco;
  GoaMechanism goa;
  Schedule sigma;

  void validate() const;
  /// The theta block of the active backbone; equality of these blocks is the
  /// frozen-half test used by mutation and evolution.
  nlohmann::json theta_json() const;
  nlohmann::json sigma_json() const;
  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

nlohmann::json to_json(const SolverConfig& cfg);
/// Missing fields take the backbone defaults; unknown fields are an error.
SolverConfig solver_config_from_json(const nlohmann::json& j);

/// Defaults for a backbone (ILS: guidance off, double-bridge kicks).
SolverConfig default_config(Backbone b);
/// Task-initial solver each evolution run starts from.
SolverConfig seed_config(Task task);
/// The a280 specialist listing (knn 16, top_k 4, lambda 1.2, 4 s / 150 / 30).
SolverConfig a280_specialist();

// ---------------------------------------------------------------------------
// Time sources

enum class ClockMode { Wall, Work };
std::string_view to_string(ClockMode m);
ClockMode clock_mode_from_string(std::string_view s);

/// Default seconds per work unit; one unit is roughly one candidate-move
/// evaluation, so work time tracks wall time on a desktop core.
inline constexpr double kSecondsPerWorkUnit = 1e-8;

/// Run-local clock. In Work mode time is charged units x seconds_per_unit,
/// so identical runs report identical times.
class RunClock {
 public:
  explicit RunClock(ClockMode mode = ClockMode::Wall, double seconds_per_unit = kSecondsPerWorkUnit);
  double elapsed() const;
  void charge(std::uint64_t units) { units_ += units; }
  std::uint64_t units() const { return units_; }
  ClockMode mode() const { return mode_; }

 private:
  ClockMode mode_;
  double spu_;
  std::chrono::steady_clock::time_point start_;
  std::uint64_t units_ = 0;
};

// ---------------------------------------------------------------------------
// Running

struct RunOptions {
  double horizon = 1.0;
  ClockMode clock = ClockMode::Wall;
  double seconds_per_unit = kSecondsPerWorkUnit;
};

struct RunResult {
  trajectory::IncumbentTrace trace{{{0.0, 0.0}}, 1.0, 0.0};
  Payload solution;
  double objective = 0.0;
  double t_run = 0.0;
  std::uint64_t seed = 0;
  /// Seconds per phase (construct, local_search, guidance, perturbation,
  /// construct_ants, pheromone, placement).
  std::map<std::string, double> phase_time;
  std::uint64_t work_units = 0;
  int loops = 0;
  /// The run found an objective below f*; gaps were clamped to 0.
  bool beat_reference = false;
};

/// Effective stop time is min(sigma.time_limit_s, horizon).
RunResult run_solver(const SolverConfig& cfg, const Instance& inst, double f_star,
                     std::uint64_t seed, const RunOptions& opts);

// ---------------------------------------------------------------------------
// Exposed building blocks

/// Symmetric per-edge penalty counts.
class EdgePenalties {
 public:
  explicit EdgePenalties(std::size_t n = 0) : n_(n), p_(n * n, 0.0) {}
  double operator()(std::size_t a, std::size_t b) const { return p_[a * n_ + b]; }
  void add(std::size_t a, std::size_t b, double w) {
    p_[a * n_ + b] += w;
    p_[b * n_ + a] += w;
  }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::vector<double> p_;
};

/// u_e = d_e * (d_e / mu)^lam / (1 + p_e), mu = mean edge length of `tour`.
double edge_utility(double d, double mu, double penalty, double lam);

/// Penalise the top_k highest-utility tour edges (ties: lower position).
/// Returns the penalised edges as (a, b) city pairs.
std::vector<std::pair<int, int>> gls_guidance_update(std::span<const int> tour,
                                                     const DistanceMatrix& d,
                                                     EdgePenalties& penalties,
                                                     const TourMechanism& theta, double mu);

/// Nearest-neighbour tour from node 0.
std::vector<int> nearest_neighbor_tour(const DistanceMatrix& d);

struct GoaOutcome {
  BinAssignment assignment;
  int bins = 0;
  /// (fraction of stream placed, prefix gap vs prefix lower bound).
  std::vector<std::pair<double, double>> prefix_gaps;
};
GoaOutcome goa_assign(const BppInstance& inst, const GoaMechanism& theta);

struct Pheromone {
  std::size_t dim = 0;
  std::vector<double> tau;
};
inline constexpr double kPheromoneFloor = 1e-12;

struct AcoIteration {
  std::vector<Payload> candidates;
  std::vector<double> costs;
  std::size_t best = 0;
};

/// One colony iteration: n_ants constructions, evaporation, deposit by the
/// iteration best (or `best_so_far` when deposit == BestSoFar and given).
AcoIteration aco_step(const CvrpInstance& inst, Pheromone& tau, const AcoMechanism& theta,
                      Rng& rng, const Payload* best_so_far = nullptr, double best_cost = 0.0);
AcoIteration aco_step(const MkpInstance& inst, Pheromone& tau, const AcoMechanism& theta,
                      Rng& rng, const Payload* best_so_far = nullptr, double best_cost = 0.0);
Pheromone initial_pheromone(const Instance& inst);

}  // namespace dash
