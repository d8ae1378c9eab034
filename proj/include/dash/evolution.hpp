#pragma once

// Layered solver evolution.
//
// Each iteration picks a parent from the population, samples m instances per
// group, and runs MDL -> MCL -> SSL1 -> SSL2 on that one batch. A layer's
// candidate replaces the working config only if accept() says so; every
// evaluated config is offered to every group archive regardless.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dash/mutation.hpp"
#include "dash/profiles.hpp"
#include "dash/solvers.hpp"

namespace dash {

struct ToleranceParams {
  double epsilon = 0.02;  // absolute for ell, relative for k and t
  double delta = 0.05;    // improvement threshold, same convention
  void validate() const;
};

enum class MetricKind { Ell, K, T };

/// Below this |x|, relative tolerances fall back to an absolute floor.
inline constexpr double kRelativeFloor = 1e-9;

/// |x' - x| <= eps for Ell, <= eps |x| for K and T.
bool within_tolerance(double x_prime, double x, MetricKind kind, double eps);

struct GroupStats {
  double ell = 0.0;
  double k = 0.0;
  double t = 0.0;
  int count = 0;
  friend bool operator==(const GroupStats&, const GroupStats&) = default;
};

/// Batch means plus per-group slices (index = group id).
struct EvalSummary {
  double ell = 0.0;
  double k = 0.0;
  double t = 0.0;
  std::vector<GroupStats> groups;
  friend bool operator==(const EvalSummary&, const EvalSummary&) = default;
};

bool accept(Layer layer, const EvalSummary& parent, const EvalSummary& cand,
            const ToleranceParams& tol);

// ---------------------------------------------------------------------------
// Training data and batches

struct TrainingInstance {
  std::string id;
  Instance instance;
  double f_star = 0.0;
  int group = 0;
};

struct TrainingSet {
  Task task = Task::TSP;
  int groups = 1;
  std::vector<TrainingInstance> items;

  std::vector<std::size_t> members(int g) const;
  void validate() const;
};

/// Profiles every instance, fits G groups and writes the assignment back.
GroupModel group_training_set(TrainingSet& set, int groups, std::uint64_t seed);

struct Batch {
  std::vector<std::vector<std::size_t>> by_group;  // indices into TrainingSet::items
  std::uint64_t run_seed = 0;                      // per-run seeds derive from this
};

/// m instances per group; without replacement unless the group is smaller.
Batch sample_batch(const TrainingSet& set, int m, std::uint64_t seed);

struct EvalSettings {
  double horizon = 1.0;
  ClockMode clock = ClockMode::Work;
  double seconds_per_unit = kSecondsPerWorkUnit;
  double floor = 1e-9;
  int jobs = 1;
};

struct InstanceOutcome {
  std::size_t index = 0;
  int group = 0;
  double ell = 0.0;  // terminal log-residual
  double k = 0.0;    // tLDR against the cached l(0)
  double t_run = 0.0;
  double ell0 = 0.0;
  std::map<std::string, double> phase_time;
};

struct EvalRecord {
  bool valid = true;
  std::string error;
  std::vector<InstanceOutcome> runs;
  EvalSummary summary;

  Feedback feedback() const;
};

/// l(0) per training instance, measured once from the initial construction.
class Ell0Cache {
 public:
  /// Stored value, or `measured` after storing it on first use.
  double resolve(std::size_t index, double measured);
  std::size_t hits() const { return hits_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::mutex mu_;
  std::map<std::size_t, double> values_;
  std::size_t hits_ = 0;
};

EvalRecord evaluate_batch(const SolverConfig& cfg, const TrainingSet& set, const Batch& batch,
                          const EvalSettings& settings, Ell0Cache& cache);

// ---------------------------------------------------------------------------
// Population and archives

/// Archive order: lower ell, then higher k, then lower t.
bool ranks_before(const GroupStats& a, const GroupStats& b);

struct ArchiveEntry {
  SolverConfig config;
  GroupStats stats;
  std::string id;
  std::uint64_t seq = 0;  // offer order; breaks exact ties
};

/// Top-K distinct configs by ranks_before. A config offered again keeps
/// whichever of its stats ranks better.
class GroupArchive {
 public:
  explicit GroupArchive(std::size_t capacity = 5) : capacity_(capacity) {}
  /// True when the archive changed.
  bool offer(const SolverConfig& cfg, const GroupStats& stats, const std::string& id,
             std::uint64_t seq);
  const std::vector<ArchiveEntry>& entries() const { return entries_; }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::vector<ArchiveEntry> entries_;
};

struct PopulationMember {
  SolverConfig config;
  EvalSummary summary;
  std::string id;
  std::uint64_t seq = 0;
};

/// At most k members ordered by batch-mean ell (then k, t, age).
class Population {
 public:
  explicit Population(std::size_t capacity = 5) : capacity_(capacity) {}
  /// Adds the member, then evicts the worst if over capacity; returns the
  /// evicted member (possibly the one just added).
  std::optional<PopulationMember> insert(PopulationMember m);
  /// Refreshes a member's statistics and restores the ordering.
  void update(const std::string& id, const EvalSummary& summary);
  const std::vector<PopulationMember>& members() const { return members_; }
  std::size_t capacity() const { return capacity_; }

 private:
  void sort();
  std::size_t capacity_;
  std::vector<PopulationMember> members_;
};

// ---------------------------------------------------------------------------
// Orchestration

struct EvolutionConfig {
  int iterations = 100;
  int groups = 10;
  int m = 3;
  int population = 5;  // k
  int archive = 5;     // K
  ToleranceParams tol;
  EvalSettings eval;
  std::uint64_t master_seed = 0;
  std::string provider = "stub";  // "stub" or "llm"
  LlmSettings llm;
  std::uint64_t group_seed = 0;   // k-means seeding

  void validate() const;
};

nlohmann::json to_json(const EvolutionConfig& cfg);
EvolutionConfig evolution_config_from_json(const nlohmann::json& j);

struct LayerCounts {
  int proposed = 0;
  int accepted = 0;
  int provider_failures = 0;
  int invalid = 0;
  int layer_violations = 0;
};

struct EvolutionResult {
  Population population;
  std::vector<GroupArchive> archives;
  EvalSummary seed_summary;
  std::map<std::string, LayerCounts> layers;
  int iterations = 0;
};

/// Event log records are single JSON lines. Fields whose names start with
/// "wall_" carry wall-clock data and are the only fields allowed to differ
/// between two runs with the same seed.
EvolutionResult run_evolution(const EvolutionConfig& cfg, const TrainingSet& set,
                              const SolverConfig& seed, MutationProvider& provider,
                              std::ostream* event_log);

nlohmann::json to_json(const GroupStats& s);
GroupStats group_stats_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalSummary& s);
EvalSummary eval_summary_from_json(const nlohmann::json& j);

}  // namespace dash
