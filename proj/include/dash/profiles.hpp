#pragma once

// Instance profiles and the group model used to route instances to per-group
// solver archives: a fixed-length feature vector per task, z-score
// normalisation, k-means grouping, and nearest-prototype lookup.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dash/problems.hpp"

namespace dash {

struct InstanceProfile {
  Task task = Task::TSP;
  std::vector<double> features;
  /// Set when a ratio feature had a zero denominator and was reported as 0.
  bool degenerate = false;
};

/// Feature count per task: TSP 8, CVRP 9, BPP 7, MKP 9.
std::size_t profile_length(Task task);
std::span<const std::string_view> feature_names(Task task);

/// Pairwise statistics switch to sampling above this many points.
inline constexpr std::size_t kExactPairLimit = 320;
inline constexpr std::size_t kSampledPairs = 50000;

InstanceProfile extract_profile(const Instance& inst);

/// Linear-interpolation quantile (R type 7) of an unsorted sample.
double quantile(std::vector<double> values, double q);

struct GroupModel {
  Task task = Task::TSP;
  std::vector<double> means;
  std::vector<double> stds;
  /// G rows in normalised space.
  std::vector<std::vector<double>> prototypes;

  std::size_t groups() const { return prototypes.size(); }
  std::size_t dim() const { return means.size(); }
  std::vector<double> normalize(std::span<const double> raw) const;
  void validate() const;
};

struct KMeansFit {
  GroupModel model;
  /// Final group of every input profile.
  std::vector<int> assignment;
  /// Within-cluster SSE after each assignment step.
  std::vector<double> sse_history;
  int iterations = 0;
};

struct KMeansOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;
};

KMeansFit fit_groups_detailed(std::span<const InstanceProfile> profiles, std::size_t groups,
                              std::uint64_t seed, KMeansOptions opts = {});
GroupModel fit_groups(std::span<const InstanceProfile> profiles, std::size_t groups,
                      std::uint64_t seed);

/// argmin_g ||normalize(phi) - phi_g||, lowest index on ties.
std::size_t nearest_group(const InstanceProfile& profile, const GroupModel& model);

nlohmann::json to_json(const GroupModel& model);
GroupModel group_model_from_json(const nlohmann::json& j);

}  // namespace dash
