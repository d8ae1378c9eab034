#pragma once

// The four benchmark problems: instances, solution payloads, exact objective
// evaluation, gap computation, and seeded generators.
//
// All objectives are minimised. MKP is evaluated as f = -profit, and every
// stored reference value (`reference`) uses that same convention.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace dash {

enum class Task { TSP, CVRP, BPP, MKP };

std::string_view to_string(Task t);
Task task_from_string(std::string_view s);

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Synthetic instances use exact Euclidean distances; TSPLIB EUC_2D rounds
/// each edge to the nearest integer.
enum class DistanceRounding { Exact, TsplibNint };

struct TspInstance {
  std::string name;
  std::vector<Point> coords;
  DistanceRounding rounding = DistanceRounding::Exact;
  std::optional<double> reference;

  std::size_t size() const { return coords.size(); }
  void validate() const;
  friend bool operator==(const TspInstance&, const TspInstance&) = default;
};

struct CvrpInstance {
  std::string name;
  Point depot;
  std::vector<Point> customers;
  std::vector<int> demands;
  int capacity = 0;
  std::optional<double> reference;

  std::size_t size() const { return customers.size(); }
  void validate() const;
  friend bool operator==(const CvrpInstance&, const CvrpInstance&) = default;
};

struct BppInstance {
  std::string name;
  std::vector<int> items;
  int capacity = 0;

  std::size_t size() const { return items.size(); }
  void validate() const;
  friend bool operator==(const BppInstance&, const BppInstance&) = default;
};

struct MkpInstance {
  std::string name;
  std::vector<int> profits;
  /// weights[j][i]: consumption of item i in constraint j.
  std::vector<std::vector<int>> weights;
  std::vector<int> capacities;
  std::optional<double> reference;

  std::size_t size() const { return profits.size(); }
  std::size_t constraints() const { return capacities.size(); }
  void validate() const;
  friend bool operator==(const MkpInstance&, const MkpInstance&) = default;
};

using Instance = std::variant<TspInstance, CvrpInstance, BppInstance, MkpInstance>;

Task task_of(const Instance& inst);
const std::string& name_of(const Instance& inst);
void validate(const Instance& inst);

/// Reference objective f*: the stored value, or the BPP lower bound.
std::optional<double> reference_of(const Instance& inst);

// ---------------------------------------------------------------------------
// Distances

double euclidean(Point a, Point b);
double edge_length(Point a, Point b, DistanceRounding rounding);

/// Dense symmetric matrix, rows filled by the SIMD distance kernel.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  DistanceMatrix(std::span<const Point> pts, DistanceRounding rounding);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {d_.data() + i * n_, n_}; }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

/// Depot first, then customers in order.
std::vector<Point> cvrp_nodes(const CvrpInstance& inst);

// ---------------------------------------------------------------------------
// Solutions

struct Tour {
  std::vector<int> order;
  friend bool operator==(const Tour&, const Tour&) = default;
};

/// Customer indices are 0-based into CvrpInstance::customers; each route
/// implicitly starts and ends at the depot.
struct RouteSet {
  std::vector<std::vector<int>> routes;
  friend bool operator==(const RouteSet&, const RouteSet&) = default;
};

struct BinAssignment {
  std::vector<int> bin_of_item;
  friend bool operator==(const BinAssignment&, const BinAssignment&) = default;
};

struct ItemSelection {
  std::vector<std::uint8_t> chosen;
  friend bool operator==(const ItemSelection&, const ItemSelection&) = default;
};

using Payload = std::variant<Tour, RouteSet, BinAssignment, ItemSelection>;

struct Verdict {
  bool feasible = false;
  /// Exact objective; meaningful only when feasible.
  double objective = 0.0;
  std::string reason;
};

/// Throws on task/payload mismatch or wrong dimensions; constraint
/// violations come back as an infeasible verdict.
Verdict evaluate(const Instance& inst, const Payload& sol);

double tour_length(std::span<const int> order, const DistanceMatrix& d);
double tour_length(const TspInstance& inst, std::span<const int> order);

/// (f - f*) / |f*| * 100. Throws when f* == 0.
double gap_percent(double f, double f_star);
/// (f - f*) / |f*|, the dimensionless residual used by trajectories.
double relative_gap(double f, double f_star);

// ---------------------------------------------------------------------------
// Generation

enum class TspPattern { Uniform, Clustered, JitteredGrid, Ring, Rectangle };

std::string_view to_string(TspPattern p);
TspPattern tsp_pattern_from_string(std::string_view s);

struct GenParams {
  std::size_t n = 100;            // TSP nodes, CVRP customers, MKP items
  std::size_t items = 5000;       // BPP stream length
  int capacity = 100;             // BPP bin capacity
  std::size_t constraints = 5;    // MKP d
  double weibull_shape = 3.0;
  double weibull_scale = 45.0;
  std::optional<TspPattern> pattern{};  // unset: drawn with equal probability

  // Pattern shape defaults.
  std::size_t clusters = 5;
  double cluster_sd = 0.05;
  double grid_jitter = 0.02;
  double ring_radius = 0.4;
  double ring_noise = 0.02;
  double rect_aspect = 4.0;
};

/// Deterministic in (task, params, seed).
Instance generate(Task task, const GenParams& params, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Serialisation

nlohmann::json to_json(const Instance& inst);
Instance instance_from_json(const nlohmann::json& j);

/// Reads a native JSON instance, or a TSPLIB file when the extension is .tsp.
Instance load_instance(const std::filesystem::path& path);
void save_instance(const Instance& inst, const std::filesystem::path& path);

}  // namespace dash
