#pragma once

// Exact reference values for desk-scale instances. Used as f* for gaps and
// as independent checks on the heuristics.

#include <cstddef>
#include <optional>
#include <vector>

#include "dash/problems.hpp"

namespace dash {

inline constexpr std::size_t kTspOracleMaxNodes = 20;
inline constexpr std::size_t kMkpOracleMaxItems = 20;
inline constexpr std::size_t kCvrpOracleMaxCustomers = 8;

struct OracleResult {
  /// Optimal objective (minimisation convention), or the BPP lower bound.
  double value = 0.0;
  /// An optimal solution when the oracle constructs one (not for BPP).
  std::optional<Payload> witness;
};

/// Held-Karp for TSP, subset enumeration for MKP, partition DP for CVRP,
/// ceil(sum w / C) for BPP. Throws ErrorKind::TooLarge past the size limits.
OracleResult oracle_optimum(const Instance& inst);

/// Held-Karp dynamic program over a distance matrix. Returns the optimal
/// cycle length and a tour starting at node 0.
std::pair<double, std::vector<int>> held_karp(const DistanceMatrix& d);

}  // namespace dash
