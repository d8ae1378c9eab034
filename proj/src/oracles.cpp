#include "dash/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>

#include "dash/errors.hpp"

namespace dash {

std::pair<double, std::vector<int>> held_karp(const DistanceMatrix& d) {
  const std::size_t n = d.size();
  require(n >= 1, "held_karp: empty matrix");
  if (n == 1) return {0.0, {0}};
  if (n > kTspOracleMaxNodes)
    fail(ErrorKind::TooLarge, "Held-Karp limited to n <= " + std::to_string(kTspOracleMaxNodes));

  // Node 0 is fixed as the start; state (mask over nodes 1..n-1, last node).
  const std::size_t m = n - 1;
  const std::size_t full = std::size_t{1} << m;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dp(full * m, kInf);
  std::vector<std::int8_t> parent(full * m, -1);
  for (std::size_t j = 0; j < m; ++j) dp[(std::size_t{1} << j) * m + j] = d(0, j + 1);

  for (std::size_t mask = 1; mask < full; ++mask) {
    for (std::size_t j = 0; j < m; ++j) {
      if (!(mask & (std::size_t{1} << j))) continue;
      const double base = dp[mask * m + j];
      if (base == kInf) continue;
      for (std::size_t k = 0; k < m; ++k) {
        if (mask & (std::size_t{1} << k)) continue;
        const std::size_t next = mask | (std::size_t{1} << k);
        const double cand = base + d(j + 1, k + 1);
        if (cand < dp[next * m + k]) {
          dp[next * m + k] = cand;
          parent[next * m + k] = static_cast<std::int8_t>(j);
        }
      }
    }
  }

  double best = kInf;
  std::size_t last = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const double cand = dp[(full - 1) * m + j] + d(j + 1, 0);
    if (cand < best) {
      best = cand;
      last = j;
    }
  }

  std::vector<int> tour;
  std::size_t mask = full - 1;
  std::size_t cur = last;
  while (true) {
    tour.push_back(static_cast<int>(cur + 1));
    const auto p = parent[mask * m + cur];
    mask &= ~(std::size_t{1} << cur);
    if (p < 0) break;
    cur = static_cast<std::size_t>(p);
  }
  tour.push_back(0);
  std::reverse(tour.begin(), tour.end());
  return {best, tour};
}

namespace {

OracleResult mkp_oracle(const MkpInstance& inst) {
  const std::size_t n = inst.size();
  if (n > kMkpOracleMaxItems)
    fail(ErrorKind::TooLarge, "MKP oracle limited to n <= " + std::to_string(kMkpOracleMaxItems));
  const std::size_t d = inst.constraints();
  // Gray-code walk: each step toggles one item, so loads update in O(d).
  std::vector<long long> load(d, 0);
  long long profit = 0, best_profit = 0;
  std::uint64_t state = 0, best_state = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t g = 1; g < total; ++g) {
    const int bit = std::countr_zero(g);
    const bool adding = !(state & (std::uint64_t{1} << bit));
    state ^= std::uint64_t{1} << bit;
    const int sign = adding ? 1 : -1;
    profit += sign * inst.profits[bit];
    for (std::size_t j = 0; j < d; ++j) load[j] += sign * inst.weights[j][bit];
    if (profit <= best_profit) continue;
    bool ok = true;
    for (std::size_t j = 0; j < d && ok; ++j) ok = load[j] <= inst.capacities[j];
    if (ok) {
      best_profit = profit;
      best_state = state;
    }
  }
  ItemSelection sel;
  sel.chosen.resize(n);
  for (std::size_t i = 0; i < n; ++i) sel.chosen[i] = (best_state >> i) & 1U;
  return {-static_cast<double>(best_profit), Payload{sel}};
}

OracleResult cvrp_oracle(const CvrpInstance& inst) {
  const std::size_t n = inst.size();
  if (n > kCvrpOracleMaxCustomers)
    fail(ErrorKind::TooLarge,
         "CVRP oracle limited to n <= " + std::to_string(kCvrpOracleMaxCustomers));
  const auto nodes = cvrp_nodes(inst);
  const DistanceMatrix dist(nodes, DistanceRounding::Exact);
  const std::size_t full = std::size_t{1} << n;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // route_cost[S]: shortest depot-S-depot cycle (Held-Karp restricted to S).
  std::vector<double> path(full * n, kInf);
  std::vector<std::int8_t> pparent(full * n, -1);
  for (std::size_t j = 0; j < n; ++j) path[(std::size_t{1} << j) * n + j] = dist(0, j + 1);
  for (std::size_t mask = 1; mask < full; ++mask)
    for (std::size_t j = 0; j < n; ++j) {
      if (!(mask >> j & 1U) || path[mask * n + j] == kInf) continue;
      for (std::size_t k = 0; k < n; ++k) {
        if (mask >> k & 1U) continue;
        const std::size_t nx = mask | (std::size_t{1} << k);
        const double c = path[mask * n + j] + dist(j + 1, k + 1);
        if (c < path[nx * n + k]) {
          path[nx * n + k] = c;
          pparent[nx * n + k] = static_cast<std::int8_t>(j);
        }
      }
    }
  std::vector<double> route_cost(full, kInf);
  std::vector<int> route_last(full, -1);
  for (std::size_t mask = 1; mask < full; ++mask) {
    long long load = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (mask >> j & 1U) load += inst.demands[j];
    if (load > inst.capacity) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(mask >> j & 1U)) continue;
      const double c = path[mask * n + j] + dist(j + 1, 0);
      if (c < route_cost[mask]) {
        route_cost[mask] = c;
        route_last[mask] = static_cast<int>(j);
      }
    }
  }

  // best[S]: cheapest partition of S into feasible routes. The route holding
  // the lowest customer of S is enumerated to avoid counting permutations.
  std::vector<double> best(full, kInf);
  std::vector<std::size_t> choice(full, 0);
  best[0] = 0.0;
  for (std::size_t s = 1; s < full; ++s) {
    const std::size_t low = s & (~s + 1);
    const std::size_t rest = s ^ low;
    for (std::size_t sub = rest;; sub = (sub - 1) & rest) {
      const std::size_t r = sub | low;
      if (route_cost[r] < kInf && best[s ^ r] < kInf) {
        const double c = route_cost[r] + best[s ^ r];
        if (c < best[s]) {
          best[s] = c;
          choice[s] = r;
        }
      }
      if (sub == 0) break;
    }
  }

  RouteSet rs;
  for (std::size_t s = full - 1; s != 0;) {
    const std::size_t r = choice[s];
    std::vector<int> route;
    std::size_t mask = r;
    std::size_t cur = static_cast<std::size_t>(route_last[r]);
    while (true) {
      route.push_back(static_cast<int>(cur));
      const auto p = pparent[mask * n + cur];
      mask &= ~(std::size_t{1} << cur);
      if (p < 0) break;
      cur = static_cast<std::size_t>(p);
    }
    std::reverse(route.begin(), route.end());
    rs.routes.push_back(std::move(route));
    s ^= r;
  }
  return {best[full - 1], Payload{rs}};
}

}  // namespace

OracleResult oracle_optimum(const Instance& inst) {
  validate(inst);
  switch (task_of(inst)) {
    case Task::TSP: {
      const auto& tsp = std::get<TspInstance>(inst);
      if (tsp.size() > kTspOracleMaxNodes)
        fail(ErrorKind::TooLarge,
             "TSP oracle limited to n <= " + std::to_string(kTspOracleMaxNodes));
      const DistanceMatrix d(tsp.coords, tsp.rounding);
      auto [len, tour] = held_karp(d);
      return {len, Payload{Tour{std::move(tour)}}};
    }
    case Task::CVRP: return cvrp_oracle(std::get<CvrpInstance>(inst));
    case Task::BPP: return {*reference_of(inst), std::nullopt};
    case Task::MKP: return mkp_oracle(std::get<MkpInstance>(inst));
  }
  fail(ErrorKind::InvalidArgument, "unknown task");
}

}  // namespace dash
