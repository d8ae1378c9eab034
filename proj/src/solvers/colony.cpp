// Ant colony backbones for CVRP (routes) and MKP (item subsets).

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dash/errors.hpp"
#include "internal.hpp"

namespace dash {

namespace {

constexpr double kMinDistance = 1e-12;

// Roulette over non-negative weights; a degenerate wheel falls back to a
// uniform draw so construction never stalls.
std::size_t roulette(std::span<const double> w, Rng& rng) {
  double total = 0.0;
  for (double x : w) total += x;
  if (!(total > 0.0) || !std::isfinite(total)) return rng.index(w.size());
  double r = rng.uniform() * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    r -= w[i];
    if (r < 0.0) return i;
  }
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0.0) return i;
  return w.size() - 1;
}

double route_cost(const std::vector<int>& route, const DistanceMatrix& d) {
  if (route.empty()) return 0.0;
  double c = d(0, static_cast<std::size_t>(route.front()) + 1) +
             d(static_cast<std::size_t>(route.back()) + 1, 0);
  for (std::size_t i = 1; i < route.size(); ++i)
    c += d(static_cast<std::size_t>(route[i - 1]) + 1, static_cast<std::size_t>(route[i]) + 1);
  return c;
}

double routes_cost(const RouteSet& rs, const DistanceMatrix& d) {
  double c = 0.0;
  for (const auto& r : rs.routes) c += route_cost(r, d);
  return c;
}

// First-improvement 2-opt inside one depot-closed route.
void route_two_opt(std::vector<int>& route, const DistanceMatrix& d, RunClock* clock) {
  const std::size_t m = route.size();
  if (m < 3) return;
  std::vector<std::size_t> node(m + 2);
  node[0] = 0;
  node[m + 1] = 0;
  auto sync = [&] {
    for (std::size_t i = 0; i < m; ++i) node[i + 1] = static_cast<std::size_t>(route[i]) + 1;
  };
  sync();
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 0; i + 2 <= m && !improved; ++i)
      for (std::size_t j = i + 2; j <= m && !improved; ++j) {
        if (clock) clock->charge(1);
        const double delta = d(node[i], node[j]) + d(node[i + 1], node[j + 1]) -
                             d(node[i], node[i + 1]) - d(node[j], node[j + 1]);
        if (delta < -1e-10) {
          std::reverse(route.begin() + static_cast<std::ptrdiff_t>(i),
                       route.begin() + static_cast<std::ptrdiff_t>(j));
          sync();
          improved = true;
        }
      }
  }
}

RouteSet cvrp_nearest_neighbor(const CvrpInstance& inst, const DistanceMatrix& d) {
  const std::size_t n = inst.size();
  std::vector<std::uint8_t> done(n, 0);
  RouteSet rs;
  std::vector<int> route;
  std::size_t cur = 0, left = n;
  int load = 0;
  while (left > 0) {
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (done[j] || load + inst.demands[j] > inst.capacity) continue;
      if (best == n || d(cur, j + 1) < d(cur, best + 1)) best = j;
    }
    if (best == n) {
      rs.routes.push_back(std::move(route));
      route.clear();
      cur = 0;
      load = 0;
      continue;
    }
    done[best] = 1;
    --left;
    route.push_back(static_cast<int>(best));
    load += inst.demands[best];
    cur = best + 1;
  }
  if (!route.empty()) rs.routes.push_back(std::move(route));
  return rs;
}

ItemSelection mkp_greedy(const MkpInstance& inst, const std::vector<double>& eta) {
  const std::size_t n = inst.size(), m = inst.constraints();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return eta[a] > eta[b]; });
  std::vector<long long> load(m, 0);
  ItemSelection sel;
  sel.chosen.assign(n, 0);
  for (std::size_t i : order) {
    bool fits = true;
    for (std::size_t j = 0; j < m && fits; ++j)
      fits = load[j] + inst.weights[j][i] <= inst.capacities[j];
    if (!fits) continue;
    sel.chosen[i] = 1;
    for (std::size_t j = 0; j < m; ++j) load[j] += inst.weights[j][i];
  }
  return sel;
}

double mkp_cost(const MkpInstance& inst, const ItemSelection& sel) {
  double profit = 0.0;
  for (std::size_t i = 0; i < inst.size(); ++i)
    if (sel.chosen[i]) profit += inst.profits[i];
  return -profit;
}

void evaporate(Pheromone& tau, double rho) {
  for (double& t : tau.tau) t = std::max(kPheromoneFloor, (1.0 - rho) * t);
}

}  // namespace

namespace detail {

std::vector<double> mkp_heuristic(const MkpInstance& inst) {
  const std::size_t n = inst.size(), m = inst.constraints();
  std::vector<double> eta(n);
  for (std::size_t i = 0; i < n; ++i) {
    double rel = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      rel += static_cast<double>(inst.weights[j][i]) / std::max(1, inst.capacities[j]);
    rel /= static_cast<double>(m);
    eta[i] = inst.profits[i] / std::max(rel, 1e-12);
  }
  return eta;
}

AcoIteration aco_step_cvrp(const CvrpInstance& inst, const DistanceMatrix& d, Pheromone& tau,
                           const AcoMechanism& theta, Rng& rng, RunClock* clock,
                           const Payload* best_so_far, double best_cost) {
  const std::size_t n = inst.size(), dim = n + 1;
  require(tau.dim == dim && tau.tau.size() == dim * dim, "pheromone has the wrong shape");
  for (double t : tau.tau) require(t > 0.0, "pheromone must be strictly positive");

  // choice[i][j] = tau^alpha * eta^beta, rebuilt once per iteration.
  std::vector<double> choice(dim * dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      const double eta = 1.0 / std::max(d(i, j), kMinDistance);
      choice[i * dim + j] = std::pow(tau.tau[i * dim + j], theta.alpha) * std::pow(eta, theta.beta);
    }
  if (clock) clock->charge(dim * dim);

  AcoIteration it;
  std::vector<std::uint8_t> done(n);
  std::vector<std::size_t> cand;
  std::vector<double> w;
  for (int ant = 0; ant < theta.n_ants; ++ant) {
    std::fill(done.begin(), done.end(), 0);
    RouteSet rs;
    std::vector<int> route;
    std::size_t cur = 0, left = n;
    int load = 0;
    while (left > 0) {
      cand.clear();
      w.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (done[j] || load + inst.demands[j] > inst.capacity) continue;
        cand.push_back(j);
        w.push_back(choice[cur * dim + j + 1]);
      }
      if (clock) clock->charge(n);
      if (cand.empty()) {  // vehicle full: forced return to the depot
        rs.routes.push_back(std::move(route));
        route.clear();
        cur = 0;
        load = 0;
        continue;
      }
      const std::size_t j = cand[roulette(w, rng)];
      done[j] = 1;
      --left;
      route.push_back(static_cast<int>(j));
      load += inst.demands[j];
      cur = j + 1;
    }
    if (!route.empty()) rs.routes.push_back(std::move(route));
    if (theta.route_2opt)
      for (auto& r : rs.routes) route_two_opt(r, d, clock);
    it.costs.push_back(routes_cost(rs, d));
    it.candidates.emplace_back(std::move(rs));
  }
  it.best = static_cast<std::size_t>(std::min_element(it.costs.begin(), it.costs.end()) -
                                     it.costs.begin());

  evaporate(tau, theta.rho);
  const RouteSet* dep = &std::get<RouteSet>(it.candidates[it.best]);
  double dep_cost = it.costs[it.best];
  if (theta.deposit == AcoDeposit::BestSoFar && best_so_far && best_cost < dep_cost) {
    dep = &std::get<RouteSet>(*best_so_far);
    dep_cost = best_cost;
  }
  const double delta = 1.0 / std::max(dep_cost, kMinDistance);
  for (const auto& r : dep->routes) {
    std::size_t prev = 0;
    for (int c : r) {
      const std::size_t node = static_cast<std::size_t>(c) + 1;
      tau.tau[prev * dim + node] += delta;
      tau.tau[node * dim + prev] += delta;
      prev = node;
    }
    tau.tau[prev * dim] += delta;
    tau.tau[prev] += delta;
  }
  if (clock) clock->charge(dim * dim);
  return it;
}

AcoIteration aco_step_mkp(const MkpInstance& inst, const std::vector<double>& eta,
                          Pheromone& tau, const AcoMechanism& theta, Rng& rng, RunClock* clock,
                          const Payload* best_so_far, double best_cost) {
  const std::size_t n = inst.size(), m = inst.constraints();
  require(tau.dim == n && tau.tau.size() == n, "pheromone has the wrong shape");
  for (double t : tau.tau) require(t > 0.0, "pheromone must be strictly positive");

  std::vector<double> choice(n);
  for (std::size_t i = 0; i < n; ++i)
    choice[i] = std::pow(tau.tau[i], theta.alpha) * std::pow(eta[i], theta.beta);

  AcoIteration it;
  std::vector<long long> load(m);
  std::vector<std::size_t> cand;
  std::vector<double> w;
  for (int ant = 0; ant < theta.n_ants; ++ant) {
    std::fill(load.begin(), load.end(), 0);
    ItemSelection sel;
    sel.chosen.assign(n, 0);
    while (true) {
      cand.clear();
      w.clear();
      for (std::size_t i = 0; i < n; ++i) {
        if (sel.chosen[i]) continue;
        bool fits = true;
        for (std::size_t j = 0; j < m && fits; ++j)
          fits = load[j] + inst.weights[j][i] <= inst.capacities[j];
        if (!fits) continue;
        cand.push_back(i);
        w.push_back(choice[i]);
      }
      if (clock) clock->charge(n);
      if (cand.empty()) break;  // nothing else fits: construction stops
      const std::size_t i = cand[roulette(w, rng)];
      sel.chosen[i] = 1;
      for (std::size_t j = 0; j < m; ++j) load[j] += inst.weights[j][i];
    }
    it.costs.push_back(mkp_cost(inst, sel));
    it.candidates.emplace_back(std::move(sel));
  }
  it.best = static_cast<std::size_t>(std::min_element(it.costs.begin(), it.costs.end()) -
                                     it.costs.begin());

  evaporate(tau, theta.rho);
  const ItemSelection* dep = &std::get<ItemSelection>(it.candidates[it.best]);
  double dep_cost = it.costs[it.best];
  if (theta.deposit == AcoDeposit::BestSoFar && best_so_far && best_cost < dep_cost) {
    dep = &std::get<ItemSelection>(*best_so_far);
    dep_cost = best_cost;
  }
  const double total = std::accumulate(inst.profits.begin(), inst.profits.end(), 0.0);
  const double delta = total > 0.0 ? -dep_cost / total : 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (dep->chosen[i]) tau.tau[i] += delta;
  return it;
}

RunResult run_aco(const SolverConfig& cfg, const Instance& inst, double f_star,
                  std::uint64_t seed, const RunOptions& opts) {
  const auto& sigma = cfg.sigma;
  RunClock clock(opts.clock, opts.seconds_per_unit);
  Rng rng(seed);
  RunResult out;
  out.seed = seed;
  TraceRecorder rec(f_star);
  const double limit = std::min(sigma.time_limit_s, opts.horizon);

  const bool is_cvrp = task_of(inst) == Task::CVRP;
  DistanceMatrix d;
  std::vector<double> eta;
  Payload best;
  double best_cost = 0.0;
  Pheromone tau;
  {
    PhaseScope phase(clock, out.phase_time, "construct");
    if (is_cvrp) {
      const auto& c = std::get<CvrpInstance>(inst);
      d = DistanceMatrix(cvrp_nodes(c), DistanceRounding::Exact);
      auto rs = cvrp_nearest_neighbor(c, d);
      best_cost = routes_cost(rs, d);
      best = std::move(rs);
      const std::size_t dim = c.size() + 1;
      tau = {dim, std::vector<double>(dim * dim,
                                      1.0 / (static_cast<double>(dim) * std::max(best_cost, kMinDistance)))};
      clock.charge(dim * dim);
    } else {
      const auto& m = std::get<MkpInstance>(inst);
      eta = mkp_heuristic(m);
      auto sel = mkp_greedy(m, eta);
      best_cost = mkp_cost(m, sel);
      best = std::move(sel);
      tau = {m.size(), std::vector<double>(m.size(), 1.0)};
      clock.charge(m.size() * m.constraints());
    }
  }
  rec.record(0.0, best_cost);

  int no_improve = 0;
  for (int loop = 0; loop < sigma.loop_max; ++loop) {
    if (clock.elapsed() > limit) break;
    if (no_improve >= sigma.max_no_improve) break;
    ++out.loops;
    bool improved = false;
    for (int s = 0; s < sigma.inner_steps; ++s) {
      if (s > 0 && clock.elapsed() > limit) break;
      AcoIteration it;
      {
        PhaseScope phase(clock, out.phase_time, "colony");
        it = is_cvrp ? aco_step_cvrp(std::get<CvrpInstance>(inst), d, tau, cfg.aco, rng, &clock,
                                     &best, best_cost)
                     : aco_step_mkp(std::get<MkpInstance>(inst), eta, tau, cfg.aco, rng, &clock,
                                    &best, best_cost);
      }
      if (improves(it.costs[it.best], best_cost)) {
        best_cost = it.costs[it.best];
        best = std::move(it.candidates[it.best]);
        rec.record(clock.elapsed(), best_cost);
        improved = true;
      }
    }
    no_improve = improved ? 0 : no_improve + 1;
  }

  out.t_run = clock.elapsed();
  out.work_units = clock.units();
  out.objective = best_cost;
  out.solution = std::move(best);
  out.beat_reference = rec.beat_reference();
  out.trace = rec.finish(opts.horizon, out.t_run);
  return out;
}

}  // namespace detail

AcoIteration aco_step(const CvrpInstance& inst, Pheromone& tau, const AcoMechanism& theta,
                      Rng& rng, const Payload* best_so_far, double best_cost) {
  const DistanceMatrix d(cvrp_nodes(inst), DistanceRounding::Exact);
  return detail::aco_step_cvrp(inst, d, tau, theta, rng, nullptr, best_so_far, best_cost);
}

AcoIteration aco_step(const MkpInstance& inst, Pheromone& tau, const AcoMechanism& theta,
                      Rng& rng, const Payload* best_so_far, double best_cost) {
  return detail::aco_step_mkp(inst, detail::mkp_heuristic(inst), tau, theta, rng, nullptr,
                              best_so_far, best_cost);
}

Pheromone initial_pheromone(const Instance& inst) {
  switch (task_of(inst)) {
    case Task::CVRP: {
      const auto& c = std::get<CvrpInstance>(inst);
      const DistanceMatrix d(cvrp_nodes(c), DistanceRounding::Exact);
      const double cost = routes_cost(cvrp_nearest_neighbor(c, d), d);
      const std::size_t dim = c.size() + 1;
      return {dim, std::vector<double>(dim * dim,
                                       1.0 / (static_cast<double>(dim) * std::max(cost, kMinDistance)))};
    }
    case Task::MKP: {
      const auto& m = std::get<MkpInstance>(inst);
      return {m.size(), std::vector<double>(m.size(), 1.0)};
    }
    default: fail(ErrorKind::InvalidArgument, "pheromone is defined for CVRP and MKP only");
  }
}

}  // namespace dash
