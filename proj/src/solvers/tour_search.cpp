// GLS and ILS over a permutation tour.
//
// One outer loop = `inner_steps` rounds of (local search to a local optimum
// of the augmented cost, incumbent check, penalty update). With guidance off
// each round instead restarts from a kicked copy of the incumbent (ILS).

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "dash/errors.hpp"
#include "internal.hpp"

namespace dash {

double edge_utility(double d, double mu, double penalty, double lam) {
  const double w = (mu > 0.0 && lam != 0.0) ? std::pow(d / mu, lam) : 1.0;
  return d * w / (1.0 + penalty);
}

std::vector<std::pair<int, int>> gls_guidance_update(std::span<const int> tour,
                                                     const DistanceMatrix& d,
                                                     EdgePenalties& penalties,
                                                     const TourMechanism& theta, double mu) {
  const std::size_t n = tour.size();
  struct Edge {
    double util;
    std::size_t pos;
  };
  std::vector<Edge> edges(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = static_cast<std::size_t>(tour[i]);
    const auto b = static_cast<std::size_t>(tour[(i + 1) % n]);
    edges[i] = {edge_utility(d(a, b), mu, penalties(a, b), theta.lam), i};
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(theta.top_k), n);
  std::partial_sort(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(k), edges.end(),
                    [](const Edge& x, const Edge& y) {
                      return x.util != y.util ? x.util > y.util : x.pos < y.pos;
                    });
  std::vector<std::pair<int, int>> out;
  out.reserve(k);
  for (std::size_t e = 0; e < k; ++e) {
    const int a = tour[edges[e].pos];
    const int b = tour[(edges[e].pos + 1) % n];
    penalties.add(static_cast<std::size_t>(a), static_cast<std::size_t>(b), theta.weight);
    out.emplace_back(a, b);
  }
  return out;
}

std::vector<int> nearest_neighbor_tour(const DistanceMatrix& d) {
  const std::size_t n = d.size();
  std::vector<int> tour;
  tour.reserve(n);
  std::vector<std::uint8_t> used(n, 0);
  std::size_t cur = 0;
  used[0] = 1;
  tour.push_back(0);
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t best = n;
    double bd = 0.0;
    const auto row = d.row(cur);
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      if (best == n || row[j] < bd) {
        best = j;
        bd = row[j];
      }
    }
    used[best] = 1;
    tour.push_back(static_cast<int>(best));
    cur = best;
  }
  return tour;
}

namespace {

std::vector<std::vector<int>> knn_lists(const DistanceMatrix& d, std::size_t k) {
  const std::size_t n = d.size();
  k = std::min(k, n - 1);
  std::vector<std::vector<int>> out(n);
  std::vector<int> idx;
  for (std::size_t i = 0; i < n; ++i) {
    idx.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) idx.push_back(static_cast<int>(j));
    const auto row = d.row(i);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](int a, int b) { return row[a] != row[b] ? row[a] < row[b] : a < b; });
    out[i].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

class TourLocalSearch {
 public:
  TourLocalSearch(const DistanceMatrix& d, const EdgePenalties& pen, const TourMechanism& theta,
                  double lambda, RunClock& clock)
      : d_(d),
        pen_(pen),
        theta_(theta),
        lambda_(theta.guidance ? lambda : 0.0),
        clock_(clock),
        n_(d.size()),
        knn_(knn_lists(d, static_cast<std::size_t>(theta.knn_k))),
        pos_(n_),
        queued_(n_, 0) {}

  void set_tour(std::vector<int> tour) {
    tour_ = std::move(tour);
    for (std::size_t i = 0; i < n_; ++i) pos_[static_cast<std::size_t>(tour_[i])] = i;
  }
  const std::vector<int>& tour() const { return tour_; }
  void set_epsilon(double eps) { eps_ = eps; }

  void activate(int c) {
    if (!queued_[static_cast<std::size_t>(c)]) {
      queued_[static_cast<std::size_t>(c)] = 1;
      queue_.push_back(c);
    }
  }
  void activate_all() {
    for (int c : tour_) activate(c);
  }

  /// Descend until no queued city has an improving move or the move cap is
  /// reached. Returns the number of moves applied.
  int descend(int max_moves) {
    if (n_ < 4) {
      queue_.clear();
      std::fill(queued_.begin(), queued_.end(), 0);
      return 0;
    }
    int moves = 0;
    while (!queue_.empty() && moves < max_moves) {
      const int a = queue_.front();
      queue_.pop_front();
      queued_[static_cast<std::size_t>(a)] = 0;
      bool improved = try_two_opt(a);
      if (!improved && theta_.op == LsOperator::OrOpt) improved = try_or_opt(a);
      if (improved) {
        ++moves;
        activate(a);
      }
    }
    return moves;
  }

  void kick(KickOperator op, int strength, Rng& rng) {
    for (int s = 0; s < strength; ++s) {
      if (op == KickOperator::DoubleBridge && n_ >= 8)
        double_bridge(rng);
      else
        random_reversal(rng);
    }
  }

 private:
  double aug(int a, int b) const {
    const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
    return lambda_ == 0.0 ? d_(ua, ub) : d_(ua, ub) + lambda_ * pen_(ua, ub);
  }
  int succ(int c) const { return tour_[(pos_[static_cast<std::size_t>(c)] + 1) % n_]; }
  int pred(int c) const { return tour_[(pos_[static_cast<std::size_t>(c)] + n_ - 1) % n_]; }

  // Reverse the circular position range [i, j]; the shorter side is flipped.
  void reverse_range(std::size_t i, std::size_t j) {
    std::size_t len = (j + n_ - i) % n_ + 1;
    if (2 * len > n_) {
      const std::size_t ni = (j + 1) % n_, nj = (i + n_ - 1) % n_;
      i = ni;
      j = nj;
      len = n_ - len;
    }
    clock_.charge(len / 2 + 1);
    for (std::size_t s = 0; s < len / 2; ++s) {
      const std::size_t p = (i + s) % n_, q = (j + n_ - s) % n_;
      std::swap(tour_[p], tour_[q]);
      pos_[static_cast<std::size_t>(tour_[p])] = p;
      pos_[static_cast<std::size_t>(tour_[q])] = q;
    }
  }

  // Remove (x1, x2=succ x1), (y1, y2=succ y1); add (x1, y1), (x2, y2).
  void apply_two_opt(int x1, int x2, int y1, int y2) {
    reverse_range(pos_[static_cast<std::size_t>(x2)], pos_[static_cast<std::size_t>(y1)]);
    for (int c : {x1, x2, y1, y2}) activate(c);
  }

  bool try_two_opt(int a) {
    struct Move {
      double delta;
      int x1, x2, y1, y2;
    };
    Move best{-eps_, -1, -1, -1, -1};
    for (int dir = 0; dir < 2; ++dir) {
      const int b = dir == 0 ? succ(a) : pred(a);
      const double ab = aug(a, b);
      for (int c : knn_[static_cast<std::size_t>(a)]) {
        clock_.charge(1);
        const double g1 = ab - aug(a, c);
        if (d_(static_cast<std::size_t>(a), static_cast<std::size_t>(c)) >= ab) break;
        if (g1 <= 0.0) continue;
        const int dd = dir == 0 ? succ(c) : pred(c);
        if (c == b || dd == a) continue;
        const double delta = aug(b, dd) - aug(c, dd) - g1;
        if (delta < best.delta) {
          best = dir == 0 ? Move{delta, a, b, c, dd} : Move{delta, b, a, dd, c};
          if (theta_.scan == ScanMode::First) {
            apply_two_opt(best.x1, best.x2, best.y1, best.y2);
            return true;
          }
        }
      }
    }
    if (best.x1 < 0) return false;
    apply_two_opt(best.x1, best.x2, best.y1, best.y2);
    return true;
  }

  // Move the segment of 1..3 cities starting at `a` next to one of a's
  // candidate neighbours, in either orientation.
  bool try_or_opt(int a) {
    if (n_ < 6) return false;
    struct Move {
      double delta = 0.0;
      int len = 0, c = -1;
      bool after = true;  // true: c, s1..s2, succ c   false: pred c, s2..s1, c
    };
    Move best;
    best.delta = -eps_;
    for (int len = 1; len <= 3; ++len) {
      const int s1 = a;
      int s2 = a;
      for (int s = 1; s < len; ++s) s2 = succ(s2);
      const int p = pred(s1), nx = succ(s2);
      if (p == s2 || nx == s1) continue;
      const double removal = aug(p, s1) + aug(s2, nx) - aug(p, nx);
      auto in_segment = [&](int c) {
        const std::size_t off = (pos_[static_cast<std::size_t>(c)] + n_ -
                                 pos_[static_cast<std::size_t>(s1)]) % n_;
        return off < static_cast<std::size_t>(len);
      };
      for (int c : knn_[static_cast<std::size_t>(s1)]) {
        clock_.charge(1);
        if (in_segment(c)) continue;
        const int e = succ(c);
        if (!in_segment(e) && !(c == p && e == nx)) {
          const double delta = aug(c, s1) + aug(s2, e) - aug(c, e) - removal;
          if (delta < best.delta) best = {delta, len, c, true};
        }
        const int f = pred(c);
        if (!in_segment(f) && !(f == p && c == nx)) {
          const double delta = aug(f, s2) + aug(s1, c) - aug(f, c) - removal;
          if (delta < best.delta) best = {delta, len, c, false};
        }
        if (theta_.scan == ScanMode::First && best.c >= 0) break;
      }
      if (theta_.scan == ScanMode::First && best.c >= 0) break;
    }
    if (best.c < 0) return false;
    apply_or_opt(a, best.len, best.c, best.after);
    return true;
  }

  void apply_or_opt(int s1, int len, int c, bool after) {
    std::vector<int> seg;
    int x = s1;
    for (int s = 0; s < len; ++s, x = succ(x)) seg.push_back(x);
    const int p = pred(s1), nx = x;
    std::vector<int> rest;
    rest.reserve(n_);
    for (int y = nx; rest.size() < n_ - seg.size(); y = succ(y)) rest.push_back(y);
    const auto at = std::find(rest.begin(), rest.end(), c) - rest.begin();
    if (after) {
      rest.insert(rest.begin() + at + 1, seg.begin(), seg.end());
    } else {
      rest.insert(rest.begin() + at, seg.rbegin(), seg.rend());
    }
    clock_.charge(n_);
    for (int v : {p, nx, c, seg.front(), seg.back()}) activate(v);
    set_tour(std::move(rest));
    activate(after ? succ(seg.back()) : pred(seg.back()));
  }

  void random_reversal(Rng& rng) {
    std::size_t i = rng.index(n_), j = rng.index(n_);
    if (i > j) std::swap(i, j);
    if (i == j) return;
    std::reverse(tour_.begin() + static_cast<std::ptrdiff_t>(i),
                 tour_.begin() + static_cast<std::ptrdiff_t>(j) + 1);
    clock_.charge(j - i + 1);
    for (std::size_t p = i; p <= j; ++p) pos_[static_cast<std::size_t>(tour_[p])] = p;
    for (std::size_t p : {i, j, (i + n_ - 1) % n_, (j + 1) % n_}) activate(tour_[p]);
  }

  void double_bridge(Rng& rng) {
    std::size_t cut[3];
    do {
      for (auto& c : cut) c = 1 + rng.index(n_ - 1);
      std::sort(cut, cut + 3);
    } while (cut[0] == cut[1] || cut[1] == cut[2]);
    std::vector<int> next;
    next.reserve(n_);
    auto append = [&](std::size_t from, std::size_t to) {
      next.insert(next.end(), tour_.begin() + static_cast<std::ptrdiff_t>(from),
                  tour_.begin() + static_cast<std::ptrdiff_t>(to));
    };
    append(0, cut[0]);
    append(cut[1], cut[2]);
    append(cut[0], cut[1]);
    append(cut[2], n_);
    clock_.charge(n_);
    const std::size_t ends[] = {0, cut[0] - 1, cut[0], cut[1] - 1, cut[1], cut[2] - 1, cut[2],
                                n_ - 1};
    std::vector<int> touched;
    for (std::size_t e : ends) touched.push_back(tour_[e]);
    set_tour(std::move(next));
    for (int t : touched) activate(t);
  }

  const DistanceMatrix& d_;
  const EdgePenalties& pen_;
  const TourMechanism& theta_;
  double lambda_;
  RunClock& clock_;
  std::size_t n_;
  std::vector<std::vector<int>> knn_;
  std::vector<int> tour_;
  std::vector<std::size_t> pos_;
  std::deque<int> queue_;
  std::vector<std::uint8_t> queued_;
  double eps_ = 1e-12;
};

}  // namespace

namespace detail {

RunResult run_tour_search(const SolverConfig& cfg, const TspInstance& inst, double f_star,
                          std::uint64_t seed, const RunOptions& opts) {
  const auto& theta = cfg.tour;
  const auto& sigma = cfg.sigma;
  RunClock clock(opts.clock, opts.seconds_per_unit);
  Rng rng(seed);
  RunResult out;
  out.seed = seed;
  TraceRecorder rec(f_star);
  const double limit = std::min(sigma.time_limit_s, opts.horizon);
  const std::size_t n = inst.size();

  DistanceMatrix d;
  std::vector<int> best;
  {
    PhaseScope phase(clock, out.phase_time, "construct");
    d = DistanceMatrix(inst.coords, inst.rounding);
    best = nearest_neighbor_tour(d);
    clock.charge(n * n);
  }
  double best_cost = tour_length(best, d);
  rec.record(0.0, best_cost);

  const double mu = best_cost / static_cast<double>(n);
  EdgePenalties penalties(n);
  const bool guided = theta.guidance && theta.weight > 0.0 && theta.gls_lambda > 0.0;
  TourLocalSearch ls(d, penalties, theta, theta.gls_lambda * mu, clock);
  ls.set_epsilon(1e-10 * std::max(mu, 1e-300));
  ls.set_tour(best);
  ls.activate_all();

  int no_improve = 0;
  long long step = 0;
  for (int loop = 0; loop < sigma.loop_max; ++loop) {
    if (clock.elapsed() > limit) break;
    if (no_improve >= sigma.max_no_improve) break;
    ++out.loops;
    bool improved = false;
    for (int s = 0; s < sigma.inner_steps; ++s, ++step) {
      if (s > 0 && clock.elapsed() > limit) break;
      if (!guided && step > 0) {
        PhaseScope phase(clock, out.phase_time, "perturbation");
        ls.set_tour(best);
        ls.kick(theta.kick, theta.kick_strength, rng);
      }
      {
        PhaseScope phase(clock, out.phase_time, "local_search");
        ls.descend(sigma.ls_max_moves);
      }
      const double cost = tour_length(ls.tour(), d);
      clock.charge(n);
      if (improves(cost, best_cost)) {
        best = ls.tour();
        best_cost = cost;
        rec.record(clock.elapsed(), best_cost);
        improved = true;
      }
      if (guided && (step + 1) % sigma.guidance_update_every == 0) {
        PhaseScope phase(clock, out.phase_time, "guidance");
        const auto edges = gls_guidance_update(ls.tour(), d, penalties, theta, mu);
        clock.charge(n);
        for (auto [a, b] : edges) {
          ls.activate(a);
          ls.activate(b);
        }
      }
    }
    no_improve = improved ? 0 : no_improve + 1;
    if (no_improve > 0 && no_improve % sigma.perturb_period == 0) {
      PhaseScope phase(clock, out.phase_time, "perturbation");
      ls.set_tour(best);
      ls.kick(theta.kick, theta.kick_strength, rng);
    }
  }

  out.t_run = clock.elapsed();
  out.work_units = clock.units();
  out.objective = best_cost;
  out.solution = Tour{std::move(best)};
  out.beat_reference = rec.beat_reference();
  out.trace = rec.finish(opts.horizon, out.t_run);
  return out;
}

}  // namespace detail

}  // namespace dash
