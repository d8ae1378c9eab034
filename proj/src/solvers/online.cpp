// Greedy online assignment for bin packing: items arrive in stream order and
// are placed irrevocably.

#include <cmath>

#include "dash/errors.hpp"
#include "internal.hpp"

namespace dash {

namespace {

// Bin to receive an item of size w, or -1 to open a new one. Counts the
// bins inspected into `scanned`.
int choose_bin(const std::vector<int>& load, int w, int cap, const GoaMechanism& theta,
               std::uint64_t& scanned) {
  int pick = -1;
  double best = 0.0;
  for (std::size_t b = 0; b < load.size(); ++b) {
    ++scanned;
    const int after = load[b] + w;
    if (after > cap) continue;
    double score = 0.0;
    switch (theta.rule) {
      case GoaRule::FirstFit: return static_cast<int>(b);
      case GoaRule::BestFit: score = after; break;
      case GoaRule::Scored: {
        const int resid = cap - after;
        score = std::pow(static_cast<double>(after) / cap, theta.power);
        if (resid > 0 && resid <= theta.small_gap * cap) score -= theta.penalty;
        break;
      }
    }
    if (pick < 0 || score > best) {
      pick = static_cast<int>(b);
      best = score;
    }
  }
  return pick;
}

struct Pass {
  GoaOutcome outcome;
  std::uint64_t scanned = 0;
  // Item index after which each checkpoint was taken.
  std::vector<std::size_t> checkpoint_items;
};

Pass online_pass(const BppInstance& inst, const GoaMechanism& theta) {
  inst.validate();
  const std::size_t n = inst.size();
  Pass p;
  auto& out = p.outcome;
  out.assignment.bin_of_item.resize(n);
  std::vector<int> load;
  long long prefix = 0;
  std::size_t next_pct = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const int w = inst.items[i];
    int b = choose_bin(load, w, inst.capacity, theta, p.scanned);
    if (b < 0) {
      b = static_cast<int>(load.size());
      load.push_back(0);
    }
    load[static_cast<std::size_t>(b)] += w;
    out.assignment.bin_of_item[i] = b;
    prefix += w;
    // Checkpoint after ceil(pct * n / 100) items, for pct = 1..100.
    while (next_pct <= 100 && (i + 1) * 100 >= next_pct * n) {
      const double lb = std::ceil(static_cast<double>(prefix) / inst.capacity);
      const double gap = (static_cast<double>(load.size()) - lb) / lb;
      if (p.checkpoint_items.empty() || p.checkpoint_items.back() != i) {
        out.prefix_gaps.emplace_back(static_cast<double>(i + 1) / static_cast<double>(n), gap);
        p.checkpoint_items.push_back(i);
      }
      ++next_pct;
    }
  }
  out.bins = static_cast<int>(load.size());
  return p;
}

}  // namespace

GoaOutcome goa_assign(const BppInstance& inst, const GoaMechanism& theta) {
  return online_pass(inst, theta).outcome;
}

namespace detail {

// Checkpoints are stamped with the run time pro rata to items placed; the
// first checkpoint is the run's initial point at t = 0.
RunResult run_goa(const SolverConfig& cfg, const BppInstance& inst, double f_star,
                  std::uint64_t seed, const RunOptions& opts) {
  RunClock clock(opts.clock, opts.seconds_per_unit);
  RunResult out;
  out.seed = seed;
  Pass pass;
  std::vector<double> stamps;
  {
    PhaseScope phase(clock, out.phase_time, "placement");
    pass = online_pass(inst, cfg.goa);
    clock.charge(pass.scanned + inst.size());
    const double total = clock.elapsed();
    for (std::size_t k : pass.checkpoint_items)
      stamps.push_back(total * static_cast<double>(k + 1) / static_cast<double>(inst.size()));
  }
  std::vector<trajectory::TracePoint> raw;
  for (std::size_t c = 0; c < pass.outcome.prefix_gaps.size(); ++c)
    raw.push_back({c == 0 ? 0.0 : stamps[c], std::max(0.0, pass.outcome.prefix_gaps[c].second)});

  out.t_run = clock.elapsed();
  out.work_units = clock.units();
  out.loops = 1;
  out.objective = pass.outcome.bins;
  out.beat_reference = out.objective < f_star;  // impossible for a valid lb
  out.solution = std::move(pass.outcome.assignment);
  out.trace = trajectory::fold_incumbent(raw, opts.horizon, out.t_run);
  return out;
}

}  // namespace detail

}  // namespace dash
