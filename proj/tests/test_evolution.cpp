#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dash/errors.hpp"
#include "dash/evolution.hpp"
#include "doctest.h"
#include "support/training.hpp"

using namespace dash;
using nlohmann::json;

namespace {

EvalSummary summary(double ell, double k, double t) { return {ell, k, t, {}}; }

// Straight transcription of the four rules, kept independent of the library.
bool reference_accept(Layer layer, double l, double lp, double k, double kp, double t, double tp,
                      double eps, double delta) {
  const bool ell_tol = std::abs(lp - l) <= eps;
  const bool k_tol = std::abs(k) <= 1e-9 ? std::abs(kp) <= 1e-9 : std::abs(kp - k) <= eps * std::abs(k);
  const bool k_up = std::abs(k) <= 1e-9 ? kp > 1e-9 : kp >= (1 + delta) * k;
  switch (layer) {
    case Layer::MDL: return lp <= l - delta || (ell_tol && k_up);
    case Layer::MCL: return ell_tol && k_tol;
    case Layer::SSL1: return tp <= (1 - delta) * t && ell_tol;
    case Layer::SSL2: return lp <= l - delta && k_tol;
  }
  return false;
}

EvolutionConfig small_run(int iterations, int groups) {
  EvolutionConfig c;
  c.iterations = iterations;
  c.groups = groups;
  c.m = 2;
  c.population = 3;
  c.archive = 3;
  c.eval.horizon = 0.2;
  c.master_seed = 99;
  return c;
}

}  // namespace

TEST_CASE("within_tolerance examples") {
  CHECK(within_tolerance(-2.015, -2.00, MetricKind::Ell, 0.02));
  CHECK_FALSE(within_tolerance(0.32, 0.30, MetricKind::K, 0.02));
  for (auto kind : {MetricKind::Ell, MetricKind::K, MetricKind::T})
    for (double x : {-3.0, 0.0, 0.4, 12.0}) CHECK(within_tolerance(x, x, kind, 0.02));
  CHECK(within_tolerance(10.19, 10.0, MetricKind::T, 0.02));
  CHECK_FALSE(within_tolerance(10.21, 10.0, MetricKind::T, 0.02));
  CHECK_THROWS_AS(within_tolerance(NAN, 1.0, MetricKind::Ell, 0.02), Error);
}

TEST_CASE("accept examples") {
  const ToleranceParams tol{0.02, 0.05};
  CHECK(accept(Layer::MDL, summary(-2.00, 0.3, 1), summary(-2.06, 0.1, 1), tol));
  CHECK(accept(Layer::MDL, summary(-2.00, 0.30, 1), summary(-1.995, 0.32, 1), tol));
  CHECK_FALSE(accept(Layer::MDL, summary(-2.00, 0.30, 1), summary(-1.995, 0.31, 1), tol));
  for (double lp : {-30.0, -2.0, 5.0})
    CHECK_FALSE(accept(Layer::SSL1, summary(-2.0, 0.3, 10.0), summary(lp, 0.3, 9.6), tol));
  CHECK(accept(Layer::SSL1, summary(-2.0, 0.3, 10.0), summary(-2.0, 0.3, 9.5), tol));
  CHECK(accept(Layer::MCL, summary(-2.0, 0.3, 1), summary(-2.01, 0.305, 7), tol));
  CHECK(accept(Layer::SSL2, summary(-2.0, 0.3, 1), summary(-2.05, 0.3, 1), tol));
  CHECK_FALSE(accept(Layer::SSL2, summary(-2.0, 0.3, 1), summary(-2.05, 0.4, 1), tol));
  // Degenerate k = 0 parent.
  CHECK(accept(Layer::MDL, summary(-2.0, 0.0, 1), summary(-2.0, 1e-3, 1), tol));
  CHECK(accept(Layer::MCL, summary(-2.0, 0.0, 1), summary(-2.0, 0.0, 1), tol));
  CHECK_FALSE(accept(Layer::MCL, summary(-2.0, 0.0, 1), summary(-2.0, 1e-3, 1), tol));
}

TEST_CASE("property: acceptance truth table matches the formulas") {
  Rng rng(5);
  const double ells[] = {-20.7, -3.0, -2.0, -1.99, -1.95, -2.05, 0.0};
  const double ks[] = {0.0, 0.3, 0.315, 0.32, 0.29, 1e-12};
  const double ts[] = {10.0, 9.5, 9.6, 9.0, 10.1};
  std::size_t cases = 0;
  for (double eps : {0.01, 0.02})
    for (double delta : {0.02, 0.05})
      for (Layer layer : {Layer::MDL, Layer::MCL, Layer::SSL1, Layer::SSL2})
        for (int r = 0; r < 700; ++r) {
          // Mix grid values and random perturbations around the thresholds.
          const double l = ells[rng.index(std::size(ells))];
          const double k = ks[rng.index(std::size(ks))];
          const double t = ts[rng.index(std::size(ts))];
          const double lp = rng.bernoulli(0.5) ? ells[rng.index(std::size(ells))] : l + rng.uniform(-0.1, 0.1);
          const double kp = rng.bernoulli(0.5) ? ks[rng.index(std::size(ks))] : k * rng.uniform(0.9, 1.1);
          const double tp = rng.bernoulli(0.5) ? ts[rng.index(std::size(ts))] : t * rng.uniform(0.9, 1.1);
          CHECK(accept(layer, summary(l, k, t), summary(lp, kp, tp), {eps, delta}) ==
                reference_accept(layer, l, lp, k, kp, t, tp, eps, delta));
          ++cases;
        }
  CHECK(cases >= 10000);
}

TEST_CASE("batch sampling and evaluation") {
  auto set = testing::tsp_pool(40, 9, 3);
  group_training_set(set, 10, 1);
  const auto batch = sample_batch(set, 3, 11);
  REQUIRE(batch.by_group.size() == 10);
  for (int g = 0; g < 10; ++g) {
    CHECK(batch.by_group[g].size() == 3);
    for (auto i : batch.by_group[g]) CHECK(set.items[i].group == g);
    const auto mem = set.members(g);
    if (mem.size() >= 3) {
      auto sorted = batch.by_group[g];
      std::sort(sorted.begin(), sorted.end());
      CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    }
  }
  Ell0Cache cache;
  const EvalSettings es{.horizon = 0.1};
  const auto a = evaluate_batch(seed_config(Task::TSP), set, batch, es, cache);
  REQUIRE(a.valid);
  CHECK(a.runs.size() == 30);
  const auto hits_before = cache.hits();
  const auto b = evaluate_batch(seed_config(Task::TSP), set, batch, es, cache);
  CHECK(a.summary == b.summary);
  CHECK(cache.hits() == hits_before + 30);

  auto other = default_config(Backbone::ILS);
  const auto c = evaluate_batch(other, set, batch, es, cache);
  for (std::size_t i = 0; i < c.runs.size(); ++i) CHECK(c.runs[i].ell0 == a.runs[i].ell0);

  // Means equal recomputation.
  double ell = 0, k = 0, t = 0;
  std::vector<double> gl(10, 0.0);
  for (const auto& r : a.runs) {
    ell += r.ell;
    k += r.k;
    t += r.t_run;
    gl[r.group] += r.ell / 3.0;
  }
  CHECK(a.summary.ell == doctest::Approx(ell / 30).epsilon(1e-12));
  CHECK(a.summary.k == doctest::Approx(k / 30).epsilon(1e-12));
  CHECK(a.summary.t == doctest::Approx(t / 30).epsilon(1e-12));
  for (int g = 0; g < 10; ++g) {
    CHECK(a.summary.groups[g].ell == doctest::Approx(gl[g]).epsilon(1e-12));
    CHECK(a.summary.groups[g].count == 3);
  }

  // Parallel evaluation assembles identical records.
  Ell0Cache cache2;
  const auto p = evaluate_batch(seed_config(Task::TSP), set, batch, {.horizon = 0.1, .jobs = 3}, cache2);
  CHECK(p.summary == a.summary);

  // A solver failure invalidates the record.
  const auto bad = evaluate_batch(seed_config(Task::MKP), set, batch, es, cache);
  CHECK_FALSE(bad.valid);
  CHECK_FALSE(bad.error.empty());
}

TEST_CASE("small groups are sampled with replacement") {
  auto set = testing::tsp_pool(3, 6, 1);
  set.groups = 2;
  set.items[0].group = 1;
  const auto b = sample_batch(set, 3, 2);
  CHECK(b.by_group[0].size() == 3);
  CHECK(b.by_group[1] == std::vector<std::size_t>{0, 0, 0});
  set.groups = 3;
  CHECK_THROWS_AS(sample_batch(set, 2, 2), Error);
}

TEST_CASE("property: archive equals brute force over random offers") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t K = 1 + rng.index(5);
    GroupArchive arch(K);
    std::vector<SolverConfig> pool;
    for (int i = 0; i < 8; ++i) {
      auto c = seed_config(Task::TSP);
      c.tour.knn_k = 4 + i;
      pool.push_back(c);
    }
    std::vector<std::tuple<std::size_t, GroupStats, std::uint64_t>> offers;
    for (std::uint64_t seq = 0; seq < 40; ++seq) {
      const auto ci = rng.index(pool.size());
      // Coarse values force exact ties in all three keys.
      const GroupStats s{-static_cast<double>(rng.index(4)), 0.1 * rng.index(3), 1.0 * rng.index(2), 1};
      arch.offer(pool[ci], s, "c" + std::to_string(ci), seq);
      offers.emplace_back(ci, s, seq);

      // Brute force: best offer per config, sorted, top K.
      std::map<std::size_t, std::pair<GroupStats, std::uint64_t>> best;
      for (auto& [c, st, q] : offers) {
        auto it = best.find(c);
        if (it == best.end() || ranks_before(st, it->second.first)) best[c] = {st, q};
      }
      std::vector<std::tuple<GroupStats, std::uint64_t, std::size_t>> all;
      for (auto& [c, v] : best) all.emplace_back(v.first, v.second, c);
      std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (ranks_before(std::get<0>(a), std::get<0>(b))) return true;
        if (ranks_before(std::get<0>(b), std::get<0>(a))) return false;
        return std::get<1>(a) < std::get<1>(b);
      });
      REQUIRE(arch.entries().size() == std::min(K, all.size()));
      for (std::size_t i = 0; i < arch.entries().size(); ++i) {
        CHECK(arch.entries()[i].config == pool[std::get<2>(all[i])]);
        CHECK(arch.entries()[i].stats == std::get<0>(all[i]));
      }
    }
  }
}

TEST_CASE("property: population bound and worst-first eviction") {
  Rng rng(23);
  Population pop(4);
  for (int i = 0; i < 200; ++i) {
    auto c = seed_config(Task::TSP);
    c.tour.knn_k = 2 + static_cast<int>(rng.index(30));
    const EvalSummary s{-rng.uniform(0, 5), rng.uniform(), 1.0, {}};
    std::vector<PopulationMember> before = pop.members();
    const bool dup = std::any_of(before.begin(), before.end(), [&](auto& m) { return m.config == c; });
    const auto evicted = pop.insert({c, s, "m" + std::to_string(i), static_cast<std::uint64_t>(i)});
    CHECK(pop.members().size() <= 4);
    for (std::size_t j = 1; j < pop.members().size(); ++j)
      CHECK(pop.members()[j - 1].summary.ell <= pop.members()[j].summary.ell);
    if (evicted) {
      CHECK_FALSE(dup);
      for (const auto& m : pop.members()) CHECK(evicted->summary.ell >= m.summary.ell);
    }
  }
}

TEST_CASE("I=0 keeps the seed everywhere") {
  auto set = testing::tsp_pool(12, 8, 4);
  auto cfg = small_run(0, 3);
  group_training_set(set, 3, cfg.group_seed);
  StubProvider stub;
  const auto res = run_evolution(cfg, set, seed_config(Task::TSP), stub, nullptr);
  REQUIRE(res.population.members().size() == 1);
  CHECK(res.population.members()[0].config == seed_config(Task::TSP));
  REQUIRE(res.archives.size() == 3);
  for (const auto& a : res.archives) {
    REQUIRE(a.entries().size() == 1);
    CHECK(a.entries()[0].config == seed_config(Task::TSP));
  }
}

TEST_CASE("evolution run: layer rules, archive replay, determinism") {
  auto set = testing::tsp_pool(24, 12, 8);
  auto cfg = small_run(8, 3);
  group_training_set(set, 3, cfg.group_seed);
  StubProvider stub;
  std::stringstream log1, log2;
  const auto res = run_evolution(cfg, set, seed_config(Task::TSP), stub, &log1);
  run_evolution(cfg, set, seed_config(Task::TSP), stub, &log2);
  const auto events = testing::read_events(log1);
  const auto events2 = testing::read_events(log2);
  REQUIRE(events.size() == events2.size());
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(testing::strip_wall(events[i]) == testing::strip_wall(events2[i]));

  int proposals = 0, accepted = 0;
  std::map<int, std::string> parent_batch;
  for (const auto& e : events) {
    if (e["event"] == "parent") parent_batch[e["iteration"]] = e["batch"].dump();
    if (e["event"] != "proposal") continue;
    ++proposals;
    const auto layer = layer_from_string(e["layer"].get<std::string>());
    const auto cand = solver_config_from_json(e["config"]);
    const auto par = solver_config_from_json(e["parent_config"]);
    if (!e["accepted"].get<bool>()) continue;
    ++accepted;
    CHECK(respects_layer(layer, par, cand));
    if (edits_theta(layer)) CHECK(cand.sigma_json() == par.sigma_json());
    else CHECK(cand.theta_json() == par.theta_json());
    const auto ps = eval_summary_from_json(e["parent_summary"]);
    const auto cs = eval_summary_from_json(e["summary"]);
    if (layer == Layer::SSL1) CHECK(cs.t <= (1 - cfg.tol.delta) * ps.t);
    if (layer == Layer::SSL2) CHECK(cs.ell <= ps.ell - cfg.tol.delta);
    if (layer == Layer::MDL) CHECK(cs.ell <= ps.ell + cfg.tol.epsilon);
  }
  CHECK(proposals > 0);
  MESSAGE("proposals " << proposals << ", accepted " << accepted);

  const auto replay = testing::replay_archives(events, cfg.groups, cfg.archive);
  for (int g = 0; g < cfg.groups; ++g) {
    std::vector<std::string> ids;
    for (const auto& e : res.archives[g].entries()) ids.push_back(e.id);
    CHECK(ids == replay[g]);
    CHECK(events.back()["archives"][g] == json(ids));
  }
  CHECK(res.population.members().size() <= 3);
}

TEST_CASE("rejected candidates still reach the archives") {
  // A provider whose MDL proposals are strictly worse everywhere except one
  // group would be contrived; instead check the decoupling directly on the
  // log: any config in an archive that never entered the population.
  auto set = testing::tsp_pool(24, 12, 8);
  auto cfg = small_run(8, 3);
  group_training_set(set, 3, cfg.group_seed);
  StubProvider stub;
  std::stringstream log;
  const auto res = run_evolution(cfg, set, seed_config(Task::TSP), stub, &log);
  std::set<std::string> accepted{"seed"};
  for (const auto& e : testing::read_events(log))
    if (e["event"] == "proposal" && e.value("accepted", false)) accepted.insert(e["id"].get<std::string>());
  int outside = 0;
  for (const auto& a : res.archives)
    for (const auto& e : a.entries()) outside += accepted.count(e.id) == 0;
  CHECK(outside > 0);
}

TEST_CASE("provider failures skip the layer") {
  struct Failing : MutationProvider {
    std::string name() const override { return "failing"; }
    MutationResponse propose(const MutationRequest&) override { fail(ErrorKind::Provider, "down"); }
  } failing;
  struct Cheater : MutationProvider {
    std::string name() const override { return "cheater"; }
    MutationResponse propose(const MutationRequest& r) override {
      auto c = r.parent;
      c.sigma.loop_max += 1;
      c.tour.knn_k += 2;
      return {c, "cheater"};
    }
  } cheater;
  auto set = testing::tsp_pool(6, 7, 2);
  auto cfg = small_run(2, 1);
  group_training_set(set, 1, 0);
  const auto r1 = run_evolution(cfg, set, seed_config(Task::TSP), failing, nullptr);
  CHECK(r1.layers.at("MDL").provider_failures == 2);
  CHECK(r1.population.members().size() == 1);
  const auto r2 = run_evolution(cfg, set, seed_config(Task::TSP), cheater, nullptr);
  CHECK(r2.layers.at("MDL").layer_violations == 2);
  CHECK(r2.layers.at("SSL1").layer_violations == 2);
  CHECK(r2.population.members().size() == 1);
}

TEST_CASE("run config JSON") {
  EvolutionConfig def;
  CHECK(def.iterations == 100);
  CHECK(def.groups == 10);
  CHECK(def.m == 3);
  CHECK(def.population == 5);
  CHECK(def.archive == 5);
  auto j = to_json(def);
  j["iterations"] = 7;
  const auto c = evolution_config_from_json(j);
  CHECK(c.iterations == 7);
  CHECK(to_json(c)["epsilon"] == 0.02);
  j["bogus"] = 1;
  CHECK_THROWS_AS(evolution_config_from_json(j), Error);
  CHECK_THROWS_AS(evolution_config_from_json(json{{"delta", 0.0}}), Error);
  CHECK_THROWS_AS(evolution_config_from_json(json{{"provider", "magic"}}), Error);
}
