#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include <nlohmann/json.hpp>

#include "dash/errors.hpp"
#include "dash/oracles.hpp"
#include "dash/problems.hpp"
#include "dash/rng.hpp"
#include "dash/tsplib.hpp"
#include "doctest.h"

using namespace dash;

#ifndef DASH_DATA_DIR
#define DASH_DATA_DIR "data"
#endif

namespace {

TspInstance unit_square() {
  TspInstance t;
  t.coords = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  return t;
}

}  // namespace

TEST_CASE("evaluate: TSP, CVRP, MKP basics") {
  const Instance sq = unit_square();
  auto v = evaluate(sq, Tour{{0, 1, 2, 3}});
  CHECK(v.feasible);
  CHECK(v.objective == doctest::Approx(4.0));
  CHECK_FALSE(evaluate(sq, Tour{{0, 1, 1, 3}}).feasible);
  CHECK_THROWS_AS(evaluate(sq, Tour{{0, 1, 2}}), Error);
  CHECK_THROWS_AS(evaluate(sq, RouteSet{}), Error);

  CvrpInstance c;
  c.depot = {0, 0};
  c.customers = {{1, 0}, {2, 0}};
  c.demands = {6, 6};
  c.capacity = 10;
  CHECK_FALSE(evaluate(c, RouteSet{{{0, 1}}}).feasible);
  const auto ok = evaluate(c, RouteSet{{{0}, {1}}});
  CHECK(ok.feasible);
  CHECK(ok.objective == doctest::Approx(2.0 + 4.0));
  CHECK_FALSE(evaluate(c, RouteSet{{{0}}}).feasible);  // customer 1 unserved

  MkpInstance m;
  m.profits = {10, 20};
  m.weights = {{3, 4}};
  m.capacities = {5};
  CHECK(evaluate(m, ItemSelection{{0, 0}}).objective == 0.0);
  CHECK(evaluate(m, ItemSelection{{0, 1}}).objective == -20.0);
  CHECK_FALSE(evaluate(m, ItemSelection{{1, 1}}).feasible);
}

TEST_CASE("evaluate: CVRP cost is invariant to route order") {
  const auto inst = std::get<CvrpInstance>(generate(Task::CVRP, {.n = 12}, 3));
  RouteSet a{{{0, 1, 2}, {3, 4, 5, 6}, {7, 8, 9, 10, 11}}};
  RouteSet b{{{7, 8, 9, 10, 11}, {0, 1, 2}, {3, 4, 5, 6}}};
  const auto va = evaluate(inst, a);
  const auto vb = evaluate(inst, b);
  CHECK(va.feasible == vb.feasible);
  CHECK(va.objective == doctest::Approx(vb.objective).epsilon(1e-14));
}

TEST_CASE("gap") {
  CHECK(gap_percent(105, 100) == doctest::Approx(5.0));
  CHECK(gap_percent(100, 100) == 0.0);
  CHECK(gap_percent(-95, -100) == doctest::Approx(5.0));
  CHECK_THROWS_AS(gap_percent(1, 0), Error);
}

TEST_CASE("generate: parameters and determinism") {
  const auto cvrp = std::get<CvrpInstance>(generate(Task::CVRP, {.n = 100}, 1));
  CHECK(cvrp.capacity == 50);
  CHECK(cvrp.size() == 100);
  for (int q : cvrp.demands) CHECK((q >= 1 && q <= 9));

  const auto mkp = std::get<MkpInstance>(generate(Task::MKP, {.n = 100, .constraints = 5}, 2));
  REQUIRE(mkp.capacities.size() == 5);
  for (std::size_t j = 0; j < 5; ++j) {
    const long long sum = std::accumulate(mkp.weights[j].begin(), mkp.weights[j].end(), 0LL);
    CHECK(mkp.capacities[j] == sum / 2);
  }

  const auto bpp = std::get<BppInstance>(generate(Task::BPP, {.items = 1000, .capacity = 100}, 3));
  CHECK(bpp.size() == 1000);
  for (int w : bpp.items) CHECK((w >= 1 && w <= 100));

  for (Task task : {Task::TSP, Task::CVRP, Task::BPP, Task::MKP}) {
    const GenParams p{.n = 30, .items = 200};
    CHECK(generate(task, p, 99) == generate(task, p, 99));
    CHECK_FALSE(generate(task, p, 99) == generate(task, p, 100));
  }
  CHECK_THROWS_AS(generate(Task::TSP, {.n = 2}, 1), Error);
  CHECK_THROWS_AS(generate(Task::BPP, {.capacity = 0}, 1), Error);
}

TEST_CASE("generate: every TSP pattern stays in the unit square") {
  for (auto pat : {TspPattern::Uniform, TspPattern::Clustered, TspPattern::JitteredGrid,
                   TspPattern::Ring, TspPattern::Rectangle}) {
    GenParams p{.n = 200};
    p.pattern = pat;
    const auto t = std::get<TspInstance>(generate(Task::TSP, p, 5));
    CHECK(t.size() == 200);
    for (const auto& pt : t.coords) {
      CHECK((pt.x >= 0.0 && pt.x <= 1.0));
      CHECK((pt.y >= 0.0 && pt.y <= 1.0));
    }
  }
}

TEST_CASE("oracle: hand cases and frozen Held-Karp value") {
  CHECK(oracle_optimum(unit_square()).value == doctest::Approx(4.0));

  BppInstance b;
  b.capacity = 100;
  b.items.assign(12, 100);
  b.items.push_back(34);  // 1234 total
  CHECK(oracle_optimum(b).value == 13.0);

  // Frozen from tests/oracles/tsp_seed7_bruteforce.py (7! enumeration).
  GenParams p{.n = 8};
  p.pattern = TspPattern::Uniform;
  const auto inst = generate(Task::TSP, p, 7);
  CHECK(std::get<TspInstance>(inst).coords[0].x == 0.754385304152858);
  CHECK(oracle_optimum(inst).value == doctest::Approx(3.038770948806268).epsilon(1e-12));

  CHECK_THROWS_AS(oracle_optimum(generate(Task::TSP, {.n = 21}, 1)), Error);
  CHECK_THROWS_AS(oracle_optimum(generate(Task::MKP, {.n = 21, .constraints = 2}, 1)), Error);
  CHECK_THROWS_AS(oracle_optimum(generate(Task::CVRP, {.n = 9}, 1)), Error);
}

namespace {

double brute_tsp(const TspInstance& t) {
  std::vector<int> perm(t.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    best = std::min(best, tour_length(t, perm));
  } while (std::next_permutation(perm.begin() + 1, perm.end()));
  return best;
}

}  // namespace

TEST_CASE("property: oracle optimum bounds every feasible solution and is attained") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto tsp = generate(Task::TSP, {.n = 7}, rng.next());
    const auto r = oracle_optimum(tsp);
    CHECK(r.value == doctest::Approx(brute_tsp(std::get<TspInstance>(tsp))).epsilon(1e-12));
    REQUIRE(r.witness);
    CHECK(evaluate(tsp, *r.witness).objective == doctest::Approx(r.value).epsilon(1e-12));

    const auto mkp = generate(Task::MKP, {.n = 10, .constraints = 3}, rng.next());
    const auto m = oracle_optimum(mkp);
    REQUIRE(m.witness);
    CHECK(evaluate(mkp, *m.witness).feasible);
    CHECK(evaluate(mkp, *m.witness).objective == m.value);
    for (int s = 0; s < 200; ++s) {
      ItemSelection sel;
      for (int i = 0; i < 10; ++i) sel.chosen.push_back(rng.bernoulli(0.4));
      const auto v = evaluate(mkp, sel);
      if (v.feasible) CHECK(v.objective >= m.value);
    }

    const auto cvrp = generate(Task::CVRP, {.n = 6}, rng.next());
    const auto c = oracle_optimum(cvrp);
    REQUIRE(c.witness);
    const auto cv = evaluate(cvrp, *c.witness);
    CHECK(cv.feasible);
    CHECK(cv.objective == doctest::Approx(c.value).epsilon(1e-12));
    // One customer per route is always feasible and never better.
    RouteSet singles;
    for (int i = 0; i < 6; ++i) singles.routes.push_back({i});
    CHECK(evaluate(cvrp, singles).objective >= c.value - 1e-12);
  }
}

TEST_CASE("TSPLIB parsing") {
  const std::string text =
      "NAME : square\nTYPE : TSP\nDIMENSION : 4\nEDGE_WEIGHT_TYPE : EUC_2D\n"
      "NODE_COORD_SECTION\n1 0 0\n2 3 0\n3 3 4\n4 0 4.4\nEOF\n";
  const auto t = parse_tsplib(text);
  CHECK(t.size() == 4);
  CHECK(t.name == "square");
  // Edges 3, 4, 3, round(4.4)=4 under nearest-integer rounding.
  CHECK(tour_length(t, std::vector<int>{0, 1, 2, 3}) == 14.0);

  CHECK_THROWS_AS(parse_tsplib("NAME: x\nEDGE_WEIGHT_TYPE: GEO\nNODE_COORD_SECTION\n1 1 1\n"),
                  Error);
  try {
    parse_tsplib("EDGE_WEIGHT_TYPE : GEO\n");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedFormat);
  }
  CHECK_THROWS_AS(parse_tsplib("NAME: x\nEDGE_WEIGHT_TYPE: EUC_2D\n"), Error);

  const std::filesystem::path data = DASH_DATA_DIR;
  const auto pr107 = parse_tsplib_file(data / "tsplib" / "pr107.tsp");
  CHECK(pr107.size() == 107);
  REQUIRE(pr107.reference);
  CHECK(*pr107.reference == 44303.0);
  CHECK(parse_tsplib_file(data / "tsplib" / "pcb442.tsp").size() == 442);
  try {
    parse_tsplib_file(data / "tsplib" / "gr17.tsp");
    FAIL("EXPLICIT instance accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedFormat);
  }
}

TEST_CASE("instance JSON round-trip") {
  for (Task task : {Task::TSP, Task::CVRP, Task::BPP, Task::MKP}) {
    auto inst = generate(task, {.n = 15, .items = 50}, 17);
    const auto back = instance_from_json(nlohmann::json::parse(to_json(inst).dump()));
    CHECK(back == inst);
  }
}

TEST_CASE("distance matrix applies TSPLIB rounding") {
  const std::vector<Point> pts{{0, 0}, {1.4, 0}, {0, 2.6}};
  const DistanceMatrix exact(pts, DistanceRounding::Exact);
  const DistanceMatrix nint(pts, DistanceRounding::TsplibNint);
  CHECK(exact(0, 1) == doctest::Approx(1.4));
  CHECK(nint(0, 1) == 1.0);
  CHECK(nint(0, 2) == 3.0);
  CHECK(nint(1, 2) == std::floor(std::hypot(1.4, 2.6) + 0.5));
}
