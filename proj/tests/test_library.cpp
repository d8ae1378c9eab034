#include <cmath>
#include <filesystem>
#include <fstream>

#include "dash/errors.hpp"
#include "dash/library.hpp"
#include "doctest.h"
#include "support/training.hpp"

using namespace dash;
using nlohmann::json;

namespace {

struct Fixture {
  TrainingSet set;
  GroupModel model;
  EvolutionConfig cfg;
  SolverLibrary lib;

  explicit Fixture(int iterations) {
    set = testing::tsp_pool(30, 10, 21);
    cfg.iterations = iterations;
    cfg.groups = 4;
    cfg.m = 2;
    cfg.eval.horizon = 0.2;
    cfg.master_seed = 5;
    model = group_training_set(set, cfg.groups, cfg.group_seed);
    StubProvider stub;
    const auto res = run_evolution(cfg, set, seed_config(Task::TSP), stub, nullptr);
    lib = make_library(Task::TSP, model, res, cfg);
  }
};

std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("dash_test_" + name);
}

}  // namespace

TEST_CASE("library save/load round-trip") {
  const Fixture f(4);
  const auto path = tmp("lib.json");
  save_library(f.lib, path);
  const auto back = load_library(path);
  CHECK(back == f.lib);
  CHECK(to_json(back).dump() == to_json(f.lib).dump());
  CHECK(back.provenance.iterations == 4);
  CHECK(back.provenance.run_config_hash == config_hash(to_json(f.cfg)));
  std::filesystem::remove(path);
}

TEST_CASE("library load errors") {
  const Fixture f(0);
  auto j = to_json(f.lib);

  auto short_archives = j;
  short_archives["archives"].erase(short_archives["archives"].size() - 1);
  CHECK_THROWS_WITH_AS(library_from_json(short_archives), doctest::Contains("archives for G=4"), Error);

  auto version = j;
  version["schema_version"] = 2;
  CHECK_THROWS_WITH_AS(library_from_json(version), doctest::Contains("unsupported schema_version"), Error);
  auto missing = j;
  missing.erase("schema_version");
  CHECK_THROWS_AS(library_from_json(missing), Error);

  auto bad_cfg = j;
  bad_cfg["archives"][0][0]["config"]["theta"]["knn_k"] = 0;
  CHECK_THROWS_AS(library_from_json(bad_cfg), Error);

  const auto path = tmp("corrupt.json");
  {
    std::ofstream out(path);
    out << "{\n  \"schema_version\": 1,\n  \"task\": \"TSP\",\n  oops\n}\n";
  }
  try {
    load_library(path);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_library(tmp("does_not_exist.json")), Error);
}

TEST_CASE("retrieval: training instances map to their own archive") {
  const Fixture f(4);
  for (const auto& item : f.set.items) {
    const auto r = retrieve(f.lib, item.instance);
    CHECK(r.group == static_cast<std::size_t>(item.group));
    CHECK(r.config == f.lib.archives[item.group].front().config);
    CHECK(r.entry_id == f.lib.archives[item.group].front().id);
  }
}

TEST_CASE("retrieval: seed-only library returns the seed") {
  const Fixture f(0);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto inst = generate(Task::TSP, {.n = 10 + 7 * s}, 700 + s);
    CHECK(retrieve(f.lib, inst).config == seed_config(Task::TSP));
  }
}

TEST_CASE("retrieval: group choice equals an external distance computation") {
  const Fixture f(2);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto inst = generate(Task::TSP, {.n = 10}, 900 + s);
    const auto r = retrieve(f.lib, inst);
    // Normalise and measure by hand.
    const auto phi = extract_profile(inst).features;
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t g = 0; g < f.model.groups(); ++g) {
      double d2 = 0;
      for (std::size_t i = 0; i < phi.size(); ++i) {
        const double z = (phi[i] - f.model.means[i]) / f.model.stds[i];
        d2 += (z - f.model.prototypes[g][i]) * (z - f.model.prototypes[g][i]);
      }
      CHECK(r.distances[g] == doctest::Approx(std::sqrt(d2)).epsilon(1e-12));
      if (d2 < best_d) {
        best_d = d2;
        best = g;
      }
    }
    CHECK(r.group == best);
    // Determinism.
    CHECK(retrieve(f.lib, inst).config == r.config);
  }
}

TEST_CASE("retrieval errors") {
  Fixture f(0);
  CHECK_THROWS_AS(retrieve(f.lib, generate(Task::MKP, {.n = 10}, 1)), Error);
  f.lib.archives[0].clear();
  f.lib.archives[1].clear();
  f.lib.archives[2].clear();
  f.lib.archives[3].clear();
  CHECK_THROWS_AS(retrieve(f.lib, f.set.items[0].instance), Error);
}
