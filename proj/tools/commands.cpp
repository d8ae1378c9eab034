// dash: generate instances, evolve solver libraries, evaluate, retrieve.

#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dash/errors.hpp"
#include "dash/evolution.hpp"
#include "dash/library.hpp"
#include "dash/oracles.hpp"
#include "dash/tsplib.hpp"
#include "dash/version.hpp"

namespace dash::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Timestamps use the wall_ prefix so reproducibility checks can drop them.
json manifest(const std::string& command, json config, std::uint64_t seed, const std::string& started) {
  return {{"command", command},           {"config", std::move(config)},
          {"master_seed", seed},          {"tool_version", kToolVersion},
          {"wall_started", started},      {"wall_finished", utc_now()}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Data, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Instance load_any(const fs::path& path) {
  if (path.extension() == ".tsp") return parse_tsplib_file(path);
  return load_instance(path);
}

/// Instance files named on the command line; directories expand to their
/// *.json and *.tsp files (manifest.json excluded), sorted by name.
std::vector<fs::path> collect(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        const auto ext = e.path().extension();
        if (e.is_regular_file() && (ext == ".json" || ext == ".tsp") && e.path().filename() != "manifest.json")
          found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      out.push_back(p);
    } else {
      fail(ErrorKind::Data, "no such instance file or directory: " + in);
    }
  }
  if (out.empty()) fail(ErrorKind::Data, "no instance files found");
  return out;
}

/// Stored reference, else the exact oracle when the instance is small enough.
double reference_for(const Instance& inst) {
  if (auto r = reference_of(inst)) return *r;
  try {
    return oracle_optimum(inst).value;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::TooLarge) throw;
  }
  fail(ErrorKind::Data, "instance '" + name_of(inst) + "' has no reference value and is too large for the oracle");
}

void set_name(Instance& inst, const std::string& name) {
  std::visit([&](auto& x) { x.name = name; }, inst);
}

void set_reference(Instance& inst, double value) {
  std::visit(
      [&](auto& x) {
        if constexpr (requires { x.reference; }) x.reference = value;
      },
      inst);
}

template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) f(i);
  };
  if (jobs <= 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  for (int t = 0; t < jobs && static_cast<std::size_t>(t) < n; ++t) pool.emplace_back(worker);
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string task;
  std::vector<std::size_t> n{100};
  std::size_t items = 5000;
  int capacity = 100;
  std::size_t constraints = 5;
  std::string pattern;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::string out;
  std::string reference = "auto";  // auto | oracle | none
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  const auto started = utc_now();
  const Task task = task_from_string(a.task);
  if (a.reference != "auto" && a.reference != "oracle" && a.reference != "none")
    fail(ErrorKind::Usage, "--reference must be auto, oracle or none");
  fs::create_directories(a.out);
  std::vector<std::size_t> scales = task == Task::BPP ? std::vector<std::size_t>{a.items} : a.n;
  json files = json::array();
  for (std::size_t s = 0; s < scales.size(); ++s) {
    GenParams p;
    p.n = scales[s];
    p.items = task == Task::BPP ? scales[s] : a.items;
    p.capacity = a.capacity;
    p.constraints = a.constraints;
    if (!a.pattern.empty()) p.pattern = tsp_pattern_from_string(a.pattern);
    // One seed stream per scale so adding scales never shifts earlier files;
    // a single scale uses the master seed directly.
    const std::uint64_t scale_seed = scales.size() == 1 ? a.seed : derive_seed(a.seed, scales[s]);
    for (std::size_t i = 0; i < a.count; ++i) {
      Instance inst = generate(task, p, derive_seed(scale_seed, i));
      char name[64];
      std::snprintf(name, sizeof name, "%s%zu_%03zu", std::string(to_string(task)).c_str(), scales[s], i);
      set_name(inst, name);
      if (a.reference != "none" && task != Task::BPP) {
        try {
          set_reference(inst, oracle_optimum(inst).value);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::TooLarge || a.reference == "oracle") throw;
        }
      }
      const auto file = fs::path(a.out) / (std::string(name) + ".json");
      save_instance(inst, file);
      files.push_back(file.filename().string());
    }
  }
  json cfg{{"task", to_string(task)}, {"n", a.n},           {"items", a.items},
           {"capacity", a.capacity}, {"constraints", a.constraints},
           {"pattern", a.pattern.empty() ? json(nullptr) : json(a.pattern)},
           {"count", a.count},       {"reference", a.reference}};
  auto m = manifest("gen", cfg, a.seed, started);
  m["files"] = files;
  write_json(fs::path(a.out) / "manifest.json", m);
  out << "wrote " << files.size() << " instances to " << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvolveArgs {
  std::string config;
  std::vector<std::string> train;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<double> horizon;
  std::optional<int> jobs;
  std::string provider;
};

int cmd_evolve(const EvolveArgs& a, std::ostream& out, std::ostream& err) {
  const auto started = utc_now();
  json raw = json::object();
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) fail(ErrorKind::Data, "cannot read run config " + a.config);
    try {
      raw = json::parse(in);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Data, a.config + ": " + e.what());
    }
  }
  EvolutionConfig cfg = evolution_config_from_json(raw);
  if (a.seed) cfg.master_seed = *a.seed;
  if (a.iterations) cfg.iterations = *a.iterations;
  if (a.horizon) cfg.eval.horizon = *a.horizon;
  if (a.jobs) cfg.eval.jobs = *a.jobs;
  if (!a.provider.empty()) cfg.provider = a.provider;
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Usage, e.what());
  }

  TrainingSet set;
  for (const auto& path : collect(a.train)) {
    Instance inst = load_any(path);
    if (set.items.empty()) set.task = task_of(inst);
    if (task_of(inst) != set.task) fail(ErrorKind::Data, "mixed tasks in the training set: " + path.string());
    const double f = reference_for(inst);
    set.items.push_back({path.stem().string(), std::move(inst), f, 0});
  }
  const GroupModel model = group_training_set(set, cfg.groups, cfg.group_seed);
  auto provider = make_provider(cfg.provider, cfg.llm);

  fs::create_directories(a.out);
  std::ofstream events(fs::path(a.out) / "events.jsonl");
  const auto res = run_evolution(cfg, set, seed_config(set.task), *provider, &events);
  const auto lib = make_library(set.task, model, res, cfg);
  save_library(lib, fs::path(a.out) / "library.json");

  auto m = manifest("evolve", to_json(cfg), cfg.master_seed, started);
  m["training"] = {{"task", to_string(set.task)}, {"instances", set.items.size()}};
  m["outputs"] = {"library.json", "events.jsonl"};
  write_json(fs::path(a.out) / "manifest.json", m);

  for (const auto& [layer, c] : res.layers)
    err << layer << ": proposed " << c.proposed << ", accepted " << c.accepted
        << ", provider failures " << c.provider_failures << '\n';
  out << "library written to " << (fs::path(a.out) / "library.json").string() << '\n';
  // Failed requests are skipped steps; a provider that never answered is an error.
  int proposed = 0, failed = 0;
  for (const auto& [layer, c] : res.layers) {
    proposed += c.proposed;
    failed += c.provider_failures;
  }
  if (failed > 0 && proposed == 0) {
    err << "error: every provider request failed (" << failed << ")\n";
    return kProviderFailure;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string library;
  std::string config;
  std::vector<std::string> instances;
  double horizon = 10.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string clock = "wall";
  int jobs = 1;
  std::string references;  // JSON with {"instances": [{"name", "reference"}]}
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto started = utc_now();
  if (a.library.empty() == a.config.empty())
    fail(ErrorKind::Usage, "eval needs exactly one of --library or --config");
  std::optional<SolverLibrary> lib;
  std::optional<SolverConfig> fixed;
  if (!a.library.empty()) {
    lib = load_library(a.library);
  } else if (a.config == "seed") {
    fixed.reset();
  } else {
    std::ifstream in(a.config);
    if (!in) fail(ErrorKind::Data, "cannot read solver config " + a.config);
    try {
      fixed = solver_config_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Data, a.config + ": " + e.what());
    }
  }
  const auto files = collect(a.instances);
  std::map<std::string, double> refs;
  if (!a.references.empty()) {
    std::ifstream in(a.references);
    if (!in) fail(ErrorKind::Data, "cannot read " + a.references);
    try {
      const json doc = json::parse(in);
      for (const auto& e : doc.at("instances"))
        refs[e.at("name").get<std::string>()] = e.at("reference").get<double>();
    } catch (const json::exception& e) {
      fail(ErrorKind::Data, a.references + ": " + e.what());
    }
  }
  struct Row {
    std::string name;
    double gap = 0, t_run = 0, tldr = 0, terminal = 0, t10 = 0, auc = 0;
    std::string error;
  };
  std::vector<Row> rows(files.size());
  std::vector<Instance> insts;
  std::vector<SolverConfig> cfgs;
  for (const auto& f : files) {
    insts.push_back(load_any(f));
    if (auto it = refs.find(f.stem().string()); it != refs.end()) set_reference(insts.back(), it->second);
    if (lib) cfgs.push_back(retrieve(*lib, insts.back()).config);
    else cfgs.push_back(fixed ? *fixed : seed_config(task_of(insts.back())));
  }
  const RunOptions opts{a.horizon, clock_mode_from_string(a.clock), kSecondsPerWorkUnit};
  const trajectory::MetricConfig mc{1e-9, a.horizon};
  const std::uint64_t cmd_seed = derive_seed(a.seed, "eval");
  parallel_for(files.size(), a.jobs, [&](std::size_t i) {
    auto& row = rows[i];
    row.name = files[i].stem().string();
    try {
      const double f = reference_for(insts[i]);
      const auto r = run_solver(cfgs[i], insts[i], f, derive_seed(cmd_seed, i), opts);
      const auto alt = trajectory::alt_metrics(r.trace, mc);
      row.gap = gap_percent(r.objective, f);
      row.t_run = r.t_run;
      row.tldr = trajectory::tldr(r.trace, mc);
      row.terminal = alt.terminal_time;
      row.t10 = alt.time_to_10pct;
      row.auc = alt.linear_auc;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  for (const auto& r : rows)
    if (!r.error.empty()) fail(ErrorKind::Data, r.name + ": " + r.error);

  std::ofstream csv;
  std::ostream* sink = &out;
  if (!a.out.empty()) {
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    csv.open(a.out);
    if (!csv) fail(ErrorKind::Data, "cannot write " + a.out);
    sink = &csv;
  }
  *sink << "instance,gap_pct,t_run,tldr,terminal_time,time_to_10pct,linear_auc\n";
  double m[6] = {0, 0, 0, 0, 0, 0};
  for (const auto& r : rows) {
    const double v[6] = {r.gap, r.t_run, r.tldr, r.terminal, r.t10, r.auc};
    *sink << r.name;
    for (int c = 0; c < 6; ++c) {
      *sink << ',' << num(v[c]);
      m[c] += v[c];
    }
    *sink << '\n';
  }
  *sink << "mean";
  for (double& v : m) *sink << ',' << num(v /= static_cast<double>(rows.size()));
  *sink << '\n';

  if (!a.out.empty()) {
    json cfg{{"library", a.library}, {"config", a.config},   {"instances", a.instances},
             {"horizon", a.horizon}, {"clock", a.clock},     {"jobs", a.jobs},
             {"references", a.references}};
    auto man = manifest("eval", cfg, a.seed, started);
    man["output"] = fs::path(a.out).filename().string();
    write_json(a.out + ".manifest.json", man);
    out << "instances " << rows.size() << "  mean gap " << num(m[0]) << " %  mean time " << num(m[1]) << " s\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_retrieve(const std::string& library, const std::string& instance, std::ostream& out) {
  const auto lib = load_library(library);
  const auto r = retrieve(lib, load_any(instance));
  json j{{"group", r.group}, {"distances", r.distances}, {"entry", r.entry_id}, {"config", to_json(r.config)}};
  out << j.dump(2) << '\n';
  return kOk;
}

int cmd_oracle(const std::string& instance, std::ostream& out) {
  const auto inst = load_any(instance);
  const auto r = oracle_optimum(inst);
  out << num(r.value) << '\n';
  return kOk;
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage:
    case ErrorKind::InvalidArgument: return kUsage;
    case ErrorKind::Provider: return kProviderFailure;
    default: return kDataError;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Solver evolution, evaluation and retrieval", "dash"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate instances and a manifest");
  g->add_option("--task", gen.task, "tsp, cvrp, bpp or mkp")->required();
  g->add_option("--n", gen.n, "Problem size; repeat for several scales");
  g->add_option("--items", gen.items, "BPP stream length");
  g->add_option("--capacity", gen.capacity, "BPP bin capacity");
  g->add_option("--constraints", gen.constraints, "MKP constraint count");
  g->add_option("--pattern", gen.pattern, "TSP point pattern (default: mixed)");
  g->add_option("--count", gen.count, "Instances per scale");
  g->add_option("--seed", gen.seed, "Master seed");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--reference", gen.reference, "auto, oracle or none");

  EvolveArgs evo;
  auto* e = app.add_subcommand("evolve", "Run the layered evolution and write a library");
  e->add_option("--config", evo.config, "Run config JSON");
  e->add_option("--train", evo.train, "Training instance files or directories")->required();
  e->add_option("--out", evo.out, "Output directory")->required();
  e->add_option("--seed", evo.seed, "Master seed (overrides the config)");
  e->add_option("--iterations", evo.iterations, "Iterations (overrides the config)");
  e->add_option("--horizon", evo.horizon, "Evaluation horizon in seconds");
  e->add_option("--jobs", evo.jobs, "Parallel runs per batch");
  e->add_option("--provider", evo.provider, "stub or llm");

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Evaluate a library or config and write CSV");
  v->add_option("--library", ev.library, "Library JSON (retrieval per instance)");
  v->add_option("--config", ev.config, "Solver config JSON, or 'seed'");
  v->add_option("--instances", ev.instances, "Instance files or directories")->required();
  v->add_option("--horizon", ev.horizon, "Horizon in seconds");
  v->add_option("--seed", ev.seed, "Master seed");
  v->add_option("--out", ev.out, "CSV path (stdout if omitted)");
  v->add_option("--clock", ev.clock, "wall or work");
  v->add_option("--jobs", ev.jobs, "Parallel runs");
  v->add_option("--references", ev.references, "Reference values by instance name (JSON)");

  std::string lib_path, inst_path;
  auto* r = app.add_subcommand("retrieve", "Show the group and config chosen for an instance");
  r->add_option("--library", lib_path)->required();
  r->add_option("--instance", inst_path)->required();

  std::string oracle_path;
  auto* o = app.add_subcommand("oracle", "Print the exact reference value of a small instance");
  o->add_option("--instance", oracle_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, out);
    if (e->parsed()) return cmd_evolve(evo, out, err);
    if (v->parsed()) return cmd_eval(ev, out);
    if (r->parsed()) return cmd_retrieve(lib_path, inst_path, out);
    if (o->parsed()) return cmd_oracle(oracle_path, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return exit_code_for(ex.kind());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace dash::cli
