#include "dash/library.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dash/errors.hpp"
#include "dash/version.hpp"

namespace dash {

using nlohmann::json;

namespace {

bool same_model(const GroupModel& a, const GroupModel& b) {
  return a.task == b.task && a.means == b.means && a.stds == b.stds && a.prototypes == b.prototypes;
}

}  // namespace

bool operator==(const SolverLibrary& a, const SolverLibrary& b) {
  return a.task == b.task && same_model(a.model, b.model) && a.archives == b.archives &&
         a.population == b.population && a.provenance == b.provenance;
}

void SolverLibrary::validate() const {
  try {
    model.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Data, std::string("library group model: ") + e.what());
  }
  if (model.task != task) fail(ErrorKind::Data, "library task does not match its group model");
  if (archives.size() != model.groups())
    fail(ErrorKind::Data, "library has " + std::to_string(archives.size()) + " archives for G=" +
                              std::to_string(model.groups()));
  auto check = [&](const SolverConfig& c, const std::string& where) {
    try {
      c.validate();
    } catch (const Error& e) {
      fail(ErrorKind::Data, where + ": " + e.what());
    }
    if (!backbone_supports(c.backbone, task)) fail(ErrorKind::Data, where + ": backbone does not fit the task");
  };
  for (std::size_t g = 0; g < archives.size(); ++g)
    for (const auto& e : archives[g]) check(e.config, "archive " + std::to_string(g) + " entry " + e.id);
  for (const auto& m : population) check(m.config, "population member " + m.id);
  if (provenance.run_config_hash.empty() || provenance.tool_version.empty())
    fail(ErrorKind::Data, "library provenance is incomplete");
}

std::string config_hash(const json& run_config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : run_config.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SolverLibrary make_library(Task task, const GroupModel& model, const EvolutionResult& result,
                           const EvolutionConfig& cfg) {
  SolverLibrary lib;
  lib.task = task;
  lib.model = model;
  for (const auto& a : result.archives) {
    std::vector<LibraryEntry> entries;
    for (const auto& e : a.entries()) entries.push_back({e.config, e.stats, e.id});
    lib.archives.push_back(std::move(entries));
  }
  for (const auto& m : result.population.members()) lib.population.push_back({m.config, m.summary, m.id});
  json rc = to_json(cfg);
  lib.provenance = {config_hash(rc), rc, cfg.master_seed, result.iterations, kToolVersion};
  lib.validate();
  return lib;
}

json to_json(const SolverLibrary& lib) {
  json archives = json::array();
  for (const auto& a : lib.archives) {
    json entries = json::array();
    for (const auto& e : a)
      entries.push_back({{"id", e.id}, {"config", to_json(e.config)}, {"stats", to_json(e.stats)}});
    archives.push_back(entries);
  }
  json pop = json::array();
  for (const auto& m : lib.population)
    pop.push_back({{"id", m.id}, {"config", to_json(m.config)}, {"summary", to_json(m.summary)}});
  return {{"schema_version", kLibrarySchemaVersion},
          {"task", to_string(lib.task)},
          {"group_model", to_json(lib.model)},
          {"archives", archives},
          {"population", pop},
          {"provenance",
           {{"run_config_hash", lib.provenance.run_config_hash},
            {"run_config", lib.provenance.run_config},
            {"master_seed", lib.provenance.master_seed},
            {"iterations", lib.provenance.iterations},
            {"tool_version", lib.provenance.tool_version}}}};
}

SolverLibrary library_from_json(const json& j) {
  if (!j.is_object() || !j.contains("schema_version"))
    fail(ErrorKind::Data, "library: missing schema_version");
  if (j.at("schema_version") != kLibrarySchemaVersion)
    fail(ErrorKind::Data, "library: unsupported schema_version " + j.at("schema_version").dump() +
                              " (this build reads " + std::to_string(kLibrarySchemaVersion) + ")");
  SolverLibrary lib;
  try {
    lib.task = task_from_string(j.at("task").get<std::string>());
    lib.model = group_model_from_json(j.at("group_model"));
    for (const auto& a : j.at("archives")) {
      std::vector<LibraryEntry> entries;
      for (const auto& e : a)
        entries.push_back({solver_config_from_json(e.at("config")), group_stats_from_json(e.at("stats")),
                           e.at("id").get<std::string>()});
      lib.archives.push_back(std::move(entries));
    }
    for (const auto& m : j.at("population"))
      lib.population.push_back({solver_config_from_json(m.at("config")),
                                eval_summary_from_json(m.at("summary")), m.at("id").get<std::string>()});
    const auto& p = j.at("provenance");
    lib.provenance = {p.at("run_config_hash").get<std::string>(), p.at("run_config"),
                      p.at("master_seed").get<std::uint64_t>(), p.at("iterations").get<int>(),
                      p.at("tool_version").get<std::string>()};
  } catch (const json::exception& e) {
    fail(ErrorKind::Data, std::string("library: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Data) throw;
    fail(ErrorKind::Data, std::string("library: ") + e.what());
  }
  lib.validate();
  return lib;
}

void save_library(const SolverLibrary& lib, const std::filesystem::path& path) {
  lib.validate();
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Data, "cannot write " + path.string());
  out << to_json(lib).dump(2) << '\n';
  if (!out) fail(ErrorKind::Data, "write failed for " + path.string());
}

SolverLibrary load_library(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Data, "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    // e.what() carries the line and column.
    fail(ErrorKind::Data, path.string() + ": " + e.what());
  }
  return library_from_json(j);
}

Retrieval retrieve(const SolverLibrary& lib, const Instance& inst) {
  if (task_of(inst) != lib.task)
    fail(ErrorKind::InvalidArgument, "instance task " + std::string(to_string(task_of(inst))) +
                                         " does not match library task " + std::string(to_string(lib.task)));
  const auto profile = extract_profile(inst);
  const auto z = lib.model.normalize(profile.features);
  Retrieval r;
  for (const auto& proto : lib.model.prototypes) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) d2 += (z[i] - proto[i]) * (z[i] - proto[i]);
    r.distances.push_back(std::sqrt(d2));
  }
  r.group = nearest_group(profile, lib.model);
  const auto& archive = lib.archives.at(r.group);
  if (archive.empty()) fail(ErrorKind::Data, "archive for group " + std::to_string(r.group) + " is empty");
  r.config = archive.front().config;
  r.entry_id = archive.front().id;
  return r;
}

}  // namespace dash
