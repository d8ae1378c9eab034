#pragma once

// Persisted result of an evolution run and nearest-prototype retrieval.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dash/evolution.hpp"
#include "dash/profiles.hpp"

namespace dash {

inline constexpr int kLibrarySchemaVersion = 1;

struct LibraryEntry {
  SolverConfig config;
  GroupStats stats;
  std::string id;
  friend bool operator==(const LibraryEntry&, const LibraryEntry&) = default;
};

struct LibraryMember {
  SolverConfig config;
  EvalSummary summary;
  std::string id;
  friend bool operator==(const LibraryMember&, const LibraryMember&) = default;
};

struct Provenance {
  std::string run_config_hash;  // FNV-1a of the compact run config JSON
  nlohmann::json run_config;
  std::uint64_t master_seed = 0;
  int iterations = 0;
  std::string tool_version;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct SolverLibrary {
  Task task = Task::TSP;
  GroupModel model;
  std::vector<std::vector<LibraryEntry>> archives;  // rank order per group
  std::vector<LibraryMember> population;
  Provenance provenance;

  /// Throws Error(Data) on any broken invariant.
  void validate() const;
  friend bool operator==(const SolverLibrary& a, const SolverLibrary& b);
};

std::string config_hash(const nlohmann::json& run_config);

SolverLibrary make_library(Task task, const GroupModel& model, const EvolutionResult& result,
                           const EvolutionConfig& cfg);

nlohmann::json to_json(const SolverLibrary& lib);
SolverLibrary library_from_json(const nlohmann::json& j);
void save_library(const SolverLibrary& lib, const std::filesystem::path& path);
SolverLibrary load_library(const std::filesystem::path& path);

struct Retrieval {
  std::size_t group = 0;
  std::vector<double> distances;  // to every prototype, normalised space
  SolverConfig config;
  std::string entry_id;
};

/// Profile, normalise with the stored statistics, pick the nearest
/// prototype, return the rank-1 entry of that group's archive.
Retrieval retrieve(const SolverLibrary& lib, const Instance& inst);

}  // namespace dash
