#pragma once

// Layer-constrained proposal of candidate solver configs.
//
//   MDL   edit theta (one field)           MCL   canonicalise theta
//   SSL1  shrink sigma                     SSL2  reshape sigma, same time cap
//
// The half a layer may not edit is bit-identical to the parent in every
// response; providers that break this are rejected, never repaired.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "dash/solvers.hpp"

namespace dash {

enum class Layer { MDL, MCL, SSL1, SSL2 };
std::string_view to_string(Layer l);
Layer layer_from_string(std::string_view s);
/// MDL and MCL edit theta; SSL1 and SSL2 edit sigma.
constexpr bool edits_theta(Layer l) { return l == Layer::MDL || l == Layer::MCL; }

/// Parent statistics handed to the provider.
struct Feedback {
  double ell = 0.0;
  double k = 0.0;
  double t = 0.0;
  std::map<std::string, double> phase_share;  // fraction of run time per phase
};

struct MutationRequest {
  Layer layer = Layer::MDL;
  SolverConfig parent;
  Feedback feedback;
  std::uint64_t seed = 0;
};

struct MutationResponse {
  SolverConfig candidate;
  std::string provenance;
};

/// True when every field the layer must not touch equals the parent's
/// (backbone included), and SSL2 did not raise the time cap.
bool respects_layer(Layer layer, const SolverConfig& parent, const SolverConfig& candidate);

/// Behaviour-preserving normal form: guidance blocks whose weight rounds
/// to zero are switched off and reset, values clamped to catalog bounds,
/// inactive mechanism blocks reset to defaults. Idempotent.
SolverConfig canonicalize(const SolverConfig& cfg);

class MutationProvider {
 public:
  virtual ~MutationProvider() = default;
  virtual std::string name() const = 0;
  /// Throws Error(Provider) when no valid candidate can be produced.
  virtual MutationResponse propose(const MutationRequest& req) = 0;
};

/// Offline, seeded, stateless provider with fixed factor sets.
class StubProvider final : public MutationProvider {
 public:
  std::string name() const override { return "stub"; }
  MutationResponse propose(const MutationRequest& req) override;
};

struct LlmSettings {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-5-mini";
  double temperature = 0.7;
  std::string api_key;           // empty: read DASH_LLM_API_KEY
  int retries = 3;               // extra attempts after an invalid reply
  bool fallback_to_stub = true;  // after the retries are spent
  double timeout_s = 60.0;
  int max_in_flight = 4;
  std::string audit_path;        // JSONL; empty disables the audit log
};

nlohmann::json to_json(const LlmSettings& s);  // api key never serialised
LlmSettings llm_settings_from_json(const nlohmann::json& j);

/// Chat-completions client. Replies must carry a solver config JSON object;
/// each one is parsed, validated and layer-checked before it is returned.
class LlmProvider final : public MutationProvider {
 public:
  explicit LlmProvider(LlmSettings settings);
  ~LlmProvider() override;
  std::string name() const override { return "llm"; }
  MutationResponse propose(const MutationRequest& req) override;

  /// Prompt text for a request (exposed for inspection and tests).
  static std::string build_prompt(const MutationRequest& req);
  /// Candidate from a reply's message content, or nullopt with `why` set.
  static std::optional<SolverConfig> parse_reply(const std::string& content,
                                                 const MutationRequest& req, std::string& why);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<MutationProvider> make_provider(std::string_view kind, const LlmSettings& llm);

}  // namespace dash
