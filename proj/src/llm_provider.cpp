// Chat-completions mutation provider.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <regex>
#include <semaphore>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dash/errors.hpp"
#include "dash/mutation.hpp"

namespace dash {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // prefix, no trailing slash
};

Endpoint split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) fail(ErrorKind::InvalidArgument, "bad base_url '" + url + "'");
  std::string path = m[2].str();
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {m[1].str(), path};
}

const char* kSystemPrompt =
    "You edit metaheuristic solver configurations. Reply with exactly one JSON object: the "
    "complete candidate configuration with keys backbone, theta, sigma. No prose.";

std::string layer_instructions(Layer l) {
  switch (l) {
    case Layer::MDL:
      return "Mechanism discovery: change theta to find a better search mechanism. sigma must stay "
             "exactly as given.";
    case Layer::MCL:
      return "Mechanism consolidation: simplify theta without changing behaviour (drop inert "
             "settings, keep values in range). sigma must stay exactly as given.";
    case Layer::SSL1:
      return "Schedule compression: reduce runtime (time_limit_s, loop_max, max_no_improve) while "
             "keeping solution quality. theta must stay exactly as given.";
    case Layer::SSL2:
      return "Schedule enhancement: improve solution quality by reallocating effort "
             "(max_no_improve, perturbation_trigger.period, inner_steps) without raising "
             "time_limit_s. theta must stay exactly as given.";
  }
  return {};
}

const char* kSchema = R"(Schema:
backbone: "gls" | "ils" | "aco" | "goa" (must not change)
theta (gls/ils): knn_k int>=2, operator "2opt"|"or-opt", scan "first"|"best",
  acceptance "improve_only", guidance bool, top_k int>=1, gls_lambda >=0, weight >=0, lam >=0,
  perturbation "2opt_kick"|"double_bridge", kick_strength int>=1
theta (aco): alpha>=0, beta>=0, rho in (0,1), n_ants int>=1, deposit "iteration_best"|"best_so_far",
  route_2opt bool
theta (goa): rule "best_fit"|"first_fit"|"scored", power>0, penalty>=0, small_gap in [0,1]
sigma: time_limit_s>0, loop_max int>=1, max_no_improve int>=1, guidance_update_every int>=1,
  perturbation_trigger {"mode":"stagnation_mod","period":int>=1}, inner_steps int>=1,
  ls_max_moves int>=1)";

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

struct LlmProvider::Impl {
  LlmSettings settings;
  Endpoint endpoint;
  std::counting_semaphore<1024> slots;
  std::mutex audit_mu;

  explicit Impl(LlmSettings s)
      : settings(std::move(s)),
        endpoint(split_url(settings.base_url)),
        slots(std::min(settings.max_in_flight, 1024)) {
    if (settings.api_key.empty())
      if (const char* k = std::getenv("DASH_LLM_API_KEY")) settings.api_key = k;
  }

  void audit(const nlohmann::json& entry) {
    if (settings.audit_path.empty()) return;
    std::lock_guard lock(audit_mu);
    std::ofstream out(settings.audit_path, std::ios::app);
    out << entry.dump() << '\n';
  }

  // Message content of one completion; throws Provider on transport errors.
  std::string complete(const nlohmann::json& body, Layer layer, int attempt) {
    slots.acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{slots};

    httplib::Client cli(endpoint.origin);
    const auto secs = static_cast<time_t>(settings.timeout_s);
    const auto usecs = static_cast<time_t>((settings.timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!settings.api_key.empty()) headers.emplace("Authorization", "Bearer " + settings.api_key);

    auto res = cli.Post(endpoint.path + "/chat/completions", headers, body.dump(), "application/json");
    nlohmann::json entry{{"time", now_iso()}, {"layer", to_string(layer)}, {"attempt", attempt},
                         {"request", body}};
    if (!res) {
      entry["error"] = httplib::to_string(res.error());
      audit(entry);
      fail(ErrorKind::Provider, "llm endpoint unreachable: " + httplib::to_string(res.error()));
    }
    entry["status"] = res->status;
    entry["response"] = res->body;
    audit(entry);
    if (res->status != 200) return {};
    const auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) return {};
    if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty())
      return {};
    const auto& choice = reply["choices"][0];
    if (!choice.contains("message")) return {};
    const auto& msg = choice["message"];
    if (!msg.contains("content") || !msg["content"].is_string()) return {};
    return msg["content"].get<std::string>();
  }
};

LlmProvider::LlmProvider(LlmSettings settings) : impl_(std::make_unique<Impl>(std::move(settings))) {}
LlmProvider::~LlmProvider() = default;

std::string LlmProvider::build_prompt(const MutationRequest& req) {
  nlohmann::json fb{{"terminal_log_residual", req.feedback.ell},
                    {"tldr", req.feedback.k},
                    {"runtime_s", req.feedback.t},
                    {"phase_share", req.feedback.phase_share}};
  return layer_instructions(req.layer) + "\n\n" + kSchema + "\n\nParent configuration:\n" +
         to_json(req.parent).dump(2) + "\n\nParent batch statistics (lower log-residual is better, "
         "higher tldr is better):\n" + fb.dump(2) + "\n";
}

std::optional<SolverConfig> LlmProvider::parse_reply(const std::string& content,
                                                     const MutationRequest& req, std::string& why) {
  const auto open = content.find('{');
  const auto close = content.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    why = "no JSON object in reply";
    return std::nullopt;
  }
  const auto j = nlohmann::json::parse(content.substr(open, close - open + 1), nullptr, false);
  if (j.is_discarded()) {
    why = "reply JSON does not parse";
    return std::nullopt;
  }
  SolverConfig cand;
  try {
    cand = solver_config_from_json(j);
  } catch (const Error& e) {
    why = e.what();
    return std::nullopt;
  }
  if (!respects_layer(req.layer, req.parent, cand)) {
    why = "reply edits the frozen half";
    return std::nullopt;
  }
  return cand;
}

MutationResponse LlmProvider::propose(const MutationRequest& req) {
  const nlohmann::json body{{"model", impl_->settings.model},
                            {"temperature", impl_->settings.temperature},
                            {"messages",
                             {{{"role", "system"}, {"content", kSystemPrompt}},
                              {{"role", "user"}, {"content", build_prompt(req)}}}}};
  std::string why;
  for (int attempt = 0; attempt <= impl_->settings.retries; ++attempt) {
    const std::string content = impl_->complete(body, req.layer, attempt);
    if (content.empty()) {
      why = "malformed completion";
      continue;
    }
    if (auto cand = parse_reply(content, req, why))
      return {*cand, "llm:" + impl_->settings.model + " attempt " + std::to_string(attempt)};
  }
  if (!impl_->settings.fallback_to_stub)
    fail(ErrorKind::Provider, "llm reply invalid after retries: " + why);
  auto out = StubProvider{}.propose(req);
  out.provenance = "stub-fallback (" + why + ")";
  return out;
}

std::unique_ptr<MutationProvider> make_provider(std::string_view kind, const LlmSettings& llm) {
  if (kind == "stub") return std::make_unique<StubProvider>();
  if (kind == "llm") return std::make_unique<LlmProvider>(llm);
  fail(ErrorKind::InvalidArgument, "unknown provider '" + std::string(kind) + "'");
}

}  // namespace dash
