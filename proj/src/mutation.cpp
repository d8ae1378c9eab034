#include "dash/mutation.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <nlohmann/json.hpp>

#include "dash/errors.hpp"

namespace dash {

namespace {

constexpr std::array<std::string_view, 4> kLayerNames{"MDL", "MCL", "SSL1", "SSL2"};

// Catalog bounds used by canonicalisation and by the stub's clamps.
struct Bounds {
  double lo, hi;
};
constexpr Bounds kKnn{2, 64}, kTopK{1, 64}, kStrength{1, 16}, kGlsLambda{0, 10}, kWeight{0, 100},
    kLam{0, 4}, kAlpha{0, 5}, kBeta{0, 10}, kRho{0.01, 0.99}, kAnts{1, 200}, kPower{0.1, 10},
    kPenalty{0, 10}, kSmallGap{0, 1};

// Multiplicative edits start from this value when the field is zero.
constexpr double kZeroSeed = 0.1;

double clampd(double v, Bounds b) { return std::clamp(v, b.lo, b.hi); }
int clampi(int v, Bounds b) {
  return std::clamp(v, static_cast<int>(b.lo), static_cast<int>(b.hi));
}
double round6(double v) { return std::round(v * 1e6) / 1e6; }
// Treated as zero by canonicalisation.
bool rounds_to_zero(double v) { return std::round(v * 1e3) == 0.0; }

double scale(double v, double factor, Bounds b) {
  if (v == 0.0 && factor > 1.0) return clampd(kZeroSeed, b);
  return clampd(round6(v * factor), b);
}

double pick_factor(Rng& rng) { return rng.bernoulli(0.5) ? 0.8 : 1.25; }
int pick_step(Rng& rng, int a, int b) {
  const int mag = rng.bernoulli(0.5) ? a : b;
  return rng.bernoulli(0.5) ? mag : -mag;
}

// One theta field edit; may leave the config unchanged (caller retries).
void edit_tour(TourMechanism& m, Rng& rng) {
  // Guidance fields are inert while guidance is off.
  const std::size_t fields = m.guidance ? 7 : 3;
  switch (rng.index(fields)) {
    case 0: m.knn_k = clampi(m.knn_k + pick_step(rng, 2, 4), kKnn); break;
    case 1: m.scan = m.scan == ScanMode::First ? ScanMode::Best : ScanMode::First; break;
    case 2: m.kick_strength = clampi(m.kick_strength + (rng.bernoulli(0.5) ? 1 : -1), kStrength); break;
    case 3: m.gls_lambda = scale(m.gls_lambda, pick_factor(rng), kGlsLambda); break;
    case 4: m.weight = scale(m.weight, pick_factor(rng), kWeight); break;
    case 5: m.lam = scale(m.lam, pick_factor(rng), kLam); break;
    case 6: {
      const double f = pick_factor(rng);
      const int scaled = static_cast<int>(std::lround(m.top_k * f));
      m.top_k = clampi(f > 1.0 ? std::max(m.top_k + 1, scaled) : std::min(m.top_k - 1, scaled), kTopK);
      break;
    }
  }
}

void edit_aco(AcoMechanism& m, Rng& rng) {
  switch (rng.index(5)) {
    case 0: m.alpha = scale(m.alpha, pick_factor(rng), kAlpha); break;
    case 1: m.beta = scale(m.beta, pick_factor(rng), kBeta); break;
    case 2: m.rho = scale(m.rho, pick_factor(rng), kRho); break;
    case 3: m.n_ants = clampi(m.n_ants + pick_step(rng, 2, 4), kAnts); break;
    case 4:
      m.deposit = m.deposit == AcoDeposit::IterationBest ? AcoDeposit::BestSoFar
                                                         : AcoDeposit::IterationBest;
      break;
  }
}

void edit_goa(GoaMechanism& m, Rng& rng) {
  switch (rng.index(4)) {
    case 0: {
      constexpr std::array rules{GoaRule::BestFit, GoaRule::FirstFit, GoaRule::Scored};
      const auto cur = std::find(rules.begin(), rules.end(), m.rule) - rules.begin();
      m.rule = rules[(static_cast<std::size_t>(cur) + 1 + rng.index(2)) % rules.size()];
      break;
    }
    case 1: m.power = scale(m.power, pick_factor(rng), kPower); break;
    case 2: m.penalty = scale(m.penalty, pick_factor(rng), kPenalty); break;
    case 3: m.small_gap = scale(m.small_gap, pick_factor(rng), kSmallGap); break;
  }
}

SolverConfig mdl(const SolverConfig& parent, Rng& rng) {
  for (int attempt = 0; attempt < 32; ++attempt) {
    SolverConfig c = parent;
    switch (c.backbone) {
      case Backbone::GLS:
      case Backbone::ILS: edit_tour(c.tour, rng); break;
      case Backbone::ACO: edit_aco(c.aco, rng); break;
      case Backbone::GOA: edit_goa(c.goa, rng); break;
    }
    if (!(c == parent)) return c;
  }
  // Every draw hit a clamp; a toggle always changes something.
  SolverConfig c = parent;
  switch (c.backbone) {
    case Backbone::GLS:
    case Backbone::ILS:
      c.tour.scan = c.tour.scan == ScanMode::First ? ScanMode::Best : ScanMode::First;
      break;
    case Backbone::ACO: c.aco.route_2opt = !c.aco.route_2opt; break;
    case Backbone::GOA: c.goa.rule = c.goa.rule == GoaRule::BestFit ? GoaRule::FirstFit : GoaRule::BestFit; break;
  }
  return c;
}

int shrink(int v) { return std::max(1, static_cast<int>(std::ceil(0.8 * v - 1e-9))); }

SolverConfig ssl1(const SolverConfig& parent, Rng& rng) {
  SolverConfig c = parent;
  c.sigma.time_limit_s = round6(parent.sigma.time_limit_s * (rng.bernoulli(0.5) ? 0.8 : 0.9));
  if (rng.bernoulli(0.5))
    c.sigma.loop_max = shrink(c.sigma.loop_max);
  else
    c.sigma.max_no_improve = shrink(c.sigma.max_no_improve);
  return c;
}

SolverConfig ssl2(const SolverConfig& parent, Rng& rng) {
  SolverConfig c = parent;
  auto& s = c.sigma;
  if (rng.bernoulli(0.5)) {
    s.max_no_improve = std::max(s.max_no_improve + 1,
                                static_cast<int>(std::ceil(1.25 * s.max_no_improve - 1e-9)));
    s.loop_max = std::max(s.loop_max, s.max_no_improve);
  } else {
    int next = s.perturb_period + pick_step(rng, 1, 2);
    if (next < 1) next = s.perturb_period + 1;
    s.perturb_period = next;
  }
  return c;
}

}  // namespace

std::string_view to_string(Layer l) { return kLayerNames[static_cast<std::size_t>(l)]; }

Layer layer_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kLayerNames.size(); ++i)
    if (kLayerNames[i] == s) return static_cast<Layer>(i);
  fail(ErrorKind::InvalidArgument, "unknown layer '" + std::string(s) + "'");
}

bool respects_layer(Layer layer, const SolverConfig& parent, const SolverConfig& cand) {
  if (cand.backbone != parent.backbone) return false;
  if (edits_theta(layer)) return cand.sigma == parent.sigma;
  const bool theta_same =
      cand.tour == parent.tour && cand.aco == parent.aco && cand.goa == parent.goa;
  if (!theta_same) return false;
  if (layer == Layer::SSL2 && cand.sigma.time_limit_s > parent.sigma.time_limit_s) return false;
  return true;
}

SolverConfig canonicalize(const SolverConfig& cfg) {
  const SolverConfig defaults = default_config(cfg.backbone);
  SolverConfig c = cfg;
  // Only the active block carries meaning.
  if (c.backbone != Backbone::GLS && c.backbone != Backbone::ILS) c.tour = defaults.tour;
  if (c.backbone != Backbone::ACO) c.aco = defaults.aco;
  if (c.backbone != Backbone::GOA) c.goa = defaults.goa;

  switch (c.backbone) {
    case Backbone::GLS:
    case Backbone::ILS: {
      auto& m = c.tour;
      m.knn_k = clampi(m.knn_k, kKnn);
      m.kick_strength = clampi(m.kick_strength, kStrength);
      m.top_k = clampi(m.top_k, kTopK);
      m.gls_lambda = clampd(m.gls_lambda, kGlsLambda);
      m.weight = clampd(m.weight, kWeight);
      m.lam = clampd(m.lam, kLam);
      if (rounds_to_zero(m.weight)) m.guidance = false;
      if (!m.guidance) {
        const TourMechanism base{};
        m.top_k = base.top_k;
        m.gls_lambda = base.gls_lambda;
        m.weight = base.weight;
        m.lam = base.lam;
      }
      break;
    }
    case Backbone::ACO: {
      auto& m = c.aco;
      m.alpha = clampd(m.alpha, kAlpha);
      m.beta = clampd(m.beta, kBeta);
      m.rho = clampd(m.rho, kRho);
      m.n_ants = clampi(m.n_ants, kAnts);
      break;
    }
    case Backbone::GOA: {
      auto& m = c.goa;
      m.power = clampd(m.power, kPower);
      m.penalty = clampd(m.penalty, kPenalty);
      m.small_gap = clampd(m.small_gap, kSmallGap);
      if (rounds_to_zero(m.penalty) || rounds_to_zero(m.small_gap)) {
        m.penalty = 0.0;
        m.small_gap = 0.0;
      }
      // power only matters to the scored rule.
      if (m.rule != GoaRule::Scored) m = GoaMechanism{.rule = m.rule};
      break;
    }
  }
  return c;
}

nlohmann::json to_json(const LlmSettings& s) {
  return {{"base_url", s.base_url},       {"model", s.model},
          {"temperature", s.temperature}, {"retries", s.retries},
          {"fallback_to_stub", s.fallback_to_stub}, {"timeout_s", s.timeout_s},
          {"max_in_flight", s.max_in_flight},       {"audit_path", s.audit_path}};
}

LlmSettings llm_settings_from_json(const nlohmann::json& j) {
  LlmSettings s;
  try {
    for (const auto& [key, _] : j.items())
      if (!to_json(s).contains(key) && key != "api_key")
        fail(ErrorKind::Data, "unknown llm setting '" + key + "'");
    s.base_url = j.value("base_url", s.base_url);
    s.model = j.value("model", s.model);
    s.temperature = j.value("temperature", s.temperature);
    s.api_key = j.value("api_key", s.api_key);
    s.retries = j.value("retries", s.retries);
    s.fallback_to_stub = j.value("fallback_to_stub", s.fallback_to_stub);
    s.timeout_s = j.value("timeout_s", s.timeout_s);
    s.max_in_flight = j.value("max_in_flight", s.max_in_flight);
    s.audit_path = j.value("audit_path", s.audit_path);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, std::string("llm settings: ") + e.what());
  }
  if (s.retries < 0 || s.max_in_flight < 1 || !(s.timeout_s > 0.0))
    fail(ErrorKind::Data, "llm settings out of range");
  return s;
}

MutationResponse StubProvider::propose(const MutationRequest& req) {
  req.parent.validate();
  Rng rng(derive_seed(req.seed, to_string(req.layer)));
  MutationResponse out;
  switch (req.layer) {
    case Layer::MDL: out.candidate = mdl(req.parent, rng); break;
    case Layer::MCL: out.candidate = canonicalize(req.parent); break;
    case Layer::SSL1: out.candidate = ssl1(req.parent, rng); break;
    case Layer::SSL2: out.candidate = ssl2(req.parent, rng); break;
  }
  out.candidate.validate();
  if (!respects_layer(req.layer, req.parent, out.candidate))
    fail(ErrorKind::Provider, "stub produced a layer violation");
  out.provenance = "stub";
  return out;
}

}  // namespace dash
