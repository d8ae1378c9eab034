#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "dash/errors.hpp"
#include "dash/solvers.hpp"

namespace dash {

namespace {

template <class E, std::size_t N>
E enum_from(std::string_view s, const std::pair<E, std::string_view> (&table)[N],
            std::string_view what) {
  for (const auto& [e, name] : table)
    if (name == s) return e;
  fail(ErrorKind::InvalidArgument, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

template <class E, std::size_t N>
std::string_view enum_name(E e, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [v, name] : table)
    if (v == e) return name;
  return "?";
}

constexpr std::pair<Backbone, std::string_view> kBackbones[] = {
    {Backbone::GLS, "gls"}, {Backbone::ILS, "ils"}, {Backbone::ACO, "aco"}, {Backbone::GOA, "goa"}};
constexpr std::pair<LsOperator, std::string_view> kOperators[] = {{LsOperator::TwoOpt, "2opt"},
                                                                  {LsOperator::OrOpt, "or-opt"}};
constexpr std::pair<ScanMode, std::string_view> kScans[] = {{ScanMode::First, "first"},
                                                            {ScanMode::Best, "best"}};
constexpr std::pair<KickOperator, std::string_view> kKicks[] = {
    {KickOperator::TwoOptKick, "2opt_kick"}, {KickOperator::DoubleBridge, "double_bridge"}};
constexpr std::pair<GoaRule, std::string_view> kGoaRules[] = {
    {GoaRule::BestFit, "best_fit"}, {GoaRule::FirstFit, "first_fit"}, {GoaRule::Scored, "scored"}};
constexpr std::pair<AcoDeposit, std::string_view> kDeposits[] = {
    {AcoDeposit::IterationBest, "iteration_best"}, {AcoDeposit::BestSoFar, "best_so_far"}};
constexpr std::pair<ClockMode, std::string_view> kClocks[] = {{ClockMode::Wall, "wall"},
                                                              {ClockMode::Work, "work"}};

// Reads the keys of `j` into `out`, rejecting anything not in `known`.
void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                std::string_view block) {
  if (!j.is_object()) fail(ErrorKind::Data, std::string(block) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || k == key;
    if (!ok) fail(ErrorKind::Data, "unknown field '" + key + "' in " + std::string(block));
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <class E, std::size_t N>
void read_enum(const nlohmann::json& j, const char* key, E& out,
               const std::pair<E, std::string_view> (&table)[N]) {
  if (j.contains(key)) out = enum_from(j.at(key).get<std::string>(), table, key);
}

}  // namespace

std::string_view to_string(Backbone b) { return enum_name(b, kBackbones); }
Backbone backbone_from_string(std::string_view s) { return enum_from(s, kBackbones, "backbone"); }
std::string_view to_string(ClockMode m) { return enum_name(m, kClocks); }
ClockMode clock_mode_from_string(std::string_view s) { return enum_from(s, kClocks, "clock"); }

bool backbone_supports(Backbone b, Task t) {
  switch (b) {
    case Backbone::GLS:
    case Backbone::ILS: return t == Task::TSP;
    case Backbone::ACO: return t == Task::CVRP || t == Task::MKP;
    case Backbone::GOA: return t == Task::BPP;
  }
  return false;
}

void SolverConfig::validate() const {
  const auto& s = sigma;
  require(std::isfinite(s.time_limit_s) && s.time_limit_s > 0.0, "time_limit_s must be > 0");
  require(s.loop_max >= 1, "loop_max must be >= 1");
  require(s.max_no_improve >= 1, "max_no_improve must be >= 1");
  require(s.guidance_update_every >= 1, "guidance_update_every must be >= 1");
  require(s.perturb_period >= 1, "perturbation period must be >= 1");
  require(s.inner_steps >= 1, "inner_steps must be >= 1");
  require(s.ls_max_moves >= 1, "ls_max_moves must be >= 1");
  switch (backbone) {
    case Backbone::GLS:
    case Backbone::ILS:
      require(tour.knn_k >= 2, "knn_k must be >= 2");
      require(tour.kick_strength >= 1, "kick_strength must be >= 1");
      require(tour.top_k >= 1, "top_k must be >= 1");
      require(std::isfinite(tour.gls_lambda) && tour.gls_lambda >= 0.0, "gls_lambda must be >= 0");
      require(std::isfinite(tour.weight) && tour.weight >= 0.0, "weight must be >= 0");
      require(std::isfinite(tour.lam) && tour.lam >= 0.0, "lam must be >= 0");
      break;
    case Backbone::ACO:
      require(aco.rho > 0.0 && aco.rho < 1.0, "rho must be in (0, 1)");
      require(aco.n_ants >= 1, "n_ants must be >= 1");
      require(std::isfinite(aco.alpha) && aco.alpha >= 0.0, "alpha must be >= 0");
      require(std::isfinite(aco.beta) && aco.beta >= 0.0, "beta must be >= 0");
      break;
    case Backbone::GOA:
      require(std::isfinite(goa.power) && goa.power > 0.0, "power must be > 0");
      require(std::isfinite(goa.penalty) && goa.penalty >= 0.0, "penalty must be >= 0");
      require(goa.small_gap >= 0.0 && goa.small_gap <= 1.0, "small_gap must be in [0, 1]");
      break;
  }
}

nlohmann::json SolverConfig::theta_json() const {
  switch (backbone) {
    case Backbone::GLS:
    case Backbone::ILS:
      return {{"knn_k", tour.knn_k},
              {"operator", enum_name(tour.op, kOperators)},
              {"scan", enum_name(tour.scan, kScans)},
              {"acceptance", "improve_only"},
              {"guidance", tour.guidance},
              {"top_k", tour.top_k},
              {"gls_lambda", tour.gls_lambda},
              {"weight", tour.weight},
              {"lam", tour.lam},
              {"perturbation", enum_name(tour.kick, kKicks)},
              {"kick_strength", tour.kick_strength}};
    case Backbone::ACO:
      return {{"alpha", aco.alpha},
              {"beta", aco.beta},
              {"rho", aco.rho},
              {"n_ants", aco.n_ants},
              {"deposit", enum_name(aco.deposit, kDeposits)},
              {"route_2opt", aco.route_2opt}};
    case Backbone::GOA:
      return {{"rule", enum_name(goa.rule, kGoaRules)},
              {"power", goa.power},
              {"penalty", goa.penalty},
              {"small_gap", goa.small_gap}};
  }
  return {};
}

nlohmann::json SolverConfig::sigma_json() const {
  return {{"time_limit_s", sigma.time_limit_s},
          {"loop_max", sigma.loop_max},
          {"max_no_improve", sigma.max_no_improve},
          {"guidance_update_every", sigma.guidance_update_every},
          {"perturbation_trigger", {{"mode", "stagnation_mod"}, {"period", sigma.perturb_period}}},
          {"inner_steps", sigma.inner_steps},
          {"ls_max_moves", sigma.ls_max_moves}};
}

nlohmann::json to_json(const SolverConfig& cfg) {
  return {{"backbone", to_string(cfg.backbone)},
          {"theta", cfg.theta_json()},
          {"sigma", cfg.sigma_json()}};
}

SolverConfig solver_config_from_json(const nlohmann::json& j) {
  try {
    check_keys(j, {"backbone", "theta", "sigma"}, "solver config");
    SolverConfig c = default_config(backbone_from_string(j.at("backbone").get<std::string>()));

    const nlohmann::json theta = j.value("theta", nlohmann::json::object());
    switch (c.backbone) {
      case Backbone::GLS:
      case Backbone::ILS:
        check_keys(theta,
                   {"knn_k", "operator", "scan", "acceptance", "guidance", "top_k", "gls_lambda",
                    "weight", "lam", "perturbation", "kick_strength"},
                   "theta");
        if (theta.contains("acceptance") && theta.at("acceptance") != "improve_only")
          fail(ErrorKind::Data, "acceptance must be improve_only");
        read(theta, "knn_k", c.tour.knn_k);
        read_enum(theta, "operator", c.tour.op, kOperators);
        read_enum(theta, "scan", c.tour.scan, kScans);
        read(theta, "guidance", c.tour.guidance);
        read(theta, "top_k", c.tour.top_k);
        read(theta, "gls_lambda", c.tour.gls_lambda);
        read(theta, "weight", c.tour.weight);
        read(theta, "lam", c.tour.lam);
        read_enum(theta, "perturbation", c.tour.kick, kKicks);
        read(theta, "kick_strength", c.tour.kick_strength);
        break;
      case Backbone::ACO:
        check_keys(theta, {"alpha", "beta", "rho", "n_ants", "deposit", "route_2opt"}, "theta");
        read(theta, "alpha", c.aco.alpha);
        read(theta, "beta", c.aco.beta);
        read(theta, "rho", c.aco.rho);
        read(theta, "n_ants", c.aco.n_ants);
        read_enum(theta, "deposit", c.aco.deposit, kDeposits);
        read(theta, "route_2opt", c.aco.route_2opt);
        break;
      case Backbone::GOA:
        check_keys(theta, {"rule", "power", "penalty", "small_gap"}, "theta");
        read_enum(theta, "rule", c.goa.rule, kGoaRules);
        read(theta, "power", c.goa.power);
        read(theta, "penalty", c.goa.penalty);
        read(theta, "small_gap", c.goa.small_gap);
        break;
    }

    const nlohmann::json sigma = j.value("sigma", nlohmann::json::object());
    check_keys(sigma,
               {"time_limit_s", "loop_max", "max_no_improve", "guidance_update_every",
                "perturbation_trigger", "inner_steps", "ls_max_moves"},
               "sigma");
    read(sigma, "time_limit_s", c.sigma.time_limit_s);
    read(sigma, "loop_max", c.sigma.loop_max);
    read(sigma, "max_no_improve", c.sigma.max_no_improve);
    read(sigma, "guidance_update_every", c.sigma.guidance_update_every);
    read(sigma, "inner_steps", c.sigma.inner_steps);
    read(sigma, "ls_max_moves", c.sigma.ls_max_moves);
    if (sigma.contains("perturbation_trigger")) {
      const auto& trig = sigma.at("perturbation_trigger");
      check_keys(trig, {"mode", "period"}, "perturbation_trigger");
      if (trig.value("mode", "stagnation_mod") != "stagnation_mod")
        fail(ErrorKind::Data, "perturbation_trigger.mode must be stagnation_mod");
      read(trig, "period", c.sigma.perturb_period);
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, std::string("solver config: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Data) throw;
    fail(ErrorKind::Data, std::string("solver config: ") + e.what());
  }
}

SolverConfig seed_config(Task task) {
  SolverConfig c;
  switch (task) {
    case Task::TSP:
      c.backbone = Backbone::GLS;
      c.sigma = {.time_limit_s = 10.0,
                 .loop_max = 1000,
                 .max_no_improve = 50,
                 .guidance_update_every = 1,
                 .perturb_period = 10,
                 .inner_steps = 20,
                 .ls_max_moves = 1000000};
      break;
    case Task::CVRP:
    case Task::MKP:
      c.backbone = Backbone::ACO;
      c.sigma = {.time_limit_s = 10.0,
                 .loop_max = 1000,
                 .max_no_improve = 100,
                 .guidance_update_every = 1,
                 .perturb_period = 1,
                 .inner_steps = 1,
                 .ls_max_moves = 1000000};
      break;
    case Task::BPP:
      c.backbone = Backbone::GOA;
      c.sigma = {.time_limit_s = 10.0,
                 .loop_max = 1,
                 .max_no_improve = 1,
                 .guidance_update_every = 1,
                 .perturb_period = 1,
                 .inner_steps = 1,
                 .ls_max_moves = 1000000};
      break;
  }
  return c;
}

SolverConfig default_config(Backbone b) {
  switch (b) {
    case Backbone::GLS: return seed_config(Task::TSP);
    case Backbone::ILS: {
      SolverConfig c = seed_config(Task::TSP);
      c.backbone = Backbone::ILS;
      c.tour.guidance = false;
      c.tour.kick = KickOperator::DoubleBridge;
      return c;
    }
    case Backbone::ACO: return seed_config(Task::MKP);
    case Backbone::GOA: return seed_config(Task::BPP);
  }
  fail(ErrorKind::InvalidArgument, "unknown backbone");
}

SolverConfig a280_specialist() {
  SolverConfig c = seed_config(Task::TSP);
  c.tour = {.knn_k = 16,
            .op = LsOperator::TwoOpt,
            .scan = ScanMode::First,
            .guidance = true,
            .top_k = 4,
            .gls_lambda = 1.2,
            .weight = 1.0,
            .lam = 0.5,
            .kick = KickOperator::TwoOptKick,
            .kick_strength = 1};
  c.sigma.time_limit_s = 4.0;
  c.sigma.loop_max = 150;
  c.sigma.max_no_improve = 30;
  return c;
}

RunClock::RunClock(ClockMode mode, double seconds_per_unit)
    : mode_(mode), spu_(seconds_per_unit), start_(std::chrono::steady_clock::now()) {
  require(seconds_per_unit > 0.0, "seconds_per_unit must be > 0");
}

double RunClock::elapsed() const {
  if (mode_ == ClockMode::Work) return static_cast<double>(units_) * spu_;
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

}  // namespace dash
