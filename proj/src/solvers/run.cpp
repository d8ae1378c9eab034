#include <cmath>

#include "dash/errors.hpp"
#include "internal.hpp"

namespace dash {

RunResult run_solver(const SolverConfig& cfg, const Instance& inst, double f_star,
                     std::uint64_t seed, const RunOptions& opts) {
  cfg.validate();
  validate(inst);
  const Task task = task_of(inst);
  if (!backbone_supports(cfg.backbone, task))
    fail(ErrorKind::InvalidArgument, std::string(to_string(cfg.backbone)) +
                                         " cannot solve " + std::string(to_string(task)));
  require(std::isfinite(f_star) && f_star != 0.0, "reference objective must be finite and non-zero");
  require(opts.horizon > 0.0 && std::isfinite(opts.horizon), "horizon must be > 0");

  RunResult r;
  switch (cfg.backbone) {
    case Backbone::GLS:
    case Backbone::ILS:
      r = detail::run_tour_search(cfg, std::get<TspInstance>(inst), f_star, seed, opts);
      break;
    case Backbone::ACO: r = detail::run_aco(cfg, inst, f_star, seed, opts); break;
    case Backbone::GOA: r = detail::run_goa(cfg, std::get<BppInstance>(inst), f_star, seed, opts); break;
  }
  if (!std::isfinite(r.objective)) fail(ErrorKind::Data, "solver produced a non-finite objective");
  return r;
}

}  // namespace dash
