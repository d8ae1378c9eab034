#include "dash/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "dash/errors.hpp"

namespace dash {

namespace tj = trajectory;
using nlohmann::json;

void ToleranceParams::validate() const {
  require(std::isfinite(epsilon) && epsilon >= 0.0, "epsilon must be >= 0");
  require(std::isfinite(delta) && delta > 0.0, "delta must be > 0");
}

bool within_tolerance(double x_prime, double x, MetricKind kind, double eps) {
  require(std::isfinite(x_prime) && std::isfinite(x), "tolerance check needs finite values");
  const double diff = std::abs(x_prime - x);
  if (kind == MetricKind::Ell) return diff <= eps;
  // A zero reference leaves no relative band; fall back to the floor.
  if (std::abs(x) <= kRelativeFloor) return std::abs(x_prime) <= kRelativeFloor;
  return diff <= eps * std::abs(x);
}

namespace {

// k' is an improvement over k at threshold delta.
bool k_improves(double k_prime, double k, double delta) {
  if (std::abs(k) <= kRelativeFloor) return k_prime > kRelativeFloor;
  return k_prime >= (1.0 + delta) * k;
}

}  // namespace

bool accept(Layer layer, const EvalSummary& p, const EvalSummary& c, const ToleranceParams& tol) {
  const double eps = tol.epsilon, delta = tol.delta;
  switch (layer) {
    case Layer::MDL:
      return c.ell <= p.ell - delta ||
             (within_tolerance(c.ell, p.ell, MetricKind::Ell, eps) && k_improves(c.k, p.k, delta));
    case Layer::MCL:
      return within_tolerance(c.ell, p.ell, MetricKind::Ell, eps) &&
             within_tolerance(c.k, p.k, MetricKind::K, eps);
    case Layer::SSL1:
      return c.t <= (1.0 - delta) * p.t && within_tolerance(c.ell, p.ell, MetricKind::Ell, eps);
    case Layer::SSL2:
      return c.ell <= p.ell - delta && within_tolerance(c.k, p.k, MetricKind::K, eps);
  }
  return false;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> TrainingSet::members(int g) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (items[i].group == g) out.push_back(i);
  return out;
}

void TrainingSet::validate() const {
  if (groups < 1) fail(ErrorKind::Data, "training set needs at least one group");
  if (items.empty()) fail(ErrorKind::Data, "training set is empty");
  std::vector<int> count(static_cast<std::size_t>(groups), 0);
  for (const auto& it : items) {
    if (task_of(it.instance) != task) fail(ErrorKind::Data, "training instance " + it.id + " has the wrong task");
    if (!std::isfinite(it.f_star) || it.f_star == 0.0)
      fail(ErrorKind::Data, "training instance " + it.id + " lacks a usable reference value");
    if (it.group < 0 || it.group >= groups) fail(ErrorKind::Data, "group id out of range for " + it.id);
    ++count[static_cast<std::size_t>(it.group)];
  }
  for (int g = 0; g < groups; ++g)
    if (count[static_cast<std::size_t>(g)] == 0)
      fail(ErrorKind::Data, "group " + std::to_string(g) + " has no training instances");
}

GroupModel group_training_set(TrainingSet& set, int groups, std::uint64_t seed) {
  std::vector<InstanceProfile> profiles;
  profiles.reserve(set.items.size());
  for (const auto& it : set.items) profiles.push_back(extract_profile(it.instance));
  auto fit = fit_groups_detailed(profiles, static_cast<std::size_t>(groups), seed);
  set.groups = groups;
  for (std::size_t i = 0; i < set.items.size(); ++i) set.items[i].group = fit.assignment[i];
  return fit.model;
}

Batch sample_batch(const TrainingSet& set, int m, std::uint64_t seed) {
  require(m >= 1, "m must be >= 1");
  Rng rng(seed);
  Batch b;
  b.run_seed = derive_seed(seed, "runs");
  for (int g = 0; g < set.groups; ++g) {
    auto pool = set.members(g);
    if (pool.empty()) fail(ErrorKind::Data, "group " + std::to_string(g) + " is empty");
    std::vector<std::size_t> pick;
    const auto want = static_cast<std::size_t>(m);
    if (pool.size() >= want) {
      for (std::size_t i = 0; i < want; ++i) {
        std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
        pick.push_back(pool[i]);
      }
    } else {
      pick = pool;
      while (pick.size() < want) pick.push_back(pool[rng.index(pool.size())]);
    }
    b.by_group.push_back(std::move(pick));
  }
  return b;
}

// ---------------------------------------------------------------------------

double Ell0Cache::resolve(std::size_t index, double measured) {
  std::lock_guard lock(mu_);
  auto [it, inserted] = values_.emplace(index, measured);
  if (!inserted) ++hits_;
  return it->second;
}

Feedback EvalRecord::feedback() const {
  Feedback f{summary.ell, summary.k, summary.t, {}};
  double total = 0.0;
  for (const auto& r : runs)
    for (const auto& [phase, secs] : r.phase_time) {
      f.phase_share[phase] += secs;
      total += secs;
    }
  if (total > 0.0)
    for (auto& [_, v] : f.phase_share) v /= total;
  return f;
}

EvalRecord evaluate_batch(const SolverConfig& cfg, const TrainingSet& set, const Batch& batch,
                          const EvalSettings& settings, Ell0Cache& cache) {
  struct Job {
    std::size_t index;
    int group;
    std::optional<RunResult> result;
    std::string error;
  };
  std::vector<Job> jobs;
  for (std::size_t g = 0; g < batch.by_group.size(); ++g)
    for (std::size_t idx : batch.by_group[g]) jobs.push_back({idx, static_cast<int>(g), {}, {}});

  const RunOptions opts{settings.horizon, settings.clock, settings.seconds_per_unit};
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j; (j = next++) < jobs.size();) {
      auto& job = jobs[j];
      const auto& item = set.items.at(job.index);
      try {
        job.result = run_solver(cfg, item.instance, item.f_star, derive_seed(batch.run_seed, job.index), opts);
      } catch (const std::exception& e) {
        job.error = item.id + ": " + e.what();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, settings.jobs));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(threads, jobs.size()); ++t) pool.emplace_back(worker);
  }

  // Assembly is sequential and in batch order, so results never depend on
  // which thread finished first.
  EvalRecord rec;
  const tj::MetricConfig mc{settings.floor, settings.horizon};
  const auto G = batch.by_group.size();
  rec.summary.groups.assign(G, {});
  for (auto& job : jobs) {
    if (!job.result) {
      rec.valid = false;
      if (rec.error.empty()) rec.error = job.error;
      continue;
    }
    const auto& r = *job.result;
    InstanceOutcome o;
    o.index = job.index;
    o.group = job.group;
    o.ell0 = cache.resolve(job.index, tj::log_residual(r.trace.initial_gap(), mc));
    o.ell = tj::terminal_log_residual(r.trace, mc);
    o.k = 2.0 / settings.horizon * (o.ell0 - tj::time_avg_log_residual(r.trace, mc));
    o.t_run = r.t_run;
    o.phase_time = r.phase_time;
    rec.runs.push_back(std::move(o));
  }
  if (!rec.valid) return rec;

  auto& s = rec.summary;
  for (const auto& o : rec.runs) {
    s.ell += o.ell;
    s.k += o.k;
    s.t += o.t_run;
    auto& gs = s.groups[static_cast<std::size_t>(o.group)];
    gs.ell += o.ell;
    gs.k += o.k;
    gs.t += o.t_run;
    ++gs.count;
  }
  const auto n = static_cast<double>(rec.runs.size());
  s.ell /= n;
  s.k /= n;
  s.t /= n;
  for (auto& gs : s.groups)
    if (gs.count > 0) {
      gs.ell /= gs.count;
      gs.k /= gs.count;
      gs.t /= gs.count;
    }
  return rec;
}

// ---------------------------------------------------------------------------

bool ranks_before(const GroupStats& a, const GroupStats& b) {
  if (a.ell != b.ell) return a.ell < b.ell;
  if (a.k != b.k) return a.k > b.k;
  return a.t < b.t;
}

bool GroupArchive::offer(const SolverConfig& cfg, const GroupStats& stats, const std::string& id,
                         std::uint64_t seq) {
  auto same = std::find_if(entries_.begin(), entries_.end(),
                           [&](const ArchiveEntry& e) { return e.config == cfg; });
  if (same != entries_.end()) {
    if (!ranks_before(stats, same->stats)) return false;
    entries_.erase(same);
  }
  ArchiveEntry e{cfg, stats, id, seq};
  // Earlier offers win exact ties.
  auto pos = std::find_if(entries_.begin(), entries_.end(), [&](const ArchiveEntry& x) {
    return ranks_before(e.stats, x.stats) || (!ranks_before(x.stats, e.stats) && e.seq < x.seq);
  });
  const auto at = pos - entries_.begin();
  if (static_cast<std::size_t>(at) >= capacity_) return same != entries_.end();
  entries_.insert(pos, std::move(e));
  if (entries_.size() > capacity_) entries_.pop_back();
  return true;
}

void Population::sort() {
  std::stable_sort(members_.begin(), members_.end(), [](const auto& a, const auto& b) {
    const GroupStats x{a.summary.ell, a.summary.k, a.summary.t, 0};
    const GroupStats y{b.summary.ell, b.summary.k, b.summary.t, 0};
    if (ranks_before(x, y)) return true;
    if (ranks_before(y, x)) return false;
    return a.seq < b.seq;
  });
}

std::optional<PopulationMember> Population::insert(PopulationMember m) {
  auto same = std::find_if(members_.begin(), members_.end(),
                           [&](const PopulationMember& x) { return x.config == m.config; });
  if (same != members_.end()) {
    same->summary = m.summary;
    sort();
    return std::nullopt;
  }
  members_.push_back(std::move(m));
  sort();
  if (members_.size() <= capacity_) return std::nullopt;
  PopulationMember worst = std::move(members_.back());
  members_.pop_back();
  return worst;
}

void Population::update(const std::string& id, const EvalSummary& summary) {
  for (auto& m : members_)
    if (m.id == id) m.summary = summary;
  sort();
}

// ---------------------------------------------------------------------------

void EvolutionConfig::validate() const {
  require(iterations >= 0, "iterations must be >= 0");
  require(groups >= 1, "G must be >= 1");
  require(m >= 1, "m must be >= 1");
  require(population >= 1, "k must be >= 1");
  require(archive >= 1, "K must be >= 1");
  tol.validate();
  require(std::isfinite(eval.horizon) && eval.horizon > 0.0, "horizon must be > 0");
  require(eval.floor > 0.0, "floor must be > 0");
  require(eval.seconds_per_unit > 0.0, "seconds_per_unit must be > 0");
  require(eval.jobs >= 1, "jobs must be >= 1");
  require(provider == "stub" || provider == "llm", "provider must be stub or llm");
}

json to_json(const EvolutionConfig& c) {
  return {{"iterations", c.iterations},
          {"G", c.groups},
          {"m", c.m},
          {"k", c.population},
          {"K", c.archive},
          {"epsilon", c.tol.epsilon},
          {"delta", c.tol.delta},
          {"horizon", c.eval.horizon},
          {"clock", to_string(c.eval.clock)},
          {"seconds_per_unit", c.eval.seconds_per_unit},
          {"floor", c.eval.floor},
          {"jobs", c.eval.jobs},
          {"master_seed", c.master_seed},
          {"group_seed", c.group_seed},
          {"provider", c.provider},
          {"llm", to_json(c.llm)}};
}

EvolutionConfig evolution_config_from_json(const json& j) {
  EvolutionConfig c;
  try {
    if (!j.is_object()) fail(ErrorKind::Data, "run config must be a JSON object");
    const json known = to_json(c);
    for (const auto& [key, _] : j.items())
      if (!known.contains(key)) fail(ErrorKind::Data, "unknown run config field '" + key + "'");
    c.iterations = j.value("iterations", c.iterations);
    c.groups = j.value("G", c.groups);
    c.m = j.value("m", c.m);
    c.population = j.value("k", c.population);
    c.archive = j.value("K", c.archive);
    c.tol.epsilon = j.value("epsilon", c.tol.epsilon);
    c.tol.delta = j.value("delta", c.tol.delta);
    c.eval.horizon = j.value("horizon", c.eval.horizon);
    c.eval.clock = clock_mode_from_string(j.value("clock", std::string(to_string(c.eval.clock))));
    c.eval.seconds_per_unit = j.value("seconds_per_unit", c.eval.seconds_per_unit);
    c.eval.floor = j.value("floor", c.eval.floor);
    c.eval.jobs = j.value("jobs", c.eval.jobs);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.group_seed = j.value("group_seed", c.group_seed);
    c.provider = j.value("provider", c.provider);
    if (j.contains("llm")) c.llm = llm_settings_from_json(j.at("llm"));
    c.validate();
  } catch (const json::exception& e) {
    fail(ErrorKind::Data, std::string("run config: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Data) throw;
    fail(ErrorKind::Data, std::string("run config: ") + e.what());
  }
  return c;
}

json to_json(const GroupStats& s) {
  return {{"ell", s.ell}, {"k", s.k}, {"t", s.t}, {"count", s.count}};
}

GroupStats group_stats_from_json(const json& j) {
  return {j.at("ell").get<double>(), j.at("k").get<double>(), j.at("t").get<double>(),
          j.at("count").get<int>()};
}

json to_json(const EvalSummary& s) {
  json groups = json::array();
  for (const auto& g : s.groups) groups.push_back(to_json(g));
  return {{"ell", s.ell}, {"k", s.k}, {"t", s.t}, {"groups", groups}};
}

EvalSummary eval_summary_from_json(const json& j) {
  EvalSummary s{j.at("ell").get<double>(), j.at("k").get<double>(), j.at("t").get<double>(), {}};
  for (const auto& g : j.at("groups")) s.groups.push_back(group_stats_from_json(g));
  return s;
}

// ---------------------------------------------------------------------------

namespace {

class EventLog {
 public:
  explicit EventLog(std::ostream* out) : out_(out) {}
  void write(json record) {
    if (!out_) return;
    record["seq"] = seq_++;
    *out_ << record.dump() << '\n';
  }

 private:
  std::ostream* out_;
  std::uint64_t seq_ = 0;
};

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

class Evolver {
 public:
  Evolver(const EvolutionConfig& cfg, const TrainingSet& set, MutationProvider& provider,
          std::ostream* log)
      : cfg_(cfg), set_(set), provider_(provider), log_(log) {
    res_.population = Population(static_cast<std::size_t>(cfg.population));
    res_.archives.assign(static_cast<std::size_t>(cfg.groups),
                         GroupArchive(static_cast<std::size_t>(cfg.archive)));
    for (Layer l : {Layer::MDL, Layer::MCL, Layer::SSL1, Layer::SSL2}) res_.layers[std::string(to_string(l))];
  }

  EvolutionResult run(const SolverConfig& seed) {
    const std::uint64_t cmd = derive_seed(cfg_.master_seed, "evolve");
    {
      const auto batch = sample_batch(set_, cfg_.m, derive_seed(cmd, "init"));
      const auto t0 = std::chrono::steady_clock::now();
      const auto rec = evaluate_batch(seed, set_, batch, cfg_.eval, cache_);
      if (!rec.valid) fail(ErrorKind::Data, "seed solver failed on the training set: " + rec.error);
      res_.seed_summary = rec.summary;
      res_.population.insert({seed, rec.summary, "seed", offer_seq_});
      offer(seed, rec.summary, "seed");
      log_.write({{"event", "init"}, {"id", "seed"}, {"config", to_json(seed)},
                  {"batch", batch.by_group}, {"summary", to_json(rec.summary)},
                  {"wall_eval_s", wall_since(t0)}});
    }
    for (int it = 1; it <= cfg_.iterations; ++it) iteration(it, derive_seed(cmd, static_cast<std::uint64_t>(it)));
    res_.iterations = cfg_.iterations;

    json archives = json::array();
    for (const auto& a : res_.archives) {
      json ids = json::array();
      for (const auto& e : a.entries()) ids.push_back(e.id);
      archives.push_back(ids);
    }
    json pop = json::array();
    for (const auto& m : res_.population.members()) pop.push_back(m.id);
    log_.write({{"event", "end"}, {"population", pop}, {"archives", archives}});
    return std::move(res_);
  }

 private:
  void offer(const SolverConfig& cfg, const EvalSummary& s, const std::string& id) {
    for (std::size_t g = 0; g < res_.archives.size(); ++g)
      res_.archives[g].offer(cfg, s.groups[g], id, offer_seq_);
    ++offer_seq_;
  }

  void iteration(int it, std::uint64_t it_seed) {
    const auto& members = res_.population.members();
    Rng pick(derive_seed(it_seed, "parent"));
    const PopulationMember parent = members[pick.index(members.size())];
    const auto batch = sample_batch(set_, cfg_.m, derive_seed(it_seed, "batch"));

    auto t0 = std::chrono::steady_clock::now();
    EvalRecord cur = evaluate_batch(parent.config, set_, batch, cfg_.eval, cache_);
    json ev{{"event", "parent"}, {"iteration", it}, {"id", parent.id},
            {"config", to_json(parent.config)}, {"batch", batch.by_group},
            {"wall_eval_s", wall_since(t0)}};
    if (!cur.valid) {
      ev["valid"] = false;
      ev["error"] = cur.error;
      log_.write(ev);
      return;
    }
    ev["summary"] = to_json(cur.summary);
    log_.write(ev);
    res_.population.update(parent.id, cur.summary);
    offer(parent.config, cur.summary, parent.id);

    SolverConfig current = parent.config;
    std::string cur_id = parent.id;
    bool changed = false;
    const std::uint64_t mutate_seed = derive_seed(it_seed, "mutate");
    for (Layer layer : {Layer::MDL, Layer::MCL, Layer::SSL1, Layer::SSL2}) {
      auto& counts = res_.layers[std::string(to_string(layer))];
      const std::string id = "i" + std::to_string(it) + "-" + std::string(to_string(layer));
      json p{{"event", "proposal"}, {"iteration", it}, {"layer", to_string(layer)}, {"id", id},
             {"parent", cur_id}, {"parent_summary", to_json(cur.summary)}};
      t0 = std::chrono::steady_clock::now();
      MutationResponse resp;
      try {
        resp = provider_.propose({layer, current, cur.feedback(), mutate_seed});
      } catch (const Error& e) {
        ++counts.provider_failures;
        p["event"] = "provider_failure";
        p["error"] = e.what();
        log_.write(p);
        continue;
      }
      ++counts.proposed;
      p["provenance"] = resp.provenance;
      p["config"] = to_json(resp.candidate);
      p["parent_config"] = to_json(current);
      // Rechecked here, independent of the provider's own guarantee.
      bool layer_ok = respects_layer(layer, current, resp.candidate);
      try {
        resp.candidate.validate();
      } catch (const Error&) {
        layer_ok = false;
      }
      p["layer_ok"] = layer_ok;
      if (!layer_ok) {
        ++counts.layer_violations;
        p["accepted"] = false;
        log_.write(p);
        continue;
      }
      if (resp.candidate == current) {
        p["unchanged"] = true;
        p["accepted"] = false;
        log_.write(p);
        continue;
      }
      const EvalRecord rec = evaluate_batch(resp.candidate, set_, batch, cfg_.eval, cache_);
      p["wall_eval_s"] = wall_since(t0);
      p["valid"] = rec.valid;
      if (!rec.valid) {
        ++counts.invalid;
        p["error"] = rec.error;
        p["accepted"] = false;
        log_.write(p);
        continue;
      }
      p["summary"] = to_json(rec.summary);
      offer(resp.candidate, rec.summary, id);
      const bool ok = accept(layer, cur.summary, rec.summary, cfg_.tol);
      p["accepted"] = ok;
      log_.write(p);
      if (ok) {
        ++counts.accepted;
        current = resp.candidate;
        cur = rec;
        cur_id = id;
        changed = true;
      }
    }
    if (!changed) return;
    const auto evicted = res_.population.insert({current, cur.summary, cur_id, offer_seq_});
    json pop = json::array();
    for (const auto& m : res_.population.members()) pop.push_back(m.id);
    log_.write({{"event", "population"}, {"iteration", it}, {"inserted", cur_id},
                {"evicted", evicted ? json(evicted->id) : json(nullptr)}, {"members", pop}});
  }

  const EvolutionConfig& cfg_;
  const TrainingSet& set_;
  MutationProvider& provider_;
  EventLog log_;
  Ell0Cache cache_;
  EvolutionResult res_;
  std::uint64_t offer_seq_ = 0;
};

}  // namespace

EvolutionResult run_evolution(const EvolutionConfig& cfg, const TrainingSet& set,
                              const SolverConfig& seed, MutationProvider& provider,
                              std::ostream* event_log) {
  cfg.validate();
  set.validate();
  require(set.groups == cfg.groups, "training set grouping does not match G");
  seed.validate();
  if (!backbone_supports(seed.backbone, set.task))
    fail(ErrorKind::InvalidArgument, "seed backbone does not support the training task");
  return Evolver(cfg, set, provider, event_log).run(seed);
}

}  // namespace dash
