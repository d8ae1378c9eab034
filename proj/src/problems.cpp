#include "dash/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dash/errors.hpp"
#include "dash/rng.hpp"
#include "dash/simd/kernels.hpp"
#include "dash/tsplib.hpp"

namespace dash {

std::string_view to_string(Task t) {
  switch (t) {
    case Task::TSP: return "tsp";
    case Task::CVRP: return "cvrp";
    case Task::BPP: return "bpp";
    case Task::MKP: return "mkp";
  }
  return "?";
}

Task task_from_string(std::string_view s) {
  if (s == "tsp" || s == "TSP") return Task::TSP;
  if (s == "cvrp" || s == "CVRP") return Task::CVRP;
  if (s == "bpp" || s == "BPP") return Task::BPP;
  if (s == "mkp" || s == "MKP") return Task::MKP;
  fail(ErrorKind::InvalidArgument, "unknown task '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------

void TspInstance::validate() const {
  require(coords.size() >= 3, "TSP instance needs n >= 3");
  for (const auto& p : coords)
    require(std::isfinite(p.x) && std::isfinite(p.y), "TSP coordinates must be finite");
  if (reference) require(*reference > 0.0, "TSP reference must be positive");
}

void CvrpInstance::validate() const {
  require(capacity > 0, "CVRP capacity must be positive");
  require(!customers.empty(), "CVRP instance has no customers");
  require(customers.size() == demands.size(), "CVRP demands/customers size mismatch");
  for (int q : demands) require(q >= 1 && q <= capacity, "CVRP demand outside [1, Q]");
  require(std::isfinite(depot.x) && std::isfinite(depot.y), "CVRP depot must be finite");
  for (const auto& p : customers)
    require(std::isfinite(p.x) && std::isfinite(p.y), "CVRP coordinates must be finite");
}

void BppInstance::validate() const {
  require(capacity > 0, "BPP capacity must be positive");
  require(!items.empty(), "BPP stream is empty");
  for (int w : items) require(w > 0 && w <= capacity, "BPP item size outside (0, C]");
}

void MkpInstance::validate() const {
  require(!profits.empty(), "MKP instance has no items");
  require(!capacities.empty(), "MKP instance has no constraints");
  require(weights.size() == capacities.size(), "MKP weights/capacities mismatch");
  for (int p : profits) require(p > 0, "MKP profits must be positive");
  for (std::size_t j = 0; j < weights.size(); ++j) {
    require(weights[j].size() == profits.size(), "MKP weight row has wrong length");
    long long sum = 0;
    for (int a : weights[j]) {
      require(a >= 0, "MKP weights must be non-negative");
      sum += a;
    }
    require(capacities[j] > 0, "MKP capacities must be positive");
    require(capacities[j] <= sum, "MKP capacity exceeds its column weight sum");
  }
}

Task task_of(const Instance& inst) { return static_cast<Task>(inst.index()); }

const std::string& name_of(const Instance& inst) {
  return std::visit([](const auto& x) -> const std::string& { return x.name; }, inst);
}

void validate(const Instance& inst) {
  std::visit([](const auto& x) { x.validate(); }, inst);
}

std::optional<double> reference_of(const Instance& inst) {
  if (const auto* b = std::get_if<BppInstance>(&inst)) {
    const long long total = std::accumulate(b->items.begin(), b->items.end(), 0LL);
    return static_cast<double>((total + b->capacity - 1) / b->capacity);
  }
  return std::visit(
      [](const auto& x) -> std::optional<double> {
        if constexpr (requires { x.reference; })
          return x.reference;
        else
          return std::nullopt;
      },
      inst);
}

// ---------------------------------------------------------------------------

double euclidean(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

double edge_length(Point a, Point b, DistanceRounding rounding) {
  const double d = euclidean(a, b);
  return rounding == DistanceRounding::TsplibNint ? std::floor(d + 0.5) : d;
}

DistanceMatrix::DistanceMatrix(std::span<const Point> pts, DistanceRounding rounding)
    : n_(pts.size()), d_(pts.size() * pts.size()) {
  std::vector<double> xs(n_), ys(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    xs[i] = pts[i].x;
    ys[i] = pts[i].y;
  }
  for (std::size_t i = 0; i < n_; ++i) {
    std::span<double> row(d_.data() + i * n_, n_);
    simd::distance_row(xs, ys, xs[i], ys[i], row);
    if (rounding == DistanceRounding::TsplibNint)
      for (double& v : row) v = std::floor(v + 0.5);
  }
}

std::vector<Point> cvrp_nodes(const CvrpInstance& inst) {
  std::vector<Point> nodes;
  nodes.reserve(inst.customers.size() + 1);
  nodes.push_back(inst.depot);
  nodes.insert(nodes.end(), inst.customers.begin(), inst.customers.end());
  return nodes;
}

double tour_length(std::span<const int> order, const DistanceMatrix& d) {
  double len = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i)
    len += d(order[i], order[(i + 1) % order.size()]);
  return len;
}

double tour_length(const TspInstance& inst, std::span<const int> order) {
  double len = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i)
    len += edge_length(inst.coords[order[i]], inst.coords[order[(i + 1) % order.size()]],
                       inst.rounding);
  return len;
}

namespace {

Verdict infeasible(std::string why) { return {false, 0.0, std::move(why)}; }

Verdict evaluate_tsp(const TspInstance& inst, const Tour& t) {
  const std::size_t n = inst.size();
  if (t.order.size() != n)
    fail(ErrorKind::Data, "tour has " + std::to_string(t.order.size()) + " nodes, instance has " +
                              std::to_string(n));
  std::vector<char> seen(n, 0);
  for (int v : t.order) {
    if (v < 0 || static_cast<std::size_t>(v) >= n) return infeasible("tour node out of range");
    if (seen[v]) return infeasible("duplicate tour node " + std::to_string(v));
    seen[v] = 1;
  }
  return {true, tour_length(inst, t.order), {}};
}

Verdict evaluate_cvrp(const CvrpInstance& inst, const RouteSet& rs) {
  const std::size_t n = inst.size();
  std::vector<char> seen(n, 0);
  double cost = 0.0;
  for (const auto& route : rs.routes) {
    if (route.empty()) continue;
    long long load = 0;
    Point prev = inst.depot;
    for (int c : route) {
      if (c < 0 || static_cast<std::size_t>(c) >= n)
        fail(ErrorKind::Data, "route references customer " + std::to_string(c) +
                                  " outside [0, " + std::to_string(n) + ")");
      if (seen[c]) return infeasible("customer " + std::to_string(c) + " served twice");
      seen[c] = 1;
      load += inst.demands[c];
      cost += euclidean(prev, inst.customers[c]);
      prev = inst.customers[c];
    }
    cost += euclidean(prev, inst.depot);
    if (load > inst.capacity)
      return infeasible("route load " + std::to_string(load) + " exceeds capacity " +
                        std::to_string(inst.capacity));
  }
  for (std::size_t c = 0; c < n; ++c)
    if (!seen[c]) return infeasible("customer " + std::to_string(c) + " not served");
  return {true, cost, {}};
}

Verdict evaluate_bpp(const BppInstance& inst, const BinAssignment& a) {
  if (a.bin_of_item.size() != inst.size())
    fail(ErrorKind::Data, "bin assignment length differs from item count");
  std::vector<long long> load;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const int b = a.bin_of_item[i];
    if (b < 0) return infeasible("item " + std::to_string(i) + " unassigned");
    if (static_cast<std::size_t>(b) >= load.size()) load.resize(b + 1, 0);
    load[b] += inst.items[i];
  }
  std::size_t used = 0;
  for (long long l : load) {
    if (l > inst.capacity) return infeasible("bin over capacity");
    if (l > 0) ++used;
  }
  return {true, static_cast<double>(used), {}};
}

Verdict evaluate_mkp(const MkpInstance& inst, const ItemSelection& s) {
  if (s.chosen.size() != inst.size())
    fail(ErrorKind::Data, "selection length differs from item count");
  long long profit = 0;
  for (std::size_t i = 0; i < inst.size(); ++i)
    if (s.chosen[i]) profit += inst.profits[i];
  for (std::size_t j = 0; j < inst.constraints(); ++j) {
    long long use = 0;
    for (std::size_t i = 0; i < inst.size(); ++i)
      if (s.chosen[i]) use += inst.weights[j][i];
    if (use > inst.capacities[j])
      return infeasible("constraint " + std::to_string(j) + " violated");
  }
  return {true, -static_cast<double>(profit), {}};
}

}  // namespace

Verdict evaluate(const Instance& inst, const Payload& sol) {
  if (inst.index() != sol.index()) fail(ErrorKind::InvalidArgument, "payload does not match task");
  switch (task_of(inst)) {
    case Task::TSP: return evaluate_tsp(std::get<TspInstance>(inst), std::get<Tour>(sol));
    case Task::CVRP: return evaluate_cvrp(std::get<CvrpInstance>(inst), std::get<RouteSet>(sol));
    case Task::BPP: return evaluate_bpp(std::get<BppInstance>(inst), std::get<BinAssignment>(sol));
    case Task::MKP: return evaluate_mkp(std::get<MkpInstance>(inst), std::get<ItemSelection>(sol));
  }
  fail(ErrorKind::InvalidArgument, "unknown task");
}

double relative_gap(double f, double f_star) {
  if (f_star == 0.0) fail(ErrorKind::InvalidArgument, "gap undefined for zero reference");
  return (f - f_star) / std::abs(f_star);
}

double gap_percent(double f, double f_star) { return relative_gap(f, f_star) * 100.0; }

// ---------------------------------------------------------------------------

std::string_view to_string(TspPattern p) {
  switch (p) {
    case TspPattern::Uniform: return "uniform";
    case TspPattern::Clustered: return "clustered";
    case TspPattern::JitteredGrid: return "grid";
    case TspPattern::Ring: return "ring";
    case TspPattern::Rectangle: return "rectangle";
  }
  return "?";
}

TspPattern tsp_pattern_from_string(std::string_view s) {
  for (auto p : {TspPattern::Uniform, TspPattern::Clustered, TspPattern::JitteredGrid,
                 TspPattern::Ring, TspPattern::Rectangle})
    if (to_string(p) == s) return p;
  fail(ErrorKind::InvalidArgument, "unknown TSP pattern '" + std::string(s) + "'");
}

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::vector<Point> sample_points(TspPattern pattern, const GenParams& p, Rng& rng) {
  const std::size_t n = p.n;
  std::vector<Point> pts;
  pts.reserve(n);
  switch (pattern) {
    case TspPattern::Uniform:
      for (std::size_t i = 0; i < n; ++i) pts.push_back({rng.uniform(), rng.uniform()});
      break;
    case TspPattern::Clustered: {
      std::vector<Point> centers;
      for (std::size_t c = 0; c < std::max<std::size_t>(1, p.clusters); ++c)
        centers.push_back({rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)});
      for (std::size_t i = 0; i < n; ++i) {
        const Point& c = centers[rng.index(centers.size())];
        pts.push_back({clamp01(rng.normal(c.x, p.cluster_sd)),
                       clamp01(rng.normal(c.y, p.cluster_sd))});
      }
      break;
    }
    case TspPattern::JitteredGrid: {
      const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
      std::vector<std::size_t> cells(side * side);
      std::iota(cells.begin(), cells.end(), 0);
      // Partial Fisher-Yates: the first n cells are a uniform random subset.
      for (std::size_t i = 0; i < n; ++i) std::swap(cells[i], cells[i + rng.index(cells.size() - i)]);
      for (std::size_t i = 0; i < n; ++i) {
        const double gx = (static_cast<double>(cells[i] % side) + 0.5) / static_cast<double>(side);
        const double gy = (static_cast<double>(cells[i] / side) + 0.5) / static_cast<double>(side);
        pts.push_back({clamp01(gx + rng.normal(0.0, p.grid_jitter)),
                       clamp01(gy + rng.normal(0.0, p.grid_jitter))});
      }
      break;
    }
    case TspPattern::Ring:
      for (std::size_t i = 0; i < n; ++i) {
        const double theta = rng.uniform(0.0, 2.0 * M_PI);
        const double r = p.ring_radius + rng.uniform(-p.ring_noise, p.ring_noise);
        pts.push_back({clamp01(0.5 + r * std::cos(theta)), clamp01(0.5 + r * std::sin(theta))});
      }
      break;
    case TspPattern::Rectangle: {
      const double h = 1.0 / p.rect_aspect;
      for (std::size_t i = 0; i < n; ++i)
        pts.push_back({rng.uniform(), 0.5 - h / 2.0 + h * rng.uniform()});
      break;
    }
  }
  return pts;
}

std::string make_name(Task task, std::size_t n, std::uint64_t seed) {
  std::ostringstream os;
  os << to_string(task) << n << "-" << std::hex << seed;
  return os.str();
}

}  // namespace

Instance generate(Task task, const GenParams& params, std::uint64_t seed) {
  Rng rng(seed);
  switch (task) {
    case Task::TSP: {
      require(params.n >= 3, "TSP generator needs n >= 3");
      const TspPattern pattern =
          params.pattern ? *params.pattern : static_cast<TspPattern>(rng.integer(0, 4));
      TspInstance inst;
      inst.name = make_name(task, params.n, seed);
      inst.coords = sample_points(pattern, params, rng);
      return inst;
    }
    case Task::CVRP: {
      require(params.n >= 3, "CVRP generator needs n >= 3");
      CvrpInstance inst;
      inst.name = make_name(task, params.n, seed);
      inst.depot = {rng.uniform(), rng.uniform()};
      for (std::size_t i = 0; i < params.n; ++i) {
        inst.customers.push_back({rng.uniform(), rng.uniform()});
        inst.demands.push_back(static_cast<int>(rng.integer(1, 9)));
      }
      inst.capacity = static_cast<int>((params.n + 1) / 2);  // ceil(0.5 n)
      inst.capacity = std::max(inst.capacity, 9);
      return inst;
    }
    case Task::BPP: {
      require(params.capacity > 0, "BPP generator needs C > 0");
      require(params.items > 0, "BPP generator needs at least one item");
      BppInstance inst;
      inst.name = make_name(task, params.items, seed);
      inst.capacity = params.capacity;
      inst.items.reserve(params.items);
      for (std::size_t i = 0; i < params.items; ++i) {
        const double w = std::ceil(rng.weibull(params.weibull_shape, params.weibull_scale));
        inst.items.push_back(static_cast<int>(std::clamp(w, 1.0, double(params.capacity))));
      }
      return inst;
    }
    case Task::MKP: {
      require(params.n >= 1 && params.constraints >= 1, "MKP generator needs n, d >= 1");
      MkpInstance inst;
      inst.name = make_name(task, params.n, seed);
      for (std::size_t i = 0; i < params.n; ++i)
        inst.profits.push_back(static_cast<int>(rng.integer(1, 100)));
      inst.weights.assign(params.constraints, std::vector<int>(params.n));
      for (auto& row : inst.weights)
        for (int& a : row) a = static_cast<int>(rng.integer(1, 100));
      for (const auto& row : inst.weights) {
        const long long sum = std::accumulate(row.begin(), row.end(), 0LL);
        inst.capacities.push_back(static_cast<int>(std::max(1LL, sum / 2)));
      }
      return inst;
    }
  }
  fail(ErrorKind::InvalidArgument, "unknown task");
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json points_json(std::span<const Point> pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  return a;
}

std::vector<Point> points_from(const json& a) {
  std::vector<Point> pts;
  for (const auto& p : a) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return pts;
}

void put_reference(json& j, const std::optional<double>& ref) {
  if (ref) j["reference"] = *ref;
}

std::optional<double> get_reference(const json& j) {
  if (j.contains("reference") && !j.at("reference").is_null())
    return j.at("reference").get<double>();
  return std::nullopt;
}

}  // namespace

nlohmann::json to_json(const Instance& inst) {
  json j;
  j["task"] = std::string(to_string(task_of(inst)));
  j["name"] = name_of(inst);
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, TspInstance>) {
          j["coords"] = points_json(x.coords);
          j["rounding"] = x.rounding == DistanceRounding::TsplibNint ? "euc_2d" : "exact";
          put_reference(j, x.reference);
        } else if constexpr (std::is_same_v<T, CvrpInstance>) {
          j["depot"] = {x.depot.x, x.depot.y};
          j["customers"] = points_json(x.customers);
          j["demands"] = x.demands;
          j["capacity"] = x.capacity;
          put_reference(j, x.reference);
        } else if constexpr (std::is_same_v<T, BppInstance>) {
          j["capacity"] = x.capacity;
          j["items"] = x.items;
        } else {
          j["profits"] = x.profits;
          j["weights"] = x.weights;
          j["capacities"] = x.capacities;
          put_reference(j, x.reference);
        }
      },
      inst);
  return j;
}

Instance instance_from_json(const nlohmann::json& j) {
  try {
    const Task task = task_from_string(j.at("task").get<std::string>());
    const std::string name = j.value("name", std::string{});
    Instance out;
    switch (task) {
      case Task::TSP: {
        TspInstance x;
        x.name = name;
        x.coords = points_from(j.at("coords"));
        x.rounding = j.value("rounding", std::string("exact")) == "euc_2d"
                         ? DistanceRounding::TsplibNint
                         : DistanceRounding::Exact;
        x.reference = get_reference(j);
        out = std::move(x);
        break;
      }
      case Task::CVRP: {
        CvrpInstance x;
        x.name = name;
        const auto& d = j.at("depot");
        x.depot = {d.at(0).get<double>(), d.at(1).get<double>()};
        x.customers = points_from(j.at("customers"));
        x.demands = j.at("demands").get<std::vector<int>>();
        x.capacity = j.at("capacity").get<int>();
        x.reference = get_reference(j);
        out = std::move(x);
        break;
      }
      case Task::BPP: {
        BppInstance x;
        x.name = name;
        x.capacity = j.at("capacity").get<int>();
        x.items = j.at("items").get<std::vector<int>>();
        out = std::move(x);
        break;
      }
      case Task::MKP: {
        MkpInstance x;
        x.name = name;
        x.profits = j.at("profits").get<std::vector<int>>();
        x.weights = j.at("weights").get<std::vector<std::vector<int>>>();
        x.capacities = j.at("capacities").get<std::vector<int>>();
        x.reference = get_reference(j);
        out = std::move(x);
        break;
      }
    }
    validate(out);
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, std::string("malformed instance JSON: ") + e.what());
  }
}

Instance load_instance(const std::filesystem::path& path) {
  if (path.extension() == ".tsp") return parse_tsplib_file(path);
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Data, "cannot open instance file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Data, path.string() + ": " + e.what());
  }
  return instance_from_json(j);
}

void save_instance(const Instance& inst, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Data, "cannot write instance file " + path.string());
  out << to_json(inst).dump() << '\n';
}

}  // namespace dash
