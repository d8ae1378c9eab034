#include "dash/profiles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "dash/errors.hpp"
#include "dash/rng.hpp"
#include "dash/simd/kernels.hpp"

namespace dash {

namespace {

constexpr std::array<std::string_view, 9> kGeometryNames{
    "log_n",         "pair_cv",  "log_q90_q10", "density", "nn_cv",
    "anisotropy",    "log_aspect", "radial_cv",  "tightness"};
constexpr std::array<std::string_view, 7> kBppNames{"log_items", "log_capacity", "mean_rel",
                                                    "std_rel",   "q10_rel",      "q50_rel",
                                                    "q90_rel"};
constexpr std::array<std::string_view, 9> kMkpNames{
    "log_n",       "log_d",      "profit_mean", "profit_std", "weight_mean",
    "weight_std",  "cap_ratio_mean", "cap_ratio_min", "cap_ratio_max"};

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(std::span<const double> v) {
  if (v.empty()) return {};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

// Ratio helper: zero denominators report 0 and mark the profile.
double safe_ratio(double num, double den, bool& degenerate) {
  if (!(den > 0.0) || !std::isfinite(num / den)) {
    degenerate = true;
    return 0.0;
  }
  return num / den;
}

double safe_log_ratio(double num, double den, bool& degenerate) {
  if (!(num > 0.0) || !(den > 0.0)) {
    degenerate = true;
    return 0.0;
  }
  return std::log(num / den);
}

double cv(std::span<const double> v, bool& degenerate) {
  const auto m = moments(v);
  return safe_ratio(m.sd, m.mean, degenerate);
}

std::vector<double> geometry_features(std::span<const Point> pts, bool& degenerate) {
  const std::size_t n = pts.size();
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = pts[i].x;
    ys[i] = pts[i].y;
  }

  // Nearest-neighbour distances need every row; pairs are kept exactly for
  // small n and sampled otherwise.
  const bool exact_pairs = n <= kExactPairLimit;
  std::vector<double> pairs;
  if (exact_pairs) pairs.reserve(n * (n - 1) / 2);
  std::vector<double> nn(n), row(n);
  for (std::size_t i = 0; i < n; ++i) {
    simd::distance_row(xs, ys, xs[i], ys[i], row);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) best = std::min(best, row[j]);
    nn[i] = best;
    if (exact_pairs)
      for (std::size_t j = i + 1; j < n; ++j) pairs.push_back(row[j]);
  }
  if (!exact_pairs) {
    Rng rng(derive_seed(0x70726f66696c65ULL, n));
    pairs.reserve(kSampledPairs);
    while (pairs.size() < kSampledPairs) {
      const std::size_t a = rng.index(n);
      const std::size_t b = rng.index(n);
      if (a != b) pairs.push_back(euclidean(pts[a], pts[b]));
    }
  }

  const auto pm = moments(pairs);
  const auto nm = moments(nn);

  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cx += xs[i];
    cy += ys[i];
  }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  std::vector<double> radial(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - cx, dy = ys[i] - cy;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
    radial[i] = std::hypot(dx, dy);
  }
  sxx /= static_cast<double>(n);
  syy /= static_cast<double>(n);
  sxy /= static_cast<double>(n);
  const double tr = 0.5 * (sxx + syy);
  const double disc = std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
  const double lmax = tr + disc;
  const double lmin = std::max(0.0, tr - disc);

  const auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
  const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
  const double w = *xmax - *xmin, h = *ymax - *ymin;

  return {
      std::log(static_cast<double>(n)),
      safe_ratio(pm.sd, pm.mean, degenerate),
      safe_log_ratio(quantile(pairs, 0.9), quantile(pairs, 0.1), degenerate),
      safe_log_ratio(pm.mean, nm.mean, degenerate),
      safe_ratio(nm.sd, nm.mean, degenerate),
      std::sqrt(safe_ratio(lmax, lmin, degenerate)),
      safe_log_ratio(std::max(w, h), std::min(w, h), degenerate),
      cv(radial, degenerate),
  };
}

std::vector<double> bpp_features(const BppInstance& inst) {
  const double c = inst.capacity;
  std::vector<double> rel(inst.items.size());
  for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = inst.items[i] / c;
  const auto m = moments(rel);
  return {std::log(static_cast<double>(rel.size())),
          std::log(c),
          m.mean,
          m.sd,
          quantile(rel, 0.1),
          quantile(rel, 0.5),
          quantile(rel, 0.9)};
}

std::vector<double> mkp_features(const MkpInstance& inst, bool& degenerate) {
  const std::size_t n = inst.size(), d = inst.constraints();
  std::vector<double> profits(inst.profits.begin(), inst.profits.end());
  std::vector<double> weights;
  weights.reserve(n * d);
  std::vector<double> ratios(d);
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    for (int w : inst.weights[j]) {
      weights.push_back(w);
      sum += w;
    }
    ratios[j] = safe_ratio(inst.capacities[j], sum, degenerate);
  }
  const auto pm = moments(profits);
  const auto wm = moments(weights);
  const auto rm = moments(ratios);
  return {std::log(static_cast<double>(n)),
          std::log(static_cast<double>(d)),
          pm.mean,
          pm.sd,
          wm.mean,
          wm.sd,
          rm.mean,
          *std::min_element(ratios.begin(), ratios.end()),
          *std::max_element(ratios.begin(), ratios.end())};
}

}  // namespace

std::size_t profile_length(Task task) { return feature_names(task).size(); }

std::span<const std::string_view> feature_names(Task task) {
  switch (task) {
    case Task::TSP: return {kGeometryNames.data(), 8};
    case Task::CVRP: return kGeometryNames;
    case Task::BPP: return kBppNames;
    case Task::MKP: return kMkpNames;
  }
  fail(ErrorKind::InvalidArgument, "unknown task");
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile of empty sample");
  require(q >= 0.0 && q <= 1.0, "quantile level outside [0, 1]");
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo),
                   values.end());
  const double a = values[lo];
  if (hi == lo) return a;
  const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1,
                                     values.end());
  return a + (pos - static_cast<double>(lo)) * (b - a);
}

InstanceProfile extract_profile(const Instance& inst) {
  validate(inst);
  InstanceProfile p;
  p.task = task_of(inst);
  switch (p.task) {
    case Task::TSP:
      p.features = geometry_features(std::get<TspInstance>(inst).coords, p.degenerate);
      break;
    case Task::CVRP: {
      const auto& c = std::get<CvrpInstance>(inst);
      p.features = geometry_features(c.customers, p.degenerate);
      const double demand = std::accumulate(c.demands.begin(), c.demands.end(), 0.0);
      p.features.push_back(demand / c.capacity);
      break;
    }
    case Task::BPP: p.features = bpp_features(std::get<BppInstance>(inst)); break;
    case Task::MKP: p.features = mkp_features(std::get<MkpInstance>(inst), p.degenerate); break;
  }
  return p;
}

// ---------------------------------------------------------------------------

std::vector<double> GroupModel::normalize(std::span<const double> raw) const {
  require(raw.size() == means.size(), "profile length does not match group model");
  std::vector<double> z(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) z[i] = (raw[i] - means[i]) / stds[i];
  return z;
}

void GroupModel::validate() const {
  require(!prototypes.empty(), "group model needs G >= 1");
  require(stds.size() == means.size(), "group model means/stds length mismatch");
  for (double s : stds) require(s > 0.0 && std::isfinite(s), "group model std must be > 0");
  for (const auto& p : prototypes) {
    require(p.size() == means.size(), "prototype length mismatch");
    for (double v : p) require(std::isfinite(v), "prototype entries must be finite");
  }
}

namespace {

void fit_normalisation(std::span<const InstanceProfile> profiles, GroupModel& m) {
  const std::size_t dim = profiles.front().features.size();
  m.means.assign(dim, 0.0);
  m.stds.assign(dim, 0.0);
  std::vector<double> col(profiles.size());
  for (std::size_t k = 0; k < dim; ++k) {
    for (std::size_t i = 0; i < profiles.size(); ++i) col[i] = profiles[i].features[k];
    const auto mo = moments(col);
    m.means[k] = mo.mean;
    // Constant columns keep std 1 so z-scores stay finite.
    m.stds[k] = mo.sd > 1e-12 * std::max(1.0, std::abs(mo.mean)) ? mo.sd : 1.0;
  }
}

// Row-major n x dim.
double assign_all(const std::vector<double>& pts, std::size_t dim,
                  const std::vector<double>& centers, std::size_t k, std::vector<int>& assign) {
  const std::size_t n = pts.size() / dim;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d2 = 0.0;
    assign[i] = static_cast<int>(simd::nearest_row({pts.data() + i * dim, dim},
                                                   {centers.data(), k * dim}, k, &d2));
    sse += d2;
  }
  return sse;
}

}  // namespace

KMeansFit fit_groups_detailed(std::span<const InstanceProfile> profiles, std::size_t groups,
                              std::uint64_t seed, KMeansOptions opts) {
  require(groups >= 1, "fit_groups: G must be >= 1");
  if (profiles.size() < groups)
    fail(ErrorKind::InvalidArgument, "fit_groups: " + std::to_string(profiles.size()) +
                                         " profiles for " + std::to_string(groups) + " groups");
  const std::size_t dim = profiles.front().features.size();
  require(dim >= 1, "fit_groups: empty feature vectors");
  for (const auto& p : profiles) {
    require(p.task == profiles.front().task, "fit_groups: mixed tasks");
    require(p.features.size() == dim, "fit_groups: ragged feature vectors");
    for (double v : p.features) require(std::isfinite(v), "fit_groups: non-finite feature");
  }

  KMeansFit fit;
  fit.model.task = profiles.front().task;
  fit_normalisation(profiles, fit.model);

  const std::size_t n = profiles.size(), k = groups;
  std::vector<double> pts(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = fit.model.normalize(profiles[i].features);
    std::copy(z.begin(), z.end(), pts.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  auto point = [&](std::size_t i) { return std::span<const double>(pts.data() + i * dim, dim); };

  // k-means++ seeding.
  Rng rng(seed);
  std::vector<double> centers(k * dim);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.index(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(pts.begin() + static_cast<std::ptrdiff_t>(pick * dim), dim,
                centers.begin() + static_cast<std::ptrdiff_t>(c * dim));
    if (c + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], simd::squared_distance(point(i), {centers.data() + c * dim, dim}));
      total += d2[i];
    }
    if (total <= 0.0) {
      // All remaining mass sits on chosen centres; take the next index.
      pick = (pick + 1) % n;
      continue;
    }
    double r = rng.uniform() * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      r -= d2[i];
      if (r < 0.0 && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }

  // Lloyd iterations.
  std::vector<int> assign(n, 0);
  std::vector<double> next(k * dim);
  std::vector<std::size_t> count(k);
  for (int it = 0; it < opts.max_iterations; ++it) {
    fit.sse_history.push_back(assign_all(pts, dim, centers, k, assign));
    fit.iterations = it + 1;

    std::fill(next.begin(), next.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto g = static_cast<std::size_t>(assign[i]);
      ++count[g];
      for (std::size_t d = 0; d < dim; ++d) next[g * dim + d] += pts[i * dim + d];
    }
    std::vector<std::uint8_t> taken(n, 0);
    for (std::size_t g = 0; g < k; ++g) {
      if (count[g] > 0) {
        for (std::size_t d = 0; d < dim; ++d) next[g * dim + d] /= static_cast<double>(count[g]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centre.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        const auto a = static_cast<std::size_t>(assign[i]);
        const double dd = simd::squared_distance(point(i), {centers.data() + a * dim, dim});
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      taken[far] = 1;
      std::copy_n(pts.begin() + static_cast<std::ptrdiff_t>(far * dim), dim,
                  next.begin() + static_cast<std::ptrdiff_t>(g * dim));
    }

    double moved = 0.0;
    for (std::size_t g = 0; g < k; ++g)
      moved = std::max(moved, std::sqrt(simd::squared_distance({centers.data() + g * dim, dim},
                                                               {next.data() + g * dim, dim})));
    centers.swap(next);
    if (moved <= opts.tolerance) break;
  }
  fit.sse_history.push_back(assign_all(pts, dim, centers, k, assign));
  fit.assignment = assign;

  fit.model.prototypes.resize(k);
  for (std::size_t g = 0; g < k; ++g)
    fit.model.prototypes[g].assign(centers.begin() + static_cast<std::ptrdiff_t>(g * dim),
                                   centers.begin() + static_cast<std::ptrdiff_t>((g + 1) * dim));
  return fit;
}

GroupModel fit_groups(std::span<const InstanceProfile> profiles, std::size_t groups,
                      std::uint64_t seed) {
  return fit_groups_detailed(profiles, groups, seed).model;
}

std::size_t nearest_group(const InstanceProfile& profile, const GroupModel& model) {
  require(profile.task == model.task, "nearest_group: profile task does not match model");
  const auto z = model.normalize(profile.features);
  const std::size_t dim = model.dim();
  std::vector<double> rows;
  rows.reserve(model.groups() * dim);
  for (const auto& p : model.prototypes) rows.insert(rows.end(), p.begin(), p.end());
  return simd::nearest_row(z, rows, model.groups());
}

nlohmann::json to_json(const GroupModel& model) {
  return {{"task", std::string(to_string(model.task))},
          {"G", model.groups()},
          {"means", model.means},
          {"stds", model.stds},
          {"prototypes", model.prototypes}};
}

GroupModel group_model_from_json(const nlohmann::json& j) {
  try {
    GroupModel m;
    m.task = task_from_string(j.at("task").get<std::string>());
    m.means = j.at("means").get<std::vector<double>>();
    m.stds = j.at("stds").get<std::vector<double>>();
    m.prototypes = j.at("prototypes").get<std::vector<std::vector<double>>>();
    if (j.at("G").get<std::size_t>() != m.prototypes.size())
      fail(ErrorKind::Data, "group model: G does not match prototype count");
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, std::string("group model: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Data) throw;
    fail(ErrorKind::Data, e.what());
  }
}

}  // namespace dash
