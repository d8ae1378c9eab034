#include <cmath>
#include <limits>

#include "dash/simd/kernels.hpp"

namespace dash::simd {
namespace {

void distance_row_scalar(const double* xs, const double* ys, std::size_t n, double px,
                         double py, double* out) {
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = xs[j] - px;
    const double dy = ys[j] - py;
    out[j] = std::sqrt(dx * dx + dy * dy);
  }
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t nearest_row_scalar(const double* query, const double* rows, std::size_t k,
                               std::size_t dim, double* best_d2) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < k; ++r) {
    const double d = squared_distance_scalar(query, rows + r * dim, dim);
    if (d < best_d) {
      best_d = d;
      best = r;
    }
  }
  if (best_d2) *best_d2 = best_d;
  return best;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", distance_row_scalar, dot_scalar,
                                 squared_distance_scalar, nearest_row_scalar};
  return table;
}

}  // namespace dash::simd
