// Compiled with -mavx2 only; callers reach these through the dispatch table
// after a CPUID check.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "dash/simd/kernels.hpp"

namespace dash::simd::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void distance_row_avx2(const double* xs, const double* ys, std::size_t n, double px,
                       double py, double* out) {
  const __m256d vx = _mm256_set1_pd(px);
  const __m256d vy = _mm256_set1_pd(py);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + j), vx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + j), vy);
    const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
    _mm256_storeu_pd(out + j, _mm256_sqrt_pd(d2));
  }
  for (; j < n; ++j) {
    const double dx = xs[j] - px;
    const double dy = ys[j] - py;
    out[j] = std::sqrt(dx * dx + dy * dy);
  }
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1,
                         _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t nearest_row_avx2(const double* query, const double* rows, std::size_t k,
                             std::size_t dim, double* best_d2) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < k; ++r) {
    const double d = squared_distance_avx2(query, rows + r * dim, dim);
    if (d < best_d) {
      best_d = d;
      best = r;
    }
  }
  if (best_d2) *best_d2 = best_d;
  return best;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{"avx2", distance_row_avx2, dot_avx2, squared_distance_avx2,
                                 nearest_row_avx2};
  return table;
}

}  // namespace dash::simd::detail
