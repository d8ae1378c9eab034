#pragma once

// Data-parallel inner loops shared by the distance-matrix builder, the
// profile extractor, k-means, and the trajectory integrals. Each kernel has
// a scalar reference implementation and (on x86-64) an AVX2 variant; the
// variant is chosen once at startup from CPUID and can be forced with the
// environment variable DASH_SIMD=scalar|avx2.
//
// distance_row is bit-identical across variants (no FMA contraction, IEEE
// sqrt). dot/squared_distance differ only by summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace dash::simd {

struct KernelTable {
  std::string_view name;
  /// out[j] = sqrt((xs[j]-px)^2 + (ys[j]-py)^2)
  void (*distance_row)(const double* xs, const double* ys, std::size_t n, double px,
                       double py, double* out);
  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// sum_i (a[i] - b[i])^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  /// Index of the row of `rows` (k x dim, row-major) closest to `query` in
  /// squared Euclidean distance; ties go to the lowest index.
  std::size_t (*nearest_row)(const double* query, const double* rows, std::size_t k,
                             std::size_t dim, double* best_d2);
};

const KernelTable& scalar_kernels();

/// AVX2 table, or nullptr when not compiled in or not supported by the CPU.
const KernelTable* avx2_kernels();

/// Table selected for this process.
const KernelTable& active();

inline void distance_row(std::span<const double> xs, std::span<const double> ys, double px,
                         double py, std::span<double> out) {
  active().distance_row(xs.data(), ys.data(), xs.size(), px, py, out.data());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline std::size_t nearest_row(std::span<const double> query, std::span<const double> rows,
                               std::size_t k, double* best_d2 = nullptr) {
  return active().nearest_row(query.data(), rows.data(), k, query.size(), best_d2);
}

}  // namespace dash::simd
