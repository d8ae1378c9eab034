#include <cstdlib>
#include <string_view>

#include "dash/simd/kernels.hpp"

namespace dash::simd {

#if DASH_HAVE_AVX2
namespace detail {
const KernelTable& avx2_table();
}
#endif

const KernelTable* avx2_kernels() {
#if DASH_HAVE_AVX2
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable& select() {
  const char* env = std::getenv("DASH_SIMD");
  const std::string_view forced = env ? env : "";
  if (forced == "scalar") return scalar_kernels();
  if (const KernelTable* t = avx2_kernels()) return *t;
  return scalar_kernels();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace dash::simd
