#include <atomic>
#include <cstdlib>
#include <string>

#include "optresp/simd/kernels.hpp"

namespace optresp::simd {

#if defined(OPTRESP_HAVE_AVX2_TU)
const KernelTable& avx2_kernel_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(OPTRESP_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* initial_selection() {
  if (const char* env = std::getenv("OPTRESP_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return &scalar_kernels();
    if (v == "avx2" && avx2_kernels()) return avx2_kernels();
  }
  if (const auto* k = avx2_kernels()) return k;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_selection()};
  return table;
}

}  // namespace

const KernelTable& active_kernels() { return *current().load(); }

bool select_kernels(std::string_view name) {
  if (name == "scalar") {
    current().store(&scalar_kernels());
    return true;
  }
  if (name == "avx2" || name == "auto") {
    const KernelTable* k = avx2_kernels();
    if (!k) {
      if (name == "auto") current().store(&scalar_kernels());
      return name == "auto";
    }
    current().store(k);
    return true;
  }
  return false;
}

}  // namespace optresp::simd
