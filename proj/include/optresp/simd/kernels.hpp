#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace optresp::simd {

/// Upper bound on the number of trigonometric factors in one separable field.
inline constexpr std::size_t kMaxFactors = 32;

/// Inputs of the separable-field contraction. For every step s the field value
/// is P_s = prod_i values[i][s] and its partials are
/// dP_{l,s} = derivs[l][s] * prod_{i != l} values[i][s]. Per step:
///   t1 = w1[s] P_s,   t2 = w2[s] P_s,   t3 = sum_l w3[l][s] dP_{l,s}
/// and the kernel returns the sums of t1, t2, t3 over each consecutive block of
/// seg_len steps. n_steps must be a multiple of seg_len.
struct SeparableContraction {
  std::span<const double* const> values;
  std::span<const double* const> derivs;
  const double* w1 = nullptr;
  const double* w2 = nullptr;
  std::span<const double* const> w3;
  std::size_t n_steps = 0;
  std::size_t seg_len = 1;
};

using ContractFn = void (*)(const SeparableContraction& in, double* r1, double* r2, double* r3);
/// out[b] = sum of x over block b of seg_len consecutive entries.
using SegmentSumFn = void (*)(const double* x, std::size_t n, std::size_t seg_len, double* out);

struct KernelTable {
  std::string_view name;
  ContractFn contract;
  SegmentSumFn segment_sums;
};

const KernelTable& scalar_kernels();
/// nullptr when the binary was built without the AVX2 translation unit or the
/// CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

/// Kernel set used by the engine. Chosen once: the OPTRESP_SIMD environment
/// variable ("scalar", "avx2", "auto") if set, otherwise the best available.
const KernelTable& active_kernels();
/// Overrides the active set; returns false if `name` is unavailable.
bool select_kernels(std::string_view name);

}  // namespace optresp::simd
