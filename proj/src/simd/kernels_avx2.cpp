// Compiled with -mavx2 -mfma; only reached after the dispatcher has confirmed
// CPU support.
#include <immintrin.h>

#include <array>
#include <stdexcept>

#include "optresp/simd/kernels.hpp"

namespace optresp::simd {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void contract_avx2(const SeparableContraction& in, double* r1, double* r2, double* r3) {
  const std::size_t nf = in.values.size();
  if (nf > kMaxFactors || in.derivs.size() != nf || in.w3.size() != nf)
    throw std::invalid_argument("separable contraction: factor arrays disagree");
  if (in.seg_len == 0 || in.n_steps % in.seg_len != 0)
    throw std::invalid_argument("separable contraction: n_steps not a multiple of seg_len");

  std::array<__m256d, kMaxFactors + 1> prefix;
  std::array<double, kMaxFactors + 1> prefix1;
  const std::size_t n_seg = in.n_steps / in.seg_len;
  const __m256d one = _mm256_set1_pd(1.0);

  for (std::size_t b = 0; b < n_seg; ++b) {
    const std::size_t lo = b * in.seg_len, hi = lo + in.seg_len;
    __m256d a1 = _mm256_setzero_pd(), a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
    std::size_t s = lo;
    for (; s + 4 <= hi; s += 4) {
      prefix[0] = one;
      for (std::size_t i = 0; i < nf; ++i) prefix[i + 1] = _mm256_mul_pd(prefix[i], _mm256_loadu_pd(in.values[i] + s));
      const __m256d p = prefix[nf];
      __m256d suffix = one;
      for (std::size_t l = nf; l-- > 0;) {
        const __m256d wd = _mm256_mul_pd(_mm256_loadu_pd(in.w3[l] + s), _mm256_loadu_pd(in.derivs[l] + s));
        a3 = _mm256_fmadd_pd(wd, _mm256_mul_pd(prefix[l], suffix), a3);
        suffix = _mm256_mul_pd(suffix, _mm256_loadu_pd(in.values[l] + s));
      }
      a1 = _mm256_fmadd_pd(_mm256_loadu_pd(in.w1 + s), p, a1);
      a2 = _mm256_fmadd_pd(_mm256_loadu_pd(in.w2 + s), p, a2);
    }
    double s1 = hsum(a1), s2 = hsum(a2), s3 = hsum(a3);
    for (; s < hi; ++s) {
      prefix1[0] = 1.0;
      for (std::size_t i = 0; i < nf; ++i) prefix1[i + 1] = prefix1[i] * in.values[i][s];
      double suffix = 1.0;
      for (std::size_t l = nf; l-- > 0;) {
        s3 += in.w3[l][s] * in.derivs[l][s] * prefix1[l] * suffix;
        suffix *= in.values[l][s];
      }
      s1 += in.w1[s] * prefix1[nf];
      s2 += in.w2[s] * prefix1[nf];
    }
    r1[b] = s1;
    r2[b] = s2;
    r3[b] = s3;
  }
}

void segment_sums_avx2(const double* x, std::size_t n, std::size_t seg_len, double* out) {
  if (seg_len == 0 || n % seg_len != 0) throw std::invalid_argument("segment sums: n not a multiple of seg_len");
  for (std::size_t b = 0; b < n / seg_len; ++b) {
    const std::size_t lo = b * seg_len, hi = lo + seg_len;
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = lo;
    for (; k + 4 <= hi; k += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + k));
    double s = hsum(acc);
    for (; k < hi; ++k) s += x[k];
    out[b] = s;
  }
}

}  // namespace

const KernelTable& avx2_kernel_table() {
  static const KernelTable table{"avx2", &contract_avx2, &segment_sums_avx2};
  return table;
}

}  // namespace optresp::simd
