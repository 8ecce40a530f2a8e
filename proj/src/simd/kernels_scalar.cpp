#include <array>
#include <stdexcept>

#include "optresp/simd/kernels.hpp"

namespace optresp::simd {

namespace {

void contract_scalar(const SeparableContraction& in, double* r1, double* r2, double* r3) {
  const std::size_t nf = in.values.size();
  if (nf > kMaxFactors || in.derivs.size() != nf || in.w3.size() != nf)
    throw std::invalid_argument("separable contraction: factor arrays disagree");
  if (in.seg_len == 0 || in.n_steps % in.seg_len != 0)
    throw std::invalid_argument("separable contraction: n_steps not a multiple of seg_len");

  std::array<double, kMaxFactors + 1> prefix{};
  const std::size_t n_seg = in.n_steps / in.seg_len;
  for (std::size_t b = 0; b < n_seg; ++b) {
    double s1 = 0.0, s2 = 0.0, s3 = 0.0;
    const std::size_t lo = b * in.seg_len, hi = lo + in.seg_len;
    for (std::size_t s = lo; s < hi; ++s) {
      prefix[0] = 1.0;
      for (std::size_t i = 0; i < nf; ++i) prefix[i + 1] = prefix[i] * in.values[i][s];
      const double p = prefix[nf];
      double suffix = 1.0, grad = 0.0;
      for (std::size_t l = nf; l-- > 0;) {
        grad += in.w3[l][s] * in.derivs[l][s] * prefix[l] * suffix;
        suffix *= in.values[l][s];
      }
      s1 += in.w1[s] * p;
      s2 += in.w2[s] * p;
      s3 += grad;
    }
    r1[b] = s1;
    r2[b] = s2;
    r3[b] = s3;
  }
}

void segment_sums_scalar(const double* x, std::size_t n, std::size_t seg_len, double* out) {
  if (seg_len == 0 || n % seg_len != 0) throw std::invalid_argument("segment sums: n not a multiple of seg_len");
  for (std::size_t b = 0; b < n / seg_len; ++b) {
    double s = 0.0;
    for (std::size_t k = b * seg_len; k < (b + 1) * seg_len; ++k) s += x[k];
    out[b] = s;
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", &contract_scalar, &segment_sums_scalar};
  return table;
}

}  // namespace optresp::simd
