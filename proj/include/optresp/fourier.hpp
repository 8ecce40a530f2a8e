#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "optresp/dynamics.hpp"

namespace optresp {

/// Weights C_0..C_p of the H^p inner product
///   <X, Y> = sum_l C_l  int D^l X . D^l Y dx.
struct HpWeighting {
  int p = 0;
  std::vector<double> c;

  /// C_l = (2 pi)^{-2l}; with these weights the 2 pi factors of the
  /// trigonometric derivatives cancel.
  static HpWeighting inverse_two_pi(int p);
  static HpWeighting uniform(int p);
  void validate() const;
};

/// Integer frequency of the 1-d factor b_n: floor((n + 1) / 2).
inline int trig_frequency(int n) { return (n + 1) / 2; }

/// b_0 = 1, b_n = sqrt2 sin(f 2 pi x) for odd n, sqrt2 cos(f 2 pi x) for even n,
/// f = trig_frequency(n).
double trig_factor(int n, double x);
double trig_factor_derivative(int n, double x);

/// Writes b_0..b_{N-1} and their derivatives at x using angle-addition
/// recurrences (two transcendental calls per x).
void trig_factor_table(int n_max, double x, double* values, double* derivs);

/// Digit expansion of m: n_bits base-N digits (least significant last),
/// preceded by the remaining quotient.
std::vector<std::int64_t> int2vec(std::int64_t m, std::int64_t base, int n_bits);
/// Inverse of int2vec.
std::int64_t vec2int(const std::vector<std::int64_t>& digits, std::int64_t base);

/// Label (j, n) of a vector-valued basis element. j is 0-based internally and
/// printed 1-based. For the restricted family j is -1 (the field occupies
/// slots 1 and 2) and n has a single entry.
struct FourierIndex {
  int j = 0;
  std::vector<int> n;

  bool operator==(const FourierIndex&) const = default;
  std::string label() const;  // e.g. "B2_(0,3)" or "B_(4)"
};

/// Flat index m = j N^M + sum_i n_i N^(M-1-i).
FourierIndex index_from_flat(std::int64_t m, int base, int dim);
std::int64_t flat_from_index(const FourierIndex& idx, int base);

/// Squared H^p norm of B^j_n (independent of j):
///   sum_l C_l (sum_i (2 pi f(n_i))^2)^l
/// which equals the multi-index sum over k in {1..M}^l of the products.
double hp_norm_sq(const std::vector<int>& n, const HpWeighting& w);

/// Unnormalized B^j_n(x) = e_j prod_i b_{n_i}(x_i).
Vec basis_eval(const FourierIndex& idx, const Vec& x);
/// Gradient of the normalized element, out(j, i) = d/dx_i (B^j_n / |B^j_n|).
/// Only row j is nonzero.
Mat basis_grad(const FourierIndex& idx, const Vec& x, const HpWeighting& w);

/// The restricted one-parameter family on T^M:
///   B_n(x) = [b_n(x1), b_n(x1), 0, ..., 0],  |B_n| = |b_n|_{H^p(R)}.
/// Returns the normalized value and gradient.
std::pair<Vec, Mat> restricted_basis(int n, const Vec& x, const HpWeighting& w);

enum class BasisMode { Full, Restricted };

/// A separable field  (sum over target slots t of e_t) * prod_c b_{n_c}(x_c) / norm.
struct BasisElement {
  FourierIndex index;
  std::vector<int> targets;        // slots receiving the scalar factor
  std::vector<int> factor_coords;  // coordinates the factor depends on
  std::vector<int> factor_orders;  // n for each factor coordinate
  double norm_sq = 1.0;
};

/// Truncated basis: full tensor basis with n_i in [0, N) for all j, or the
/// restricted family with n in [0, N).
struct BasisSpec {
  BasisMode mode = BasisMode::Full;
  int dim = 2;
  int n_per_dim = 15;
  HpWeighting weighting = HpWeighting::inverse_two_pi(5);

  std::size_t size() const;
  BasisElement element(std::size_t m) const;
};

class SeparableField final : public VectorField {
 public:
  SeparableField(int dim, BasisElement element);
  int dim() const override { return dim_; }
  void value(const Vec& x, Vec& out) const override;
  void gradient(const Vec& x, Mat& out) const override;
  const BasisElement& element() const noexcept { return element_; }

 private:
  int dim_;
  BasisElement element_;
  double inv_norm_;
};

}  // namespace optresp
