#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "optresp/dynamics.hpp"

namespace testutil {

using optresp::Mat;
using optresp::Vec;

/// A x mod 1 with constant integer matrix A; no curvature.
inline std::unique_ptr<optresp::MapModel> linear_torus_map(const Mat& a, int unstable_dim) {
  optresp::MapCallbacks cb;
  cb.name = "linear";
  cb.dim = static_cast<int>(a.rows());
  cb.unstable_dim = unstable_dim;
  cb.raw_step = [a](const Vec& x, Vec& out) { out = a * x; };
  cb.wrap = [](Vec& x) {
    for (auto& v : x) v -= std::floor(v);
  };
  cb.jacobian = [a](const Vec&, Mat& out) { out = a; };
  cb.second_derivative = [](const Vec& x, const Vec&, const Vec&) { return Vec::Zero(x.size()).eval(); };
  cb.observable = [](const Vec& x) { return std::sin(2 * std::numbers::pi * x[0]) + 0.3 * std::cos(2 * std::numbers::pi * x[1]); };
  cb.observable_gradient = [](const Vec& x) {
    Vec g = Vec::Zero(x.size());
    g[0] = 2 * std::numbers::pi * std::cos(2 * std::numbers::pi * x[0]);
    g[1] = -0.3 * 2 * std::numbers::pi * std::sin(2 * std::numbers::pi * x[1]);
    return g;
  };
  return std::make_unique<optresp::CallbackModel>(cb);
}

inline Mat cat_matrix() {
  Mat a(2, 2);
  a << 2, 1, 1, 1;
  return a;
}

/// Random diagonalizable matrix with real eigenvalues bounded away from the
/// unit circle; returns the number of expanding directions in *u.
inline Mat random_hyperbolic(std::mt19937_64& rng, int m, int* u, Mat* unstable_basis = nullptr) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(1, m - 1);
  *u = pick(rng);
  Mat v(m, m);
  do {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) v(i, j) = d(rng) + (i == j ? 2.0 : 0.0);
  } while (v.jacobiSvd().singularValues().minCoeff() < 0.3);
  Vec lam(m);
  std::uniform_real_distribution<double> big(1.5, 3.0), small(0.1, 0.6);
  for (int i = 0; i < m; ++i) {
    const double s = d(rng) < 0 ? -1.0 : 1.0;
    lam[i] = s * (i < *u ? big(rng) : small(rng));
  }
  if (unstable_basis) *unstable_basis = v.leftCols(*u);
  return v * lam.asDiagonal() * v.inverse();
}

inline Vec random_vec(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Vec v(m);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace testutil
