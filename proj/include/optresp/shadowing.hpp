#pragma once

#include <string>
#include <utility>
#include <vector>

#include "optresp/frames.hpp"

namespace optresp {

/// Per-step covector field along an orbit, flat storage length * dim.
struct CovectorPath {
  int dim = 0;
  std::size_t length = 0;
  std::string tag;
  std::vector<double> omega;
  /// Sup-norm over the interior window passed to the solver.
  double sup_norm = 0.0;
  /// max_k |omega_k - df_k^T omega_{k+1} - nu_k|_inf over the interior window.
  double max_residual = 0.0;
  std::size_t max_residual_step = 0;

  ConstVecMap at(std::size_t k) const { return {omega.data() + k * dim, dim}; }
};

/// w = eps a + w_s with a = e^T w and e^T w_s = 0.
std::pair<Vec, Vec> oblique_split(const Vec& w, const Mat& e, const Mat& eps);

/// Steps [begin, end) on which residual and sup-norm diagnostics are taken.
struct StepRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Bounded solution of omega_k = df_k^T omega_{k+1} + nu_k along the orbit.
///
/// The annihilator-of-V^u part is swept backward from zero at the far end;
/// the V^{u*} part is carried in eps-coordinates a_k and swept forward from
/// zero via a_{k+1} = Theta_k^{-1} (a_k - e_k^T nu_k), Theta_k = e_k^T df_k^T eps_{k+1}.
/// Both sweeps contract, so the result is accurate away from the two ends.
///
/// `nu` is flat length * dim. Throws TangencyError on a singular Theta_k and
/// SolverFailureError if the interior residual exceeds 1e-6.
CovectorPath adjoint_shadowing_solve(const Orbit& orbit, const FrameBundle& frames, const std::vector<double>& nu,
                                     StepRange interior, std::string tag = {});

}  // namespace optresp
