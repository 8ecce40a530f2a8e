#include "optresp/shadowing.hpp"

#include <cmath>

namespace optresp {

namespace {
constexpr double kResidualFailure = 1e-6;
constexpr double kTangencyCondition = 1e12;
}  // namespace

std::pair<Vec, Vec> oblique_split(const Vec& w, const Mat& e, const Mat& eps) {
  Vec a = e.transpose() * w;
  Vec ws = w - eps * a;
  return {std::move(a), std::move(ws)};
}

CovectorPath adjoint_shadowing_solve(const Orbit& orbit, const FrameBundle& fb, const std::vector<double>& nu,
                                     StepRange interior, std::string tag) {
  const int m = orbit.dim, u = fb.unstable_dim;
  const std::size_t t = orbit.length;
  if (fb.length != t || nu.size() != t * static_cast<std::size_t>(m))
    throw ConfigError("shadowing solve: orbit, frames and source have inconsistent lengths");
  if (interior.end > t || interior.begin >= interior.end) throw ConfigError("shadowing solve: empty interior window");

  CovectorPath path;
  path.dim = m;
  path.length = t;
  path.tag = std::move(tag);
  path.omega.assign(t * m, 0.0);
  auto omega = [&](std::size_t k) { return VecMap(path.omega.data() + k * m, m); };
  auto source = [&](std::size_t k) { return ConstVecMap(nu.data() + k * m, m); };

  // Backward sweep: omega^s_k = P^s_k (df_k^T omega^s_{k+1} + nu_k), P^s = I - eps e^T.
  Vec ws = Vec::Zero(m), tmp(m);
  for (std::size_t kk = t; kk-- > 0;) {
    tmp.noalias() = orbit.jacobian(kk).transpose() * ws;
    tmp += source(kk);
    ws = tmp - fb.coframe(kk) * (fb.frame(kk).transpose() * tmp);
    omega(kk) = ws;
  }

  // Forward sweep on the V^{u*} coordinates.
  Vec a = Vec::Zero(u), rhs(u);
  Mat theta(u, u);
  Eigen::PartialPivLU<Mat> lu(u);
  for (std::size_t k = 0; k < t; ++k) {
    omega(k).noalias() += fb.coframe(k) * a;
    if (k + 1 == t) break;
    theta.noalias() = (orbit.jacobian(k) * fb.frame(k)).transpose() * fb.coframe(k + 1);
    lu.compute(theta);
    if (!(lu.rcond() * kTangencyCondition >= 1.0))
      throw TangencyError("singular adjoint transition matrix at step " + std::to_string(k));
    rhs = a - fb.frame(k).transpose() * source(k);
    a = lu.solve(rhs);
  }

  // Diagnostics on the interior window.
  const std::size_t stop = std::min(interior.end, t - 1);
  for (std::size_t k = interior.begin; k < interior.end; ++k) path.sup_norm = std::max(path.sup_norm, omega(k).norm());
  for (std::size_t k = interior.begin; k < stop; ++k) {
    tmp.noalias() = orbit.jacobian(k).transpose() * omega(k + 1);
    const double r = (omega(k) - tmp - source(k)).cwiseAbs().maxCoeff();
    if (!(r <= path.max_residual)) {
      path.max_residual = r;
      path.max_residual_step = k;
    }
  }
  if (!(path.max_residual <= kResidualFailure))
    throw SolverFailureError("shadowing residual " + std::to_string(path.max_residual) + " at step " +
                             std::to_string(path.max_residual_step));
  return path;
}

}  // namespace optresp
