#include "optresp/frames.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

namespace optresp {

namespace {

constexpr double kRankTolerance = 1e-13;
constexpr double kTangencyCondition = 1e12;
// Decorrelates the coframe seed from the frame seed.
constexpr std::uint64_t kCoframeSeedSalt = 0x9E3779B97F4A7C15ULL;

bool all_finite(const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

/// Thin QR with R's diagonal forced positive. Returns the smallest |R_ii|.
double thin_qr(const Mat& a, Mat& q, Mat* r = nullptr) {
  const auto m = a.rows();
  const auto n = a.cols();
  Eigen::HouseholderQR<Mat> qr(a);
  q = qr.householderQ() * Mat::Identity(m, n);
  Mat rr = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  double min_diag = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (rr(i, i) < 0.0) {
      q.col(i) *= -1.0;
      rr.row(i) *= -1.0;
    }
    min_diag = std::min(min_diag, rr(i, i));
  }
  if (r) *r = std::move(rr);
  return min_diag;
}

Mat random_orthonormal(int m, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Mat a(m, n);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = g(rng);
  Mat q;
  thin_qr(a, q);
  return q;
}

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ConfigError("orbit cache truncated");
  return v;
}

}  // namespace

Orbit Orbit::from_jacobians(const std::vector<Mat>& jacs, std::vector<double> phi) {
  Orbit o;
  if (jacs.empty()) return o;
  o.dim = static_cast<int>(jacs.front().rows());
  o.length = jacs.size();
  const std::size_t mm = static_cast<std::size_t>(o.dim) * o.dim;
  o.states.assign(o.length * o.dim, 0.0);
  o.jacobians.resize(o.length * mm);
  for (std::size_t k = 0; k < o.length; ++k) std::memcpy(o.jacobians.data() + k * mm, jacs[k].data(), mm * sizeof(double));
  if (phi.empty()) phi.assign(o.length, 0.0);
  o.phi = std::move(phi);
  return o;
}

Orbit Orbit::from_states(const MapModel& model, const std::vector<Vec>& states) {
  Orbit o;
  o.dim = model.dim();
  o.length = states.size();
  const std::size_t mm = static_cast<std::size_t>(o.dim) * o.dim;
  o.states.resize(o.length * o.dim);
  o.jacobians.resize(o.length * mm);
  o.phi.resize(o.length);
  Mat j(o.dim, o.dim);
  for (std::size_t k = 0; k < o.length; ++k) {
    std::memcpy(o.states.data() + k * o.dim, states[k].data(), o.dim * sizeof(double));
    model.jacobian(states[k], j);
    std::memcpy(o.jacobians.data() + k * mm, j.data(), mm * sizeof(double));
    o.phi[k] = model.observable(states[k]);
  }
  return o;
}

Orbit generate_orbit(const MapModel& model, std::size_t n_segments, std::size_t seg_len, std::size_t warmup,
                     std::uint64_t seed) {
  if (n_segments == 0 || seg_len == 0) throw ConfigError("orbit needs positive n_segments and seg_len");
  const int m = model.dim();
  const std::size_t mm = static_cast<std::size_t>(m) * m;
  Orbit o;
  o.dim = m;
  o.length = n_segments * seg_len;
  o.warmup = warmup;
  o.seed = seed;
  o.states.resize(o.length * m);
  o.jacobians.resize(o.length * mm);
  o.phi.resize(o.length);

  std::mt19937_64 rng(seed);
  Vec x = model.sample_initial(rng);
  Vec y(m);
  for (std::size_t k = 0; k < warmup; ++k) {
    model.raw_step(x, y);
    model.wrap(y);
    if (!all_finite(y.data(), m)) throw DivergedOrbitError(k + 1, "non-finite state during warmup");
    x.swap(y);
  }
  Mat jac(m, m);
  for (std::size_t k = 0; k < o.length; ++k) {
    std::memcpy(o.states.data() + k * m, x.data(), m * sizeof(double));
    model.jacobian(x, jac);
    std::memcpy(o.jacobians.data() + k * mm, jac.data(), mm * sizeof(double));
    o.phi[k] = model.observable(x);
    if (!all_finite(jac.data(), mm) || !std::isfinite(o.phi[k]))
      throw DivergedOrbitError(k, "non-finite Jacobian or observable");
    model.raw_step(x, y);
    model.wrap(y);
    if (!all_finite(y.data(), m)) throw DivergedOrbitError(k + 1, "non-finite state");
    x.swap(y);
  }
  return o;
}

void write_orbit_cache(std::ostream& os, const Orbit& orbit, int unstable_dim) {
  os.write("ORBT", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(orbit.dim));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(unstable_dim));
  put<std::uint64_t>(os, orbit.length);
  put<std::uint64_t>(os, orbit.seed);
  put<std::uint64_t>(os, orbit.warmup);
  const std::size_t m = orbit.dim, mm = m * m;
  for (std::size_t k = 0; k < orbit.length; ++k) {
    os.write(reinterpret_cast<const char*>(orbit.states.data() + k * m), m * sizeof(double));
    os.write(reinterpret_cast<const char*>(orbit.jacobians.data() + k * mm), mm * sizeof(double));
    put<double>(os, orbit.phi[k]);
  }
}

Orbit read_orbit_cache(std::istream& is, int* unstable_dim) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "ORBT", 4) != 0) throw ConfigError("not an orbit cache file");
  if (get<std::uint32_t>(is) != 1) throw ConfigError("unsupported orbit cache version");
  Orbit o;
  o.dim = static_cast<int>(get<std::uint32_t>(is));
  const auto u = get<std::uint32_t>(is);
  if (unstable_dim) *unstable_dim = static_cast<int>(u);
  o.length = get<std::uint64_t>(is);
  o.seed = get<std::uint64_t>(is);
  o.warmup = get<std::uint64_t>(is);
  const std::size_t m = o.dim, mm = m * m;
  o.states.resize(o.length * m);
  o.jacobians.resize(o.length * mm);
  o.phi.resize(o.length);
  for (std::size_t k = 0; k < o.length; ++k) {
    is.read(reinterpret_cast<char*>(o.states.data() + k * m), m * sizeof(double));
    is.read(reinterpret_cast<char*>(o.jacobians.data() + k * mm), mm * sizeof(double));
    o.phi[k] = get<double>(is);
  }
  return o;
}

FrameBundle unstable_frame(const Orbit& orbit, int unstable_dim, std::size_t frame_warmup, std::uint64_t seed) {
  if (unstable_dim <= 0 || unstable_dim > orbit.dim) throw ConfigError("unstable dimension must be in [1, M]");
  if (2 * frame_warmup >= orbit.length) throw ConfigError("frame_warmup leaves no retained steps");
  FrameBundle fb;
  fb.dim = orbit.dim;
  fb.unstable_dim = unstable_dim;
  fb.length = orbit.length;
  fb.frame_warmup = frame_warmup;
  const std::size_t block = static_cast<std::size_t>(orbit.dim) * unstable_dim;
  fb.e.resize(orbit.length * block);
  fb.eps.assign(orbit.length * block, 0.0);

  Mat q = random_orthonormal(orbit.dim, unstable_dim, seed);
  fb.frame(0) = q;
  Mat pushed;
  for (std::size_t k = 0; k + 1 < orbit.length; ++k) {
    pushed.noalias() = orbit.jacobian(k) * fb.frame(k);
    const double rmin = thin_qr(pushed, q);
    if (!(rmin >= kRankTolerance))
      throw DegenerateFrameError("unstable frame lost rank at step " + std::to_string(k + 1));
    fb.frame(k + 1) = q;
  }
  return fb;
}

void adjoint_frame(const Orbit& orbit, FrameBundle& fb, std::uint64_t seed) {
  if (fb.length != orbit.length || fb.dim != orbit.dim) throw ConfigError("frames were computed on a different orbit");
  const int m = orbit.dim, u = fb.unstable_dim;
  const std::size_t t = orbit.length;
  Mat w = random_orthonormal(m, u, seed ^ kCoframeSeedSalt);
  Mat pulled, q;
  for (std::size_t kk = t; kk-- > 0;) {
    if (kk + 1 < t) {
      pulled.noalias() = orbit.jacobian(kk).transpose() * w;
      const double rmin = thin_qr(pulled, q);
      if (!(rmin >= kRankTolerance))
        throw DegenerateFrameError("adjoint frame lost rank at step " + std::to_string(kk));
      w.swap(q);
    }
    // eps = w (e^T w)^{-1}  <=>  (e^T w)^T eps^T = w^T
    const Mat g = fb.frame(kk).transpose() * w;
    Eigen::PartialPivLU<Mat> lu(g.transpose());
    if (fb.retained(kk) && !(lu.rcond() * kTangencyCondition >= 1.0))
      throw TangencyError("stable/unstable angle collapsed at step " + std::to_string(kk));
    fb.coframe(kk) = lu.solve(w.transpose()).transpose();
  }
}

FrameBundle compute_frames(const Orbit& orbit, int unstable_dim, std::size_t frame_warmup, std::uint64_t seed) {
  FrameBundle fb = unstable_frame(orbit, unstable_dim, frame_warmup, seed);
  adjoint_frame(orbit, fb, seed);
  return fb;
}

double subspace_angle(const Mat& a, const Mat& b) {
  Mat qa, qb;
  thin_qr(a, qa);
  thin_qr(b, qb);
  const Mat resid = qb - qa * (qa.transpose() * qb);
  Eigen::JacobiSVD<Mat> svd(resid);
  const double s = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  return std::asin(std::min(1.0, s));
}

FrameDiagnostics frame_diagnostics(const Orbit& orbit, const FrameBundle& fb) {
  FrameDiagnostics d;
  const Mat id = Mat::Identity(fb.unstable_dim, fb.unstable_dim);
  for (std::size_t k = 0; k < fb.length; ++k) {
    if (!fb.retained(k)) continue;
    const Mat dual = fb.coframe(k).transpose() * fb.frame(k) - id;
    d.max_duality_residual = std::max(d.max_duality_residual, dual.cwiseAbs().maxCoeff());
    if (k + 1 < fb.length) {
      const Mat pushed = orbit.jacobian(k) * fb.frame(k);
      d.max_equivariance_angle = std::max(d.max_equivariance_angle, subspace_angle(fb.frame(k + 1), pushed));
    }
  }
  return d;
}

}  // namespace optresp
