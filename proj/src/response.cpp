#include "optresp/response.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "optresp/parallel.hpp"
#include "optresp/simd/kernels.hpp"

namespace optresp {

namespace {
constexpr double kSingularJacobian = 1e-14;
}

void EngineParams::validate() const {
  if (seg_len == 0) throw ConfigError("engine.seg_len must be positive");
  if (n_segments == 0) throw ConfigError("engine.n_segments must be positive");
  if (unstable_sign != 1 && unstable_sign != -1) throw ConfigError("flags.unstable_sign must be +1 or -1");
  const std::size_t t = seg_len * n_segments;
  if (2 * averaging_buffer(*this) + 2 * seg_len > t)
    throw ConfigError("engine: orbit of " + std::to_string(t) + " steps is too short for W=" + std::to_string(W) +
                      " and frame_warmup=" + std::to_string(frame_warmup));
}

std::size_t averaging_buffer(const EngineParams& p) {
  const std::size_t raw = std::max(p.frame_warmup, 2 * p.W + 10) + p.W;
  return (raw + p.seg_len - 1) / p.seg_len * p.seg_len;
}

std::vector<double> phi_window(const Orbit& orbit, std::size_t W, double mu_phi) {
  const std::size_t t = orbit.length;
  if (2 * W + 1 > t) throw ConfigError("phi_W: window 2W+1 exceeds orbit length");
  std::vector<double> out(t, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = W; k + W < t; ++k) {
    double s = 0.0;
    for (std::size_t i = k - W; i <= k + W; ++i) s += orbit.phi[i] - mu_phi;
    out[k] = s;
  }
  return out;
}

double equivariant_div_X(const Mat& e, const Mat& eps, const Mat& grad_x) {
  return (eps.transpose() * grad_x * e).trace();
}

std::vector<double> equivariant_div_fstar(const Orbit& orbit, const FrameBundle& fb, const MapModel& model) {
  if (!model.has_second_derivative())
    throw CapabilityError("model '" + model.name() + "' provides no second derivative");
  const int m = orbit.dim, u = fb.unstable_dim;
  const std::size_t t = orbit.length;
  std::vector<double> out(t * m, 0.0);
  Mat pushed(m, u), scaled(u, m);
  Vec x(m), w(m), a(m);
  for (std::size_t k = 0; k + 1 < t; ++k) {
    pushed.noalias() = orbit.jacobian(k) * fb.frame(k);
    const Mat mk = fb.coframe(k + 1).transpose() * pushed;
    scaled = mk.partialPivLu().solve(fb.coframe(k + 1).transpose());
    x = orbit.state(k);
    VecMap c(out.data() + k * m, m);
    for (int i = 0; i < u; ++i) {
      w = scaled.row(i).transpose();
      a = fb.frame(k).col(i);
      c += model.second_derivative_covector(x, w, a);
    }
  }
  return out;
}

PerturbationOnOrbit additive_to_composition(const Orbit& orbit, const VectorField& field, std::string label) {
  const int m = orbit.dim;
  const std::size_t mm = static_cast<std::size_t>(m) * m;
  PerturbationOnOrbit p;
  p.dim = m;
  p.length = orbit.length;
  p.first_valid = 1;
  p.label = std::move(label);
  p.x.assign(orbit.length * m, 0.0);
  p.grad.assign(orbit.length * mm, 0.0);
  Vec x(m), v(m);
  Mat g(m, m);
  for (std::size_t k = 0; k + 1 < orbit.length; ++k) {
    x = orbit.state(k);
    field.value(x, v);
    field.gradient(x, g);
    VecMap(p.x.data() + (k + 1) * m, m) = v;
    // G df = gradX'  <=>  df^T G^T = gradX'^T
    Eigen::PartialPivLU<Mat> lu(orbit.jacobian(k).transpose());
    if (!(lu.rcond() >= kSingularJacobian))
      throw NumericalError("singular Jacobian at step " + std::to_string(k) + " in additive conversion");
    MatMap(p.grad.data() + (k + 1) * mm, m, m) = lu.solve(g.transpose()).transpose();
  }
  return p;
}

PerturbationOnOrbit composition_on_orbit(const Orbit& orbit, const VectorField& field, std::string label) {
  const int m = orbit.dim;
  const std::size_t mm = static_cast<std::size_t>(m) * m;
  PerturbationOnOrbit p;
  p.dim = m;
  p.length = orbit.length;
  p.label = std::move(label);
  p.x.resize(orbit.length * m);
  p.grad.resize(orbit.length * mm);
  Vec x(m), v(m);
  Mat g(m, m);
  for (std::size_t k = 0; k < orbit.length; ++k) {
    x = orbit.state(k);
    field.value(x, v);
    field.gradient(x, g);
    VecMap(p.x.data() + k * m, m) = v;
    MatMap(p.grad.data() + k * mm, m, m) = g;
  }
  return p;
}

BatchStats batch_stats(const std::vector<double>& means) {
  BatchStats s;
  const std::size_t n = means.size();
  if (n == 0) return s;
  double sum = 0.0;
  for (double v : means) sum += v;
  s.mean = sum / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double v : means) ss += (v - s.mean) * (v - s.mean);
    s.std_error = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  return s;
}

// ---------------------------------------------------------------------------

ResponseEngine ResponseEngine::build(const MapModel& model, const EngineParams& params) {
  params.validate();
  return from_orbit(model, generate_orbit(model, params.n_segments, params.seg_len, params.warmup, params.seed), params);
}

ResponseEngine ResponseEngine::from_orbit(const MapModel& model, Orbit orbit, const EngineParams& params) {
  if (params.seg_len == 0) throw ConfigError("engine.seg_len must be positive");
  if (params.unstable_sign != 1 && params.unstable_sign != -1)
    throw ConfigError("flags.unstable_sign must be +1 or -1");
  ResponseEngine eng;
  eng.model_ = &model;
  eng.params_ = params;
  eng.orbit_ = std::move(orbit);
  const std::size_t t = eng.orbit_.length;
  const std::size_t buf = averaging_buffer(params);
  if (2 * buf + params.seg_len > t)
    throw ConfigError("orbit of " + std::to_string(t) + " steps is too short for the averaging buffer of " +
                      std::to_string(buf));
  const std::size_t n_seg = (t - 2 * buf) / params.seg_len;
  eng.window_ = {buf, buf + n_seg * params.seg_len};

  eng.frames_ = compute_frames(eng.orbit_, model.unstable_dim(), params.frame_warmup, params.seed);

  double sum = 0.0;
  for (std::size_t k = eng.window_.begin; k < eng.window_.end; ++k) sum += eng.orbit_.phi[k];
  eng.mu_phi_ = sum / static_cast<double>(eng.window_.end - eng.window_.begin);
  eng.phi_w_ = phi_window(eng.orbit_, params.W, eng.mu_phi_);

  const int m = eng.orbit_.dim;
  std::vector<double> dphi(t * m);
  Vec x(m);
  for (std::size_t k = 0; k < t; ++k) {
    x = eng.orbit_.state(k);
    VecMap(dphi.data() + k * m, m) = model.observable_gradient(x);
  }
  eng.omega_phi_ = adjoint_shadowing_solve(eng.orbit_, eng.frames_, dphi, eng.window_, "dPhi");
  eng.omega_div_ = adjoint_shadowing_solve(eng.orbit_, eng.frames_, equivariant_div_fstar(eng.orbit_, eng.frames_, model),
                                           eng.window_, "div_v f_*");
  return eng;
}

ResponseBreakdown ResponseEngine::finish(std::string label, const std::vector<double>& s1, const std::vector<double>& s2,
                                         const std::vector<double>& s3, double scale) const {
  const std::size_t nb = s1.size();
  const double len = static_cast<double>(params_.seg_len);
  const double sign = params_.unstable_sign;
  double a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::vector<double> means(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    a1 += s1[b];
    a2 += s2[b];
    a3 += s3[b];
    means[b] = scale * (s1[b] + sign * (s2[b] + s3[b])) / len;
  }
  const double n_used = static_cast<double>(nb) * len;
  ResponseBreakdown r;
  r.label = std::move(label);
  r.r1 = scale * a1 / n_used;
  r.r2w = sign * scale * a2 / n_used;
  r.r3w = sign * scale * a3 / n_used;
  r.total = r.r1 + r.r2w + r.r3w;
  r.std_error = batch_stats(means).std_error;
  r.W = params_.W;
  r.T_used = nb * params_.seg_len;
  return r;
}

ResponseBreakdown ResponseEngine::response(const PerturbationOnOrbit& pert) const {
  if (pert.length != orbit_.length || pert.dim != orbit_.dim)
    throw ConfigError("perturbation '" + pert.label + "' is not defined on the engine orbit");
  if (pert.first_valid > window_.begin) throw ConfigError("perturbation '" + pert.label + "' undefined inside window");
  const int m = orbit_.dim;
  const std::size_t n = window_.end - window_.begin;
  std::vector<double> t1(n), t2(n), t3(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = window_.begin + i;
    const auto xk = pert.at(k);
    const double phi = phi_w_[k];
    t1[i] = omega_phi_.at(k).dot(xk);
    t2[i] = phi * omega_div_.at(k).dot(xk);
    t3[i] = phi * equivariant_div_X(frames_.frame(k), frames_.coframe(k), pert.grad_at(k));
  }
  (void)m;
  const auto& kern = simd::active_kernels();
  const std::size_t nb = n / params_.seg_len;
  std::vector<double> s1(nb), s2(nb), s3(nb);
  kern.segment_sums(t1.data(), n, params_.seg_len, s1.data());
  kern.segment_sums(t2.data(), n, params_.seg_len, s2.data());
  kern.segment_sums(t3.data(), n, params_.seg_len, s3.data());
  return finish(pert.label, s1, s2, s3, 1.0);
}

std::vector<ResponseBreakdown> ResponseEngine::batch_response(const std::vector<PerturbationOnOrbit>& perts) const {
  std::vector<ResponseBreakdown> out(perts.size());
  parallel_for(perts.size(), resolve_workers(params_.workers), [&](std::size_t i) { out[i] = response(perts[i]); });
  return out;
}

ResponseBreakdown ResponseEngine::additive_response(const VectorField& field, std::string label) const {
  return response(additive_to_composition(orbit_, field, std::move(label)));
}

std::vector<ResponseBreakdown> ResponseEngine::separable_batch(const std::vector<BasisElement>& elements) const {
  const int m = orbit_.dim, u = frames_.unstable_dim;
  const std::size_t n = window_.end - window_.begin;
  const std::size_t nb = n / params_.seg_len;
  if (elements.empty()) return {};

  // Orders needed per coordinate, and the distinct target sets.
  std::vector<int> n_max(m, 0);
  std::map<std::vector<int>, std::size_t> target_sets;
  for (const auto& el : elements) {
    if (el.factor_coords.size() > simd::kMaxFactors) throw ConfigError("separable field has too many factors");
    for (std::size_t i = 0; i < el.factor_coords.size(); ++i) {
      const int c = el.factor_coords[i];
      if (c < 0 || c >= m) throw ConfigError("separable field factor coordinate out of range");
      n_max[c] = std::max(n_max[c], el.factor_orders[i] + 1);
    }
    for (int tt : el.targets)
      if (tt < 0 || tt >= m) throw ConfigError("separable field target slot out of range");
    target_sets.emplace(el.targets, 0);
  }
  {
    std::size_t id = 0;
    for (auto& [k, v] : target_sets) v = id++;
  }

  // Factor tables: value/derivative of b_n at x_{s-1}, laid out [coord][n][step].
  std::vector<std::vector<double>> fval(m), fder(m);
  for (int c = 0; c < m; ++c) {
    fval[c].resize(static_cast<std::size_t>(n_max[c]) * n);
    fder[c].resize(static_cast<std::size_t>(n_max[c]) * n);
  }
  {
    std::vector<double> v, d;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = orbit_.state(window_.begin + i - 1);
      for (int c = 0; c < m; ++c) {
        if (n_max[c] == 0) continue;
        v.resize(n_max[c]);
        d.resize(n_max[c]);
        trig_factor_table(n_max[c], x[c], v.data(), d.data());
        for (int o = 0; o < n_max[c]; ++o) {
          fval[c][o * n + i] = v[o];
          fder[c][o * n + i] = d[o];
        }
      }
    }
  }

  // Weight tables per target set T:
  //   w1 = sum_{t in T} omega_phi[t],  w2 = phi_W sum_t omega_div[t],
  //   w3[c] = phi_W sum_t (df_{s-1}^{-1} e_s eps_s^T)(c, t).
  struct Weights {
    std::vector<double> w1, w2;
    std::vector<std::vector<double>> w3;
  };
  std::vector<Weights> weights(target_sets.size());
  for (auto& w : weights) {
    w.w1.resize(n);
    w.w2.resize(n);
    w.w3.assign(m, {});
    for (int c = 0; c < m; ++c)
      if (n_max[c] > 0) w.w3[c].resize(n);
  }
  {
    Mat z(m, u), gt(m, m);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t s = window_.begin + i;
      Eigen::PartialPivLU<Mat> lu(orbit_.jacobian(s - 1));
      if (!(lu.rcond() >= kSingularJacobian))
        throw NumericalError("singular Jacobian at step " + std::to_string(s - 1) + " in additive conversion");
      z = lu.solve(frames_.frame(s));
      gt.noalias() = z * frames_.coframe(s).transpose();
      const double phi = phi_w_[s];
      const auto op = omega_phi_.at(s);
      const auto od = omega_div_.at(s);
      for (const auto& [targets, id] : target_sets) {
        auto& w = weights[id];
        double a = 0.0, b = 0.0;
        for (int tt : targets) {
          a += op[tt];
          b += od[tt];
        }
        w.w1[i] = a;
        w.w2[i] = phi * b;
        for (int c = 0; c < m; ++c) {
          if (n_max[c] == 0) continue;
          double g = 0.0;
          for (int tt : targets) g += gt(c, tt);
          w.w3[c][i] = phi * g;
        }
      }
    }
  }

  const auto& kern = simd::active_kernels();
  std::vector<ResponseBreakdown> out(elements.size());
  parallel_for(elements.size(), resolve_workers(params_.workers), [&](std::size_t e) {
    const auto& el = elements[e];
    const auto& w = weights[target_sets.at(el.targets)];
    const std::size_t nf = el.factor_coords.size();
    std::array<const double*, simd::kMaxFactors> vals{}, ders{}, w3{};
    for (std::size_t i = 0; i < nf; ++i) {
      const int c = el.factor_coords[i];
      const std::size_t o = static_cast<std::size_t>(el.factor_orders[i]);
      vals[i] = fval[c].data() + o * n;
      ders[i] = fder[c].data() + o * n;
      w3[i] = w.w3[c].data();
    }
    simd::SeparableContraction in;
    in.values = {vals.data(), nf};
    in.derivs = {ders.data(), nf};
    in.w1 = w.w1.data();
    in.w2 = w.w2.data();
    in.w3 = {w3.data(), nf};
    in.n_steps = n;
    in.seg_len = params_.seg_len;
    std::vector<double> s1(nb), s2(nb), s3(nb);
    kern.contract(in, s1.data(), s2.data(), s3.data());
    out[e] = finish(el.index.label(), s1, s2, s3, 1.0 / std::sqrt(el.norm_sq));
  });
  return out;
}

}  // namespace optresp
