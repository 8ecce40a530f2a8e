#include <algorithm>

#include "doctest.h"
#include "helpers.hpp"
#include "optresp/response.hpp"

using namespace optresp;

namespace {

EngineParams small_params() {
  EngineParams p;
  p.n_segments = 300;
  p.warmup = 200;
  return p;
}

struct Fixture2d {
  std::unique_ptr<MapModel> model = make_model(Benchmark::Solenoid2d);
  ResponseEngine engine = ResponseEngine::build(*model, small_params());
};

SeparableField full_element(int dim, int n_per_dim, std::size_t m, int p = 5) {
  BasisSpec s;
  s.dim = dim;
  s.n_per_dim = n_per_dim;
  s.weighting = HpWeighting::inverse_two_pi(p);
  return SeparableField(dim, s.element(m));
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::max(std::abs(a), std::abs(b))); }

}  // namespace

TEST_SUITE("response") {

TEST_CASE("phi window") {
  const auto model = make_model(Benchmark::Solenoid2d);
  const Orbit orbit = generate_orbit(*model, 20, 20, 100, 1);
  double mu = 0.0;
  for (double v : orbit.phi) mu += v;
  mu /= static_cast<double>(orbit.length);
  const auto p0 = phi_window(orbit, 0, mu);
  for (std::size_t k = 0; k < orbit.length; ++k) CHECK(p0[k] == orbit.phi[k] - mu);

  const auto p3 = phi_window(orbit, 3, mu);
  CHECK(std::isnan(p3[2]));
  CHECK(std::isnan(p3[orbit.length - 3]));
  double direct = 0.0;
  for (std::size_t i = 7; i <= 13; ++i) direct += orbit.phi[i] - mu;
  CHECK(p3[10] == doctest::Approx(direct).epsilon(1e-14));

  // Telescoping: the interior mean differs from zero only through edge terms.
  const std::size_t W = 10;
  const auto pw = phi_window(orbit, W, mu);
  double s = 0.0, dev = 0.0;
  for (std::size_t k = W; k + W < orbit.length; ++k) s += pw[k];
  for (double v : orbit.phi) dev = std::max(dev, std::abs(v - mu));
  CHECK(std::abs(s) <= 2.0 * W * (W + 1) * dev + 1e-12);

  Orbit flat = orbit;
  std::fill(flat.phi.begin(), flat.phi.end(), 0.25);
  for (std::size_t k = W; k + W < flat.length; ++k) CHECK(phi_window(flat, W, 0.25)[k] == 0.0);

  CHECK_THROWS_AS(phi_window(orbit, orbit.length, mu), ConfigError);
}

TEST_CASE("equivariant divergence of a field") {
  Mat e(2, 1), eps(2, 1), g(2, 2);
  e << 1, 0;
  eps << 1, 0;
  g << 3, 5, 7, 11;
  CHECK(equivariant_div_X(e, eps, g) == 3.0);
  CHECK(equivariant_div_X(e, eps, Mat::Zero(2, 2)) == 0.0);
  const Mat q = Eigen::HouseholderQR<Mat>(Mat::Random(3, 3)).householderQ();
  const Mat g3 = Mat::Random(3, 3);
  CHECK(equivariant_div_X(q, q, g3) == doctest::Approx(g3.trace()).epsilon(1e-13));
}

TEST_CASE("divergence of the pushforward") {
  SUBCASE("linear map has none") {
    const auto cat = testutil::linear_torus_map(testutil::cat_matrix(), 1);
    const Orbit orbit = generate_orbit(*cat, 10, 20, 10, 1);
    const FrameBundle fb = compute_frames(orbit, 1, 20, 1);
    for (double v : equivariant_div_fstar(orbit, fb, *cat)) CHECK(v == 0.0);
  }
  SUBCASE("derivative of the log unstable volume, by finite differences") {
    std::mt19937_64 rng(4);
    const auto model = make_model(Benchmark::Solenoid3d);
    const Orbit orbit = generate_orbit(*model, 20, 20, 100, 2);
    const FrameBundle fb = compute_frames(orbit, 2, 100, 2);
    const auto div = equivariant_div_fstar(orbit, fb, *model);
    for (std::size_t k = 150; k < 250; k += 17) {
      const Vec x = orbit.state(k);
      const Vec y = testutil::random_vec(rng, 3);
      auto logvol = [&](double t) {
        const Mat mk = fb.coframe(k + 1).transpose() * model->jacobian(Vec(x + t * y)) * fb.frame(k);
        return std::log(std::abs(mk.determinant()));
      };
      const double fd = (logvol(1e-6) - logvol(-1e-6)) / 2e-6;
      CHECK(ConstVecMap(div.data() + k * 3, 3).dot(y) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
  SUBCASE("missing second derivative") {
    MapCallbacks cb;
    cb.name = "nocurv";
    cb.dim = 2;
    cb.unstable_dim = 1;
    const Mat a = testutil::cat_matrix();
    cb.raw_step = [a](const Vec& v, Vec& o) { o = a * v; };
    cb.jacobian = [a](const Vec&, Mat& o) { o = a; };
    cb.observable = [](const Vec& v) { return v[0]; };
    cb.observable_gradient = [](const Vec&) { return Vec::Unit(2, 0).eval(); };
    CallbackModel m(cb);
    const Orbit orbit = Orbit::from_jacobians(std::vector<Mat>(10, a));
    const FrameBundle fb = compute_frames(orbit, 1, 2, 1);
    CHECK_THROWS_AS(equivariant_div_fstar(orbit, fb, m), CapabilityError);
  }
}

TEST_CASE("additive to composition") {
  const auto model = make_model(Benchmark::Solenoid2d);
  const Orbit orbit = generate_orbit(*model, 5, 20, 10, 1);
  Vec c(2);
  c << 0.3, -0.2;
  const auto p = additive_to_composition(orbit, ConstantField(c), "const");
  CHECK(p.first_valid == 1);
  for (std::size_t k = 1; k < orbit.length; ++k) {
    CHECK(p.at(k) == c);
    CHECK(p.grad_at(k).cwiseAbs().maxCoeff() == 0.0);
  }

  const Orbit id = Orbit::from_jacobians(std::vector<Mat>(6, Mat::Identity(2, 2)));
  const SeparableField f = full_element(2, 5, 2 * 25 - 1);
  const auto q = additive_to_composition(id, f, "id");
  Vec v(2);
  Mat g(2, 2);
  f.value(Vec(id.state(2)), v);
  f.gradient(Vec(id.state(2)), g);
  CHECK(q.at(3) == v);
  CHECK((q.grad_at(3) - g).cwiseAbs().maxCoeff() < 1e-15);

  // General Jacobian: grad X_{k+1} df_k = grad X'(x_k).
  const SeparableField h = full_element(2, 5, 37);
  const auto r = additive_to_composition(orbit, h);
  for (std::size_t k = 0; k + 1 < orbit.length; ++k) {
    h.gradient(Vec(orbit.state(k)), g);
    CHECK((r.grad_at(k + 1) * orbit.jacobian(k) - g).cwiseAbs().maxCoeff() < 1e-12);
  }

  const Orbit singular = Orbit::from_jacobians(std::vector<Mat>(4, Mat::Zero(2, 2)));
  CHECK_THROWS_AS(additive_to_composition(singular, h), NumericalError);
}

TEST_CASE("trivial responses") {
  Fixture2d fx;
  const auto z = fx.engine.additive_response(ConstantField(Vec::Zero(2)), "zero");
  CHECK(z.r1 == 0.0);
  CHECK(z.r2w == 0.0);
  CHECK(z.r3w == 0.0);
  CHECK(z.total == 0.0);

  // Constant observable: no response at all.
  MapCallbacks cb;
  const auto base = make_model(Benchmark::Solenoid2d);
  const MapModel* bm = base.get();
  cb.name = "flat";
  cb.dim = 2;
  cb.unstable_dim = 1;
  cb.raw_step = [bm](const Vec& x, Vec& o) { bm->raw_step(x, o); };
  cb.wrap = [bm](Vec& x) { bm->wrap(x); };
  cb.jacobian = [bm](const Vec& x, Mat& o) { bm->jacobian(x, o); };
  cb.second_derivative = [bm](const Vec& x, const Vec& a, const Vec& b) { return bm->second_derivative(x, a, b); };
  cb.observable = [](const Vec&) { return 1.5; };
  cb.observable_gradient = [](const Vec&) { return Vec::Zero(2).eval(); };
  cb.sample_initial = [bm](std::mt19937_64& rng) { return bm->sample_initial(rng); };
  CallbackModel flat(cb);
  const auto eng = ResponseEngine::build(flat, small_params());
  const auto r = eng.additive_response(full_element(2, 15, 228), "B");
  CHECK(r.r1 == 0.0);
  CHECK(r.r2w == 0.0);
  CHECK(r.r3w == 0.0);
  CHECK(r.total == 0.0);
}

TEST_CASE("breakdown bookkeeping") {
  Fixture2d fx;
  const auto r = fx.engine.additive_response(full_element(2, 15, 228), "B2_(0,3)");
  CHECK(r.total == r.r1 + r.r2w + r.r3w);
  CHECK(r.W == 10);
  CHECK(r.T_used == fx.engine.window().end - fx.engine.window().begin);
  CHECK(r.T_used % 20 == 0);
  CHECK(r.std_error > 0.0);
  CHECK(fx.engine.window().begin == averaging_buffer(fx.engine.params()));
  CHECK(averaging_buffer(EngineParams{}) == 120);

  // Flipping the unstable sign flips exactly r2w and r3w.
  EngineParams p = small_params();
  p.unstable_sign = -p.unstable_sign;
  const auto other = ResponseEngine::build(*fx.model, p).additive_response(full_element(2, 15, 228));
  CHECK(other.r1 == r.r1);
  CHECK(other.r2w == -r.r2w);
  CHECK(other.r3w == -r.r3w);
}

TEST_CASE("linearity on a fixed orbit") {
  Fixture2d fx;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  std::uniform_int_distribution<std::size_t> pick(0, 449);
  for (int trial = 0; trial < 10; ++trial) {
    const auto fa = full_element(2, 15, pick(rng)), fb = full_element(2, 15, pick(rng));
    const double a = d(rng), b = d(rng);
    const LambdaField comb(
        2,
        [&](const Vec& x, Vec& o) {
          Vec u(2), v(2);
          fa.value(x, u);
          fb.value(x, v);
          o = a * u + b * v;
        },
        [&](const Vec& x, Mat& o) {
          Mat u(2, 2), v(2, 2);
          fa.gradient(x, u);
          fb.gradient(x, v);
          o = a * u + b * v;
        });
    const auto ra = fx.engine.additive_response(fa), rb = fx.engine.additive_response(fb);
    const auto rc = fx.engine.additive_response(comb);
    const double scale = std::abs(a * ra.total) + std::abs(b * rb.total) + 1e-300;
    CHECK(std::abs(rc.total - (a * ra.total + b * rb.total)) < 1e-10 * std::max(1.0, scale));
    CHECK(std::abs(rc.r1 - (a * ra.r1 + b * rb.r1)) < 1e-10);
    CHECK(std::abs(rc.r2w - (a * ra.r2w + b * rb.r2w)) < 1e-10);
    CHECK(std::abs(rc.r3w - (a * ra.r3w + b * rb.r3w)) < 1e-10);
  }
}

TEST_CASE("batch response") {
  Fixture2d fx;
  std::vector<PerturbationOnOrbit> perts;
  for (std::size_t m : {3u, 228u, 400u, 17u})
    perts.push_back(additive_to_composition(fx.engine.orbit(), full_element(2, 15, m), std::to_string(m)));
  const auto all = fx.engine.batch_response(perts);
  const auto one = fx.engine.batch_response({perts[1]});
  CHECK(one[0].total == all[1].total);
  CHECK(fx.engine.response(perts[1]).total == all[1].total);
  std::vector<PerturbationOnOrbit> rev(perts.rbegin(), perts.rend());
  const auto back = fx.engine.batch_response(rev);
  for (std::size_t i = 0; i < perts.size(); ++i) {
    CHECK(back[perts.size() - 1 - i].total == all[i].total);
    CHECK(back[perts.size() - 1 - i].label == all[i].label);
  }

  PerturbationOnOrbit wrong = perts[0];
  wrong.length -= 1;
  CHECK_THROWS_AS(fx.engine.response(wrong), ConfigError);
}

TEST_CASE("separable fast path equals the general path") {
  SUBCASE("2d full basis") {
    Fixture2d fx;
    BasisSpec s;
    s.dim = 2;
    s.n_per_dim = 15;
    std::vector<BasisElement> els;
    for (std::size_t m : {0u, 1u, 14u, 228u, 449u, 300u}) els.push_back(s.element(m));
    const auto fast = fx.engine.separable_batch(els);
    for (std::size_t i = 0; i < els.size(); ++i) {
      const auto slow = fx.engine.additive_response(SeparableField(2, els[i]));
      CHECK(std::abs(fast[i].r1 - slow.r1) < 1e-12 * std::max(1.0, std::abs(slow.r1)));
      CHECK(std::abs(fast[i].r2w - slow.r2w) < 1e-12 * std::max(1.0, std::abs(slow.r2w)));
      CHECK(std::abs(fast[i].r3w - slow.r3w) < 1e-12 * std::max(1.0, std::abs(slow.r3w)));
      CHECK(std::abs(fast[i].std_error - slow.std_error) < 1e-10 * std::max(1e-3, slow.std_error));
      CHECK(fast[i].label == els[i].index.label());
    }
  }
  SUBCASE("21d restricted family") {
    const auto model = make_model(Benchmark::Solenoid21d);
    EngineParams p = small_params();
    p.n_segments = 60;
    const auto eng = ResponseEngine::build(*model, p);
    BasisSpec s;
    s.mode = BasisMode::Restricted;
    s.dim = 21;
    s.n_per_dim = 21;
    s.weighting = HpWeighting::inverse_two_pi(4);
    std::vector<BasisElement> els;
    for (std::size_t n : {0u, 1u, 2u, 7u, 20u}) els.push_back(s.element(n));
    const auto fast = eng.separable_batch(els);
    for (std::size_t i = 0; i < els.size(); ++i) {
      const auto slow = eng.additive_response(SeparableField(21, els[i]));
      CHECK(std::abs(fast[i].total - slow.total) < 1e-12 * std::max(1.0, std::abs(slow.total)));
    }
  }
}

TEST_CASE("determinism and worker independence") {
  const auto model = make_model(Benchmark::Solenoid2d);
  EngineParams p = small_params();
  const auto a = ResponseEngine::build(*model, p);
  p.workers = 3;
  const auto b = ResponseEngine::build(*model, p);
  BasisSpec s;
  s.dim = 2;
  s.n_per_dim = 15;
  std::vector<BasisElement> els;
  for (std::size_t m = 0; m < 40; ++m) els.push_back(s.element(m * 11));
  const auto ra = a.separable_batch(els), rb = b.separable_batch(els);
  for (std::size_t i = 0; i < els.size(); ++i) {
    CHECK(ra[i].total == rb[i].total);
    CHECK(ra[i].std_error == rb[i].std_error);
  }
}

TEST_CASE("engine parameter validation") {
  EngineParams p;
  p.seg_len = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = EngineParams{};
  p.n_segments = 5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = EngineParams{};
  p.unstable_sign = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_NOTHROW(EngineParams{}.validate());
}

TEST_CASE("batch statistics") {
  const auto s = batch_stats({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == 2.5);
  CHECK(s.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(batch_stats({7.0}).std_error == 0.0);
  CHECK(rel(batch_stats({}).mean, 0.0) == 0.0);
}

}
