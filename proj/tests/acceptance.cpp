// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "optresp/config.hpp"
#include "optresp/optimal.hpp"
#include "optresp/simd/kernels.hpp"
#include "optresp/verify.hpp"

using namespace optresp;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream log;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    log << "    " << (ok ? "ok   " : "FAIL ") << what << "\n";
  }
};

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, static_cast<double>(a)...);
  return buf;
}

struct Run {
  RunConfig cfg;
  std::unique_ptr<MapModel> model;
  std::unique_ptr<ResponseEngine> engine;
  CoefficientTable table;
};

Run run_preset(const std::string& preset, const std::vector<std::string>& overlays = {}) {
  Run r;
  r.cfg = resolve_config(preset, overlays);
  r.model = r.cfg.make_model();
  r.engine = std::make_unique<ResponseEngine>(ResponseEngine::build(*r.model, r.cfg.engine));
  r.table = compute_coefficients(*r.engine, r.cfg.basis.spec(r.cfg.dim()));
  return r;
}

std::size_t flat(int j, std::vector<int> n, int base) { return static_cast<std::size_t>(flat_from_index({j, std::move(n)}, base)); }

// Normalized coefficient c/|v| against a reference value with tolerance
// max(3 se, rel |ref| + abs).
void compare_listed(Outcome& o, const CoefficientTable& t, const std::vector<std::size_t>& idx,
                    const std::vector<double>& ref, double rel, double abs) {
  const double nv = t.norm();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& e = t.entries[idx[i]];
    const double c = e.coeff / nv, se = e.std_error / nv;
    const double tol = std::max(3.0 * se, rel * std::abs(ref[i]) + abs);
    o.require(std::abs(c - ref[i]) <= tol, e.element.index.label() +
                                               fmt(": %.4g (se %.2g) vs %.3g, |diff| %.3g, tol %.3g", c, se, ref[i],
                                                   std::abs(c - ref[i]), tol));
  }
}

Outcome criterion1(const Run& r2) {
  Outcome o;
  const int N = r2.cfg.basis.N;
  std::vector<std::size_t> idx;
  for (int n = 0; n < 6; ++n) idx.push_back(flat(0, {0, n}, N));
  compare_listed(o, r2.table, idx, {4.4e-2, -8.0e-3, 2.0e-2, -7.8e-4, -3.6e-2, -4.2e-5}, 0.15, 0.005);
  const std::size_t am = r2.table.argmax_abs();
  const double ext = r2.table.entries[am].coeff / r2.table.norm();
  o.require(am == flat(1, {0, 3}, N), "extreme at " + r2.table.entries[am].element.index.label());
  o.require(std::abs(ext + 0.73) <= 0.073, fmt("extreme value %.4g vs -0.73 (10%%)", ext));
  return o;
}

Outcome criterion2() {
  Outcome o;
  const Run r = run_preset("solenoid3d", {R"({"engine":{"n_segments":1000}})"});
  const int N = r.cfg.basis.N;
  std::vector<std::size_t> idx;
  for (int n = 0; n < 6; ++n) idx.push_back(flat(0, {0, 0, n}, N));
  compare_listed(o, r.table, idx, {-7.3e-2, -5.6e-3, -5.8e-3, 4.1e-4, -2.2e-2, -1.3e-4}, 0.20, 0.01);
  // The map and observable are invariant under swapping x2 and x3, so
  // B2_(0,3,0) and B3_(0,0,3) carry the same response.
  const std::size_t am = r.table.argmax_abs();
  const std::size_t b2 = flat(1, {0, 3, 0}, N), b3 = flat(2, {0, 0, 3}, N);
  o.require(am == b2 || am == b3,
            "extreme at " + r.table.entries[am].element.index.label() +
                fmt(" (%.3g) over all %.0f elements; B2_(0,3,0) is %.3g", r.table.entries[am].coeff / r.table.norm(),
                    static_cast<double>(r.table.entries.size()), r.table.entries[b2].coeff / r.table.norm()));
  return o;
}

Outcome criterion3() {
  Outcome o;
  const Run r = run_preset("solenoid21d");
  std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6};
  compare_listed(o, r.table, idx, {8.5e-1, 1.3e-3, 5.3e-1, 3.2e-4, 6.0e-2, 1.0e-4, 1.2e-2}, 0.15, 0.01);
  double tail = 0.0;
  for (std::size_t n = 10; n < r.table.entries.size(); ++n) tail = std::max(tail, std::abs(r.table.entries[n].coeff));
  const double c0 = std::abs(r.table.entries[0].coeff);
  o.require(tail < 0.1 * c0, fmt("max |c_n|, n >= 10: %.3g < 0.1 |c_0| = %.3g", tail, 0.1 * c0));
  return o;
}

Outcome criterion4(const Run& r2) {
  Outcome o;
  const auto opt = assemble_optimal(r2.table);
  const int N = r2.cfg.basis.N;
  const BasisSpec spec = r2.cfg.basis.spec(2);
  const SeparableField b03(2, spec.element(flat(1, {0, 3}, N)));
  const SeparableField b1414(2, spec.element(flat(1, {14, 14}, N)));
  const std::vector<std::pair<std::string, const VectorField*>> fields{
      {"X_opt", opt.field.get()}, {"B2_(0,3)", &b03}, {"B2_(14,14)", &b1414}};
  SweepParams sp;
  sp.gammas = {-0.01, 0.0, 0.01};
  sp.n_replicas = 8;
  sp.steps = 4000000;
  sp.warmup = 1000;
  sp.seed = r2.cfg.engine.seed;
  sp.workers = 0;
  for (const auto& [name, field] : fields) {
    const auto pred = r2.engine->additive_response(*field, name);
    const auto sweep = gamma_sweep(*r2.model, *field, sp);
    const auto rep = slope_check(sweep, pred.total, pred.std_error, 3.0, 0.01);
    o.require(rep.pass, name + fmt(": slope %.4g (se %.2g), response %.4g (se %.2g)", rep.slope, rep.slope_std_error,
                                   rep.predicted, rep.predicted_std_error) +
                            fmt(", |diff| %.3g <= 3 x %.3g", std::abs(rep.slope - rep.predicted), rep.combined_std_error));
  }
  return o;
}

Outcome criterion5(const Run& r2) {
  Outcome o;
  const auto opt = assemble_optimal(r2.table);
  const double rx = r2.engine->additive_response(*opt.field, "X_opt").total;
  o.require(std::abs(rx - opt.norm) <= 1e-10 * std::max(1.0, opt.norm),
            fmt("R(X_opt) = %.12g, |v| = %.12g, diff %.2g", rx, opt.norm, std::abs(rx - opt.norm)));
  double worst = 0.0;
  for (const auto& e : r2.table.entries) worst = std::max(worst, std::abs(e.coeff));
  o.require(rx >= worst, fmt("R(X_opt) %.4g >= max |R(B)| %.4g", rx, worst));

  std::vector<BasisElement> els;
  for (const auto& e : r2.table.entries) els.push_back(e.element);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g;
  double lin = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> w(els.size());
    double expect = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) expect += (w[i] = g(rng)) * r2.table.entries[i].coeff;
    const CombinedField f(2, els, w);
    lin = std::max(lin, std::abs(r2.engine->additive_response(f).total - expect));
  }
  o.require(lin <= 1e-10, fmt("linearity over random combinations: max diff %.2g", lin));
  return o;
}

Outcome criterion6() {
  Outcome o;
  {
    const auto model = make_model(Benchmark::Solenoid2d);
    const auto eng = ResponseEngine::build(*model, resolve_config("solenoid2d", {R"({"engine":{"n_segments":500}})"}).engine);
    const double res = std::max(eng.omega_phi().max_residual, eng.omega_div().max_residual);
    o.require(res < 1e-8, fmt("interior shadowing residual %.2g", res));
    const double dual = frame_diagnostics(eng.orbit(), eng.frames()).max_duality_residual;
    o.require(dual < 1e-10, fmt("frame duality %.2g", dual));
  }
  {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const int m = 2 + trial % 5;
      int u = 0;
      const Mat a = testutil::random_hyperbolic(rng, m, &u);
      const Orbit orbit = Orbit::from_jacobians(std::vector<Mat>(300, a));
      const FrameBundle fb = compute_frames(orbit, u, 80, 1);
      const Vec nu = testutil::random_vec(rng, m);
      std::vector<double> flatnu(300 * m);
      for (std::size_t k = 0; k < 300; ++k) VecMap(flatnu.data() + k * m, m) = nu;
      const auto path = adjoint_shadowing_solve(orbit, fb, flatnu, {100, 200});
      const Vec expect = (Mat::Identity(m, m) - a.transpose()).partialPivLu().solve(nu);
      for (std::size_t k = 100; k < 200; ++k)
        worst = std::max(worst, (path.at(k) - expect).cwiseAbs().maxCoeff() / std::max(1.0, expect.cwiseAbs().maxCoeff()));
    }
    o.require(worst < 1e-10, fmt("fixed-point oracle over 50 random hyperbolic matrices: %.2g", worst));
  }
  {
    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (auto b : {Benchmark::Solenoid2d, Benchmark::Solenoid3d, Benchmark::Solenoid21d}) {
      const auto model = make_model(b);
      const int m = model->dim();
      for (int t = 0; t < 10; ++t) {
        const Vec x = model->sample_initial(rng);
        const Mat j = model->jacobian(x);
        Vec yp(m), ym(m);
        for (int c = 0; c < m; ++c) {
          Vec xp = x, xm = x;
          xp[c] += 1e-6;
          xm[c] -= 1e-6;
          model->raw_step(xp, yp);
          model->raw_step(xm, ym);
          worst = std::max(worst, ((yp - ym) / 2e-6 - j.col(c)).cwiseAbs().maxCoeff() /
                                      std::max(1.0, j.col(c).cwiseAbs().maxCoeff()));
        }
        if (b == Benchmark::Solenoid21d) continue;
        const Vec a = testutil::random_vec(rng, m), v = testutil::random_vec(rng, m);
        const Vec fd = (model->jacobian(Vec(x + 1e-5 * a)) - model->jacobian(Vec(x - 1e-5 * a))) * v / 2e-5;
        const Vec an = model->second_derivative(x, a, v);
        worst = std::max(worst, (fd - an).cwiseAbs().maxCoeff() / std::max(1.0, an.cwiseAbs().maxCoeff()));
      }
    }
    o.require(worst < 1e-4, fmt("analytic derivatives vs finite differences: %.2g", worst));
  }
  {
    bool ok = true;
    for (auto [base, dim] : {std::pair{15, 2}, std::pair{11, 3}, std::pair{21, 1}}) {
      std::int64_t total = dim;
      for (int i = 0; i < dim; ++i) total *= base;
      for (std::int64_t m = 0; m < total && ok; ++m) ok = flat_from_index(index_from_flat(m, base, dim), base) == m;
    }
    o.require(ok, "index round trip at 2d, 3d and 21d sizes");
  }
  {
    const auto w = HpWeighting::inverse_two_pi(5);
    const double e = std::max({std::abs(hp_norm_sq({0, 0}, w) - 1.0), std::abs(hp_norm_sq({1, 0}, w) - 6.0),
                               std::abs(hp_norm_sq({1, 1}, w) - 63.0)});
    o.require(e <= 1e-12 * 63.0, fmt("H^p norms 1, 6, 63: max error %.2g", e));
  }
  return o;
}

Outcome criterion7(const Run& r2) {
  Outcome o;
  const Run quarter = run_preset("solenoid2d", {R"({"engine":{"n_segments":1000}})"});
  std::vector<double> ratios;
  for (std::size_t i = 0; i < r2.table.entries.size(); ++i)
    if (r2.table.entries[i].std_error > 0.0)
      ratios.push_back(quarter.table.entries[i].std_error / r2.table.entries[i].std_error);
  std::sort(ratios.begin(), ratios.end());
  const double med = ratios[ratios.size() / 2];
  o.require(std::abs(med - 2.0) <= 0.6, fmt("median stderr ratio A=1000 / A=4000 over %.0f coefficients: %.3g",
                                            static_cast<double>(ratios.size()), med));

  const Run w14 = run_preset("solenoid2d", {R"({"engine":{"W":14}})"});
  const int N = r2.cfg.basis.N;
  std::vector<std::size_t> idx;
  for (int n = 0; n < 6; ++n) idx.push_back(flat(0, {0, n}, N));
  idx.push_back(flat(1, {0, 3}, N));
  for (auto i : idx) {
    const auto &a = r2.table.entries[i], &b = w14.table.entries[i];
    const double se = std::hypot(a.std_error, b.std_error);
    o.require(std::abs(a.coeff - b.coeff) < 2.0 * se, a.element.index.label() + fmt(": W=10 %.4g, W=14 %.4g, |diff| %.2g < 2 x %.2g",
                                                                                 a.coeff, b.coeff, std::abs(a.coeff - b.coeff), se));
  }
  return o;
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  std::printf("simd kernel: %s\n", std::string(simd::active_kernels().name).c_str());
  const auto t0 = clock::now();
  const Run r2 = run_preset("solenoid2d");
  std::printf("solenoid2d preset: %zu coefficients, |v| = %.6g, %.2f s\n", r2.table.entries.size(), r2.table.norm(),
              std::chrono::duration<double>(clock::now() - t0).count());

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"2d coefficient reproduction", [&] { return criterion1(r2); }},
      {"3d spot check", criterion2},
      {"21d restricted family", criterion3},
      {"end-to-end slope oracle", [&] { return criterion4(r2); }},
      {"optimality properties", [&] { return criterion5(r2); }},
      {"solver invariants", criterion6},
      {"error scaling", [&] { return criterion7(r2); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t = clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(clock::now() - t).count();
    std::printf("%s", o.log.str().c_str());
    std::printf("CRITERION %zu %s: %s (%.1f s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
