// optresp: coefficient tables, optimal perturbations, gamma-sweep verification
// and solver diagnostics for hyperbolic maps.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "optresp/config.hpp"
#include "optresp/csv.hpp"
#include "optresp/optimal.hpp"
#include "optresp/simd/kernels.hpp"
#include "optresp/verify.hpp"

#ifndef OPTRESP_VERSION
#define OPTRESP_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace optresp;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumerical = 3, kVerifyFail = 4 };

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

using Clock = std::chrono::steady_clock;

RunConfig resolve(const CommonOptions& o) {
  std::vector<std::string> overlays;
  if (!o.config_path.empty()) overlays.push_back(read_text_file(o.config_path));
  json cli = json::object();
  if (o.seed) cli["engine"]["seed"] = *o.seed;
  if (!o.out_dir.empty()) cli["outputs"]["dir"] = o.out_dir;
  if (!cli.empty()) overlays.push_back(cli.dump());
  RunConfig c = resolve_config(o.preset, overlays);
  for (const auto& w : c.warnings()) std::cerr << "warning: " << w << "\n";
  return c;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

fs::path out_path(const RunConfig& c, const std::string& file) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / file;
}

std::ofstream open_out(const RunConfig& c, const std::string& file) {
  const auto p = out_path(c, file);
  std::ofstream os(p);
  if (!os) throw ConfigError("cannot write " + p.string());
  return os;
}

void write_manifest(const RunConfig& c, const std::string& command, double wall, const json& extra) {
  json m;
  m["command"] = command;
  m["version"] = OPTRESP_VERSION;
  m["config_hash"] = hex64(c.hash());
  m["seed"] = c.engine.seed;
  m["wall_time_s"] = wall;
  m["simd_kernel"] = simd::active_kernels().name;
  m["preset"] = c.preset;
  m["model"] = c.model_name;
  if (c.basis.mode == BasisMode::Restricted)
    m["restricted_rows"] = {{"count", c.basis.N}, {"n_min", 0}, {"n_max", c.basis.N - 1}};
  m["warnings"] = c.warnings();
  m["config"] = json::parse(c.resolved_json);
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  open_out(c, "manifest_" + command + ".json") << m.dump(2) << "\n";
}

ResponseEngine build_engine(const MapModel& model, const RunConfig& c) {
  std::cerr << "building orbit, frames and adjoint paths (" << c.engine.n_segments << " x " << c.engine.seg_len
            << " steps)\n";
  return ResponseEngine::build(model, c.engine);
}

CoefficientTable table_from_file(const RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read coefficient table '" + path + "'");
  CoefficientTable t;
  t.basis = c.basis.spec(c.dim());
  t.model = c.model_name;
  t.engine = c.engine;
  t.entries = read_coefficients(in, c.dim());
  return t;
}

void print_table_summary(const CoefficientTable& t) {
  const double nv = t.norm();
  std::printf("coefficients: %zu, |v| = %.6g\n", t.entries.size(), nv);
  if (t.entries.empty() || !(nv > 0.0)) return;
  const auto& best = t.entries[t.argmax_abs()];
  std::printf("largest normalized coefficient: %s = %.4g\n", best.element.index.label().c_str(), best.coeff / nv);
  std::printf("leading normalized coefficients:");
  for (std::size_t i = 0; i < std::min<std::size_t>(7, t.entries.size()); ++i)
    std::printf(" %s=%.3g(+-%.2g)", t.entries[i].element.index.label().c_str(), t.entries[i].coeff / nv,
                t.entries[i].std_error / nv);
  std::printf("\n");
}

int cmd_coeffs(const CommonOptions& o) {
  const auto t0 = Clock::now();
  const RunConfig c = resolve(o);
  const auto model = c.make_model();
  const BasisSpec basis = c.basis.spec(model->dim());
  const auto engine = build_engine(*model, c);
  std::cerr << "contracting " << basis.size() << " basis elements\n";
  const CoefficientTable t = compute_coefficients(engine, basis);
  {
    auto os = open_out(c, "coeffs.csv");
    write_coefficients(os, t);
  }
  {
    auto os = open_out(c, "basis_norms.csv");
    write_basis_norms(os, basis);
  }
  {
    std::vector<ResponseBreakdown> rows;
    for (const auto& e : t.entries) rows.push_back(e.breakdown);
    auto os = open_out(c, "response.csv");
    write_responses(os, rows);
  }
  print_table_summary(t);
  const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
  write_manifest(c, "coeffs", wall, {{"rows", t.entries.size()}, {"norm_v", t.norm()}});
  return kOk;
}

int cmd_optimal(const CommonOptions& o, const std::string& coeffs_path) {
  const auto t0 = Clock::now();
  const RunConfig c = resolve(o);
  const auto model = c.make_model();
  CoefficientTable t;
  if (!coeffs_path.empty()) {
    t = table_from_file(c, coeffs_path);
  } else {
    const auto engine = build_engine(*model, c);
    t = compute_coefficients(engine, c.basis.spec(model->dim()));
    auto os = open_out(c, "coeffs.csv");
    write_coefficients(os, t);
  }
  const auto opt = assemble_optimal(t);
  {
    auto os = open_out(c, "xopt_grid.csv");
    write_field_grid(os, *opt.field, c.grid);
  }
  print_table_summary(t);
  json summary;
  summary["norm_v"] = opt.norm;
  summary["predicted_optimal_response"] = predicted_optimal_response(t);
  json rows = json::array();
  for (std::size_t i = 0; i < t.entries.size(); ++i)
    rows.push_back({{"label", t.entries[i].element.index.label()}, {"normalized", opt.normalized[i]}});
  summary["normalized_coefficients"] = rows;
  open_out(c, "optimal.json") << summary.dump(2) << "\n";
  const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
  write_manifest(c, "optimal", wall, {{"norm_v", opt.norm}});
  return kOk;
}

// "xopt", "j:n1,...,nM" or, for the restricted family, "n".
std::optional<BasisElement> parse_selector(const std::string& sel, const BasisSpec& basis) {
  if (sel == "xopt") return std::nullopt;
  auto parse_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError("verify.perturbation: bad integer '" + s + "' in '" + sel + "'");
    return v;
  };
  if (basis.mode == BasisMode::Restricted) {
    const int n = parse_int(sel);
    if (n < 0 || n >= basis.n_per_dim) throw ConfigError("verify.perturbation: n out of range");
    return basis.element(static_cast<std::size_t>(n));
  }
  const auto colon = sel.find(':');
  if (colon == std::string::npos) throw ConfigError("verify.perturbation must be 'xopt' or 'j:n1,...,nM'");
  FourierIndex idx;
  idx.j = parse_int(sel.substr(0, colon)) - 1;
  std::stringstream ss(sel.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) idx.n.push_back(parse_int(item));
  if (idx.j < 0 || idx.j >= basis.dim || static_cast<int>(idx.n.size()) != basis.dim)
    throw ConfigError("verify.perturbation: need j in 1.." + std::to_string(basis.dim) + " and " +
                      std::to_string(basis.dim) + " orders");
  for (int n : idx.n)
    if (n < 0 || n >= basis.n_per_dim) throw ConfigError("verify.perturbation: order out of range");
  return basis.element(static_cast<std::size_t>(flat_from_index(idx, basis.n_per_dim)));
}

int cmd_verify(const CommonOptions& o, const std::string& coeffs_path, const std::string& selector_flag) {
  const auto t0 = Clock::now();
  const RunConfig c = resolve(o);
  const auto model = c.make_model();
  const BasisSpec basis = c.basis.spec(model->dim());
  const std::string selector = selector_flag.empty() ? c.verify.perturbation : selector_flag;
  const auto element = parse_selector(selector, basis);

  // Need at least -h, 0, +h before spending time on the engine.
  {
    SweepResult probe;
    for (double g : c.verify.sweep.gammas) probe.entries.push_back({g, 0.0, 0.0, 1, false, {}});
    (void)slope_check(probe, 0.0, 0.0, c.verify.tolerance_k);
  }

  const auto engine = build_engine(*model, c);
  std::shared_ptr<const VectorField> field;
  std::string label;
  if (element) {
    field = std::make_shared<SeparableField>(basis.dim, *element);
    label = element->index.label();
  } else {
    const CoefficientTable t = coeffs_path.empty() ? compute_coefficients(engine, basis) : table_from_file(c, coeffs_path);
    field = assemble_optimal(t).field;
    label = "xopt";
  }
  const ResponseBreakdown pred = engine.additive_response(*field, label);
  std::cerr << "predicted response of " << label << ": " << pred.total << " +- " << pred.std_error << "\n";
  std::cerr << "sweeping " << c.verify.sweep.gammas.size() << " gammas x " << c.verify.sweep.n_replicas
            << " replicas x " << c.verify.sweep.steps << " steps\n";
  const SweepResult sweep = gamma_sweep(*model, *field, c.verify.sweep);
  const SlopeReport rep = slope_check(sweep, pred.total, pred.std_error, c.verify.tolerance_k);
  {
    auto os = open_out(c, "verify.csv");
    write_sweep(os, sweep);
  }
  json report = {{"perturbation", label},
                 {"h", rep.h},
                 {"slope", rep.slope},
                 {"slope_stderr", rep.slope_std_error},
                 {"quad_slope", rep.quad_slope},
                 {"quad_slope_stderr", rep.quad_slope_std_error},
                 {"predicted", rep.predicted},
                 {"predicted_stderr", rep.predicted_std_error},
                 {"combined_stderr", rep.combined_std_error},
                 {"k", rep.k},
                 {"pass", rep.pass}};
  open_out(c, "verify_report.json") << report.dump(2) << "\n";
  std::printf("%s: slope %.5g +- %.2g (quadratic fit %.5g), predicted %.5g +- %.2g -> %s\n", label.c_str(), rep.slope,
              rep.slope_std_error, rep.quad_slope, rep.predicted, rep.predicted_std_error, rep.pass ? "PASS" : "FAIL");
  const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
  write_manifest(c, "verify", wall, {{"report", report}});
  return rep.pass ? kOk : kVerifyFail;
}

// --- diagnostics -----------------------------------------------------------

struct Check {
  std::string name;
  double value;
  double threshold;
  bool pass;
  std::string note;
};

double jacobian_fd_error(const MapModel& model, const Orbit& orbit) {
  const int m = model.dim();
  const double h = 1e-6;
  double worst = 0.0;
  Vec xp(m), xm(m), yp(m), ym(m);
  for (std::size_t k = 0; k < orbit.length; k += std::max<std::size_t>(1, orbit.length / 20)) {
    const Vec x = orbit.state(k);
    const Mat j = model.jacobian(x);
    for (int c = 0; c < m; ++c) {
      xp = x;
      xm = x;
      xp[c] += h;
      xm[c] -= h;
      model.raw_step(xp, yp);
      model.raw_step(xm, ym);
      const Vec fd = (yp - ym) / (2 * h);
      worst = std::max(worst, (fd - j.col(c)).cwiseAbs().maxCoeff() / std::max(1.0, j.col(c).cwiseAbs().maxCoeff()));
    }
  }
  return worst;
}

double second_derivative_fd_error(const MapModel& model, const Orbit& orbit) {
  const int m = model.dim();
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < orbit.length; k += std::max<std::size_t>(1, orbit.length / 20)) {
    const Vec x = orbit.state(k);
    for (int a = 0; a < m; ++a) {
      const Vec ea = Vec::Unit(m, a);
      const Mat jp = model.jacobian(Vec(x + h * ea)), jm = model.jacobian(Vec(x - h * ea));
      for (int b = 0; b < m; ++b) {
        const Vec eb = Vec::Unit(m, b);
        const Vec fd = (jp - jm) * eb / (2 * h);
        const Vec an = model.second_derivative(x, ea, eb);
        worst = std::max(worst, (fd - an).cwiseAbs().maxCoeff() / std::max(1.0, an.cwiseAbs().maxCoeff()));
      }
    }
  }
  return worst;
}

int cmd_diag(const CommonOptions& o) {
  const auto t0 = Clock::now();
  const RunConfig c = resolve(o);
  const auto model = c.make_model();
  std::vector<Check> checks;
  auto add = [&](std::string name, double v, double thr, std::string note = {}) {
    checks.push_back({std::move(name), v, thr, std::isfinite(v) && v <= thr, std::move(note)});
  };
  auto fail = [&](std::string name, const std::exception& e) {
    checks.push_back({std::move(name), std::nan(""), 0.0, false, e.what()});
  };

  std::optional<ResponseEngine> engine;
  try {
    engine.emplace(ResponseEngine::build(*model, c.engine));
  } catch (const NumericalError& e) {
    fail("engine_build", e);
  }

  if (engine) {
    const auto& orbit = engine->orbit();
    const auto& frames = engine->frames();
    const auto win = engine->window();
    add("jacobian_fd_rel", jacobian_fd_error(*model, orbit), 1e-4);
    if (model->has_second_derivative()) add("second_derivative_fd_rel", second_derivative_fd_error(*model, orbit), 1e-4);

    const FrameDiagnostics fd = frame_diagnostics(orbit, frames);
    add("frame_duality", fd.max_duality_residual, 1e-10);
    add("frame_equivariance_angle", fd.max_equivariance_angle, 1e-8);
    try {
      const FrameBundle other = compute_frames(orbit, frames.unstable_dim, frames.frame_warmup, c.engine.seed + 1);
      double worst_e = 0.0, worst_eps = 0.0;
      for (std::size_t k = 0; k < orbit.length; ++k) {
        if (!frames.retained(k)) continue;
        worst_e = std::max(worst_e, subspace_angle(frames.frame(k), other.frame(k)));
        worst_eps = std::max(worst_eps, subspace_angle(frames.coframe(k), other.coframe(k)));
      }
      add("frame_seed_agreement_angle", worst_e, 1e-8, "unstable frames from two random starts");
      add("coframe_seed_agreement_angle", worst_eps, 1e-8, "adjoint coframes from two random starts");
    } catch (const NumericalError& e) {
      fail("frame_seed_agreement_angle", e);
    }

    add("shadowing_residual_dPhi", engine->omega_phi().max_residual, 1e-8);
    add("shadowing_residual_div", engine->omega_div().max_residual, 1e-8);
    add("shadowing_sup_norm_dPhi", engine->omega_phi().sup_norm, 1e6, "finite sup-norm");
    add("shadowing_sup_norm_div", engine->omega_div().sup_norm, 1e6, "finite sup-norm");

    const std::size_t W = c.engine.W;
    double sum = 0.0, dev = 0.0;
    for (std::size_t k = win.begin; k < win.end; ++k) {
      sum += engine->phi_w()[k];
      dev = std::max(dev, std::abs(orbit.phi[k] - engine->mu_phi()));
    }
    for (std::size_t k = win.begin - W; k < win.end + W; ++k) dev = std::max(dev, std::abs(orbit.phi[k] - engine->mu_phi()));
    const double n = static_cast<double>(win.end - win.begin);
    add("phi_w_mean", std::abs(sum / n), 2.0 * W * (W + 1) * dev / n + 1e-12, "edge-effect bound 2W(W+1)max|Phi-mu|/n");

    try {
      const std::vector<double> zero(orbit.length * orbit.dim, 0.0);
      const auto probe = adjoint_shadowing_solve(orbit, frames, zero, win, "zero");
      double mx = 0.0;
      for (double v : probe.omega) mx = std::max(mx, std::abs(v));
      add("zero_source_probe", mx, 0.0, "nu = 0 gives the exact zero path");
    } catch (const NumericalError& e) {
      fail("zero_source_probe", e);
    }
  }

  bool all = true;
  json rows = json::array();
  for (const auto& ch : checks) {
    all = all && ch.pass;
    rows.push_back({{"name", ch.name},
                    {"value", std::isfinite(ch.value) ? json(ch.value) : json(nullptr)},
                    {"threshold", ch.threshold},
                    {"pass", ch.pass},
                    {"note", ch.note}});
    std::printf("%-30s %-12.4g <= %-10.3g %s%s%s\n", ch.name.c_str(), ch.value, ch.threshold, ch.pass ? "PASS" : "FAIL",
                ch.note.empty() ? "" : "  ", ch.note.c_str());
  }
  open_out(c, "diagnostics.json") << json{{"checks", rows}, {"all_pass", all}}.dump(2) << "\n";
  const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
  write_manifest(c, "diag", wall, {{"all_pass", all}});
  return all ? kOk : kVerifyFail;
}

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config_path, "JSON config overlaid on the preset");
  sub->add_option("--preset", o.preset, "solenoid2d | solenoid3d | solenoid21d");
  sub->add_option("--out", o.out_dir, "output directory (overrides outputs.dir)");
  sub->add_option_function<std::uint64_t>("--seed", [&o](const std::uint64_t& s) { o.seed = s; },
                                          "orbit seed (overrides engine.seed)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal linear response of hyperbolic maps"};
  app.set_version_flag("--version", OPTRESP_VERSION);
  app.require_subcommand(1);

  CommonOptions opts;
  std::string coeffs_path, selector;
  bool print_preset = false;

  auto* coeffs = app.add_subcommand("coeffs", "coefficient table of the truncated basis");
  add_common(coeffs, opts);
  auto* optimal = app.add_subcommand("optimal", "assemble X_opt and sample it on a grid");
  add_common(optimal, opts);
  optimal->add_option("--coeffs", coeffs_path, "reuse a coeffs.csv instead of recomputing");
  auto* verify = app.add_subcommand("verify", "gamma sweep against the predicted response");
  add_common(verify, opts);
  verify->add_option("--coeffs", coeffs_path, "coeffs.csv for the xopt selector");
  verify->add_option("--perturbation", selector, "xopt | j:n1,...,nM | n (restricted family)");
  auto* diag = app.add_subcommand("diag", "frame, shadowing and derivative diagnostics");
  add_common(diag, opts);
  diag->add_flag("--print-preset", print_preset, "print the resolved configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*coeffs) return cmd_coeffs(opts);
    if (*optimal) return cmd_optimal(opts, coeffs_path);
    if (*verify) return cmd_verify(opts, coeffs_path, selector);
    if (*diag) {
      if (print_preset) {
        std::cout << json::parse(resolve(opts).resolved_json).dump(2) << "\n";
        return kOk;
      }
      return cmd_diag(opts);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kOk;
}
