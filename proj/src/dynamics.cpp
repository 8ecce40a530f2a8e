#include "optresp/dynamics.hpp"

#include <cmath>
#include <numbers>

namespace optresp {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_unit(double v) {
  double r = v - std::floor(v);
  // floor can round r up to exactly 1 for tiny negative v
  return r >= 1.0 ? 0.0 : r;
}
}  // namespace

Vec MapModel::second_derivative_covector(const Vec& x, const Vec& w, const Vec& a) const {
  const int m = dim();
  Vec out(m);
  Vec unit = Vec::Zero(m);
  for (int l = 0; l < m; ++l) {
    unit[l] = 1.0;
    out[l] = w.dot(second_derivative(x, a, unit));
    unit[l] = 0.0;
  }
  return out;
}

Vec MapModel::sample_initial(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec x(dim());
  for (int i = 0; i < dim(); ++i) x[i] = u(rng);
  return x;
}

// ---------------------------------------------------------------------------

SolenoidMap::SolenoidMap(SolenoidParams params) : params_(std::move(params)) {
  if (params_.dim < 2) throw ConfigError("solenoid map needs dim >= 2");
}

void SolenoidMap::raw_step(const Vec& x, Vec& out) const {
  const auto& p = params_;
  const double x1 = x[0];
  double acc = p.contraction * x1;
  for (int i = 1; i < p.dim; ++i) {
    const double s = std::sin(kTwoPi * x[i]);
    const double c = std::cos(kTwoPi * x[i]);
    acc += p.cos_coupling * c;
    out[i] = p.expansion * x[i] + p.sin_coupling * x1 * s;
  }
  out[0] = acc;
}

void SolenoidMap::wrap(Vec& x) const {
  for (int i = 1; i < params_.dim; ++i) x[i] = wrap_unit(x[i]);
}

void SolenoidMap::jacobian(const Vec& x, Mat& out) const {
  const auto& p = params_;
  out.setZero(p.dim, p.dim);
  out(0, 0) = p.contraction;
  for (int i = 1; i < p.dim; ++i) {
    const double s = std::sin(kTwoPi * x[i]);
    const double c = std::cos(kTwoPi * x[i]);
    out(0, i) = -p.cos_coupling * kTwoPi * s;
    out(i, 0) = p.sin_coupling * s;
    out(i, i) = p.expansion + p.sin_coupling * x[0] * kTwoPi * c;
  }
}

Vec SolenoidMap::second_derivative(const Vec& x, const Vec& a, const Vec& b) const {
  const auto& p = params_;
  Vec out = Vec::Zero(p.dim);
  const double k2 = kTwoPi * kTwoPi;
  for (int i = 1; i < p.dim; ++i) {
    const double s = std::sin(kTwoPi * x[i]);
    const double c = std::cos(kTwoPi * x[i]);
    out[0] += -p.cos_coupling * k2 * c * a[i] * b[i];
    out[i] = p.sin_coupling * kTwoPi * c * (a[0] * b[i] + a[i] * b[0]) -
             p.sin_coupling * x[0] * k2 * s * a[i] * b[i];
  }
  return out;
}

Vec SolenoidMap::second_derivative_covector(const Vec& x, const Vec& w, const Vec& a) const {
  const auto& p = params_;
  Vec out = Vec::Zero(p.dim);
  const double k2 = kTwoPi * kTwoPi;
  for (int i = 1; i < p.dim; ++i) {
    const double s = std::sin(kTwoPi * x[i]);
    const double c = std::cos(kTwoPi * x[i]);
    const double mixed = p.sin_coupling * kTwoPi * c;
    out[0] += w[i] * mixed * a[i];
    out[i] = w[0] * (-p.cos_coupling * k2 * c * a[i]) + w[i] * (mixed * a[0] - p.sin_coupling * x[0] * k2 * s * a[i]);
  }
  return out;
}

double SolenoidMap::observable(const Vec& x) const {
  const auto& p = params_;
  const double x1 = x[0];
  double v = p.phi_linear * x1 + p.phi_cubic * x1 * x1 * x1 + p.phi_first_quadratic * (x1 - 0.5) * (x1 - 0.5);
  for (int i = 1; i < p.dim; ++i) {
    const double d = x[i] - 0.5;
    v += p.phi_quadratic * d * d;
  }
  return v;
}

Vec SolenoidMap::observable_gradient(const Vec& x) const {
  const auto& p = params_;
  Vec g(p.dim);
  g[0] = p.phi_linear + 3.0 * p.phi_cubic * x[0] * x[0] + 2.0 * p.phi_first_quadratic * (x[0] - 0.5);
  for (int i = 1; i < p.dim; ++i) g[i] = 2.0 * p.phi_quadratic * (x[i] - 0.5);
  return g;
}

Vec SolenoidMap::sample_initial(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec x(params_.dim);
  x[0] = u(rng) - 0.5;
  for (int i = 1; i < params_.dim; ++i) x[i] = u(rng);
  return x;
}

// ---------------------------------------------------------------------------

CallbackModel::CallbackModel(MapCallbacks cb) : cb_(std::move(cb)) {
  if (cb_.dim <= 0 || cb_.unstable_dim <= 0 || cb_.unstable_dim > cb_.dim)
    throw ConfigError("callback model '" + cb_.name + "': need 0 < unstable_dim <= dim");
  if (!cb_.raw_step || !cb_.jacobian || !cb_.observable || !cb_.observable_gradient)
    throw ConfigError("callback model '" + cb_.name + "': step, jacobian and observable callbacks are required");
}

void CallbackModel::wrap(Vec& x) const {
  if (cb_.wrap) cb_.wrap(x);
}

Vec CallbackModel::second_derivative(const Vec& x, const Vec& a, const Vec& b) const {
  if (!cb_.second_derivative) throw CapabilityError("model '" + cb_.name + "' has no second derivative");
  return cb_.second_derivative(x, a, b);
}

Vec CallbackModel::sample_initial(std::mt19937_64& rng) const {
  if (cb_.sample_initial) return cb_.sample_initial(rng);
  return MapModel::sample_initial(rng);
}

// ---------------------------------------------------------------------------

SolenoidParams benchmark_params(Benchmark b) {
  SolenoidParams p;
  switch (b) {
    case Benchmark::Solenoid2d:
      p.name = "solenoid2d";
      p.dim = 2;
      p.contraction = 0.5;
      break;
    case Benchmark::Solenoid3d:
      p.name = "solenoid3d";
      p.dim = 3;
      p.contraction = 0.5;
      break;
    case Benchmark::Solenoid21d:
      p.name = "solenoid21d";
      p.dim = 21;
      p.contraction = 0.1;
      p.phi_linear = 1.0;
      p.phi_cubic = 0.0;
      p.phi_quadratic = 2.0;
      break;
  }
  return p;
}

std::unique_ptr<MapModel> make_model(Benchmark b) { return std::make_unique<SolenoidMap>(benchmark_params(b)); }

std::unique_ptr<MapModel> make_model(const std::string& name) { return ModelRegistry::global().create(name); }

ModelRegistry::ModelRegistry() {
  add("solenoid2d", [] { return make_model(Benchmark::Solenoid2d); });
  add("solenoid3d", [] { return make_model(Benchmark::Solenoid3d); });
  add("solenoid21d", [] { return make_model(Benchmark::Solenoid21d); });
}

ModelRegistry& ModelRegistry::global() {
  static ModelRegistry registry;
  return registry;
}

void ModelRegistry::add(const std::string& name, Factory factory) { factories_[name] = std::move(factory); }

bool ModelRegistry::contains(const std::string& name) const { return factories_.count(name) != 0; }

std::unique_ptr<MapModel> ModelRegistry::create(const std::string& name) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw ConfigError("unknown model '" + name + "'");
  return it->second();
}

std::vector<std::string> ModelRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : factories_) out.push_back(k);
  return out;
}

// ---------------------------------------------------------------------------

void PerturbedModel::step(const Vec& x, Vec& out, Vec& scratch) const {
  base->raw_step(x, out);
  if (gamma != 0.0) {
    field->value(x, scratch);
    out += gamma * scratch;
  }
  base->wrap(out);
}

Vec PerturbedModel::step(const Vec& x) const {
  Vec out(base->dim()), scratch(base->dim());
  step(x, out, scratch);
  return out;
}

}  // namespace optresp
