#include "optresp/fourier.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace optresp {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;
}  // namespace

HpWeighting HpWeighting::inverse_two_pi(int p) {
  HpWeighting w;
  w.p = p;
  w.c.resize(p + 1);
  for (int l = 0; l <= p; ++l) w.c[l] = std::pow(kTwoPi, -2.0 * l);
  return w;
}

HpWeighting HpWeighting::uniform(int p) {
  HpWeighting w;
  w.p = p;
  w.c.assign(p + 1, 1.0);
  return w;
}

void HpWeighting::validate() const {
  if (p < 0 || c.size() != static_cast<std::size_t>(p + 1)) throw ConfigError("H^p weights: need p+1 coefficients");
  if (!(c[0] > 0.0)) throw ConfigError("H^p weights: C_0 must be positive");
  for (double v : c)
    if (!(v >= 0.0)) throw ConfigError("H^p weights must be nonnegative");
}

double trig_factor(int n, double x) {
  if (n == 0) return 1.0;
  const double arg = trig_frequency(n) * kTwoPi * x;
  return (n % 2 == 1) ? kSqrt2 * std::sin(arg) : kSqrt2 * std::cos(arg);
}

double trig_factor_derivative(int n, double x) {
  if (n == 0) return 0.0;
  const double f = trig_frequency(n) * kTwoPi;
  const double arg = f * x;
  return (n % 2 == 1) ? kSqrt2 * f * std::cos(arg) : -kSqrt2 * f * std::sin(arg);
}

void trig_factor_table(int n_max, double x, double* values, double* derivs) {
  if (n_max <= 0) return;
  values[0] = 1.0;
  derivs[0] = 0.0;
  const double s1 = std::sin(kTwoPi * x), c1 = std::cos(kTwoPi * x);
  double s = 0.0, c = 1.0;  // sin/cos of f * 2 pi x
  for (int f = 1; 2 * f - 1 < n_max; ++f) {
    const double sn = s * c1 + c * s1;
    const double cn = c * c1 - s * s1;
    s = sn;
    c = cn;
    const double w = f * kTwoPi;
    values[2 * f - 1] = kSqrt2 * s;
    derivs[2 * f - 1] = kSqrt2 * w * c;
    if (2 * f < n_max) {
      values[2 * f] = kSqrt2 * c;
      derivs[2 * f] = -kSqrt2 * w * s;
    }
  }
}

std::vector<std::int64_t> int2vec(std::int64_t m, std::int64_t base, int n_bits) {
  std::vector<std::int64_t> digits(n_bits + 1);
  for (int i = 0; i < n_bits; ++i) {
    digits[n_bits - i] = m % base;
    m /= base;
  }
  digits[0] = m;
  return digits;
}

std::int64_t vec2int(const std::vector<std::int64_t>& digits, std::int64_t base) {
  std::int64_t m = 0;
  for (auto d : digits) m = m * base + d;
  return m;
}

std::string FourierIndex::label() const {
  std::ostringstream os;
  os << "B";
  if (j >= 0) os << (j + 1);
  os << "_(";
  for (std::size_t i = 0; i < n.size(); ++i) os << (i ? "," : "") << n[i];
  os << ")";
  return os.str();
}

FourierIndex index_from_flat(std::int64_t m, int base, int dim) {
  const auto digits = int2vec(m, base, dim);
  FourierIndex idx;
  idx.j = static_cast<int>(digits[0]);
  idx.n.assign(digits.begin() + 1, digits.end());
  return idx;
}

std::int64_t flat_from_index(const FourierIndex& idx, int base) {
  std::vector<std::int64_t> digits;
  digits.push_back(idx.j);
  digits.insert(digits.end(), idx.n.begin(), idx.n.end());
  return vec2int(digits, base);
}

double hp_norm_sq(const std::vector<int>& n, const HpWeighting& w) {
  double lambda = 0.0;
  for (int ni : n) {
    const double f = trig_frequency(ni) * kTwoPi;
    lambda += f * f;
  }
  double total = 0.0, power = 1.0;
  for (int l = 0; l <= w.p; ++l) {
    total += w.c[l] * power;
    power *= lambda;
  }
  return total;
}

Vec basis_eval(const FourierIndex& idx, const Vec& x) {
  Vec out = Vec::Zero(x.size());
  double p = 1.0;
  for (std::size_t i = 0; i < idx.n.size(); ++i) p *= trig_factor(idx.n[i], x[static_cast<Eigen::Index>(i)]);
  out[idx.j] = p;
  return out;
}

Mat basis_grad(const FourierIndex& idx, const Vec& x, const HpWeighting& w) {
  const auto m = x.size();
  Mat out = Mat::Zero(m, m);
  const double inv_norm = 1.0 / std::sqrt(hp_norm_sq(idx.n, w));
  for (Eigen::Index i = 0; i < m; ++i) {
    double g = 1.0;
    for (Eigen::Index k = 0; k < m; ++k)
      g *= (k == i) ? trig_factor_derivative(idx.n[k], x[k]) : trig_factor(idx.n[k], x[k]);
    out(idx.j, i) = g * inv_norm;
  }
  return out;
}

std::pair<Vec, Mat> restricted_basis(int n, const Vec& x, const HpWeighting& w) {
  BasisSpec spec;
  spec.mode = BasisMode::Restricted;
  spec.dim = static_cast<int>(x.size());
  spec.n_per_dim = n + 1;
  spec.weighting = w;
  SeparableField field(spec.dim, spec.element(static_cast<std::size_t>(n)));
  Vec v(spec.dim);
  Mat g(spec.dim, spec.dim);
  field.value(x, v);
  field.gradient(x, g);
  return {std::move(v), std::move(g)};
}

std::size_t BasisSpec::size() const {
  if (mode == BasisMode::Restricted) return static_cast<std::size_t>(n_per_dim);
  std::size_t s = static_cast<std::size_t>(dim);
  for (int i = 0; i < dim; ++i) s *= static_cast<std::size_t>(n_per_dim);
  return s;
}

BasisElement BasisSpec::element(std::size_t m) const {
  BasisElement e;
  if (mode == BasisMode::Restricted) {
    if (dim < 2) throw ConfigError("restricted basis needs dim >= 2");
    e.index.j = -1;
    e.index.n = {static_cast<int>(m)};
    e.targets = {0, 1};
    e.factor_coords = {0};
    e.factor_orders = {static_cast<int>(m)};
    e.norm_sq = hp_norm_sq(e.index.n, weighting);
    return e;
  }
  e.index = index_from_flat(static_cast<std::int64_t>(m), n_per_dim, dim);
  e.targets = {e.index.j};
  for (int i = 0; i < dim; ++i) {
    e.factor_coords.push_back(i);
    e.factor_orders.push_back(e.index.n[i]);
  }
  e.norm_sq = hp_norm_sq(e.index.n, weighting);
  return e;
}

SeparableField::SeparableField(int dim, BasisElement element)
    : dim_(dim), element_(std::move(element)), inv_norm_(1.0 / std::sqrt(element_.norm_sq)) {}

void SeparableField::value(const Vec& x, Vec& out) const {
  double p = inv_norm_;
  for (std::size_t i = 0; i < element_.factor_coords.size(); ++i)
    p *= trig_factor(element_.factor_orders[i], x[element_.factor_coords[i]]);
  out.setZero(dim_);
  for (int t : element_.targets) out[t] = p;
}

void SeparableField::gradient(const Vec& x, Mat& out) const {
  out.setZero(dim_, dim_);
  const auto nf = element_.factor_coords.size();
  for (std::size_t l = 0; l < nf; ++l) {
    double g = inv_norm_;
    for (std::size_t i = 0; i < nf; ++i) {
      const double xi = x[element_.factor_coords[i]];
      g *= (i == l) ? trig_factor_derivative(element_.factor_orders[i], xi) : trig_factor(element_.factor_orders[i], xi);
    }
    for (int t : element_.targets) out(t, element_.factor_coords[l]) = g;
  }
}

}  // namespace optresp
