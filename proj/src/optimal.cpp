#include "optresp/optimal.hpp"

#include <cmath>

namespace optresp {

double CoefficientTable::norm() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.coeff * e.coeff;
  return std::sqrt(s);
}

std::size_t CoefficientTable::argmax_abs() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (std::abs(entries[i].coeff) > std::abs(entries[best].coeff)) best = i;
  return best;
}

CoefficientTable compute_coefficients(const ResponseEngine& engine, const BasisSpec& basis,
                                      const std::vector<std::size_t>& indices) {
  if (basis.dim != engine.orbit().dim)
    throw ConfigError("basis dimension " + std::to_string(basis.dim) + " does not match model dimension " +
                      std::to_string(engine.orbit().dim));
  basis.weighting.validate();
  const std::size_t size = basis.size();
  std::vector<BasisElement> elements;
  elements.reserve(indices.size());
  for (auto m : indices) {
    if (m >= size) throw ConfigError("basis index " + std::to_string(m) + " out of range");
    elements.push_back(basis.element(m));
  }
  const auto results = engine.separable_batch(elements);
  CoefficientTable t;
  t.basis = basis;
  t.model = engine.model().name();
  t.engine = engine.params();
  t.entries.resize(elements.size());
  for (std::size_t i = 0; i < elements.size(); ++i) {
    t.entries[i].element = std::move(elements[i]);
    t.entries[i].coeff = results[i].total;
    t.entries[i].std_error = results[i].std_error;
    t.entries[i].breakdown = results[i];
  }
  return t;
}

CoefficientTable compute_coefficients(const ResponseEngine& engine, const BasisSpec& basis) {
  std::vector<std::size_t> all(basis.size());
  for (std::size_t m = 0; m < all.size(); ++m) all[m] = m;
  return compute_coefficients(engine, basis, all);
}

// ---------------------------------------------------------------------------

CombinedField::CombinedField(int dim, std::vector<BasisElement> elements, std::vector<double> weights)
    : dim_(dim), elements_(std::move(elements)), weights_(std::move(weights)), n_max_(dim, 0), offset_(dim + 1, 0) {
  if (elements_.size() != weights_.size()) throw ConfigError("combined field: one weight per element required");
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    const auto& el = elements_[i];
    for (std::size_t f = 0; f < el.factor_coords.size(); ++f) {
      const int c = el.factor_coords[f];
      if (c < 0 || c >= dim_) throw ConfigError("combined field: factor coordinate out of range");
      n_max_[c] = std::max(n_max_[c], el.factor_orders[f] + 1);
    }
    for (int t : el.targets)
      if (t < 0 || t >= dim_) throw ConfigError("combined field: target slot out of range");
    weights_[i] /= std::sqrt(el.norm_sq);
  }
  for (int c = 0; c < dim_; ++c) offset_[c + 1] = offset_[c] + static_cast<std::size_t>(n_max_[c]);
}

void CombinedField::fill_tables(const Vec& x, std::vector<double>& val, std::vector<double>& der) const {
  val.resize(offset_.back());
  der.resize(offset_.back());
  for (int c = 0; c < dim_; ++c)
    if (n_max_[c] > 0) trig_factor_table(n_max_[c], x[c], val.data() + offset_[c], der.data() + offset_[c]);
}

void CombinedField::value(const Vec& x, Vec& out) const {
  thread_local std::vector<double> val, der;
  fill_tables(x, val, der);
  out.setZero(dim_);
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    const auto& el = elements_[i];
    double p = weights_[i];
    for (std::size_t f = 0; f < el.factor_coords.size(); ++f)
      p *= val[offset_[el.factor_coords[f]] + el.factor_orders[f]];
    for (int t : el.targets) out[t] += p;
  }
}

void CombinedField::gradient(const Vec& x, Mat& out) const {
  thread_local std::vector<double> val, der;
  fill_tables(x, val, der);
  out.setZero(dim_, dim_);
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    const auto& el = elements_[i];
    const std::size_t nf = el.factor_coords.size();
    for (std::size_t l = 0; l < nf; ++l) {
      double g = weights_[i];
      for (std::size_t f = 0; f < nf; ++f) {
        const std::size_t at = offset_[el.factor_coords[f]] + el.factor_orders[f];
        g *= (f == l) ? der[at] : val[at];
      }
      for (int t : el.targets) out(t, el.factor_coords[l]) += g;
    }
  }
}

// ---------------------------------------------------------------------------

OptimalPerturbation assemble_optimal(const CoefficientTable& table) {
  const double norm = table.norm();
  if (table.entries.empty() || !(norm > 0.0))
    throw NullResponseError("all coefficients are zero: the response functional vanishes on the truncated space");
  OptimalPerturbation opt;
  opt.norm = norm;
  std::vector<BasisElement> elements;
  std::vector<double> weights;
  for (const auto& e : table.entries) {
    opt.normalized.push_back(e.coeff / norm);
    if (e.coeff != 0.0) {
      elements.push_back(e.element);
      weights.push_back(e.coeff / norm);
    }
  }
  opt.field = std::make_shared<CombinedField>(table.basis.dim, std::move(elements), std::move(weights));
  return opt;
}

double predicted_optimal_response(const CoefficientTable& table) { return table.norm(); }

}  // namespace optresp
