#pragma once

#include <memory>
#include <string>
#include <vector>

#include "optresp/fourier.hpp"
#include "optresp/response.hpp"

namespace optresp {

struct CoefficientEntry {
  BasisElement element;
  double coeff = 0.0;      // R of the normalized basis element
  double std_error = 0.0;
  ResponseBreakdown breakdown;
};

/// Coefficients of the Riesz representative v in the normalized basis.
struct CoefficientTable {
  std::vector<CoefficientEntry> entries;
  BasisSpec basis;
  std::string model;
  EngineParams engine;

  /// |v| = sqrt(sum c^2).
  double norm() const;
  std::size_t argmax_abs() const;
};

/// All coefficients against the engine's single orbit.
CoefficientTable compute_coefficients(const ResponseEngine& engine, const BasisSpec& basis);
/// Coefficients of a subset of flat basis indices.
CoefficientTable compute_coefficients(const ResponseEngine& engine, const BasisSpec& basis,
                                      const std::vector<std::size_t>& indices);

/// Linear combination  sum_i w_i B~_i  of normalized separable elements, with
/// per-coordinate trigonometric tables shared across terms.
class CombinedField final : public VectorField {
 public:
  CombinedField(int dim, std::vector<BasisElement> elements, std::vector<double> weights);
  int dim() const override { return dim_; }
  void value(const Vec& x, Vec& out) const override;
  void gradient(const Vec& x, Mat& out) const override;
  const std::vector<BasisElement>& elements() const noexcept { return elements_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  void fill_tables(const Vec& x, std::vector<double>& val, std::vector<double>& der) const;

  int dim_;
  std::vector<BasisElement> elements_;
  std::vector<double> weights_;  // already divided by the element norms
  std::vector<int> n_max_;
  std::vector<std::size_t> offset_;
};

struct OptimalPerturbation {
  double norm = 0.0;                  // |v|
  std::vector<double> normalized;     // c_i / |v|
  std::shared_ptr<const CombinedField> field;  // X_opt = v / |v|
};

/// Throws NullResponseError if every coefficient is zero.
OptimalPerturbation assemble_optimal(const CoefficientTable& table);

/// Optimal response over the unit ball of the truncated space, |v|.
double predicted_optimal_response(const CoefficientTable& table);

}  // namespace optresp
