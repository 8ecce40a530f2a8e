#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "optresp/optimal.hpp"
#include "optresp/verify.hpp"

namespace optresp {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

/// Comma-separated writer; the header row is written on construction.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const std::vector<std::string>& header);
  CsvWriter& cell(const std::string& s);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  void end_row();

 private:
  std::ostream& os_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;  // -1 if absent
};
CsvTable read_csv(std::istream& is);

/// j, n1..nM, norm_sq, coeff, stderr. Restricted rows use j = "1+2".
void write_coefficients(std::ostream& os, const CoefficientTable& t);
/// Rebuilds the entries of a coefficient table from write_coefficients output.
std::vector<CoefficientEntry> read_coefficients(std::istream& is, int dim);
/// j, n1..nM, hp_norm_sq for every element of the truncation.
void write_basis_norms(std::ostream& os, const BasisSpec& basis);
void write_responses(std::ostream& os, const std::vector<ResponseBreakdown>& rows);
void write_sweep(std::ostream& os, const SweepResult& s);

/// Tensor grid: axis i takes n_i equally spaced points in [lo_i, hi_i]
/// (n_i = 1 pins the axis at lo_i). Columns x1..xM, X1..XM.
struct GridSpec {
  std::vector<double> lo, hi;
  std::vector<int> n;
  void validate(int dim) const;
};
void write_field_grid(std::ostream& os, const VectorField& field, const GridSpec& grid);

}  // namespace optresp
