#include "optresp/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace optresp {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os), columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
  os_ << '\n';
}

CsvWriter& CsvWriter::cell(const std::string& s) {
  if (in_row_++) os_ << ',';
  os_ << s;
  return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }
CsvWriter& CsvWriter::cell(long long v) { return cell(std::to_string(v)); }

void CsvWriter::end_row() {
  if (in_row_ != columns_)
    throw std::logic_error("csv row has " + std::to_string(in_row_) + " cells, header has " + std::to_string(columns_));
  os_ << '\n';
  in_row_ = 0;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("bad number '" + s + "' in " + what);
  return v;
}

int parse_int(const std::string& s, const std::string& what) {
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("bad integer '" + s + "' in " + what);
  return v;
}

std::vector<std::string> index_header(int dim, const std::string& tail) {
  std::vector<std::string> h{"j"};
  for (int i = 1; i <= dim; ++i) h.push_back("n" + std::to_string(i));
  h.push_back(tail);
  return h;
}

void write_index(CsvWriter& w, const BasisElement& el, int dim) {
  if (el.index.j < 0) {
    w.cell(std::string("1+2"));
    for (int i = 0; i < dim; ++i) w.cell(i == 0 ? el.index.n[0] : 0);
  } else {
    w.cell(el.index.j + 1);
    for (int i = 0; i < dim; ++i) w.cell(el.index.n[i]);
  }
}

}  // namespace

CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line);
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.header.size()) throw ConfigError("csv row with " + std::to_string(row.size()) + " cells");
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_coefficients(std::ostream& os, const CoefficientTable& t) {
  const int dim = t.basis.dim;
  auto h = index_header(dim, "norm_sq");
  h.push_back("coeff");
  h.push_back("stderr");
  CsvWriter w(os, h);
  for (const auto& e : t.entries) {
    write_index(w, e.element, dim);
    w.cell(e.element.norm_sq).cell(e.coeff).cell(e.std_error);
    w.end_row();
  }
}

std::vector<CoefficientEntry> read_coefficients(std::istream& is, int dim) {
  const CsvTable t = read_csv(is);
  const int cj = t.column("j"), cn = t.column("norm_sq"), cc = t.column("coeff"), cs = t.column("stderr");
  if (cj < 0 || cn < 0 || cc < 0 || cs < 0) throw ConfigError("coefficient csv lacks j/norm_sq/coeff/stderr columns");
  std::vector<int> cidx(dim);
  for (int i = 0; i < dim; ++i)
    if ((cidx[i] = t.column("n" + std::to_string(i + 1))) < 0)
      throw ConfigError("coefficient csv lacks column n" + std::to_string(i + 1) + " for a " + std::to_string(dim) +
                        "-dimensional model");
  std::vector<CoefficientEntry> out;
  for (const auto& row : t.rows) {
    CoefficientEntry e;
    auto& el = e.element;
    if (row[cj] == "1+2") {
      el.index.j = -1;
      el.index.n = {parse_int(row[cidx[0]], "n1")};
      el.targets = {0, 1};
      el.factor_coords = {0};
      el.factor_orders = el.index.n;
    } else {
      el.index.j = parse_int(row[cj], "j") - 1;
      if (el.index.j < 0 || el.index.j >= dim) throw ConfigError("coefficient csv: j out of range");
      el.targets = {el.index.j};
      for (int i = 0; i < dim; ++i) {
        el.index.n.push_back(parse_int(row[cidx[i]], "n"));
        el.factor_coords.push_back(i);
        el.factor_orders.push_back(el.index.n.back());
      }
    }
    el.norm_sq = parse_double(row[cn], "norm_sq");
    e.coeff = parse_double(row[cc], "coeff");
    e.std_error = parse_double(row[cs], "stderr");
    out.push_back(std::move(e));
  }
  return out;
}

void write_basis_norms(std::ostream& os, const BasisSpec& basis) {
  CsvWriter w(os, index_header(basis.dim, "hp_norm_sq"));
  for (std::size_t m = 0; m < basis.size(); ++m) {
    const auto el = basis.element(m);
    write_index(w, el, basis.dim);
    w.cell(el.norm_sq);
    w.end_row();
  }
}

void write_responses(std::ostream& os, const std::vector<ResponseBreakdown>& rows) {
  CsvWriter w(os, {"label", "r1", "r2w", "r3w", "total", "stderr", "W", "T_used"});
  for (const auto& r : rows) {
    w.cell(r.label).cell(r.r1).cell(r.r2w).cell(r.r3w).cell(r.total).cell(r.std_error).cell(r.W).cell(r.T_used);
    w.end_row();
  }
}

void write_sweep(std::ostream& os, const SweepResult& s) {
  CsvWriter w(os, {"gamma", "mean", "stderr", "n_replicas", "diverged"});
  for (const auto& e : s.entries) {
    w.cell(e.gamma).cell(e.mean).cell(e.std_error).cell(e.n_replicas).cell(e.diverged ? 1 : 0);
    w.end_row();
  }
}

void GridSpec::validate(int dim) const {
  if (static_cast<int>(lo.size()) != dim || static_cast<int>(hi.size()) != dim || static_cast<int>(n.size()) != dim)
    throw ConfigError("grid: lo, hi and n need one entry per coordinate");
  for (int i = 0; i < dim; ++i)
    if (n[i] < 1) throw ConfigError("grid.n entries must be at least 1");
}

void write_field_grid(std::ostream& os, const VectorField& field, const GridSpec& grid) {
  const int dim = field.dim();
  grid.validate(dim);
  std::vector<std::string> h;
  for (int i = 1; i <= dim; ++i) h.push_back("x" + std::to_string(i));
  for (int i = 1; i <= dim; ++i) h.push_back("X" + std::to_string(i));
  CsvWriter w(os, h);
  std::vector<int> at(dim, 0);
  Vec x(dim), v(dim);
  for (;;) {
    for (int i = 0; i < dim; ++i)
      x[i] = grid.n[i] == 1 ? grid.lo[i] : grid.lo[i] + (grid.hi[i] - grid.lo[i]) * at[i] / (grid.n[i] - 1);
    field.value(x, v);
    for (int i = 0; i < dim; ++i) w.cell(x[i]);
    for (int i = 0; i < dim; ++i) w.cell(v[i]);
    w.end_row();
    int i = dim - 1;
    while (i >= 0 && ++at[i] == grid.n[i]) at[i--] = 0;
    if (i < 0) break;
  }
}

}  // namespace optresp
