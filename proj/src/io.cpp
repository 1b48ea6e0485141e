#include "hedonic/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace hedonic {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t line) {
  double v = 0.0;
  const char* begin = s.data();
  if (!s.empty() && s.front() == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw IoError(fmt::format("line {}: '{}' is not a number", line, s));
  return v;
}

void write_header(std::ostream& out, const std::vector<std::string>& names) {
  for (std::size_t k = 0; k < names.size(); ++k) out << (k ? "," : "") << names[k];
  out << '\n';
}

void add_prefixed(std::vector<std::string>& names, const std::string& prefix, Index d) {
  for (Index k = 1; k <= d; ++k) names.push_back(fmt::format("{}_{}", prefix, k));
}

void write_cells(std::ostream& out, const std::vector<double>& cells) {
  for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << format_number(cells[k]);
  out << '\n';
}

Matrix gather(const CsvTable& t, const std::vector<Index>& cols) {
  Matrix m(t.rows.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) m.col(static_cast<Index>(c)) = t.rows.col(cols[c]);
  return m;
}

Index required(const CsvTable& t, const std::string& name) {
  const Index c = t.column(name);
  if (c < 0) throw IoError("missing column '" + name + "'");
  return c;
}

Index as_index(double v) {
  if (v < 0 || v != std::floor(v)) throw IoError(fmt::format("'{}' is not an index", v));
  return static_cast<Index>(v);
}

}  // namespace

Index CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return static_cast<Index>(k);
  return -1;
}

std::vector<Index> CsvTable::prefixed(const std::string& prefix) const {
  std::vector<Index> out;
  for (Index k = 1;; ++k) {
    const Index c = column(fmt::format("{}_{}", prefix, k));
    if (c < 0) break;
    out.push_back(c);
  }
  return out;
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw IoError("empty CSV");
  t.header = split(line);
  const std::size_t width = t.header.size();
  std::vector<double> cells;
  Index count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto parts = split(line);
    if (parts.size() != width)
      throw IoError(fmt::format("line {}: expected {} fields, found {}", line_no, width,
                                parts.size()));
    for (const auto& p : parts) cells.push_back(parse_number(p, line_no));
    ++count;
  }
  t.rows.resize(count, static_cast<Index>(width));
  for (Index r = 0; r < count; ++r)
    for (Index c = 0; c < static_cast<Index>(width); ++c)
      t.rows(r, c) = cells[static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c)];
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return read_csv(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

std::string format_number(double v) { return fmt::format("{}", v); }

void write_dataset(std::ostream& out, const MarketDataset& d) {
  std::vector<std::string> names;
  add_prefixed(names, "x", d.dx());
  add_prefixed(names, "z", d.dz());
  names.push_back("p");
  write_header(out, names);
  std::vector<double> cells;
  for (Index r = 0; r < d.rows(); ++r) {
    cells.clear();
    for (Index c = 0; c < d.dx(); ++c) cells.push_back(d.x(r, c));
    for (Index c = 0; c < d.dz(); ++c) cells.push_back(d.z(r, c));
    cells.push_back(d.p[r]);
    write_cells(out, cells);
  }
}

MarketDataset read_dataset(const CsvTable& t) {
  const auto zc = t.prefixed("z");
  if (zc.empty()) throw IoError("dataset has no z_1 column");
  MarketDataset d{gather(t, t.prefixed("x")), gather(t, zc), t.rows.col(required(t, "p"))};
  d.validate();
  return d;
}

void write_measure(std::ostream& out, const DiscreteMeasure& m) {
  std::vector<std::string> names{"w"};
  add_prefixed(names, "c", m.dim());
  write_header(out, names);
  std::vector<double> cells;
  for (Index i = 0; i < m.size(); ++i) {
    cells.assign(1, m.weight(i));
    for (Index c = 0; c < m.dim(); ++c) cells.push_back(m.points()(i, c));
    write_cells(out, cells);
  }
}

DiscreteMeasure read_measure(const CsvTable& t) {
  const auto cc = t.prefixed("c");
  if (cc.empty()) throw IoError("measure has no c_1 column");
  return DiscreteMeasure::from_samples(gather(t, cc), Vector(t.rows.col(required(t, "w"))));
}

void write_plan(std::ostream& out, const TransportPlan& plan) {
  write_header(out, {"i", "j", "mass"});
  for (const auto& e : plan.entries)
    out << e.source << ',' << e.target << ',' << format_number(e.mass) << '\n';
}

TransportPlan read_plan(const CsvTable& t, Index n_source, Index n_target) {
  const Index ci = required(t, "i"), cj = required(t, "j"), cm = required(t, "mass");
  TransportPlan plan;
  Index max_i = -1, max_j = -1;
  for (Index r = 0; r < t.rows.rows(); ++r) {
    PlanEntry e{as_index(t.rows(r, ci)), as_index(t.rows(r, cj)), t.rows(r, cm)};
    if (!(e.mass >= 0.0)) throw IoError("plan mass must be non-negative");
    max_i = std::max(max_i, e.source);
    max_j = std::max(max_j, e.target);
    plan.entries.push_back(e);
  }
  plan.n_source = n_source < 0 ? max_i + 1 : n_source;
  plan.n_target = n_target < 0 ? max_j + 1 : n_target;
  if (max_i >= plan.n_source || max_j >= plan.n_target)
    throw IoError("plan index exceeds the measure size");
  std::sort(plan.entries.begin(), plan.entries.end(), [](const PlanEntry& a, const PlanEntry& b) {
    return a.source != b.source ? a.source < b.source : a.target < b.target;
  });
  return plan;
}

void write_vector(std::ostream& out, const Vector& v) {
  write_header(out, {"idx", "value"});
  for (Index k = 0; k < v.size(); ++k) out << k << ',' << format_number(v[k]) << '\n';
}

void write_grid_function(std::ostream& out, const GridFunction& g) {
  std::vector<std::string> names;
  add_prefixed(names, "c", g.points.cols());
  names.push_back("value");
  write_header(out, names);
  std::vector<double> cells;
  for (Index r = 0; r < g.size(); ++r) {
    cells.clear();
    for (Index c = 0; c < g.points.cols(); ++c) cells.push_back(g.points(r, c));
    cells.push_back(g.values[r]);
    write_cells(out, cells);
  }
}

GridFunction read_grid_function(const CsvTable& t) {
  GridFunction g{gather(t, t.prefixed("c")), t.rows.col(required(t, "value"))};
  g.validate();
  return g;
}

void write_potential(std::ostream& out, const IdentifiedPotential& p) {
  const Index d = p.z_points.cols();
  std::vector<std::string> names;
  add_prefixed(names, "z", d);
  names.push_back("v");
  add_prefixed(names, "eps", d);
  add_prefixed(names, "ubar_grad", d);
  write_header(out, names);
  std::vector<double> cells;
  for (Index r = 0; r < p.z_points.rows(); ++r) {
    cells.clear();
    for (Index c = 0; c < d; ++c) cells.push_back(p.z_points(r, c));
    cells.push_back(p.v_values[r]);
    for (Index c = 0; c < d; ++c) cells.push_back(p.inverse_demand(r, c));
    for (Index c = 0; c < d; ++c) cells.push_back(p.u_bar_grad(r, c));
    write_cells(out, cells);
  }
}

void write_forward_map(std::ostream& out, const ForwardMap& f) {
  const Index d = f.reference_points.cols();
  std::vector<std::string> names;
  add_prefixed(names, "eps", d);
  add_prefixed(names, "h", d);
  write_header(out, names);
  std::vector<double> cells;
  for (Index r = 0; r < f.reference_points.rows(); ++r) {
    cells.clear();
    for (Index c = 0; c < d; ++c) cells.push_back(f.reference_points(r, c));
    for (Index c = 0; c < d; ++c) cells.push_back(f.h(r, c));
    write_cells(out, cells);
  }
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace hedonic
