#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hedonic/conjugate.hpp"
#include "hedonic/identify.hpp"
#include "hedonic/measures.hpp"
#include "hedonic/ot.hpp"

namespace hedonic {

/// Raised on unreadable or malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Header plus numeric rows of a comma-separated table.
struct CsvTable {
  std::vector<std::string> header;
  Matrix rows;

  Index column(const std::string& name) const;  // -1 if absent
  /// Columns named prefix_1, prefix_2, ... in order.
  std::vector<Index> prefixed(const std::string& prefix) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Shortest round-trip representation of a double.
std::string format_number(double v);

void write_dataset(std::ostream& out, const MarketDataset& d);
MarketDataset read_dataset(const CsvTable& t);

void write_measure(std::ostream& out, const DiscreteMeasure& m);
DiscreteMeasure read_measure(const CsvTable& t);

void write_plan(std::ostream& out, const TransportPlan& plan);
/// Sizes default to one past the largest index present.
TransportPlan read_plan(const CsvTable& t, Index n_source = -1, Index n_target = -1);

void write_vector(std::ostream& out, const Vector& v);

void write_grid_function(std::ostream& out, const GridFunction& g);
GridFunction read_grid_function(const CsvTable& t);

void write_potential(std::ostream& out, const IdentifiedPotential& p);
void write_forward_map(std::ostream& out, const ForwardMap& f);

/// Writes `content` to `path`, creating parent directories.
void write_file(const std::string& path, const std::string& content);

}  // namespace hedonic
