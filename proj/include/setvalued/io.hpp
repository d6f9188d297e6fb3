#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "setvalued/data.hpp"

namespace setvalued {

/// Dimensions declared alongside a CSV file.
struct DataShape {
  int universe = 0;
  int subset_size = 0;
  /// Optional display labels for items 1..M.
  std::vector<std::string> labels;

  GroundSet ground() const;
};

/// A constant (or empty) lab column yields a pooled Dataset.
using ParsedData = std::variant<Dataset, GroupedDataset>;

/// Reads `lab,operator,item_1..item_n` rows; items are 1-based. Blank lines
/// and lines starting with '#' are skipped. Errors carry the line number.
ParsedData read_csv(std::istream& in, const DataShape& shape, const std::string& source = "<input>");
ParsedData read_csv_file(const std::filesystem::path& path, const DataShape& shape);

/// JSON manifest: {"universe_size": M, "subset_size": n, "labels": [...]}.
DataShape read_manifest(const std::filesystem::path& path);

void write_csv(std::ostream& out, const GroupedDataset& data);
/// Pooled data are written with an empty lab column.
void write_csv(std::ostream& out, const Dataset& data);

}  // namespace setvalued
