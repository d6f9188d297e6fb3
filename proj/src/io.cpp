#include "setvalued/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "setvalued/errors.hpp"

namespace setvalued {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw InputError(source + ":" + std::to_string(line) + ": " + what);
}

struct Row {
  std::size_t line;
  std::string lab;
  Observation obs;
};

void write_rows(std::ostream& out, int n, const std::string& lab, const std::vector<Observation>& rows) {
  for (const auto& o : rows) {
    out << lab << ',' << o.id;
    const auto items = o.subset.indices();
    if (static_cast<int>(items.size()) != n) throw InputError("observation '" + o.id + "' has the wrong size");
    for (int i : items) out << ',' << (i + 1);
    out << '\n';
  }
}

void write_header(std::ostream& out, int n) {
  out << "lab,operator";
  for (int i = 1; i <= n; ++i) out << ",item" << i;
  out << '\n';
}

}  // namespace

GroundSet DataShape::ground() const {
  if (labels.empty()) return GroundSet(universe);
  if (static_cast<int>(labels.size()) != universe)
    throw InputError("manifest lists " + std::to_string(labels.size()) + " labels for " + std::to_string(universe) +
                     " items");
  return GroundSet(labels);
}

ParsedData read_csv(std::istream& in, const DataShape& shape, const std::string& source) {
  const int M = shape.universe;
  const int n = shape.subset_size;
  if (M < 2 || M > kMaxUniverse) throw InputError("universe size must lie in [2, " + std::to_string(kMaxUniverse) + "]");
  if (n < 1 || n >= M) throw InputError("subset size must satisfy 1 <= n < M");
  const GroundSet ground = shape.ground();
  const std::size_t width = static_cast<std::size_t>(n) + 2;

  std::vector<Row> rows;
  std::string line;
  std::size_t number = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++number;
    const std::string text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    auto fields = split_fields(text);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() >= 2 && fields[0] == "lab" && fields[1] == "operator") {
        if (fields.size() != width)
          fail(source, number, "header has " + std::to_string(fields.size() - 2) + " item columns, expected " +
                                   std::to_string(n));
        continue;
      }
    }
    if (fields.size() != width)
      fail(source, number, "row has " + std::to_string(fields.size()) + " fields, expected " + std::to_string(width) +
                               " (lab, operator and " + std::to_string(n) + " items)");
    if (fields[1].empty()) fail(source, number, "empty operator id");
    std::uint64_t mask = 0;
    for (std::size_t f = 2; f < fields.size(); ++f) {
      int item = 0;
      const auto& s = fields[f];
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), item);
      if (ec != std::errc() || ptr != s.data() + s.size()) fail(source, number, "item '" + s + "' is not an integer");
      if (item < 1 || item > M)
        fail(source, number, "unknown item index " + s + " (items are 1.." + std::to_string(M) + ")");
      const std::uint64_t bit = std::uint64_t{1} << (item - 1);
      if (mask & bit) fail(source, number, "duplicate item " + s + " in selection");
      mask |= bit;
    }
    rows.push_back({number, fields[0], {fields[1], Subset(mask)}});
  }

  bool constant_lab = true;
  for (const auto& r : rows) constant_lab = constant_lab && r.lab == rows.front().lab;
  if (constant_lab) {
    Dataset data{ground, n, {}};
    std::set<std::string> ids;
    for (auto& r : rows) {
      if (!ids.insert(r.obs.id).second) fail(source, r.line, "duplicate operator id '" + r.obs.id + "'");
      data.observations.push_back(std::move(r.obs));
    }
    data.validate();
    return data;
  }

  GroupedDataset data{ground, n, {}};
  std::map<std::string, std::size_t> lab_index;
  std::vector<std::set<std::string>> ids;
  for (auto& r : rows) {
    if (r.lab.empty()) fail(source, r.line, "empty lab id in grouped data");
    auto [it, fresh] = lab_index.emplace(r.lab, data.labs.size());
    if (fresh) {
      data.labs.push_back({r.lab, {}});
      ids.emplace_back();
    }
    if (!ids[it->second].insert(r.obs.id).second)
      fail(source, r.line, "duplicate operator id '" + r.obs.id + "' in lab '" + r.lab + "'");
    data.labs[it->second].observations.push_back(std::move(r.obs));
  }
  data.validate();
  return data;
}

ParsedData read_csv_file(const std::filesystem::path& path, const DataShape& shape) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open data file '" + path.string() + "'");
  return read_csv(in, shape, path.string());
}

DataShape read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("manifest '" + path.string() + "': " + e.what());
  }
  DataShape shape;
  try {
    shape.universe = j.at("universe_size").get<int>();
    shape.subset_size = j.at("subset_size").get<int>();
    if (j.contains("labels")) shape.labels = j.at("labels").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("manifest '" + path.string() + "': " + e.what());
  }
  return shape;
}

void write_csv(std::ostream& out, const GroupedDataset& data) {
  write_header(out, data.n);
  for (const auto& lab : data.labs) write_rows(out, data.n, lab.id, lab.observations);
}

void write_csv(std::ostream& out, const Dataset& data) {
  write_header(out, data.n);
  write_rows(out, data.n, "", data.observations);
}

}  // namespace setvalued
