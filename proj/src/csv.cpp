#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "panellp/error.hpp"
#include "panellp/panel_data.hpp"

namespace panellp {
namespace {

std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_value(std::string_view text, std::size_t row, const std::string& column) {
  text = trim(text);
  if (text.empty()) return kMissing;
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ParseError(row, column, "'" + std::string(text) + "' is not a finite real number");
  }
  return v;
}

std::int64_t parse_time(std::string_view text, std::size_t row, const std::string& column) {
  text = trim(text);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(row, column, "'" + std::string(text) + "' is not an integer time index");
  }
  return v;
}

}  // namespace

PanelDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file '" + path + "'");
  return read_csv(in, schema);
}

PanelDataset read_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("data file is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_record(line);

  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name(trim(header[c]));
    if (!pos.emplace(name, c).second) {
      throw ValidationError("column '" + name + "' appears twice in the header");
    }
  }
  auto require = [&](const std::string& name) {
    auto it = pos.find(name);
    if (it == pos.end()) throw ValidationError("required column '" + name + "' not found");
    return it->second;
  };
  const std::size_t unit_col = require(schema.unit_column);
  const std::size_t time_col = require(schema.time_column);

  std::vector<std::string> names;
  std::vector<std::size_t> var_cols;
  if (schema.variables.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == unit_col || c == time_col) continue;
      names.emplace_back(trim(header[c]));
      var_cols.push_back(c);
    }
  } else {
    for (const auto& v : schema.variables) {
      auto it = pos.find(v);
      if (it == pos.end()) throw UnknownVariable("unknown variable '" + v + "'");
      names.push_back(v);
      var_cols.push_back(it->second);
    }
  }

  std::vector<std::string> units;
  std::vector<std::int64_t> times;
  std::vector<std::vector<double>> values(names.size());
  std::vector<std::size_t> line_of;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_record(line);
    if (fields.size() != header.size()) {
      throw ParseError(lineno, "*",
                       "expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()));
    }
    const auto unit = trim(fields[unit_col]);
    if (unit.empty()) throw ParseError(lineno, schema.unit_column, "empty unit identifier");
    units.emplace_back(unit);
    times.push_back(parse_time(fields[time_col], lineno, schema.time_column));
    for (std::size_t v = 0; v < names.size(); ++v) {
      values[v].push_back(parse_value(fields[var_cols[v]], lineno, names[v]));
    }
    line_of.push_back(lineno);
  }

  // Group by unit in order of first appearance, then sort by time.
  std::unordered_map<std::string, std::size_t> rank;
  for (const auto& u : units) rank.emplace(u, rank.size());
  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = rank.at(units[a]);
    const auto rb = rank.at(units[b]);
    return ra != rb ? ra < rb : times[a] < times[b];
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto a = order[k - 1];
    const auto b = order[k];
    if (units[a] == units[b] && times[a] == times[b]) {
      throw DuplicateKey("duplicate (unit, time) = (" + units[b] + ", " +
                         std::to_string(times[b]) + ") at lines " + std::to_string(line_of[a]) +
                         " and " + std::to_string(line_of[b]));
    }
  }

  std::vector<std::string> sorted_units(order.size());
  std::vector<std::int64_t> sorted_times(order.size());
  std::vector<std::vector<double>> sorted_values(names.size(),
                                                 std::vector<double>(order.size()));
  for (std::size_t k = 0; k < order.size(); ++k) {
    sorted_units[k] = units[order[k]];
    sorted_times[k] = times[order[k]];
    for (std::size_t v = 0; v < names.size(); ++v) sorted_values[v][k] = values[v][order[k]];
  }
  return PanelDataset::from_grouped_rows(sorted_units, std::move(sorted_times), std::move(names),
                                         std::move(sorted_values));
}

}  // namespace panellp
