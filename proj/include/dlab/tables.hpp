#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlab {

// Delimited-text table: '#' comment/provenance lines, then a "schema" line,
// then a comma-separated header row and data rows.
struct Table {
  std::string schema;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    throw std::invalid_argument("Table: no column named " + name);
  }

  double num(std::size_t row, const std::string& name) const {
    return std::stod(rows.at(row).at(col(name)));
  }

  const std::string& str(std::size_t row, const std::string& name) const {
    return rows.at(row).at(col(name));
  }
};

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

inline Table load_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open table: " + path.string());
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (t.schema.empty() && line.rfind("schema=", 0) == 0) {
      t.schema = line.substr(7);
      continue;
    }
    if (!have_header) {
      t.columns = split_csv(line);
      have_header = true;
      continue;
    }
    auto cells = split_csv(line);
    if (cells.size() != t.columns.size()) {
      throw std::runtime_error("malformed row in " + path.string());
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.schema.empty()) {
    throw std::runtime_error("table missing schema line: " + path.string());
  }
  return t;
}

inline void write_table(const std::filesystem::path& path, const Table& t,
                        const std::vector<std::string>& comments = {}) {
  std::ofstream out(path);
  for (const auto& c : comments) out << "# " << c << "\n";
  out << "schema=" << t.schema << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    out << (i ? "," : "") << t.columns[i];
  }
  out << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i ? "," : "") << row[i];
    }
    out << "\n";
  }
}

}  // namespace dlab
