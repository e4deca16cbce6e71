#include "ivqravg/app/csv.hpp"

#include "ivqravg/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ivqr::app {

namespace {

std::string trim(const std::string& s)
{
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

} // namespace

const std::vector<double>& CsvTable::column(const std::string& name) const
{
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return columns[j];
  }
  throw InvalidArgument("column '" + name + "' not found in the data file");
}

std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(trim(cell));
  return out;
}

CsvTable read_csv(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open data file '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("data file '" + path.string() + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  table.header = split_csv_line(line);
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j].empty()) throw InvalidArgument("empty column name at position " + std::to_string(j + 1));
    for (std::size_t k = 0; k < j; ++k) {
      if (table.header[k] == table.header[j]) {
        throw InvalidArgument("duplicate column name '" + table.header[j] + "'");
      }
    }
  }
  table.columns.resize(table.header.size());

  std::size_t row = 1; // file line, header included
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != table.header.size()) {
      throw InvalidArgument("line " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(table.header.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string& text = cells[j];
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw InvalidArgument("non-numeric cell at line " + std::to_string(row) + ", column '" +
                              table.header[j] + "': '" + text + "'");
      }
      table.columns[j].push_back(value);
    }
  }
  return table;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table)
{
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    out << (j ? "," : "") << table.header[j];
  }
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof buf, table.columns[j][i]);
      out << (j ? "," : "") << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

} // namespace ivqr::app
