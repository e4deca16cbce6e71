#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ivqr::app {

//! Numeric table with named columns, stored column-major.
struct CsvTable
{
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  //! Throws InvalidArgument naming the column when absent.
  const std::vector<double>& column(const std::string& name) const;
};

//! Reads a UTF-8 CSV with a header row. Every cell must parse as a finite
//! number; errors name the row and column.
CsvTable read_csv(const std::filesystem::path& path);

//! Writes the shortest decimal form of each value that round-trips exactly.
void write_csv(const std::filesystem::path& path, const CsvTable& table);

//! Splits one CSV line on commas, honouring double quotes.
std::vector<std::string> split_csv_line(const std::string& line);

} // namespace ivqr::app
