#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace omcal {

// Minimal strict CSV layer for trace/spectrum/scan files: header row,
// comma separator, '.' decimal point, LF line endings, no quoting.

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;  // column-major

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

// Reads and validates against an expected header (exact column names, in
// order). Parse failures name the file and 1-based line.
CsvTable read_csv(const std::filesystem::path& file, std::span<const std::string> expected_header);

// Reads with any header (used where two layouts are admissible).
CsvTable read_csv_any(const std::filesystem::path& file);

void write_csv(const std::filesystem::path& file, std::span<const std::string> header,
               std::span<const std::vector<double>> columns);

// Serializes to a string with %.17g doubles, so a written file re-reads
// bit-identically and regeneration under a fixed seed is byte-stable.
std::string csv_to_string(std::span<const std::string> header,
                          std::span<const std::vector<double>> columns);

}  // namespace omcal
