#include "omcal/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "omcal/errors.hpp"

namespace omcal {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    std::string field = line.substr(start, comma == std::string::npos ? comma : comma - start);
    // trim spaces and a trailing CR
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r' || field.back() == '\t'))
      field.pop_back();
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.erase(0, 1);
    out.push_back(field);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& field, const std::filesystem::path& file, std::size_t line_no) {
  const char* begin = field.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw SchemaError(file.string() + ":" + std::to_string(line_no) + ": cannot parse number '" +
                      field + "'");
  return v;
}

CsvTable read_impl(const std::filesystem::path& file, std::span<const std::string> expected) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open file: " + file.string());

  std::string line;
  if (!std::getline(in, line))
    throw SchemaError(file.string() + ":1: empty file, expected header row");

  CsvTable table;
  table.header = split_line(line);
  if (!expected.empty()) {
    bool ok = table.header.size() == expected.size();
    for (std::size_t i = 0; ok && i < expected.size(); ++i) ok = table.header[i] == expected[i];
    if (!ok) {
      std::string want;
      for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
      throw SchemaError(file.string() + ":1: unexpected header, expected '" + want + "'");
    }
  }
  table.columns.resize(table.header.size());

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_line(line);
    if (fields.size() != table.header.size())
      throw SchemaError(file.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(table.header.size()) + " columns, got " +
                        std::to_string(fields.size()));
    for (std::size_t i = 0; i < fields.size(); ++i)
      table.columns[i].push_back(parse_double(fields[i], file, line_no));
  }
  return table;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& file, std::span<const std::string> expected_header) {
  return read_impl(file, expected_header);
}

CsvTable read_csv_any(const std::filesystem::path& file) { return read_impl(file, {}); }

std::string csv_to_string(std::span<const std::string> header,
                          std::span<const std::vector<double>> columns) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  char buf[40];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", columns[c][r]);
      if (c) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& file, std::span<const std::string> header,
               std::span<const std::vector<double>> columns) {
  for (std::size_t c = 1; c < columns.size(); ++c)
    if (columns[c].size() != columns.front().size())
      throw InvalidArgumentError("write_csv: ragged columns");
  std::ofstream out(file, std::ios::binary);  // binary keeps LF on all platforms
  if (!out) throw IoError("cannot write file: " + file.string());
  out << csv_to_string(header, columns);
  if (!out) throw IoError("write failed: " + file.string());
}

}  // namespace omcal
