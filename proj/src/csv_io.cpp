#include "fairdr/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "fairdr/error.hpp"

namespace fairdr {

namespace {

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::string_view trim_spaces(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim_spaces(line.substr(start)));
      break;
    }
    fields.push_back(trim_spaces(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

bool parse_double(std::string_view text, double& out) noexcept {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_int(std::string_view text, long long& out) noexcept {
  if (text.empty()) return false;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

Dataset read_predictions(std::istream& in, std::string name) {
  Dataset d;
  d.name = std::move(name);
  std::string raw;
  std::size_t line_no = 0;
  if (!std::getline(in, raw)) throw Error(ErrorCode::ParseError, "line 1: missing header");
  ++line_no;
  auto header = trim_cr(raw);
  if (header.size() >= 3 && header.substr(0, 3) == "\xEF\xBB\xBF") header.remove_prefix(3);
  if (header != kPredictionHeader) {
    throw Error(ErrorCode::ParseError,
                fmt::format("line 1: expected header '{}', got '{}'", kPredictionHeader, header));
  }
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim_cr(raw);
    if (trim_spaces(line).empty()) {
      throw Error(ErrorCode::ParseError, fmt::format("line {}: blank line", line_no));
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      throw Error(ErrorCode::ParseError,
                  fmt::format("line {}: expected 3 fields, got {}", line_no, fields.size()));
    }
    PredictionRecord r;
    long long group = 0;
    if (!parse_double(fields[0], r.y_true) || !parse_double(fields[1], r.y_pred) ||
        !parse_int(fields[2], group)) {
      throw Error(ErrorCode::ParseError, fmt::format("line {}: malformed row '{}'", line_no, line));
    }
    if (group != 0 && group != 1) {
      throw Error(ErrorCode::ParseError,
                  fmt::format("line {}: group label out of {{0,1}}: {}", line_no, group));
    }
    r.group = static_cast<int>(group);
    d.records.push_back(r);
  }
  return d;
}

Dataset read_predictions_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_predictions(in, path.stem().string());
}

void write_predictions(std::ostream& out, const Dataset& d) {
  out << kPredictionHeader << '\n';
  for (const auto& r : d.records) {
    out << fmt::format("{},{},{}\n", r.y_true, r.y_pred, r.group);
  }
}

void write_predictions_file(const std::filesystem::path& path, const Dataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_predictions(out, d);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::size_t NumericTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw Error(ErrorCode::InvalidArgument, fmt::format("no column named '{}'", name));
}

NumericTable read_numeric_table(std::istream& in) {
  NumericTable table;
  std::string raw;
  if (!std::getline(in, raw)) throw Error(ErrorCode::ParseError, "line 1: missing header");
  for (auto f : split_csv_line(trim_cr(raw))) table.columns.emplace_back(f);
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim_cr(raw);
    if (trim_spaces(line).empty()) {
      throw Error(ErrorCode::ParseError, fmt::format("line {}: blank line", line_no));
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != table.columns.size()) {
      throw Error(ErrorCode::ParseError,
                  fmt::format("line {}: expected {} fields, got {}", line_no,
                              table.columns.size(), fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (!parse_double(fields[j], row[j])) {
        throw Error(ErrorCode::ParseError,
                    fmt::format("line {}: non-numeric field '{}'", line_no, fields[j]));
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

NumericTable read_numeric_table_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_numeric_table(in);
}

}  // namespace fairdr
