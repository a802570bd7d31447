#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "fairdr/core_data.hpp"

namespace fairdr {

inline constexpr std::string_view kPredictionHeader = "y_true,y_pred,group";

/// Parses the prediction CSV format. Errors are ParseError with the
/// 1-based line number in the message.
Dataset read_predictions(std::istream& in, std::string name);
Dataset read_predictions_file(const std::filesystem::path& path);

void write_predictions(std::ostream& out, const Dataset& d);
void write_predictions_file(const std::filesystem::path& path, const Dataset& d);

/// Generic numeric table with a header row, used for feature tables.
struct NumericTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Throws InvalidArgument when the column does not exist.
  std::size_t column_index(std::string_view name) const;
};

NumericTable read_numeric_table(std::istream& in);
NumericTable read_numeric_table_file(const std::filesystem::path& path);

/// Splits one CSV line on commas. Quoting is not supported.
std::vector<std::string_view> split_csv_line(std::string_view line);

/// Strict full-string parse; returns false on trailing garbage.
bool parse_double(std::string_view text, double& out) noexcept;
bool parse_int(std::string_view text, long long& out) noexcept;

}  // namespace fairdr
