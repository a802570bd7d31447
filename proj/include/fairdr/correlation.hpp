#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fairdr {

enum class CorrelationMethod { Spearman, Kendall };

std::string_view to_string(CorrelationMethod method) noexcept;
std::optional<CorrelationMethod> parse_correlation_method(std::string_view text) noexcept;

inline constexpr double kSignificanceLevel = 0.05;
/// Largest n for which Spearman p-values come from the exact permutation law.
inline constexpr std::size_t kExactSpearmanMaxN = 9;

struct CorrelationResult {
  double coefficient = 0.0;
  /// Two-sided.
  double p_value = 1.0;
  bool significant = false;
  std::size_t n = 0;
  CorrelationMethod method = CorrelationMethod::Spearman;
};

/// 1-based average ranks; ties share the mean of their positions.
std::vector<double> rank_with_ties(std::span<const double> x);

/// Pearson correlation of tied ranks. p-value from the exact permutation
/// distribution for n <= 9, else the t approximation with n - 2 dof
/// (|rho| = 1 reports p = 0). Throws LengthMismatch, InsufficientData
/// (n < 3) and DegenerateInput (constant input).
CorrelationResult spearman(std::span<const double> x, std::span<const double> y);

/// Exact two-sided permutation p-value of Spearman's rho over all n!
/// pairings; feasible only for small n.
double spearman_exact_p_value(std::span<const double> x, std::span<const double> y);

/// Kendall tau-b via Knight's O(n log n) algorithm; normal-approximation
/// p-value with tie-adjusted variance of S = C - D.
CorrelationResult kendall_tau_b(std::span<const double> x, std::span<const double> y);

CorrelationResult correlate(CorrelationMethod method, std::span<const double> x, std::span<const double> y);

struct CorrelationCell {
  std::optional<CorrelationResult> result;
  /// Why the cell is empty (degenerate input, too few values).
  std::string reason;
};

/// Symmetric matrix over named value vectors; the diagonal is left empty.
struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<CorrelationCell>> cells;

  const CorrelationCell& at(std::size_t i, std::size_t j) const { return cells[i][j]; }
};

CorrelationMatrix correlation_matrix(const std::vector<std::pair<std::string, std::vector<double>>>& values,
                                     CorrelationMethod method);

/// "0.82*" / "-0.35" / "nan" as in the published tables.
std::string format_cell(const CorrelationCell& cell);

}  // namespace fairdr
