#include "fairdr/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "fairdr/error.hpp"

namespace fairdr {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, fmt::format("{} vs {} values", x.size(), y.size()));
  }
  if (x.size() < 3) throw Error(ErrorCode::InsufficientData, fmt::format("need n >= 3, got {}", x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw Error(ErrorCode::NonFiniteInput, fmt::format("non-finite value at index {}", i));
    }
  }
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
}

struct CenteredRanks {
  std::vector<double> x;
  std::vector<double> y;
  double sxx = 0.0;
  double syy = 0.0;
};

CenteredRanks centered_ranks(std::span<const double> x, std::span<const double> y) {
  CenteredRanks out{rank_with_ties(x), rank_with_ties(y)};
  const double mean = (static_cast<double>(x.size()) + 1.0) / 2.0;
  for (auto& v : out.x) {
    v -= mean;
    out.sxx += v * v;
  }
  for (auto& v : out.y) {
    v -= mean;
    out.syy += v * v;
  }
  return out;
}

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

// Merge sort on `v`, returning the number of inversions (strictly greater
// elements moved past smaller ones).
std::uint64_t sort_count_swaps(std::vector<double>& v, std::vector<double>& buffer, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = sort_count_swaps(v, buffer, lo, mid) + sort_count_swaps(v, buffer, mid, hi);
  std::size_t i = lo;
  std::size_t j = mid;
  std::size_t k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      buffer[k++] = v[j++];
      swaps += mid - i;
    } else {
      buffer[k++] = v[i++];
    }
  }
  while (i < mid) buffer[k++] = v[i++];
  while (j < hi) buffer[k++] = v[j++];
  std::copy(buffer.begin() + static_cast<std::ptrdiff_t>(lo), buffer.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

struct TieSums {
  double pairs = 0.0;      // sum t(t-1)/2
  double v_term = 0.0;     // sum t(t-1)(2t+5)
  double t1 = 0.0;         // sum t(t-1)
  double t2 = 0.0;         // sum t(t-1)(t-2)
};

// `sorted` must be sorted; accumulates tie-group statistics.
TieSums tie_sums(const std::vector<double>& sorted) {
  TieSums s;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    s.pairs += t * (t - 1.0) / 2.0;
    s.v_term += t * (t - 1.0) * (2.0 * t + 5.0);
    s.t1 += t * (t - 1.0);
    s.t2 += t * (t - 1.0) * (t - 2.0);
    i = j;
  }
  return s;
}

}  // namespace

std::string_view to_string(CorrelationMethod method) noexcept {
  return method == CorrelationMethod::Spearman ? "spearman" : "kendall";
}

std::optional<CorrelationMethod> parse_correlation_method(std::string_view text) noexcept {
  if (text == "spearman") return CorrelationMethod::Spearman;
  if (text == "kendall") return CorrelationMethod::Kendall;
  return std::nullopt;
}

std::vector<double> rank_with_ties(std::span<const double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw Error(ErrorCode::NonFiniteInput, fmt::format("non-finite value at index {}", i));
  }
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    // Positions i..j-1 (0-based) share rank mean((i+1)..j).
    const double shared = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = shared;
    i = j;
  }
  return ranks;
}

double spearman_exact_p_value(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  if (x.size() > 12) throw Error(ErrorCode::InvalidArgument, "exact permutation p-value limited to n <= 12");
  const CenteredRanks r = centered_ranks(x, y);
  double observed = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) observed += r.x[i] * r.y[i];
  const double cutoff = std::abs(observed) * (1.0 - 1e-12) - 1e-12;
  std::vector<std::size_t> perm(r.y.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::uint64_t extreme = 0;
  std::uint64_t total = 0;
  do {
    double dot = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) dot += r.x[i] * r.y[perm[i]];
    extreme += std::abs(dot) >= cutoff;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(extreme) / static_cast<double>(total);
}

CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  if (is_constant(x) || is_constant(y)) throw Error(ErrorCode::DegenerateInput, "constant input vector");
  const CenteredRanks r = centered_ranks(x, y);
  double sxy = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) sxy += r.x[i] * r.y[i];
  CorrelationResult out;
  out.method = CorrelationMethod::Spearman;
  out.n = x.size();
  out.coefficient = clamp_unit(sxy / std::sqrt(r.sxx * r.syy));
  if (out.n <= kExactSpearmanMaxN) {
    out.p_value = spearman_exact_p_value(x, y);
  } else if (std::abs(out.coefficient) >= 1.0) {
    out.p_value = 0.0;
  } else {
    const double dof = static_cast<double>(out.n) - 2.0;
    const double rho = out.coefficient;
    const double t = rho * std::sqrt(dof / ((1.0 - rho) * (1.0 + rho)));
    const boost::math::students_t dist(dof);
    out.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
  }
  out.significant = out.p_value < kSignificanceLevel;
  return out;
}

CorrelationResult kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  if (is_constant(x) || is_constant(y)) throw Error(ErrorCode::DegenerateInput, "constant input vector");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  std::vector<double> xs(n);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ys[i] = y[order[i]];
  }
  // Pairs tied in both coordinates.
  double joint_ties = 0.0;
  {
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i + 1;
      while (j < n && xs[j] == xs[i] && ys[j] == ys[i]) ++j;
      const double t = static_cast<double>(j - i);
      joint_ties += t * (t - 1.0) / 2.0;
      i = j;
    }
  }
  const TieSums x_ties = tie_sums(xs);
  std::vector<double> buffer(n);
  const auto swaps = static_cast<double>(sort_count_swaps(ys, buffer, 0, n));
  const TieSums y_ties = tie_sums(ys);

  const double nd = static_cast<double>(n);
  const double n0 = nd * (nd - 1.0) / 2.0;
  // C - D over pairs untied in both coordinates.
  const double s = n0 - x_ties.pairs - y_ties.pairs + joint_ties - 2.0 * swaps;

  CorrelationResult out;
  out.method = CorrelationMethod::Kendall;
  out.n = n;
  out.coefficient = clamp_unit(s / std::sqrt((n0 - x_ties.pairs) * (n0 - y_ties.pairs)));

  const double v0 = nd * (nd - 1.0) * (2.0 * nd + 5.0);
  const double v1 = x_ties.t1 * y_ties.t1 / (2.0 * nd * (nd - 1.0));
  const double v2 = x_ties.t2 * y_ties.t2 / (9.0 * nd * (nd - 1.0) * (nd - 2.0));
  const double variance = (v0 - x_ties.v_term - y_ties.v_term) / 18.0 + v1 + v2;
  if (variance > 0.0) {
    const double z = std::abs(s) / std::sqrt(variance);
    out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  } else {
    out.p_value = 1.0;
  }
  out.significant = out.p_value < kSignificanceLevel;
  return out;
}

CorrelationResult correlate(CorrelationMethod method, std::span<const double> x, std::span<const double> y) {
  return method == CorrelationMethod::Spearman ? spearman(x, y) : kendall_tau_b(x, y);
}

CorrelationMatrix correlation_matrix(const std::vector<std::pair<std::string, std::vector<double>>>& values,
                                     CorrelationMethod method) {
  CorrelationMatrix m;
  const std::size_t k = values.size();
  for (const auto& [name, v] : values) {
    m.names.push_back(name);
    if (v.size() != values.front().second.size()) {
      throw Error(ErrorCode::LengthMismatch, fmt::format("core '{}' has {} values, expected {}", name, v.size(),
                                                         values.front().second.size()));
    }
    if (v.size() < 3) throw Error(ErrorCode::InsufficientData, fmt::format("core '{}' has fewer than 3 values", name));
  }
  m.cells.assign(k, std::vector<CorrelationCell>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      CorrelationCell cell;
      try {
        cell.result = correlate(method, values[i].second, values[j].second);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateInput) throw;
        cell.reason = "degenerate input";
      }
      m.cells[i][j] = cell;
      m.cells[j][i] = cell;
    }
  }
  return m;
}

std::string format_cell(const CorrelationCell& cell) {
  if (!cell.result) return "nan";
  return fmt::format("{:.2f}{}", cell.result->coefficient, cell.result->significant ? "*" : "");
}

}  // namespace fairdr
