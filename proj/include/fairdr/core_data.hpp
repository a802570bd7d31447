#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fairdr {

/// One evaluation point of a regression model. `group` is 1 for the
/// privileged group and 0 otherwise; it is stored as an int so that
/// ill-formed inputs can be represented and reported by validate_dataset.
struct PredictionRecord {
  double y_true = 0.0;
  double y_pred = 0.0;
  int group = 0;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

struct Dataset {
  std::string name;
  std::vector<PredictionRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
};

struct GroupPriors {
  double p_a1 = 0.5;
  double p_a0 = 0.5;

  /// P(A=0) / P(A=1), the prior correction of the Bayes-rule odds.
  double prior_ratio() const noexcept { return p_a0 / p_a1; }
};

enum class MetricKind { Independence, Separation, Sufficiency };

std::string_view to_string(MetricKind kind) noexcept;
std::optional<MetricKind> parse_metric_kind(std::string_view text) noexcept;
inline constexpr MetricKind kAllMetrics[] = {MetricKind::Independence, MetricKind::Separation,
                                             MetricKind::Sufficiency};

/// Either a finite non-negative value or an explained undefined result.
class MetricOutcome {
 public:
  static MetricOutcome defined(double value);
  static MetricOutcome undefined(std::string reason);

  bool is_defined() const noexcept { return !reason_.has_value(); }
  /// Throws std::logic_error when undefined.
  double value() const;
  const std::string& reason() const;

  /// `value` with full precision, or `undefined:<reason>`.
  std::string to_string() const;

 private:
  MetricOutcome() = default;
  double value_ = 0.0;
  std::optional<std::string> reason_;
};

std::pair<std::vector<PredictionRecord>, std::vector<PredictionRecord>> split_by_group(
    const Dataset& d);

/// Empirical group proportions; throws SingleClassData when a group is absent.
GroupPriors estimate_priors(const Dataset& d);

struct ValidationReport {
  std::vector<std::string> violations;

  bool valid() const noexcept { return violations.empty(); }
  std::string summary() const;
};

ValidationReport validate_dataset(const Dataset& d);

/// Throws ValidationFailed with the report summary if `d` is not valid or
/// does not contain both groups.
void require_fairness_ready(const Dataset& d);

}  // namespace fairdr
