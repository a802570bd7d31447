#include "fairdr/core_data.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "fairdr/error.hpp"

namespace fairdr {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::SingleClassData: return "SingleClassData";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::KernelMatrixTooLarge: return "KernelMatrixTooLarge";
    case ErrorCode::EmptySampleSet: return "EmptySampleSet";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string_view to_string(MetricKind kind) noexcept {
  switch (kind) {
    case MetricKind::Independence: return "independence";
    case MetricKind::Separation: return "separation";
    case MetricKind::Sufficiency: return "sufficiency";
  }
  return "unknown";
}

std::optional<MetricKind> parse_metric_kind(std::string_view text) noexcept {
  for (auto kind : kAllMetrics) {
    if (text == to_string(kind)) return kind;
  }
  return std::nullopt;
}

MetricOutcome MetricOutcome::defined(double value) {
  if (!std::isfinite(value) || value < 0.0) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("metric value must be finite and non-negative, got {}", value));
  }
  MetricOutcome out;
  out.value_ = value;
  return out;
}

MetricOutcome MetricOutcome::undefined(std::string reason) {
  MetricOutcome out;
  out.reason_ = std::move(reason);
  return out;
}

double MetricOutcome::value() const {
  if (reason_) throw std::logic_error("MetricOutcome is undefined: " + *reason_);
  return value_;
}

const std::string& MetricOutcome::reason() const {
  static const std::string kEmpty;
  return reason_ ? *reason_ : kEmpty;
}

std::string MetricOutcome::to_string() const {
  if (reason_) return "undefined:" + *reason_;
  return fmt::format("{}", value_);
}

std::pair<std::vector<PredictionRecord>, std::vector<PredictionRecord>> split_by_group(
    const Dataset& d) {
  std::vector<PredictionRecord> privileged;
  std::vector<PredictionRecord> unprivileged;
  for (const auto& r : d.records) {
    (r.group == 1 ? privileged : unprivileged).push_back(r);
  }
  return {std::move(privileged), std::move(unprivileged)};
}

GroupPriors estimate_priors(const Dataset& d) {
  std::size_t n1 = 0;
  for (const auto& r : d.records) n1 += (r.group == 1);
  const std::size_t n = d.records.size();
  if (n1 == 0 || n1 == n) {
    throw Error(ErrorCode::SingleClassData,
                fmt::format("dataset '{}' has {} privileged of {} records", d.name, n1, n));
  }
  GroupPriors priors;
  priors.p_a1 = static_cast<double>(n1) / static_cast<double>(n);
  priors.p_a0 = 1.0 - priors.p_a1;
  return priors;
}

std::string ValidationReport::summary() const {
  if (violations.empty()) return "valid";
  std::string out = fmt::format("{} violation(s)", violations.size());
  for (const auto& v : violations) out += "; " + v;
  return out;
}

ValidationReport validate_dataset(const Dataset& d) {
  ValidationReport report;
  if (d.records.empty()) {
    report.violations.emplace_back("dataset is empty");
    return report;
  }
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& r = d.records[i];
    if (!std::isfinite(r.y_true)) report.violations.push_back(fmt::format("non-finite y_true at index {}", i));
    if (!std::isfinite(r.y_pred)) report.violations.push_back(fmt::format("non-finite y_pred at index {}", i));
    if (r.group != 0 && r.group != 1) {
      report.violations.push_back(fmt::format("group label out of {{0,1}} at index {}", i));
    }
  }
  return report;
}

void require_fairness_ready(const Dataset& d) {
  const auto report = validate_dataset(d);
  if (!report.valid()) throw Error(ErrorCode::ValidationFailed, report.summary());
  estimate_priors(d);
}

}  // namespace fairdr
