#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairdr/classifiers.hpp"
#include "fairdr/core_data.hpp"
#include "fairdr/ratio_matching.hpp"

namespace fairdr {

/// Two-sided clamp of classifier probabilities into [1 - tau, tau].
struct ThresholdPolicy {
  bool enabled = false;
  double tau = 0.99;

  static ThresholdPolicy off() { return {}; }
  static ThresholdPolicy at(double tau);
  void validate() const;
  /// "off" or the tau value.
  std::string label() const;
};

/// Divisor floor for ratio values.
inline constexpr double kRatioFloor = 1e-12;
/// Share of floored denominators above which a conditional metric is undefined.
inline constexpr double kDegenerateShare = 0.2;

/// A density-ratio estimation core: one of the probabilistic classifiers or
/// a ratio-matching method with its alpha.
struct CoreSpec {
  enum class Family { Classifier, RatioMatching };
  Family family = Family::Classifier;
  ClassifierKind classifier = ClassifierKind::Logistic;
  RatioMethod method = RatioMethod::Ulsif;
  double alpha = 0.0;

  static CoreSpec of(ClassifierKind kind);
  static CoreSpec lsif();
  static CoreSpec ulsif(double alpha);
  /// Accepts classifier names, "lsif", and "ulsif_<alpha>".
  static std::optional<CoreSpec> parse(std::string_view text);

  std::string name() const;
};

struct FairnessEstimate {
  MetricKind metric = MetricKind::Independence;
  std::string core;
  MetricOutcome outcome = MetricOutcome::undefined("not computed");
  std::optional<std::vector<double>> per_point_ratios;
  std::string config_fingerprint;
  /// Free-form note, e.g. unconverged solver or all-zero ratio model.
  std::string diagnostic;
};

double clamp_probability(double p, const ThresholdPolicy& policy);
double odds(double p);
/// [p / (1 - p)] * prior_ratio, prior_ratio = P(A=0)/P(A=1).
double bayes_point_ratio(double p, double prior_ratio);
/// odds(clamp(p_joint)) / odds(clamp(p_marginal)).
double conditional_point_ratio(double p_joint, double p_marginal, const ThresholdPolicy& policy);

/// Arithmetic mean as an outcome; undefined when the mean is not finite.
MetricOutcome average_ratios(std::span<const double> ratios);

/// Per-point r_joint / max(r_marginal, floor) with the degenerate-share rule.
MetricOutcome conditional_from_ratio_values(std::span<const double> joint, std::span<const double> marginal,
                                            std::vector<double>* per_point = nullptr);

/// Feature matrices of the classifier/ratio inputs for a metric. Independence
/// uses (y_pred); Separation uses joint (y_pred, y_true) and marginal (y_true);
/// Sufficiency uses joint (y_true, y_pred) and marginal (y_pred).
struct MetricInputs {
  Matrix joint;
  std::optional<Matrix> marginal;
};

MetricInputs metric_inputs(const Dataset& d, MetricKind metric);
std::vector<int> group_labels(const Dataset& d);

FairnessEstimate independence_via_classifier(const Dataset& d, ClassifierKind kind, const ThresholdPolicy& policy,
                                             const TrainConfig& cfg);
FairnessEstimate conditional_via_classifier(const Dataset& d, MetricKind metric, ClassifierKind kind,
                                            const ThresholdPolicy& policy, const TrainConfig& cfg);

/// Fits the classifier(s) once and reports one estimate per policy.
std::vector<FairnessEstimate> classifier_estimates(const Dataset& d, MetricKind metric, ClassifierKind kind,
                                                   std::span<const ThresholdPolicy> policies,
                                                   const TrainConfig& cfg);

FairnessEstimate independence_via_ratio_core(const Dataset& d, RatioMethod method, const RatioCoreConfig& cfg);
FairnessEstimate conditional_via_ratio_core(const Dataset& d, MetricKind metric, RatioMethod method,
                                            const RatioCoreConfig& cfg);

/// Ground truth for synthetic data whose privileged y_pred ~ N(mu, 1) and
/// unprivileged y_pred ~ N(0, 1): mean of exp(mu x - mu^2 / 2).
FairnessEstimate analytic_independence_gaussian(const Dataset& d, double mu);

struct EstimationSettings {
  TrainConfig classifier;
  RatioCoreConfig ratio;
};

/// Dispatches on the core family; ratio cores ignore the policy.
std::vector<FairnessEstimate> estimate(const Dataset& d, MetricKind metric, const CoreSpec& core,
                                       std::span<const ThresholdPolicy> policies,
                                       const EstimationSettings& settings);

}  // namespace fairdr
