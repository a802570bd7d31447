#include "fairdr/fairness.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fairdr/csv_io.hpp"
#include "fairdr/error.hpp"
#include "fairdr/fingerprint.hpp"

namespace fairdr {

namespace {

FairnessEstimate make_estimate(MetricKind metric, std::string core, std::vector<double> ratios,
                               const std::string& canonical) {
  FairnessEstimate est;
  est.metric = metric;
  est.core = std::move(core);
  est.outcome = average_ratios(ratios);
  est.per_point_ratios = std::move(ratios);
  est.config_fingerprint = fingerprint(canonical);
  return est;
}

std::string classifier_canonical(MetricKind metric, ClassifierKind kind, const ThresholdPolicy& policy,
                                 const TrainConfig& cfg) {
  return fmt::format("metric={};{};threshold={}", to_string(metric), describe(kind, cfg), policy.label());
}

std::string ratio_canonical(MetricKind metric, RatioMethod method, const RatioCoreConfig& cfg) {
  return fmt::format("metric={};core={};{}", to_string(metric), to_string(method), cfg.describe());
}

Matrix columns_of(const Dataset& d, bool pred_first, bool two_columns) {
  const auto n = static_cast<Eigen::Index>(d.size());
  Matrix X(n, two_columns ? 2 : 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = d.records[static_cast<std::size_t>(i)];
    X(i, 0) = pred_first ? r.y_pred : r.y_true;
    if (two_columns) X(i, 1) = pred_first ? r.y_true : r.y_pred;
  }
  return X;
}

Matrix rows_of_group(const Matrix& X, std::span<const int> labels, int group) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == group) idx.push_back(static_cast<Eigen::Index>(i));
  }
  return X(idx, Eigen::all);
}

void require_conditional(MetricKind metric) {
  if (metric == MetricKind::Independence) {
    throw Error(ErrorCode::InvalidArgument, "conditional estimators need Separation or Sufficiency");
  }
}

std::string format_alpha(double alpha) { return fmt::format("{}", alpha); }

}  // namespace

ThresholdPolicy ThresholdPolicy::at(double tau) {
  ThresholdPolicy p{true, tau};
  p.validate();
  return p;
}

void ThresholdPolicy::validate() const {
  if (enabled && !(tau > 0.5 && tau < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("threshold must lie in (0.5, 1), got {}", tau));
  }
}

std::string ThresholdPolicy::label() const { return enabled ? fmt::format("{}", tau) : std::string("off"); }

CoreSpec CoreSpec::of(ClassifierKind kind) {
  CoreSpec c;
  c.family = Family::Classifier;
  c.classifier = kind;
  return c;
}

CoreSpec CoreSpec::lsif() {
  CoreSpec c;
  c.family = Family::RatioMatching;
  c.method = RatioMethod::Lsif;
  return c;
}

CoreSpec CoreSpec::ulsif(double alpha) {
  CoreSpec c;
  c.family = Family::RatioMatching;
  c.method = RatioMethod::Ulsif;
  c.alpha = alpha;
  return c;
}

std::optional<CoreSpec> CoreSpec::parse(std::string_view text) {
  if (auto kind = parse_classifier_kind(text)) return of(*kind);
  if (text == "lsif") return lsif();
  if (text == "ulsif") return ulsif(0.0);
  constexpr std::string_view prefix = "ulsif_";
  if (text.substr(0, prefix.size()) == prefix) {
    double alpha = 0.0;
    if (parse_double(text.substr(prefix.size()), alpha) && alpha >= 0.0 && alpha <= 1.0) return ulsif(alpha);
  }
  return std::nullopt;
}

std::string CoreSpec::name() const {
  if (family == Family::Classifier) return std::string(to_string(classifier));
  if (method == RatioMethod::Lsif) return "lsif";
  return "ulsif_" + format_alpha(alpha);
}

double clamp_probability(double p, const ThresholdPolicy& policy) {
  if (!policy.enabled) return p;
  return std::min(std::max(p, 1.0 - policy.tau), policy.tau);
}

double odds(double p) { return p / (1.0 - p); }

double bayes_point_ratio(double p, double prior_ratio) { return odds(p) * prior_ratio; }

double conditional_point_ratio(double p_joint, double p_marginal, const ThresholdPolicy& policy) {
  return odds(clamp_probability(p_joint, policy)) / odds(clamp_probability(p_marginal, policy));
}

MetricOutcome average_ratios(std::span<const double> ratios) {
  if (ratios.empty()) return MetricOutcome::undefined("no data points");
  double sum = 0.0;
  for (double r : ratios) sum += r;
  const double mean = sum / static_cast<double>(ratios.size());
  if (!std::isfinite(mean)) return MetricOutcome::undefined("non-finite average");
  return MetricOutcome::defined(std::max(mean, 0.0));
}

MetricOutcome conditional_from_ratio_values(std::span<const double> joint, std::span<const double> marginal,
                                            std::vector<double>* per_point) {
  if (joint.size() != marginal.size()) {
    throw Error(ErrorCode::LengthMismatch, fmt::format("{} joint vs {} marginal ratios", joint.size(), marginal.size()));
  }
  std::vector<double> values(joint.size());
  std::size_t floored = 0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    const double denom = marginal[i];
    if (denom < kRatioFloor) ++floored;
    values[i] = std::max(joint[i], 0.0) / std::max(denom, kRatioFloor);
  }
  const bool degenerate = static_cast<double>(floored) > kDegenerateShare * static_cast<double>(joint.size());
  MetricOutcome outcome =
      degenerate ? MetricOutcome::undefined("denominator degenerate") : average_ratios(values);
  if (per_point) *per_point = std::move(values);
  return outcome;
}

MetricInputs metric_inputs(const Dataset& d, MetricKind metric) {
  MetricInputs in;
  switch (metric) {
    case MetricKind::Independence: in.joint = columns_of(d, true, false); break;
    case MetricKind::Separation:
      in.joint = columns_of(d, true, true);
      in.marginal = columns_of(d, false, false);
      break;
    case MetricKind::Sufficiency:
      in.joint = columns_of(d, false, true);
      in.marginal = columns_of(d, true, false);
      break;
  }
  return in;
}

std::vector<int> group_labels(const Dataset& d) {
  std::vector<int> labels;
  labels.reserve(d.size());
  for (const auto& r : d.records) labels.push_back(r.group);
  return labels;
}

std::vector<FairnessEstimate> classifier_estimates(const Dataset& d, MetricKind metric, ClassifierKind kind,
                                                   std::span<const ThresholdPolicy> policies,
                                                   const TrainConfig& cfg) {
  require_fairness_ready(d);
  for (const auto& p : policies) p.validate();
  const auto labels = group_labels(d);
  const MetricInputs inputs = metric_inputs(d, metric);
  const auto joint_model = fit_classifier(kind, inputs.joint, labels, cfg);
  const Vector p_joint = joint_model.predict(inputs.joint);
  bool converged = joint_model.converged();
  Vector p_marginal;
  if (inputs.marginal) {
    const auto marginal_model = fit_classifier(kind, *inputs.marginal, labels, cfg);
    p_marginal = marginal_model.predict(*inputs.marginal);
    converged = converged && marginal_model.converged();
  }
  const double prior_ratio = estimate_priors(d).prior_ratio();

  std::vector<FairnessEstimate> out;
  for (const auto& policy : policies) {
    std::vector<double> ratios(d.size());
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      ratios[i] = inputs.marginal ? conditional_point_ratio(p_joint[idx], p_marginal[idx], policy)
                                  : bayes_point_ratio(clamp_probability(p_joint[idx], policy), prior_ratio);
    }
    auto est = make_estimate(metric, std::string(to_string(kind)), std::move(ratios),
                             classifier_canonical(metric, kind, policy, cfg));
    if (!converged) est.diagnostic = "classifier did not reach tolerance";
    out.push_back(std::move(est));
  }
  return out;
}

FairnessEstimate independence_via_classifier(const Dataset& d, ClassifierKind kind, const ThresholdPolicy& policy,
                                             const TrainConfig& cfg) {
  const ThresholdPolicy policies[] = {policy};
  return std::move(classifier_estimates(d, MetricKind::Independence, kind, policies, cfg).front());
}

FairnessEstimate conditional_via_classifier(const Dataset& d, MetricKind metric, ClassifierKind kind,
                                            const ThresholdPolicy& policy, const TrainConfig& cfg) {
  require_conditional(metric);
  const ThresholdPolicy policies[] = {policy};
  return std::move(classifier_estimates(d, metric, kind, policies, cfg).front());
}

FairnessEstimate independence_via_ratio_core(const Dataset& d, RatioMethod method, const RatioCoreConfig& cfg) {
  require_fairness_ready(d);
  FairnessEstimate est;
  est.metric = MetricKind::Independence;
  est.core = method == RatioMethod::Lsif ? CoreSpec::lsif().name() : CoreSpec::ulsif(cfg.alpha).name();
  est.config_fingerprint = fingerprint(ratio_canonical(est.metric, method, cfg));
  const auto labels = group_labels(d);
  const Matrix X = metric_inputs(d, MetricKind::Independence).joint;
  try {
    const RatioModel model = fit_ratio(method, rows_of_group(X, labels, 1), rows_of_group(X, labels, 0), cfg);
    const Vector r = evaluate_ratio(model, X);
    std::vector<double> ratios(r.data(), r.data() + r.size());
    est.outcome = average_ratios(ratios);
    est.per_point_ratios = std::move(ratios);
    if (model.theta.isZero(0.0)) est.diagnostic = "ratio model has all-zero coefficients";
  } catch (const Error& e) {
    est.outcome = MetricOutcome::undefined(std::string(to_string(e.code())));
    est.diagnostic = e.what();
  }
  return est;
}

FairnessEstimate conditional_via_ratio_core(const Dataset& d, MetricKind metric, RatioMethod method,
                                            const RatioCoreConfig& cfg) {
  require_conditional(metric);
  require_fairness_ready(d);
  FairnessEstimate est;
  est.metric = metric;
  est.core = method == RatioMethod::Lsif ? CoreSpec::lsif().name() : CoreSpec::ulsif(cfg.alpha).name();
  est.config_fingerprint = fingerprint(ratio_canonical(metric, method, cfg));
  const auto labels = group_labels(d);
  const MetricInputs inputs = metric_inputs(d, metric);
  try {
    const RatioModel joint = fit_ratio(method, rows_of_group(inputs.joint, labels, 1),
                                       rows_of_group(inputs.joint, labels, 0), cfg);
    const RatioModel marginal = fit_ratio(method, rows_of_group(*inputs.marginal, labels, 1),
                                          rows_of_group(*inputs.marginal, labels, 0), cfg);
    const Vector rj = evaluate_ratio(joint, inputs.joint);
    const Vector rm = evaluate_ratio(marginal, *inputs.marginal);
    std::vector<double> per_point;
    est.outcome = conditional_from_ratio_values(std::span<const double>(rj.data(), static_cast<std::size_t>(rj.size())),
                                                std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())),
                                                &per_point);
    if (est.outcome.is_defined()) est.per_point_ratios = std::move(per_point);
  } catch (const Error& e) {
    est.outcome = MetricOutcome::undefined(std::string(to_string(e.code())));
    est.diagnostic = e.what();
  }
  return est;
}

FairnessEstimate analytic_independence_gaussian(const Dataset& d, double mu) {
  std::vector<double> ratios;
  ratios.reserve(d.size());
  for (const auto& r : d.records) ratios.push_back(std::exp(mu * r.y_pred - 0.5 * mu * mu));
  return make_estimate(MetricKind::Independence, "analytic", std::move(ratios), fmt::format("analytic;mu={}", mu));
}

std::vector<FairnessEstimate> estimate(const Dataset& d, MetricKind metric, const CoreSpec& core,
                                       std::span<const ThresholdPolicy> policies,
                                       const EstimationSettings& settings) {
  if (core.family == CoreSpec::Family::Classifier) {
    return classifier_estimates(d, metric, core.classifier, policies, settings.classifier);
  }
  RatioCoreConfig cfg = settings.ratio;
  cfg.alpha = core.method == RatioMethod::Lsif ? 0.0 : core.alpha;
  FairnessEstimate est = metric == MetricKind::Independence ? independence_via_ratio_core(d, core.method, cfg)
                                                            : conditional_via_ratio_core(d, metric, core.method, cfg);
  return std::vector<FairnessEstimate>(policies.size(), est);
}

}  // namespace fairdr
