#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairdr/correlation.hpp"
#include "fairdr/fairness.hpp"

namespace fairdr {

inline constexpr std::string_view kReportHeader = "dataset_id,model_id,metric,core,threshold,value,seed,fingerprint";
inline constexpr std::string_view kCorrelationHeader =
    "partition,metric,threshold,method,core_a,core_b,coefficient,p_value,significant,n,cell";

/// One fairness value in the long-format report.
struct ReportRow {
  std::string dataset_id;
  std::string model_id;
  MetricKind metric = MetricKind::Independence;
  std::string core;
  std::string threshold;  // "off" or tau
  MetricOutcome value = MetricOutcome::undefined("not computed");
  std::uint64_t seed = 0;
  std::string fingerprint;
};

void write_report(std::ostream& out, const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_report(std::istream& in);
std::vector<ReportRow> read_report_file(const std::filesystem::path& path);

/// A dataset handed to the sweep together with its report keys.
struct SweepInput {
  std::string dataset_id;
  std::string model_id;
  Dataset data;
};

/// The 40 synthetic datasets; model_id is "synthetic".
std::vector<SweepInput> synthetic_inputs(std::uint64_t base_seed);
/// dataset_id = parent directory name, model_id = file stem.
SweepInput prediction_file_input(const std::filesystem::path& path);

struct SweepConfig {
  std::vector<CoreSpec> cores;
  std::vector<MetricKind> metrics;
  /// When enabled, both the unthresholded and the thresholded variant are reported.
  ThresholdPolicy threshold = ThresholdPolicy::at(0.99);
  std::vector<CorrelationMethod> correlation_methods{CorrelationMethod::Spearman, CorrelationMethod::Kendall};
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "sweep_out";
  EstimationSettings settings;
  std::size_t workers = 0;  // 0 = hardware concurrency

  /// Five classifiers, LSIF, and uLSIF at alpha in {0.25, 0.5, 0.75, 1}; all metrics.
  static SweepConfig defaults();
  void validate() const;
  std::vector<ThresholdPolicy> policies() const;
  /// key=value lines, stable order.
  std::string resolved() const;
};

/// Default core list with the given uLSIF alphas.
std::vector<CoreSpec> default_cores(const std::vector<double>& alphas);
std::vector<CoreSpec> parse_core_list(std::string_view text, const std::vector<double>& alphas);
std::vector<MetricKind> parse_metric_list(std::string_view text);
std::vector<double> parse_number_list(std::string_view text);

struct SweepResult {
  std::vector<ReportRow> rows;
  std::size_t failures = 0;
};

/// Every (input, metric, core, threshold variant) cell, in that nesting
/// order regardless of worker count. Failed cells become undefined rows.
SweepResult run_sweep(const SweepConfig& config, const std::vector<SweepInput>& inputs);

/// Rows for a single dataset and threshold policy.
SweepResult measure(const SweepInput& input, const std::vector<CoreSpec>& cores, const std::vector<MetricKind>& metrics,
                    const ThresholdPolicy& policy, const EstimationSettings& settings, std::uint64_t seed);

/// Synthetic dataset ids map to their mean interval; others are their own partition.
std::string partition_of(std::string_view dataset_id);

struct PairCorrelation {
  std::string partition;
  MetricKind metric = MetricKind::Independence;
  std::string threshold;
  CorrelationMethod method = CorrelationMethod::Spearman;
  std::string core_a;
  std::string core_b;
  CorrelationCell cell;
  /// Keys where both cores are defined (pairwise deletion).
  std::size_t effective_n = 0;
};

/// Groups rows by (partition, metric, threshold) and correlates every
/// ordered core pair over the (dataset_id, model_id) keys they share.
std::vector<PairCorrelation> correlate_report(const std::vector<ReportRow>& rows, CorrelationMethod method);

void write_correlations(std::ostream& out, const std::vector<PairCorrelation>& pairs);

struct ScatterPoint {
  std::string partition;
  std::string dataset_id;
  std::string model_id;
  std::string x;
  std::string y;
};

/// Scatter data per (metric, threshold, unordered core pair), one point per
/// dataset/model key. Map keys are file names.
std::map<std::string, std::vector<ScatterPoint>> scatter_data(const std::vector<ReportRow>& rows);

/// Writes report.csv, correlation_<method>.csv, scatter/*.csv, and
/// resolved_config.txt under config.output_dir.
void write_sweep_outputs(const SweepConfig& config, const SweepResult& result);

/// Writes the 40 synthetic CSV files and manifest.csv.
void write_synthetic_suite(std::uint64_t base_seed, const std::filesystem::path& out_dir);

/// Flat key=value configuration; '#' starts a comment.
std::map<std::string, std::string> read_key_values(std::istream& in);
std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path);

}  // namespace fairdr
