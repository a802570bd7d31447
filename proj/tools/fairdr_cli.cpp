// Command-line front end: synth, zoo, measure, sweep, correlate.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fairdr/csv_io.hpp"
#include "fairdr/error.hpp"
#include "fairdr/harness.hpp"
#include "fairdr/model_zoo.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitPartial = 2;

struct CommonFlags {
  std::uint64_t seed = 0;
  std::string cores;
  std::string metrics;
  std::string threshold;
  std::string alpha = "0.25,0.5,0.75,1";
  std::string out;
  std::string config;
  std::string corr = "both";
  double lambda = 1e-3;
  std::size_t workers = 0;
};

fairdr::ThresholdPolicy parse_threshold(const std::string& text) {
  if (text == "off") return fairdr::ThresholdPolicy::off();
  double tau = 0.0;
  if (!fairdr::parse_double(text, tau)) {
    throw fairdr::Error(fairdr::ErrorCode::InvalidArgument, "threshold must be a number or 'off'");
  }
  return fairdr::ThresholdPolicy::at(tau);
}

std::vector<fairdr::CorrelationMethod> parse_corr(const std::string& text) {
  if (text == "both") return {fairdr::CorrelationMethod::Spearman, fairdr::CorrelationMethod::Kendall};
  const auto m = fairdr::parse_correlation_method(text);
  if (!m) throw fairdr::Error(fairdr::ErrorCode::InvalidArgument, "--corr must be spearman, kendall or both");
  return {*m};
}

// Config-file values first, then any flag given on the command line.
void resolve_flags(CLI::App& cmd, CommonFlags& flags) {
  if (flags.config.empty()) return;
  const auto kv = fairdr::read_key_value_file(flags.config);
  auto take = [&](const char* key, const char* flag, auto& target) {
    const auto it = kv.find(key);
    if (it == kv.end() || cmd.count(flag) > 0) return;
    if constexpr (std::is_same_v<std::decay_t<decltype(target)>, std::string>) {
      target = it->second;
    } else {
      double v = 0.0;
      if (!fairdr::parse_double(it->second, v)) {
        throw fairdr::Error(fairdr::ErrorCode::ParseError, fmt::format("config key '{}' is not numeric", key));
      }
      target = static_cast<std::decay_t<decltype(target)>>(v);
    }
  };
  take("seed", "--seed", flags.seed);
  take("cores", "--cores", flags.cores);
  take("metrics", "--metrics", flags.metrics);
  take("threshold", "--threshold", flags.threshold);
  take("alpha", "--alpha", flags.alpha);
  take("out", "--out", flags.out);
  take("corr", "--corr", flags.corr);
  take("lambda", "--lambda", flags.lambda);
  take("workers", "--workers", flags.workers);
}

void add_common(CLI::App& cmd, CommonFlags& flags) {
  cmd.add_option("--seed", flags.seed, "RNG seed");
  cmd.add_option("--cores", flags.cores, "Comma list: logistic,ridge,lasso,klr_gaussian,klr_polynomial,lsif,ulsif,ulsif_<a>,classifiers,all");
  cmd.add_option("--metrics", flags.metrics, "Comma list: independence,separation,sufficiency,all");
  cmd.add_option("--threshold", flags.threshold, "Probability clamp tau or 'off'");
  cmd.add_option("--alpha", flags.alpha, "uLSIF alphas used when 'ulsif' or 'all' is listed");
  cmd.add_option("--out", flags.out, "Output path");
  cmd.add_option("--config", flags.config, "key=value configuration file");
  cmd.add_option("--lambda", flags.lambda, "Classifier regularization strength");
}

int run_synth(const CommonFlags& flags) {
  const std::filesystem::path out = flags.out.empty() ? "synthetic" : flags.out;
  fairdr::write_synthetic_suite(flags.seed, out);
  std::cerr << fmt::format("wrote 40 datasets and manifest.csv to {}\n", out.string());
  return kExitOk;
}

int run_zoo(const CommonFlags& flags, const std::string& input, const std::string& target_col,
            const std::string& group_col, double split, const std::string& models) {
  const auto table = fairdr::read_numeric_table_file(input);
  const auto features = fairdr::feature_table_from(table, target_col, group_col);
  const auto [train, test] = fairdr::train_test_split(features, split, flags.seed);
  std::vector<fairdr::RegressorKind> kinds;
  if (models.empty()) {
    kinds = fairdr::default_zoo();
  } else {
    for (auto item : fairdr::split_csv_line(models)) {
      const auto kind = fairdr::RegressorKind::parse(item);
      if (!kind) throw fairdr::Error(fairdr::ErrorCode::InvalidArgument, fmt::format("unknown model '{}'", item));
      kinds.push_back(*kind);
    }
  }
  const std::filesystem::path out =
      flags.out.empty() ? std::filesystem::path("zoo") / std::filesystem::path(input).stem() : std::filesystem::path(flags.out);
  std::filesystem::create_directories(out);
  for (const auto& kind : kinds) {
    std::vector<std::string> warnings;
    fairdr::Dataset d;
    d.name = kind.name();
    d.records = fairdr::fit_predict(kind, train, test, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << kind.name() << ": " << w << '\n';
    const auto report = fairdr::validate_dataset(d);
    if (!report.valid()) throw fairdr::Error(fairdr::ErrorCode::ValidationFailed, report.summary());
    fairdr::write_predictions_file(out / (kind.name() + ".csv"), d);
  }
  std::cerr << fmt::format("wrote {} prediction files to {}\n", kinds.size(), out.string());
  return kExitOk;
}

int run_measure(const CommonFlags& flags, const std::string& input) {
  const auto alphas = fairdr::parse_number_list(flags.alpha);
  const auto cores = fairdr::parse_core_list(flags.cores.empty() ? "classifiers" : flags.cores, alphas);
  const auto metrics = fairdr::parse_metric_list(flags.metrics.empty() ? "all" : flags.metrics);
  const auto policy = parse_threshold(flags.threshold.empty() ? "off" : flags.threshold);
  fairdr::EstimationSettings settings;
  settings.classifier.lambda = flags.lambda;
  const auto sweep_input = fairdr::prediction_file_input(input);
  const auto result = fairdr::measure(sweep_input, cores, metrics, policy, settings, flags.seed);
  if (flags.out.empty()) {
    fairdr::write_report(std::cout, result.rows);
  } else {
    std::ofstream out(flags.out, std::ios::binary);
    if (!out) throw fairdr::Error(fairdr::ErrorCode::IoError, "cannot write " + flags.out);
    fairdr::write_report(out, result.rows);
  }
  return result.failures > 0 ? kExitPartial : kExitOk;
}

int run_sweep(const CommonFlags& flags, const std::vector<std::string>& inputs) {
  auto config = fairdr::SweepConfig::defaults();
  const auto alphas = fairdr::parse_number_list(flags.alpha);
  config.cores = flags.cores.empty() ? fairdr::default_cores(alphas) : fairdr::parse_core_list(flags.cores, alphas);
  if (!flags.metrics.empty()) config.metrics = fairdr::parse_metric_list(flags.metrics);
  if (!flags.threshold.empty()) config.threshold = parse_threshold(flags.threshold);
  config.correlation_methods = parse_corr(flags.corr);
  config.seed = flags.seed;
  config.output_dir = flags.out.empty() ? "sweep_out" : flags.out;
  config.settings.classifier.lambda = flags.lambda;
  config.workers = flags.workers;

  std::vector<fairdr::SweepInput> sweep_inputs;
  if (inputs.empty()) {
    sweep_inputs = fairdr::synthetic_inputs(config.seed);
  } else {
    for (const auto& path : inputs) {
      auto in = fairdr::prediction_file_input(path);
      const auto report = fairdr::validate_dataset(in.data);
      if (!report.valid()) {
        throw fairdr::Error(fairdr::ErrorCode::ValidationFailed, path + ": " + report.summary());
      }
      sweep_inputs.push_back(std::move(in));
    }
  }
  const auto result = fairdr::run_sweep(config, sweep_inputs);
  fairdr::write_sweep_outputs(config, result);
  std::cerr << fmt::format("{} rows ({} undefined) written to {}\n", result.rows.size(), result.failures,
                           config.output_dir.string());
  return result.failures > 0 ? kExitPartial : kExitOk;
}

int run_correlate(const CommonFlags& flags, const std::string& report_path) {
  const auto rows = fairdr::read_report_file(report_path);
  const auto methods = parse_corr(flags.corr);
  if (flags.out.empty()) {
    for (auto m : methods) fairdr::write_correlations(std::cout, fairdr::correlate_report(rows, m));
    return kExitOk;
  }
  const std::filesystem::path out = flags.out;
  if (methods.size() == 1 && out.has_extension()) {
    std::ofstream file(out, std::ios::binary);
    if (!file) throw fairdr::Error(fairdr::ErrorCode::IoError, "cannot write " + out.string());
    fairdr::write_correlations(file, fairdr::correlate_report(rows, methods.front()));
    return kExitOk;
  }
  std::filesystem::create_directories(out);
  for (auto m : methods) {
    std::ofstream file(out / fmt::format("correlation_{}.csv", fairdr::to_string(m)), std::ios::binary);
    fairdr::write_correlations(file, fairdr::correlate_report(rows, m));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness measurement for regression via density-ratio estimation"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* synth = app.add_subcommand("synth", "Write the 40-dataset synthetic suite");
  synth->add_option("--seed", flags.seed, "Base seed");
  synth->add_option("--out", flags.out, "Output directory");

  std::string zoo_input;
  std::string target_col = "target";
  std::string group_col = "group";
  double split = 0.8;
  std::string models;
  auto* zoo = app.add_subcommand("zoo", "Train the built-in regressors and emit prediction CSVs");
  zoo->add_option("input", zoo_input, "Feature table CSV")->required();
  zoo->add_option("--target-col", target_col, "Target column name");
  zoo->add_option("--group-col", group_col, "Sensitive attribute column (0/1)");
  zoo->add_option("--split", split, "Training fraction");
  zoo->add_option("--models", models, "Comma list, e.g. ols,ridge_10,knn_5,stump,mean,lasso_0.1");
  zoo->add_option("--seed", flags.seed, "Split seed");
  zoo->add_option("--out", flags.out, "Output directory");

  std::string measure_input;
  auto* measure = app.add_subcommand("measure", "Fairness values for one prediction CSV");
  measure->add_option("predictions", measure_input, "Prediction CSV (y_true,y_pred,group)")->required();
  add_common(*measure, flags);

  std::vector<std::string> sweep_inputs;
  auto* sweep = app.add_subcommand("sweep", "Full sensitivity sweep (synthetic suite unless inputs given)");
  sweep->add_option("inputs", sweep_inputs, "Prediction CSVs");
  add_common(*sweep, flags);
  sweep->add_option("--corr", flags.corr, "spearman, kendall or both");
  sweep->add_option("--workers", flags.workers, "Worker threads (0 = all cores)");

  std::string report_path;
  auto* correlate = app.add_subcommand("correlate", "Correlation matrices from a report CSV");
  correlate->add_option("report", report_path, "Report CSV")->required();
  correlate->add_option("--corr", flags.corr, "spearman, kendall or both");
  correlate->add_option("--out", flags.out, "Output file or directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(flags);
    if (zoo->parsed()) return run_zoo(flags, zoo_input, target_col, group_col, split, models);
    if (measure->parsed()) {
      resolve_flags(*measure, flags);
      return run_measure(flags, measure_input);
    }
    if (sweep->parsed()) {
      resolve_flags(*sweep, flags);
      return run_sweep(flags, sweep_inputs);
    }
    if (correlate->parsed()) return run_correlate(flags, report_path);
  } catch (const fairdr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitOk;
}
