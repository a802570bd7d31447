#include "fairdr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "fairdr/csv_io.hpp"
#include "fairdr/error.hpp"
#include "fairdr/fingerprint.hpp"
#include "fairdr/synthetic.hpp"

namespace fairdr {

namespace {

std::string sanitize_reason(std::string reason) {
  std::replace(reason.begin(), reason.end(), ',', ';');
  std::replace(reason.begin(), reason.end(), '\n', ' ');
  return reason;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto item : split_csv_line(text)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string cell_value(const MetricOutcome& v) {
  return v.is_defined() ? v.to_string() : "undefined:" + sanitize_reason(v.reason());
}

std::string settings_canonical(const EstimationSettings& s) {
  return fmt::format("classifier(lambda={};max_iter={};tol={};seed={});ratio({})", s.classifier.lambda,
                     s.classifier.max_iterations, s.classifier.tolerance, s.classifier.seed, s.ratio.describe());
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

// Rows of one (dataset, metric, core) job, one per policy.
std::vector<ReportRow> run_cell(const SweepInput& input, MetricKind metric, const CoreSpec& core,
                                const std::vector<ThresholdPolicy>& policies, const EstimationSettings& settings,
                                std::uint64_t seed) {
  std::vector<ReportRow> rows;
  const std::string fallback_fp = fingerprint(
      fmt::format("metric={};core={};{}", to_string(metric), core.name(), settings_canonical(settings)));
  try {
    const auto estimates = estimate(input.data, metric, core, policies, settings);
    for (std::size_t k = 0; k < policies.size(); ++k) {
      rows.push_back({input.dataset_id, input.model_id, metric, core.name(), policies[k].label(),
                      estimates[k].outcome, seed,
                      estimates[k].config_fingerprint.empty() ? fallback_fp : estimates[k].config_fingerprint});
    }
  } catch (const Error& e) {
    for (const auto& policy : policies) {
      rows.push_back({input.dataset_id, input.model_id, metric, core.name(), policy.label(),
                      MetricOutcome::undefined(std::string(to_string(e.code()))), seed, fallback_fp});
    }
  }
  return rows;
}

struct Job {
  std::size_t input;
  MetricKind metric;
  std::size_t core;
};

SweepResult run_jobs(const std::vector<SweepInput>& inputs, const std::vector<MetricKind>& metrics,
                     const std::vector<CoreSpec>& cores, const std::vector<ThresholdPolicy>& policies,
                     const EstimationSettings& settings, std::uint64_t seed, std::size_t workers) {
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (auto metric : metrics) {
      for (std::size_t c = 0; c < cores.size(); ++c) jobs.push_back({i, metric, c});
    }
  }
  std::vector<std::vector<ReportRow>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job& job = jobs[j];
      results[j] = run_cell(inputs[job.input], job.metric, cores[job.core], policies, settings, seed);
    }
  };
  if (workers == 0) workers = std::max(1U, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(jobs.size(), 1));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  SweepResult out;
  for (auto& cell : results) {
    for (auto& row : cell) {
      out.failures += !row.value.is_defined();
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace

void write_report(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << kReportHeader << '\n';
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", r.dataset_id, r.model_id, to_string(r.metric), r.core,
                       r.threshold, cell_value(r.value), r.seed, r.fingerprint);
  }
}

std::vector<ReportRow> read_report(std::istream& in) {
  std::string raw;
  if (!std::getline(in, raw)) throw Error(ErrorCode::ParseError, "line 1: missing header");
  if (!raw.empty() && raw.back() == '\r') raw.pop_back();
  if (raw != kReportHeader) throw Error(ErrorCode::ParseError, fmt::format("line 1: unexpected header '{}'", raw));
  std::vector<ReportRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (trim(raw).empty()) throw Error(ErrorCode::ParseError, fmt::format("line {}: blank line", line_no));
    const auto f = split_csv_line(raw);
    if (f.size() != 8) {
      throw Error(ErrorCode::ParseError, fmt::format("line {}: expected 8 fields, got {}", line_no, f.size()));
    }
    ReportRow row;
    row.dataset_id = f[0];
    row.model_id = f[1];
    const auto metric = parse_metric_kind(f[2]);
    if (!metric) throw Error(ErrorCode::ParseError, fmt::format("line {}: unknown metric '{}'", line_no, f[2]));
    row.metric = *metric;
    row.core = f[3];
    row.threshold = f[4];
    constexpr std::string_view undefined_prefix = "undefined:";
    if (f[5].substr(0, undefined_prefix.size()) == undefined_prefix) {
      row.value = MetricOutcome::undefined(std::string(f[5].substr(undefined_prefix.size())));
    } else {
      double v = 0.0;
      if (!parse_double(f[5], v) || !std::isfinite(v) || v < 0.0) {
        throw Error(ErrorCode::ParseError, fmt::format("line {}: bad value '{}'", line_no, f[5]));
      }
      row.value = MetricOutcome::defined(v);
    }
    long long seed = 0;
    if (!parse_int(f[6], seed) || seed < 0) {
      throw Error(ErrorCode::ParseError, fmt::format("line {}: bad seed '{}'", line_no, f[6]));
    }
    row.seed = static_cast<std::uint64_t>(seed);
    row.fingerprint = f[7];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ReportRow> read_report_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_report(in);
}

std::vector<SweepInput> synthetic_inputs(std::uint64_t base_seed) {
  std::vector<SweepInput> inputs;
  for (auto& member : generate_suite(base_seed)) {
    inputs.push_back({member.spec.dataset_id(), "synthetic", std::move(member.dataset)});
  }
  return inputs;
}

SweepInput prediction_file_input(const std::filesystem::path& path) {
  SweepInput input;
  input.data = read_predictions_file(path);
  const auto parent = path.parent_path().filename().string();
  input.dataset_id = parent.empty() ? "external" : parent;
  input.model_id = path.stem().string();
  return input;
}

std::vector<CoreSpec> default_cores(const std::vector<double>& alphas) {
  std::vector<CoreSpec> cores;
  for (auto kind : kAllClassifiers) cores.push_back(CoreSpec::of(kind));
  cores.push_back(CoreSpec::lsif());
  for (double a : alphas) cores.push_back(CoreSpec::ulsif(a));
  return cores;
}

std::vector<CoreSpec> parse_core_list(std::string_view text, const std::vector<double>& alphas) {
  std::vector<CoreSpec> cores;
  for (auto item : split_list(text)) {
    if (item == "all") {
      for (auto& c : default_cores(alphas)) cores.push_back(c);
    } else if (item == "classifiers") {
      for (auto kind : kAllClassifiers) cores.push_back(CoreSpec::of(kind));
    } else if (item == "ulsif") {
      for (double a : alphas) cores.push_back(CoreSpec::ulsif(a));
    } else if (auto core = CoreSpec::parse(item)) {
      cores.push_back(*core);
    } else {
      throw Error(ErrorCode::InvalidArgument, fmt::format("unknown core '{}'", item));
    }
  }
  // Drop duplicates, keeping first occurrence.
  std::vector<CoreSpec> unique;
  std::set<std::string> seen;
  for (auto& c : cores) {
    if (seen.insert(c.name()).second) unique.push_back(c);
  }
  return unique;
}

std::vector<MetricKind> parse_metric_list(std::string_view text) {
  std::vector<MetricKind> metrics;
  for (auto item : split_list(text)) {
    if (item == "all") {
      metrics.assign(std::begin(kAllMetrics), std::end(kAllMetrics));
      continue;
    }
    const auto m = parse_metric_kind(item);
    if (!m) throw Error(ErrorCode::InvalidArgument, fmt::format("unknown metric '{}'", item));
    if (std::find(metrics.begin(), metrics.end(), *m) == metrics.end()) metrics.push_back(*m);
  }
  return metrics;
}

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  for (auto item : split_list(text)) {
    double v = 0.0;
    if (!parse_double(item, v)) throw Error(ErrorCode::InvalidArgument, fmt::format("not a number: '{}'", item));
    out.push_back(v);
  }
  return out;
}

SweepConfig SweepConfig::defaults() {
  SweepConfig c;
  c.cores = default_cores({0.25, 0.5, 0.75, 1.0});
  c.metrics.assign(std::begin(kAllMetrics), std::end(kAllMetrics));
  return c;
}

void SweepConfig::validate() const {
  if (cores.empty()) throw Error(ErrorCode::InvalidArgument, "no cores configured");
  if (metrics.empty()) throw Error(ErrorCode::InvalidArgument, "no metrics configured");
  threshold.validate();
  settings.ratio.validate();
}

std::vector<ThresholdPolicy> SweepConfig::policies() const {
  std::vector<ThresholdPolicy> out{ThresholdPolicy::off()};
  if (threshold.enabled) out.push_back(threshold);
  return out;
}

std::string SweepConfig::resolved() const {
  std::vector<std::string> core_names;
  for (const auto& c : cores) core_names.push_back(c.name());
  std::vector<std::string_view> metric_names;
  for (auto m : metrics) metric_names.push_back(to_string(m));
  std::vector<std::string_view> corr_names;
  for (auto m : correlation_methods) corr_names.push_back(to_string(m));
  std::string out;
  out += fmt::format("seed={}\n", seed);
  out += fmt::format("cores={}\n", fmt::join(core_names, ","));
  out += fmt::format("metrics={}\n", fmt::join(metric_names, ","));
  out += fmt::format("threshold={}\n", threshold.label());
  out += fmt::format("corr={}\n", fmt::join(corr_names, ","));
  out += fmt::format("out={}\n", output_dir.string());
  out += fmt::format("lambda={}\n", settings.classifier.lambda);
  out += fmt::format("max_iterations={}\n", settings.classifier.max_iterations);
  out += fmt::format("tolerance={}\n", settings.classifier.tolerance);
  out += fmt::format("n_centers={}\n", settings.ratio.n_centers);
  out += fmt::format("sigma_grid={}\n", fmt::join(settings.ratio.sigma_grid, ","));
  out += fmt::format("sigma_relative={}\n", settings.ratio.sigma_relative_to_median);
  out += fmt::format("lambda_grid={}\n", fmt::join(settings.ratio.lambda_grid, ","));
  out += "kernel_gaussian_sigma=median-heuristic\n";
  out += "kernel_polynomial=degree 3, offset 1\n";
  out += "synthetic_roles=feature1->y_pred,feature2->y_true\n";
  out += fmt::format("workers={}\n", workers);
  return out;
}

SweepResult run_sweep(const SweepConfig& config, const std::vector<SweepInput>& inputs) {
  config.validate();
  EstimationSettings settings = config.settings;
  settings.classifier.seed = config.seed;
  settings.ratio.seed = config.seed;
  return run_jobs(inputs, config.metrics, config.cores, config.policies(), settings, config.seed, config.workers);
}

SweepResult measure(const SweepInput& input, const std::vector<CoreSpec>& cores, const std::vector<MetricKind>& metrics,
                    const ThresholdPolicy& policy, const EstimationSettings& settings, std::uint64_t seed) {
  policy.validate();
  const auto report = validate_dataset(input.data);
  if (!report.valid()) throw Error(ErrorCode::ValidationFailed, report.summary());
  EstimationSettings seeded = settings;
  seeded.classifier.seed = seed;
  seeded.ratio.seed = seed;
  return run_jobs({input}, metrics, cores, {policy}, seeded, seed, 1);
}

std::string partition_of(std::string_view dataset_id) {
  constexpr std::string_view prefix = "synth_";
  if (dataset_id.substr(0, prefix.size()) == prefix) {
    long long index = -1;
    if (parse_int(dataset_id.substr(prefix.size()), index) && index >= 0 && index < kSuiteSize) {
      return std::string(to_string(interval_of_index(static_cast<int>(index))));
    }
  }
  return std::string(dataset_id);
}

namespace {

struct GroupKey {
  std::string partition;
  MetricKind metric;
  std::string threshold;

  auto operator<=>(const GroupKey&) const = default;
};

// Per group: core -> (key -> value), with first-seen orders kept.
struct Grouped {
  std::vector<GroupKey> groups;
  std::map<GroupKey, std::vector<std::string>> core_order;
  std::map<GroupKey, std::vector<std::string>> key_order;
  std::map<GroupKey, std::map<std::string, std::map<std::string, const ReportRow*>>> cells;
};

Grouped group_rows(const std::vector<ReportRow>& rows) {
  Grouped g;
  for (const auto& row : rows) {
    GroupKey key{partition_of(row.dataset_id), row.metric, row.threshold};
    if (!g.cells.contains(key)) g.groups.push_back(key);
    auto& by_core = g.cells[key];
    if (!by_core.contains(row.core)) g.core_order[key].push_back(row.core);
    const std::string item = row.dataset_id + "/" + row.model_id;
    auto& keys = g.key_order[key];
    if (std::find(keys.begin(), keys.end(), item) == keys.end()) keys.push_back(item);
    by_core[row.core][item] = &row;
  }
  return g;
}

}  // namespace

std::vector<PairCorrelation> correlate_report(const std::vector<ReportRow>& rows, CorrelationMethod method) {
  const Grouped g = group_rows(rows);
  std::vector<PairCorrelation> out;
  for (const auto& key : g.groups) {
    const auto& cores = g.core_order.at(key);
    const auto& keys = g.key_order.at(key);
    const auto& cells = g.cells.at(key);
    for (const auto& a : cores) {
      for (const auto& b : cores) {
        if (a == b) continue;
        PairCorrelation pc{key.partition, key.metric, key.threshold, method, a, b, {}, 0};
        std::vector<double> xs;
        std::vector<double> ys;
        for (const auto& item : keys) {
          const auto ia = cells.at(a).find(item);
          const auto ib = cells.at(b).find(item);
          if (ia == cells.at(a).end() || ib == cells.at(b).end()) continue;
          if (!ia->second->value.is_defined() || !ib->second->value.is_defined()) continue;
          xs.push_back(ia->second->value.value());
          ys.push_back(ib->second->value.value());
        }
        pc.effective_n = xs.size();
        if (xs.size() < 3) {
          pc.cell.reason = "insufficient data";
        } else {
          try {
            pc.cell.result = correlate(method, xs, ys);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateInput) throw;
            pc.cell.reason = "degenerate input";
          }
        }
        out.push_back(std::move(pc));
      }
    }
  }
  return out;
}

void write_correlations(std::ostream& out, const std::vector<PairCorrelation>& pairs) {
  out << kCorrelationHeader << '\n';
  for (const auto& p : pairs) {
    const auto& r = p.cell.result;
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", p.partition, to_string(p.metric), p.threshold,
                       to_string(p.method), p.core_a, p.core_b, r ? fmt::format("{}", r->coefficient) : "nan",
                       r ? fmt::format("{}", r->p_value) : "nan", r ? (r->significant ? "1" : "0") : "",
                       p.effective_n, format_cell(p.cell));
  }
}

std::map<std::string, std::vector<ScatterPoint>> scatter_data(const std::vector<ReportRow>& rows) {
  // (metric, threshold) -> core order, and (metric, threshold, core) -> rows in order.
  std::map<std::pair<MetricKind, std::string>, std::vector<std::string>> core_order;
  std::map<std::pair<MetricKind, std::string>, std::vector<std::string>> key_order;
  std::map<std::tuple<MetricKind, std::string, std::string>, std::map<std::string, const ReportRow*>> by_core;
  for (const auto& row : rows) {
    const auto group = std::make_pair(row.metric, row.threshold);
    auto& cores = core_order[group];
    if (std::find(cores.begin(), cores.end(), row.core) == cores.end()) cores.push_back(row.core);
    const std::string item = row.dataset_id + "/" + row.model_id;
    auto& keys = key_order[group];
    if (std::find(keys.begin(), keys.end(), item) == keys.end()) keys.push_back(item);
    by_core[{row.metric, row.threshold, row.core}][item] = &row;
  }
  std::map<std::string, std::vector<ScatterPoint>> out;
  for (const auto& [group, cores] : core_order) {
    for (std::size_t i = 0; i < cores.size(); ++i) {
      for (std::size_t j = i + 1; j < cores.size(); ++j) {
        const auto name = fmt::format("{}_{}_{}__{}.csv", to_string(group.first), group.second, cores[i], cores[j]);
        auto& points = out[name];
        const auto& a = by_core[{group.first, group.second, cores[i]}];
        const auto& b = by_core[{group.first, group.second, cores[j]}];
        for (const auto& item : key_order[group]) {
          const auto ia = a.find(item);
          const auto ib = b.find(item);
          if (ia == a.end() || ib == b.end()) continue;
          const ReportRow& ra = *ia->second;
          points.push_back({partition_of(ra.dataset_id), ra.dataset_id, ra.model_id, cell_value(ra.value),
                            cell_value(ib->second->value)});
        }
      }
    }
  }
  return out;
}

void write_sweep_outputs(const SweepConfig& config, const SweepResult& result) {
  const auto& dir = config.output_dir;
  ensure_directory(dir);
  {
    auto out = open_output(dir / "report.csv");
    write_report(out, result.rows);
  }
  for (auto method : config.correlation_methods) {
    auto out = open_output(dir / fmt::format("correlation_{}.csv", to_string(method)));
    write_correlations(out, correlate_report(result.rows, method));
  }
  const auto scatter_dir = dir / "scatter";
  ensure_directory(scatter_dir);
  for (const auto& [name, points] : scatter_data(result.rows)) {
    auto out = open_output(scatter_dir / name);
    out << "partition,dataset_id,model_id,x,y\n";
    for (const auto& p : points) out << fmt::format("{},{},{},{},{}\n", p.partition, p.dataset_id, p.model_id, p.x, p.y);
  }
  auto out = open_output(dir / "resolved_config.txt");
  out << config.resolved();
}

void write_synthetic_suite(std::uint64_t base_seed, const std::filesystem::path& out_dir) {
  ensure_directory(out_dir);
  auto manifest = open_output(out_dir / "manifest.csv");
  manifest << "index,mu,seed,interval,file\n";
  for (const auto& member : generate_suite(base_seed)) {
    const auto& spec = member.spec;
    write_predictions_file(out_dir / spec.file_name(), member.dataset);
    manifest << fmt::format("{},{:.1f},{},{},{}\n", spec.dataset_index, spec.privileged_mean(), spec.seed,
                            to_string(interval_of(spec)), spec.file_name());
  }
  if (!manifest) throw Error(ErrorCode::IoError, "manifest write failed");
}

std::map<std::string, std::string> read_key_values(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, fmt::format("line {}: expected key=value", line_no));
    }
    out[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_key_values(in);
}

}  // namespace fairdr
