#include "fairdr/synthetic.hpp"

#include <random>

#include <fmt/format.h>

#include "fairdr/error.hpp"

namespace fairdr {

SyntheticSpec SyntheticSpec::for_index(int index, std::uint64_t base_seed) {
  SyntheticSpec spec;
  spec.dataset_index = index;
  spec.seed = base_seed + static_cast<std::uint64_t>(index);
  spec.validate();
  return spec;
}

double SyntheticSpec::privileged_mean() const noexcept {
  // Integer tenths keep the mean exact to one rounding (0.1 * 3 != 0.3).
  return static_cast<double>(dataset_index) / 10.0;
}

void SyntheticSpec::validate() const {
  if (dataset_index < 0 || dataset_index >= kSuiteSize) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("dataset index {} outside 0..39", dataset_index));
  }
  if (n_per_group < 1) throw Error(ErrorCode::InvalidArgument, "n_per_group must be positive");
}

std::string SyntheticSpec::file_name() const {
  return fmt::format("synth_{}_{:.1f}.csv", dataset_index, privileged_mean());
}

std::string SyntheticSpec::dataset_id() const { return fmt::format("synth_{}", dataset_index); }

std::string_view to_string(MeanInterval interval) noexcept {
  switch (interval) {
    case MeanInterval::I0: return "I0";
    case MeanInterval::I1: return "I1";
    case MeanInterval::I2: return "I2";
    case MeanInterval::I3: return "I3";
  }
  return "?";
}

std::string_view range_label(MeanInterval interval) noexcept {
  switch (interval) {
    case MeanInterval::I0: return "[0-0.9]";
    case MeanInterval::I1: return "[1-1.9]";
    case MeanInterval::I2: return "[2-2.9]";
    case MeanInterval::I3: return "[3-3.9]";
  }
  return "?";
}

Dataset generate_dataset(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double mu = spec.privileged_mean();
  Dataset d;
  d.name = spec.dataset_id();
  d.records.reserve(2 * spec.n_per_group);
  for (int group = 0; group <= 1; ++group) {
    const double shift = group == 1 ? mu : 0.0;
    for (std::size_t i = 0; i < spec.n_per_group; ++i) {
      PredictionRecord r;
      r.y_pred = shift + normal(rng);
      r.y_true = normal(rng);
      r.group = group;
      d.records.push_back(r);
    }
  }
  return d;
}

std::vector<SuiteMember> generate_suite(std::uint64_t base_seed) {
  std::vector<SuiteMember> suite;
  suite.reserve(kSuiteSize);
  for (int index = 0; index < kSuiteSize; ++index) {
    auto spec = SyntheticSpec::for_index(index, base_seed);
    suite.push_back({spec, generate_dataset(spec)});
  }
  return suite;
}

MeanInterval interval_of_index(int dataset_index) {
  if (dataset_index < 0 || dataset_index >= kSuiteSize) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("dataset index {} outside 0..39", dataset_index));
  }
  return static_cast<MeanInterval>(dataset_index / 10);
}

MeanInterval interval_of(const SyntheticSpec& spec) { return interval_of_index(spec.dataset_index); }

}  // namespace fairdr
