#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fairdr/core_data.hpp"

namespace fairdr {

inline constexpr int kSuiteSize = 40;
inline constexpr std::size_t kPointsPerGroup = 500;

/// One member of the controlled-overlap suite: the privileged group's
/// Feature 1 mean is 0.1 * index.
struct SyntheticSpec {
  int dataset_index = 0;
  std::size_t n_per_group = kPointsPerGroup;
  std::uint64_t seed = 0;

  static SyntheticSpec for_index(int index, std::uint64_t base_seed);
  double privileged_mean() const noexcept;
  void validate() const;
  /// `synth_<index>_<mu>.csv`
  std::string file_name() const;
  std::string dataset_id() const;
};

enum class MeanInterval { I0, I1, I2, I3 };

inline constexpr MeanInterval kAllIntervals[] = {MeanInterval::I0, MeanInterval::I1, MeanInterval::I2,
                                                 MeanInterval::I3};

std::string_view to_string(MeanInterval interval) noexcept;
/// "[0-0.9]" style label.
std::string_view range_label(MeanInterval interval) noexcept;

/// Unprivileged rows first, then privileged. Feature 1 (group-dependent
/// mean) is stored as y_pred and Feature 2 (N(0, 1) for both) as y_true.
Dataset generate_dataset(const SyntheticSpec& spec);

struct SuiteMember {
  SyntheticSpec spec;
  Dataset dataset;
};

/// Indices 0..39 with seed base_seed + index.
std::vector<SuiteMember> generate_suite(std::uint64_t base_seed);

MeanInterval interval_of(const SyntheticSpec& spec);
MeanInterval interval_of_index(int dataset_index);

}  // namespace fairdr
