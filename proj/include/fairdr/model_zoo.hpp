#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fairdr/core_data.hpp"
#include "fairdr/csv_io.hpp"

namespace fairdr {

enum class RegressorFamily {
  OrdinaryLeastSquares,
  RidgeRegression,
  KNearestNeighbors,
  DecisionStump,
  MeanPredictor,
  LassoRegression,
};

struct RegressorKind {
  RegressorFamily family = RegressorFamily::MeanPredictor;
  double lambda = 1.0;  // ridge / lasso
  int k = 5;            // nearest neighbours

  static RegressorKind ols() { return {RegressorFamily::OrdinaryLeastSquares}; }
  static RegressorKind ridge(double lambda) { return {RegressorFamily::RidgeRegression, lambda}; }
  static RegressorKind knn(int k) { return {RegressorFamily::KNearestNeighbors, 1.0, k}; }
  static RegressorKind stump() { return {RegressorFamily::DecisionStump}; }
  static RegressorKind mean() { return {RegressorFamily::MeanPredictor}; }
  static RegressorKind lasso(double lambda) { return {RegressorFamily::LassoRegression, lambda}; }

  /// e.g. "ols", "ridge_1", "knn_5", "stump", "mean", "lasso_0.1".
  std::string name() const;
  static std::optional<RegressorKind> parse(std::string_view text);
  void validate() const;
};

/// The six built-in regressors.
std::vector<RegressorKind> default_zoo();

struct FeatureTable {
  Eigen::MatrixXd features;
  Eigen::VectorXd target;
  std::vector<int> group;

  std::size_t rows() const noexcept { return group.size(); }
};

/// Every column other than the target and group columns becomes a feature.
FeatureTable feature_table_from(const NumericTable& table, std::string_view target_col, std::string_view group_col);

/// Seeded shuffle, then the first round(fraction * n) rows train.
std::pair<FeatureTable, FeatureTable> train_test_split(const FeatureTable& table, double fraction, std::uint64_t seed);

/// One record per test row. OLS on a rank-deficient design falls back to
/// ridge with lambda 1e-6 and appends a warning.
std::vector<PredictionRecord> fit_predict(const RegressorKind& kind, const FeatureTable& train,
                                          const FeatureTable& test, std::vector<std::string>* warnings = nullptr);

}  // namespace fairdr
