#include "fairdr/model_zoo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>

#include <fmt/format.h>

#include "fairdr/error.hpp"

namespace fairdr {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

FeatureTable take_rows(const FeatureTable& t, std::span<const std::size_t> rows) {
  FeatureTable out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), t.features.cols());
  out.target.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(rows[i]);
    out.features.row(static_cast<Eigen::Index>(i)) = t.features.row(src);
    out.target[static_cast<Eigen::Index>(i)] = t.target[src];
    out.group.push_back(t.group[rows[i]]);
  }
  return out;
}

// Ridge on centered data; the intercept is unpenalized.
VectorXd predict_ridge(const FeatureTable& train, const FeatureTable& test, double lambda) {
  const VectorXd x_mean = train.features.colwise().mean().transpose();
  const double y_mean = train.target.mean();
  const MatrixXd Xc = train.features.rowwise() - x_mean.transpose();
  MatrixXd system = Xc.transpose() * Xc;
  system.diagonal().array() += lambda;
  const VectorXd beta = system.ldlt().solve(Xc.transpose() * (train.target.array() - y_mean).matrix());
  return ((test.features.rowwise() - x_mean.transpose()) * beta).array() + y_mean;
}

VectorXd predict_ols(const FeatureTable& train, const FeatureTable& test, std::vector<std::string>* warnings) {
  const auto n = train.features.rows();
  MatrixXd design(n, train.features.cols() + 1);
  design << train.features, VectorXd::Ones(n);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) {
    if (warnings) {
      warnings->push_back(fmt::format("{}: rank-deficient design (rank {} of {}), using ridge lambda=1e-6",
                                      to_string(ErrorCode::SingularDesign), qr.rank(), design.cols()));
    }
    return predict_ridge(train, test, 1e-6);
  }
  const VectorXd beta = qr.solve(train.target);
  MatrixXd test_design(test.features.rows(), test.features.cols() + 1);
  test_design << test.features, VectorXd::Ones(test.features.rows());
  return test_design * beta;
}

// Coordinate descent on (1/2n)|y - Xb - c|^2 + lambda |b|_1 with standardized columns.
VectorXd predict_lasso(const FeatureTable& train, const FeatureTable& test, double lambda) {
  const auto n = static_cast<double>(train.features.rows());
  const auto d = train.features.cols();
  const VectorXd x_mean = train.features.colwise().mean().transpose();
  VectorXd x_scale(d);
  MatrixXd Xs = train.features.rowwise() - x_mean.transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt(Xs.col(j).squaredNorm() / n);
    x_scale[j] = sd > 0.0 ? sd : 1.0;
    Xs.col(j) /= x_scale[j];
  }
  const double y_mean = train.target.mean();
  VectorXd residual = train.target.array() - y_mean;
  VectorXd beta = VectorXd::Zero(d);
  for (int sweep = 0; sweep < 10000; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double col_sq = Xs.col(j).squaredNorm() / n;
      if (col_sq == 0.0) continue;
      const double rho = Xs.col(j).dot(residual) / n + col_sq * beta[j];
      const double updated = (rho > lambda ? rho - lambda : (rho < -lambda ? rho + lambda : 0.0)) / col_sq;
      const double change = updated - beta[j];
      if (change != 0.0) {
        residual -= change * Xs.col(j);
        beta[j] = updated;
        max_change = std::max(max_change, std::abs(change));
      }
    }
    if (max_change < 1e-10) break;
  }
  MatrixXd Ts = test.features.rowwise() - x_mean.transpose();
  for (Eigen::Index j = 0; j < d; ++j) Ts.col(j) /= x_scale[j];
  return (Ts * beta).array() + y_mean;
}

VectorXd predict_knn(const FeatureTable& train, const FeatureTable& test, int k) {
  const auto n = train.features.rows();
  const auto neighbours = std::min<Eigen::Index>(k, n);
  VectorXd out(test.features.rows());
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < test.features.rows(); ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      dist[static_cast<std::size_t>(i)] = {(train.features.row(i) - test.features.row(t)).squaredNorm(), i};
    }
    std::partial_sort(dist.begin(), dist.begin() + neighbours, dist.end());
    double sum = 0.0;
    for (Eigen::Index m = 0; m < neighbours; ++m) sum += train.target[dist[static_cast<std::size_t>(m)].second];
    out[t] = sum / static_cast<double>(neighbours);
  }
  return out;
}

VectorXd predict_stump(const FeatureTable& train, const FeatureTable& test) {
  const auto n = train.features.rows();
  const double total_mean = train.target.mean();
  double best_sse = (train.target.array() - total_mean).square().sum();
  Eigen::Index best_feature = -1;
  double best_threshold = 0.0;
  double left_value = total_mean;
  double right_value = total_mean;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < train.features.cols(); ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return train.features(a, j) < train.features(b, j); });
    double left_sum = 0.0;
    double left_sq = 0.0;
    const double all_sum = train.target.sum();
    const double all_sq = train.target.squaredNorm();
    for (Eigen::Index m = 0; m + 1 < n; ++m) {
      const double y = train.target[order[static_cast<std::size_t>(m)]];
      left_sum += y;
      left_sq += y * y;
      const double x_here = train.features(order[static_cast<std::size_t>(m)], j);
      const double x_next = train.features(order[static_cast<std::size_t>(m + 1)], j);
      if (x_here == x_next) continue;
      const double nl = static_cast<double>(m + 1);
      const double nr = static_cast<double>(n - m - 1);
      const double right_sum = all_sum - left_sum;
      const double sse = (left_sq - left_sum * left_sum / nl) + (all_sq - left_sq - right_sum * right_sum / nr);
      if (sse < best_sse - 1e-12) {
        best_sse = sse;
        best_feature = j;
        best_threshold = 0.5 * (x_here + x_next);
        left_value = left_sum / nl;
        right_value = right_sum / nr;
      }
    }
  }
  VectorXd out(test.features.rows());
  for (Eigen::Index t = 0; t < out.size(); ++t) {
    out[t] = best_feature < 0 ? total_mean
                              : (test.features(t, best_feature) <= best_threshold ? left_value : right_value);
  }
  return out;
}

}  // namespace

std::string RegressorKind::name() const {
  switch (family) {
    case RegressorFamily::OrdinaryLeastSquares: return "ols";
    case RegressorFamily::RidgeRegression: return fmt::format("ridge_{}", lambda);
    case RegressorFamily::KNearestNeighbors: return fmt::format("knn_{}", k);
    case RegressorFamily::DecisionStump: return "stump";
    case RegressorFamily::MeanPredictor: return "mean";
    case RegressorFamily::LassoRegression: return fmt::format("lasso_{}", lambda);
  }
  return "unknown";
}

std::optional<RegressorKind> RegressorKind::parse(std::string_view text) {
  if (text == "ols") return ols();
  if (text == "stump") return stump();
  if (text == "mean") return mean();
  auto suffix_number = [&](std::string_view prefix) -> std::optional<double> {
    if (text.substr(0, prefix.size()) != prefix) return std::nullopt;
    double v = 0.0;
    if (!parse_double(text.substr(prefix.size()), v) || !(v > 0.0)) return std::nullopt;
    return v;
  };
  if (auto v = suffix_number("ridge_")) return ridge(*v);
  if (auto v = suffix_number("lasso_")) return lasso(*v);
  if (auto v = suffix_number("knn_"); v && std::floor(*v) == *v) return knn(static_cast<int>(*v));
  return std::nullopt;
}

void RegressorKind::validate() const {
  if ((family == RegressorFamily::RidgeRegression || family == RegressorFamily::LassoRegression) && !(lambda > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "regularization strength must be positive");
  }
  if (family == RegressorFamily::KNearestNeighbors && k < 1) {
    throw Error(ErrorCode::InvalidArgument, "k must be positive");
  }
}

std::vector<RegressorKind> default_zoo() {
  return {RegressorKind::ols(),   RegressorKind::ridge(10.0), RegressorKind::knn(5),
          RegressorKind::stump(), RegressorKind::mean(),      RegressorKind::lasso(0.1)};
}

FeatureTable feature_table_from(const NumericTable& table, std::string_view target_col, std::string_view group_col) {
  const std::size_t target = table.column_index(target_col);
  const std::size_t group = table.column_index(group_col);
  if (target == group) throw Error(ErrorCode::InvalidArgument, "target and group columns must differ");
  std::vector<std::size_t> feature_cols;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (j != target && j != group) feature_cols.push_back(j);
  }
  if (feature_cols.empty()) throw Error(ErrorCode::InvalidArgument, "feature table has no feature columns");
  FeatureTable out;
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  out.features.resize(n, static_cast<Eigen::Index>(feature_cols.size()));
  out.target.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < feature_cols.size(); ++j) out.features(i, static_cast<Eigen::Index>(j)) = row[feature_cols[j]];
    out.target[i] = row[target];
    const double g = row[group];
    if (g != 0.0 && g != 1.0) {
      throw Error(ErrorCode::ValidationFailed, fmt::format("group label out of {{0,1}} at row {}", i));
    }
    out.group.push_back(static_cast<int>(g));
  }
  if (!out.features.allFinite() || !out.target.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "feature table contains non-finite values");
  }
  return out;
}

std::pair<FeatureTable, FeatureTable> train_test_split(const FeatureTable& table, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("split fraction must lie in (0, 1), got {}", fraction));
  }
  const std::size_t n = table.rows();
  if (n < 10) throw Error(ErrorCode::TooFewRows, fmt::format("need at least 10 rows, got {}", n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n - 1);
  const std::span<const std::size_t> all(order);
  return {take_rows(table, all.first(n_train)), take_rows(table, all.subspan(n_train))};
}

std::vector<PredictionRecord> fit_predict(const RegressorKind& kind, const FeatureTable& train,
                                          const FeatureTable& test, std::vector<std::string>* warnings) {
  kind.validate();
  if (train.rows() == 0) throw Error(ErrorCode::TooFewRows, "empty training set");
  if (train.features.cols() != test.features.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "train and test feature counts differ");
  }
  if (!train.target.allFinite()) throw Error(ErrorCode::NonFiniteInput, "non-finite training target");
  VectorXd predictions;
  switch (kind.family) {
    case RegressorFamily::OrdinaryLeastSquares: predictions = predict_ols(train, test, warnings); break;
    case RegressorFamily::RidgeRegression: predictions = predict_ridge(train, test, kind.lambda); break;
    case RegressorFamily::KNearestNeighbors: predictions = predict_knn(train, test, kind.k); break;
    case RegressorFamily::DecisionStump: predictions = predict_stump(train, test); break;
    case RegressorFamily::MeanPredictor: predictions = VectorXd::Constant(test.features.rows(), train.target.mean()); break;
    case RegressorFamily::LassoRegression: predictions = predict_lasso(train, test, kind.lambda); break;
  }
  std::vector<PredictionRecord> out;
  out.reserve(test.rows());
  for (std::size_t i = 0; i < test.rows(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    out.push_back({test.target[idx], predictions[idx], test.group[i]});
  }
  return out;
}

}  // namespace fairdr
