#include "fairdr/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "fairdr/error.hpp"

namespace fairdr {

namespace {

double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double raw_sigmoid(double s) noexcept {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

double soft_threshold(double v, double t) noexcept {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

void check_training_inputs(const Matrix& X, std::span<const int> y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("{} feature rows but {} labels", X.rows(), y.size()));
  }
  if (X.rows() < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 training points");
  if (!X.allFinite()) throw Error(ErrorCode::NonFiniteInput, "non-finite training feature");
  std::size_t positives = 0;
  for (int label : y) {
    if (label != 0 && label != 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    positives += (label == 1);
  }
  if (positives == 0 || positives == y.size()) {
    throw Error(ErrorCode::SingleClassData, "training labels contain a single class");
  }
}

Vector labels_as_vector(std::span<const int> y) {
  Vector v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v[static_cast<Eigen::Index>(i)] = y[i];
  return v;
}

struct CoreFit {
  Vector weights;
  double bias = 0.0;
  bool converged = false;
  int iterations = 0;
};

double mean_nll(const Matrix& X, const Vector& y, const Vector& w, double b) {
  const Vector s = (X * w).array() + b;
  double total = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) total += softplus(s[i]) - y[i] * s[i];
  return total / static_cast<double>(s.size());
}

Vector residuals(const Matrix& X, const Vector& y, const Vector& w, double b) {
  Vector r = (X * w).array() + b;
  for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = raw_sigmoid(r[i]) - y[i];
  return r;
}

// Damped Newton on mean NLL + (lambda/2)|w|^2 with unpenalized bias.
CoreFit fit_l2_newton(const Matrix& X, const Vector& y, double lambda, const TrainConfig& cfg) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  CoreFit fit;
  fit.weights = Vector::Zero(d);
  auto objective = [&](const Vector& w, double b) { return mean_nll(X, y, w, b) + 0.5 * lambda * w.squaredNorm(); };
  double current = objective(fit.weights, fit.bias);

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    fit.iterations = iter;
    const Vector s = (X * fit.weights).array() + fit.bias;
    Vector p(n);
    Vector weight(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = raw_sigmoid(s[i]);
      weight[i] = p[i] * (1.0 - p[i]);
    }
    const Vector r = p - y;
    Vector grad(d + 1);
    grad.head(d) = X.transpose() * r * inv_n + lambda * fit.weights;
    grad[d] = r.sum() * inv_n;
    Matrix hessian(d + 1, d + 1);
    const Matrix weighted = X.array().colwise() * weight.array();
    hessian.topLeftCorner(d, d) = X.transpose() * weighted * inv_n;
    hessian.topLeftCorner(d, d).diagonal().array() += lambda;
    const Vector cross = weighted.colwise().sum().transpose() * inv_n;
    hessian.topRightCorner(d, 1) = cross;
    hessian.bottomLeftCorner(1, d) = cross.transpose();
    hessian(d, d) = weight.sum() * inv_n + 1e-12;

    const Vector step = -hessian.ldlt().solve(grad);
    const double grad_norm = grad.lpNorm<Eigen::Infinity>();
    const double scale = std::max({1.0, fit.weights.lpNorm<Eigen::Infinity>(), std::abs(fit.bias)});
    if (grad_norm < cfg.tolerance && step.lpNorm<Eigen::Infinity>() <= cfg.tolerance * scale) {
      fit.weights += step.head(d);
      fit.bias += step[d];
      fit.converged = true;
      break;
    }
    const double slope = grad.dot(step);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Vector w_try = fit.weights + t * step.head(d);
      const double b_try = fit.bias + t * step[d];
      const double trial = objective(w_try, b_try);
      if (std::isfinite(trial) && trial < current && trial <= current + 1e-4 * t * slope) {
        fit.weights = w_try;
        fit.bias = b_try;
        current = trial;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // Objective differences are below resolution; finish with the full Newton step.
      if (grad_norm < std::sqrt(cfg.tolerance)) {
        fit.weights += step.head(d);
        fit.bias += step[d];
        fit.converged = grad_norm < cfg.tolerance;
      }
      break;
    }
  }
  return fit;
}

// FISTA with gradient-restart on mean NLL + lambda|w|_1, unpenalized bias.
CoreFit fit_l1_proximal(const Matrix& X, const Vector& y, double lambda, const TrainConfig& cfg) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  Matrix augmented(n, d + 1);
  augmented.leftCols(d) = X;
  augmented.col(d).setOnes();
  const Matrix gram = augmented.transpose() * augmented * inv_n;
  const double lipschitz = 0.25 * Eigen::SelfAdjointEigenSolver<Matrix>(gram).eigenvalues().maxCoeff();
  const double step = 1.0 / std::max(lipschitz, 1e-12);

  auto gradient = [&](const Vector& theta) {
    const Vector r = residuals(X, y, theta.head(d), theta[d]);
    return Vector(augmented.transpose() * r * inv_n);
  };
  auto prox = [&](const Vector& v) {
    Vector out = v;
    for (Eigen::Index j = 0; j < d; ++j) out[j] = soft_threshold(v[j], step * lambda);
    return out;
  };

  Vector theta = Vector::Zero(d + 1);
  Vector momentum_point = theta;
  double t_k = 1.0;
  CoreFit fit;
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    fit.iterations = iter;
    const Vector next = prox(momentum_point - step * gradient(momentum_point));
    const Vector mapping = (theta - prox(theta - step * gradient(theta))) / step;
    if (mapping.lpNorm<Eigen::Infinity>() < cfg.tolerance) {
      fit.converged = true;
      break;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_k * t_k));
    if ((momentum_point - next).dot(next - theta) > 0.0) {
      // Restart momentum when it points uphill.
      momentum_point = next;
      t_k = 1.0;
    } else {
      momentum_point = next + ((t_k - 1.0) / t_next) * (next - theta);
      t_k = t_next;
    }
    theta = next;
  }
  fit.weights = theta.head(d);
  fit.bias = theta[d];
  return fit;
}

template <class Visitor>
double visit_kernel(const Kernel& kernel, Visitor&& visitor) {
  return std::visit(std::forward<Visitor>(visitor), kernel);
}

double kernel_value(const Kernel& kernel, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& z) {
  return visit_kernel(kernel, [&](const auto& k) -> double {
    using K = std::decay_t<decltype(k)>;
    if constexpr (std::is_same_v<K, GaussianKernel>) {
      return std::exp(-(x - z).squaredNorm() / (2.0 * k.sigma * k.sigma));
    } else {
      return std::pow(x.dot(z) + k.offset, k.degree);
    }
  });
}

void check_kernel(const Kernel& kernel) {
  if (const auto* g = std::get_if<GaussianKernel>(&kernel)) {
    if (!(g->sigma > 0.0) || !std::isfinite(g->sigma)) {
      throw Error(ErrorCode::InvalidArgument, "Gaussian kernel bandwidth must be positive");
    }
  } else if (std::get<PolynomialKernel>(kernel).degree < 1) {
    throw Error(ErrorCode::InvalidArgument, "polynomial degree must be >= 1");
  }
}

}  // namespace

std::string_view to_string(ClassifierKind kind) noexcept {
  switch (kind) {
    case ClassifierKind::Logistic: return "logistic";
    case ClassifierKind::RidgeLogistic: return "ridge";
    case ClassifierKind::LassoLogistic: return "lasso";
    case ClassifierKind::KlrGaussian: return "klr_gaussian";
    case ClassifierKind::KlrPolynomial: return "klr_polynomial";
  }
  return "unknown";
}

std::optional<ClassifierKind> parse_classifier_kind(std::string_view text) noexcept {
  for (auto kind : kAllClassifiers) {
    if (text == to_string(kind)) return kind;
  }
  return std::nullopt;
}

std::string_view to_string(Penalty penalty) noexcept {
  switch (penalty) {
    case Penalty::None: return "none";
    case Penalty::L1: return "l1";
    case Penalty::L2: return "l2";
  }
  return "unknown";
}

std::string describe(const Kernel& kernel) {
  return std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, GaussianKernel>) {
          return fmt::format("gaussian(sigma={})", k.sigma);
        } else {
          return fmt::format("polynomial(degree={},offset={})", k.degree, k.offset);
        }
      },
      kernel);
}

double sigmoid(double score) noexcept {
  return std::clamp(raw_sigmoid(score), kProbabilityFloor, 1.0 - kProbabilityFloor);
}

Standardizer Standardizer::fit(const Matrix& X) {
  Standardizer s;
  const double n = static_cast<double>(X.rows());
  s.mean = X.colwise().mean().transpose();
  s.scale.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.mean[j]).square().sum() / n;
    const double sd = std::sqrt(var);
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& X) const {
  return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Vector Standardizer::apply(std::span<const double> x) const {
  Vector out(static_cast<Eigen::Index>(x.size()));
  for (Eigen::Index j = 0; j < out.size(); ++j) out[j] = (x[static_cast<std::size_t>(j)] - mean[j]) / scale[j];
  return out;
}

double regularized_logistic_loss(const Matrix& X, std::span<const int> y, const Vector& params,
                                 Penalty penalty, double lambda) {
  const Eigen::Index d = X.cols();
  if (params.size() != d + 1) throw Error(ErrorCode::DimensionMismatch, "params must hold weights and bias");
  const Vector w = params.head(d);
  double loss = mean_nll(X, labels_as_vector(y), w, params[d]);
  switch (penalty) {
    case Penalty::L2: loss += 0.5 * lambda * w.squaredNorm(); break;
    case Penalty::L1: loss += lambda * w.lpNorm<1>(); break;
    case Penalty::None: break;
  }
  return loss;
}

Vector regularized_logistic_gradient(const Matrix& X, std::span<const int> y, const Vector& params,
                                     Penalty penalty, double lambda) {
  const Eigen::Index d = X.cols();
  if (params.size() != d + 1) throw Error(ErrorCode::DimensionMismatch, "params must hold weights and bias");
  const Vector w = params.head(d);
  const Vector r = residuals(X, labels_as_vector(y), w, params[d]);
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  Vector grad(d + 1);
  grad.head(d) = X.transpose() * r * inv_n;
  grad[d] = r.sum() * inv_n;
  switch (penalty) {
    case Penalty::L2: grad.head(d) += lambda * w; break;
    case Penalty::L1:
      for (Eigen::Index j = 0; j < d; ++j) grad[j] += lambda * ((w[j] > 0.0) - (w[j] < 0.0));
      break;
    case Penalty::None: break;
  }
  return grad;
}

LinearLogisticModel fit_linear_logistic(const Matrix& X, std::span<const int> y, Penalty penalty,
                                        const TrainConfig& cfg) {
  check_training_inputs(X, y);
  if (X.cols() < 1 || X.cols() > 2) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("linear cores take 1 or 2 features, got {}", X.cols()));
  }
  if (cfg.max_iterations < 1 || !(cfg.tolerance > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "max_iterations >= 1 and tolerance > 0 required");
  }
  const Vector labels = labels_as_vector(y);
  LinearLogisticModel model;
  model.penalty = penalty;
  model.lambda = penalty == Penalty::None ? kMinLambda : std::max(cfg.lambda, kMinLambda);
  const CoreFit fit = penalty == Penalty::L1 ? fit_l1_proximal(X, labels, model.lambda, cfg)
                                             : fit_l2_newton(X, labels, model.lambda, cfg);
  model.weights = fit.weights;
  model.bias = fit.bias;
  model.converged = fit.converged;
  model.iterations = fit.iterations;
  return model;
}

double predict_proba(const LinearLogisticModel& model, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != model.weights.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("model expects {} features, got {}", model.weights.size(), x.size()));
  }
  double score = model.bias;
  for (std::size_t j = 0; j < x.size(); ++j) score += model.weights[static_cast<Eigen::Index>(j)] * x[j];
  return sigmoid(score);
}

double predict_proba(const KernelLogisticModel& model, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != model.support_points.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("model expects {} features, got {}", model.support_points.cols(), x.size()));
  }
  const Vector z = model.standardizer.apply(x);
  double score = model.bias;
  for (Eigen::Index i = 0; i < model.support_points.rows(); ++i) {
    score += model.dual_coefficients[i] * kernel_value(model.kernel, model.support_points.row(i).transpose(), z);
  }
  return sigmoid(score);
}

Vector predict_proba(const LinearLogisticModel& model, const Matrix& X) {
  if (X.cols() != model.weights.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("model expects {} features, got {}", model.weights.size(), X.cols()));
  }
  Vector s = (X * model.weights).array() + model.bias;
  return s.unaryExpr([](double v) { return sigmoid(v); });
}

Vector predict_proba(const KernelLogisticModel& model, const Matrix& X) {
  Vector out(X.rows());
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(i, j);
    out[i] = predict_proba(model, row);
  }
  return out;
}

double kernel_eval(const Kernel& kernel, std::span<const double> x, std::span<const double> z) {
  if (x.size() != z.size()) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("kernel arguments of size {} and {}", x.size(), z.size()));
  }
  check_kernel(kernel);
  const Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Vector> zv(z.data(), static_cast<Eigen::Index>(z.size()));
  return kernel_value(kernel, xv, zv);
}

PivotedCholesky pivoted_cholesky(const Matrix& X, const Kernel& kernel, double relative_tolerance) {
  check_kernel(kernel);
  const Eigen::Index n = X.rows();
  Vector residual(n);
  for (Eigen::Index i = 0; i < n; ++i) residual[i] = kernel_value(kernel, X.row(i).transpose(), X.row(i).transpose());
  const double threshold = relative_tolerance * std::max(residual.maxCoeff(), 0.0);

  PivotedCholesky out;
  std::vector<Vector> columns;
  while (static_cast<Eigen::Index>(columns.size()) < n) {
    Eigen::Index pivot = 0;
    const double largest = residual.maxCoeff(&pivot);
    if (!(largest > threshold) || largest <= 0.0) break;
    Vector column(n);
    for (Eigen::Index i = 0; i < n; ++i) column[i] = kernel_value(kernel, X.row(i).transpose(), X.row(pivot).transpose());
    for (const auto& previous : columns) column -= previous * previous[pivot];
    column /= std::sqrt(largest);
    for (auto idx : out.pivots) column[static_cast<Eigen::Index>(idx)] = 0.0;
    residual -= column.cwiseAbs2();
    residual[pivot] = 0.0;
    for (auto idx : out.pivots) residual[static_cast<Eigen::Index>(idx)] = 0.0;
    out.pivots.push_back(static_cast<std::size_t>(pivot));
    columns.push_back(std::move(column));
  }
  out.factor.resize(n, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) out.factor.col(static_cast<Eigen::Index>(j)) = columns[j];
  return out;
}

KernelLogisticModel fit_kernel_logistic(const Matrix& X, std::span<const int> y, const Kernel& kernel,
                                        const TrainConfig& cfg) {
  check_training_inputs(X, y);
  check_kernel(kernel);
  if (static_cast<std::size_t>(X.rows()) > kMaxKernelPoints) {
    throw Error(ErrorCode::KernelMatrixTooLarge,
                fmt::format("{} points exceed the kernel limit of {}", X.rows(), kMaxKernelPoints));
  }
  KernelLogisticModel model;
  model.kernel = kernel;
  model.lambda = std::max(cfg.lambda, kMinLambda);
  model.standardizer = Standardizer::fit(X);
  const Matrix Xs = model.standardizer.apply(X);

  const PivotedCholesky chol = pivoted_cholesky(Xs, kernel, 1e-12);
  const auto rank = static_cast<Eigen::Index>(chol.pivots.size());
  const CoreFit fit = fit_l2_newton(chol.factor, labels_as_vector(y), model.lambda, cfg);

  // factor = K(:, P) * L_P^{-T}, so f = factor * g = K(:, P) * (L_P^{-T} g).
  Matrix pivot_block(rank, rank);
  model.support_points.resize(rank, X.cols());
  for (Eigen::Index j = 0; j < rank; ++j) {
    const auto row = static_cast<Eigen::Index>(chol.pivots[static_cast<std::size_t>(j)]);
    pivot_block.row(j) = chol.factor.row(row);
    model.support_points.row(j) = Xs.row(row);
  }
  model.dual_coefficients = pivot_block.transpose().triangularView<Eigen::Upper>().solve(fit.weights);
  model.bias = fit.bias;
  model.converged = fit.converged;
  model.iterations = fit.iterations;
  return model;
}

double median_heuristic_bandwidth(const Matrix& X, std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "median heuristic needs at least 2 points");
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  constexpr std::size_t kMaxRows = 1000;
  if (rows.size() > kMaxRows) {
    std::mt19937_64 rng(seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(kMaxRows);
  }
  std::vector<double> distances;
  distances.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = a + 1; b < rows.size(); ++b) {
      distances.push_back((X.row(rows[a]) - X.row(rows[b])).norm());
    }
  }
  const std::size_t mid = distances.size() / 2;
  std::nth_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid), distances.end());
  double median = distances[mid];
  if (distances.size() % 2 == 0) {
    const double lower = *std::max_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return median > 0.0 ? median : 1.0;
}

Vector ProbabilisticClassifier::predict(const Matrix& X) const {
  return std::visit([&](const auto& m) { return predict_proba(m, X); }, model_);
}

bool ProbabilisticClassifier::converged() const {
  return std::visit([](const auto& m) { return m.converged; }, model_);
}

ProbabilisticClassifier fit_classifier(ClassifierKind kind, const Matrix& X, std::span<const int> y,
                                       const TrainConfig& cfg) {
  switch (kind) {
    case ClassifierKind::Logistic: return fit_linear_logistic(X, y, Penalty::None, cfg);
    case ClassifierKind::RidgeLogistic: return fit_linear_logistic(X, y, Penalty::L2, cfg);
    case ClassifierKind::LassoLogistic: return fit_linear_logistic(X, y, Penalty::L1, cfg);
    case ClassifierKind::KlrGaussian: {
      check_training_inputs(X, y);
      const Matrix Xs = Standardizer::fit(X).apply(X);
      return fit_kernel_logistic(X, y, GaussianKernel{median_heuristic_bandwidth(Xs, cfg.seed)}, cfg);
    }
    case ClassifierKind::KlrPolynomial: return fit_kernel_logistic(X, y, PolynomialKernel{3, 1.0}, cfg);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown classifier kind");
}

std::string describe(ClassifierKind kind, const TrainConfig& cfg) {
  std::string kernel;
  if (kind == ClassifierKind::KlrGaussian) kernel = ";kernel=gaussian(median-heuristic)";
  if (kind == ClassifierKind::KlrPolynomial) kernel = ";kernel=polynomial(degree=3,offset=1)";
  return fmt::format("core={};lambda={};max_iter={};tol={};seed={}{}", to_string(kind),
                     kind == ClassifierKind::Logistic ? kMinLambda : std::max(cfg.lambda, kMinLambda),
                     cfg.max_iterations, cfg.tolerance, cfg.seed, kernel);
}

}  // namespace fairdr
