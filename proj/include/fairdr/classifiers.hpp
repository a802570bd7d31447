#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace fairdr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ClassifierKind { Logistic, RidgeLogistic, LassoLogistic, KlrGaussian, KlrPolynomial };

inline constexpr ClassifierKind kAllClassifiers[] = {
    ClassifierKind::Logistic, ClassifierKind::RidgeLogistic, ClassifierKind::LassoLogistic,
    ClassifierKind::KlrGaussian, ClassifierKind::KlrPolynomial};

std::string_view to_string(ClassifierKind kind) noexcept;
std::optional<ClassifierKind> parse_classifier_kind(std::string_view text) noexcept;

enum class Penalty { None, L1, L2 };

std::string_view to_string(Penalty penalty) noexcept;

/// Smallest regularization strength ever used; separable data stays bounded.
inline constexpr double kMinLambda = 1e-6;
/// Predicted probabilities are kept inside [kProbabilityFloor, 1 - kProbabilityFloor].
inline constexpr double kProbabilityFloor = 1e-15;

struct TrainConfig {
  int max_iterations = 10000;
  double tolerance = 1e-8;
  double lambda = 1e-3;
  std::uint64_t seed = 0;
};

struct LinearLogisticModel {
  Vector weights;
  double bias = 0.0;
  Penalty penalty = Penalty::None;
  /// Strength actually applied (after the kMinLambda floor).
  double lambda = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct GaussianKernel {
  double sigma = 1.0;
};

struct PolynomialKernel {
  int degree = 3;
  double offset = 1.0;
};

using Kernel = std::variant<GaussianKernel, PolynomialKernel>;

std::string describe(const Kernel& kernel);

/// Per-feature affine map to zero mean and unit variance.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& X);
  Matrix apply(const Matrix& X) const;
  Vector apply(std::span<const double> x) const;
};

/// f(x) = sum_i alpha_i k(s_i, z) + b on standardized z; support points are
/// stored already standardized.
struct KernelLogisticModel {
  Vector dual_coefficients;
  double bias = 0.0;
  Kernel kernel;
  double lambda = 0.0;
  Matrix support_points;
  Standardizer standardizer;
  bool converged = false;
  int iterations = 0;
};

double sigmoid(double score) noexcept;

/// Regularized objective: mean negative log-likelihood plus
/// (lambda/2)|w|^2 for L2 or lambda|w|_1 for L1. `params` holds the weights
/// followed by the unpenalized bias. Penalty::None evaluates with lambda as
/// given (no floor) so that the raw likelihood can be inspected.
double regularized_logistic_loss(const Matrix& X, std::span<const int> y, const Vector& params,
                                 Penalty penalty, double lambda);

/// Gradient of regularized_logistic_loss; for L1 uses lambda*sign(w).
Vector regularized_logistic_gradient(const Matrix& X, std::span<const int> y,
                                     const Vector& params, Penalty penalty, double lambda);

/// Fits P(y=1|x) = sigmoid(w.x + b). None and L2 use damped Newton, L1 uses
/// accelerated proximal gradient. Penalty::None still applies an L2
/// stabilizer of kMinLambda.
LinearLogisticModel fit_linear_logistic(const Matrix& X, std::span<const int> y, Penalty penalty,
                                        const TrainConfig& cfg);

double predict_proba(const LinearLogisticModel& model, std::span<const double> x);
double predict_proba(const KernelLogisticModel& model, std::span<const double> x);
Vector predict_proba(const LinearLogisticModel& model, const Matrix& X);
Vector predict_proba(const KernelLogisticModel& model, const Matrix& X);

double kernel_eval(const Kernel& kernel, std::span<const double> x, std::span<const double> z);

inline constexpr std::size_t kMaxKernelPoints = 20000;

/// Kernel logistic regression with penalty (lambda/2) a'Ka. The kernel
/// matrix is factorized by pivoted Cholesky to relative tolerance 1e-12, so
/// the dual expansion lives on the pivot points only.
KernelLogisticModel fit_kernel_logistic(const Matrix& X, std::span<const int> y, const Kernel& kernel,
                                        const TrainConfig& cfg);

/// Median pairwise Euclidean distance; subsamples 1000 rows (seeded) above
/// that size and falls back to 1.0 when the median is zero.
double median_heuristic_bandwidth(const Matrix& X, std::uint64_t seed = 0);

/// Pivoted (incomplete) Cholesky of the kernel matrix of X's rows.
struct PivotedCholesky {
  Matrix factor;                     // n x r, K ~= factor * factor'
  std::vector<std::size_t> pivots;   // r row indices of X
};

PivotedCholesky pivoted_cholesky(const Matrix& X, const Kernel& kernel, double relative_tolerance);

/// Any fitted probabilistic classifier behind one interface.
class ProbabilisticClassifier {
 public:
  ProbabilisticClassifier(LinearLogisticModel model) : model_(std::move(model)) {}
  ProbabilisticClassifier(KernelLogisticModel model) : model_(std::move(model)) {}

  Vector predict(const Matrix& X) const;
  bool converged() const;

 private:
  std::variant<LinearLogisticModel, KernelLogisticModel> model_;
};

/// Fits the core named by `kind` with the declared defaults: Logistic is
/// unpenalized (stabilizer only), Ridge/Lasso use cfg.lambda, kernel cores
/// standardize inputs and use the median heuristic (Gaussian) or degree 3,
/// offset 1 (polynomial).
ProbabilisticClassifier fit_classifier(ClassifierKind kind, const Matrix& X, std::span<const int> y,
                                       const TrainConfig& cfg);

/// Canonical hyperparameter description used for fingerprints.
std::string describe(ClassifierKind kind, const TrainConfig& cfg);

}  // namespace fairdr
