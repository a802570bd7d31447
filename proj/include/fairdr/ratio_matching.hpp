#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fairdr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class RatioMethod { Lsif, Ulsif };

std::string_view to_string(RatioMethod method) noexcept;

struct RatioCoreConfig {
  /// Relative-ratio mixing weight: r_alpha = p_num / (alpha p_num + (1 - alpha) p_den).
  double alpha = 0.0;
  std::size_t n_centers = 100;
  std::vector<double> sigma_grid{0.1, 0.25, 0.5, 0.75, 1.0, 2.0, 5.0};
  std::vector<double> lambda_grid{1e-3, 1e-2, 1e-1, 1.0};
  /// When set, sigma_grid entries are multiples of the median pairwise
  /// distance of the pooled samples; otherwise they are absolute.
  bool sigma_relative_to_median = true;
  std::uint64_t seed = 0;
  int lsif_max_iterations = 10000;
  double lsif_tolerance = 1e-8;
  /// Folds of the held-out criterion used to select LSIF hyperparameters.
  int lsif_folds = 5;

  void validate() const;
  std::string describe() const;
};

struct RatioModel {
  Vector theta;
  /// Solution before clipping (uLSIF) or the constrained solution (LSIF).
  Vector raw_theta;
  Matrix centers;
  double sigma = 1.0;
  double lambda = 0.0;
  double alpha = 0.0;
  RatioMethod method = RatioMethod::Ulsif;
  /// Selection criterion of the chosen grid point (NaN if no selection ran).
  double selection_score = 0.0;
};

/// Entry (i, l) = exp(-|x_i - c_l|^2 / (2 sigma^2)); points and centers are rows.
Matrix design_matrix(const Matrix& points, const Matrix& centers, double sigma);

/// Seeded subsample of min(n_centers, rows) numerator rows, in drawn order.
Matrix select_centers(const Matrix& numerator, std::size_t n_centers, std::uint64_t seed);

struct RatioMoments {
  Matrix H;  // alpha E_num[phi phi'] + (1 - alpha) E_den[phi phi']
  Vector h;  // E_num[phi]
};

RatioMoments ratio_moments(const Matrix& numerator, const Matrix& denominator, const Matrix& centers,
                           double sigma, double alpha);

RatioModel fit_ulsif(const Matrix& numerator, const Matrix& denominator, const RatioCoreConfig& cfg);
RatioModel fit_lsif(const Matrix& numerator, const Matrix& denominator, const RatioCoreConfig& cfg);
RatioModel fit_ratio(RatioMethod method, const Matrix& numerator, const Matrix& denominator,
                     const RatioCoreConfig& cfg);

double evaluate_ratio(const RatioModel& model, std::span<const double> x);
Vector evaluate_ratio(const RatioModel& model, const Matrix& X);

/// Closed-form leave-one-out criterion of the (relative) unconstrained fit.
/// Pairs (numerator i, denominator i) for i < min(n_num, n_den) are held out
/// together; each held-out solution is obtained from the full system by a
/// rank-2 Woodbury downdate, clipped at zero, and scored with
/// alpha/2 r_num^2 + (1 - alpha)/2 r_den^2 - r_num. Lower is better.
double loocv_score(const Matrix& numerator, const Matrix& denominator, const Matrix& centers, double sigma,
                   double lambda, double alpha);

/// Convenience overload drawing default centers (100, seed 0).
double loocv_score(const Matrix& numerator, const Matrix& denominator, double sigma, double lambda,
                   double alpha);

/// Non-negative, L1-penalized quadratic program
///   min 0.5 t'Ht - h't + lambda sum(t)  s.t. t >= 0
/// solved by a primal active-set method. Throws NonConvergence when the
/// iteration budget runs out.
Vector solve_lsif_qp(const Matrix& H, const Vector& h, double lambda, int max_iterations, double tolerance);

}  // namespace fairdr
