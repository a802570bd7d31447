#include "fairdr/ratio_matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "fairdr/classifiers.hpp"
#include "fairdr/error.hpp"

namespace fairdr {

namespace {

void check_samples(const Matrix& numerator, const Matrix& denominator) {
  if (numerator.rows() == 0 || denominator.rows() == 0) {
    throw Error(ErrorCode::EmptySampleSet,
                fmt::format("numerator has {} rows, denominator {}", numerator.rows(), denominator.rows()));
  }
  if (numerator.cols() != denominator.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("numerator dimension {} vs denominator {}", numerator.cols(), denominator.cols()));
  }
  if (numerator.cols() < 1 || numerator.cols() > 2) {
    throw Error(ErrorCode::DimensionMismatch, "ratio cores support 1 or 2 dimensions");
  }
  if (!numerator.allFinite() || !denominator.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "non-finite sample");
  }
}

Matrix squared_distances(const Matrix& points, const Matrix& centers) {
  Matrix out(points.rows(), centers.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index l = 0; l < centers.rows(); ++l) out(i, l) = (points.row(i) - centers.row(l)).squaredNorm();
  }
  return out;
}

Matrix gaussian_of(const Matrix& sq_dist, double sigma) {
  const double scale = -1.0 / (2.0 * sigma * sigma);
  return (sq_dist.array() * scale).exp().matrix();
}

// Sorted copy of `grid` times `unit`.
std::vector<double> scaled_grid(std::vector<double> grid, double unit) {
  std::sort(grid.begin(), grid.end());
  for (auto& g : grid) g *= unit;
  return grid;
}

double pooled_median(const Matrix& numerator, const Matrix& denominator, std::uint64_t seed) {
  Matrix pooled(numerator.rows() + denominator.rows(), numerator.cols());
  pooled << numerator, denominator;
  if (pooled.rows() < 2) return 1.0;
  return median_heuristic_bandwidth(pooled, seed);
}

struct SolveResult {
  Vector theta;
  bool ok = false;
};

SolveResult solve_regularized(const Matrix& H, const Vector& h, double lambda) {
  Matrix system = H;
  system.diagonal().array() += lambda;
  Eigen::LDLT<Matrix> ldlt(system);
  SolveResult out;
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return out;
  const auto pivots = ldlt.vectorD().cwiseAbs();
  const double eps = std::numeric_limits<double>::epsilon() * static_cast<double>(system.rows());
  if (pivots.minCoeff() <= eps * pivots.maxCoeff()) return out;
  out.theta = ldlt.solve(h);
  const double residual = (system * out.theta - h).norm();
  out.ok = out.theta.allFinite() && residual <= 1e-8 * std::max(h.norm(), 1e-300);
  return out;
}

// Closed-form LOO on precomputed designs (rows = samples, cols = basis).
double loocv_from_design(const Matrix& phi_num, const Matrix& phi_den, double lambda, double alpha) {
  const Eigen::Index n_num = phi_num.rows();
  const Eigen::Index n_den = phi_den.rows();
  if (n_num < 2 || n_den < 2) {
    throw Error(ErrorCode::InvalidArgument, "leave-one-out needs at least 2 samples per set");
  }
  const Eigen::Index b = phi_num.cols();
  const Eigen::Index n_min = std::min(n_num, n_den);
  const double c_num = alpha / static_cast<double>(n_num - 1);
  const double c_den = (1.0 - alpha) / static_cast<double>(n_den - 1);

  Matrix A = c_num * (phi_num.transpose() * phi_num) + c_den * (phi_den.transpose() * phi_den);
  A.diagonal().array() += lambda;
  Eigen::LDLT<Matrix> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error(ErrorCode::SingularSystem, "leave-one-out system is not positive definite");
  }
  const Vector h_sum = phi_num.colwise().sum().transpose();
  const Vector A_h = ldlt.solve(h_sum);
  const Matrix A_num = ldlt.solve(phi_num.topRows(n_min).transpose());
  const Matrix A_den = ldlt.solve(phi_den.topRows(n_min).transpose());
  if (!A_h.allFinite() || !A_num.allFinite() || !A_den.allFinite()) {
    throw Error(ErrorCode::SingularSystem, "leave-one-out solve produced non-finite values");
  }

  const double sx = std::sqrt(c_num);
  const double sy = std::sqrt(c_den);
  double total = 0.0;
  Vector theta(b);
  for (Eigen::Index i = 0; i < n_min; ++i) {
    const auto px = phi_num.row(i).transpose();
    const auto py = phi_den.row(i).transpose();
    const auto ax = A_num.col(i);
    const auto ay = A_den.col(i);
    const Vector u = (A_h - ax) / static_cast<double>(n_num - 1);
    Eigen::Matrix2d gram;
    gram(0, 0) = 1.0 - c_num * px.dot(ax);
    gram(0, 1) = -sx * sy * px.dot(ay);
    gram(1, 0) = -sx * sy * py.dot(ax);
    gram(1, 1) = 1.0 - c_den * py.dot(ay);
    const Eigen::Vector2d rhs(sx * px.dot(u), sy * py.dot(u));
    const Eigen::Vector2d coef = gram.partialPivLu().solve(rhs);
    theta = u + (sx * coef[0]) * ax + (sy * coef[1]) * ay;
    theta = theta.cwiseMax(0.0);
    const double r_num = px.dot(theta);
    const double r_den = py.dot(theta);
    total += 0.5 * alpha * r_num * r_num + 0.5 * (1.0 - alpha) * r_den * r_den - r_num;
  }
  const double score = total / static_cast<double>(n_min);
  if (!std::isfinite(score)) throw Error(ErrorCode::SingularSystem, "non-finite leave-one-out score");
  return score;
}

struct GridChoice {
  double sigma = 0.0;
  double lambda = 0.0;
  double score = std::numeric_limits<double>::infinity();
  bool found = false;
};

}  // namespace

std::string_view to_string(RatioMethod method) noexcept {
  return method == RatioMethod::Lsif ? "lsif" : "ulsif";
}

void RatioCoreConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
  if (n_centers < 1) throw Error(ErrorCode::InvalidArgument, "n_centers must be >= 1");
  if (sigma_grid.empty() || lambda_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid");
  for (double s : sigma_grid) {
    if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma grid entries must be positive");
  }
  for (double l : lambda_grid) {
    if (!(l >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda grid entries must be non-negative");
  }
}

std::string RatioCoreConfig::describe() const {
  return fmt::format("alpha={};centers={};sigma_grid={};sigma_relative={};lambda_grid={};seed={};lsif_iter={};lsif_tol={};lsif_folds={}",
                     alpha, n_centers, fmt::join(sigma_grid, "|"), sigma_relative_to_median,
                     fmt::join(lambda_grid, "|"), seed, lsif_max_iterations, lsif_tolerance, lsif_folds);
}

Matrix design_matrix(const Matrix& points, const Matrix& centers, double sigma) {
  if (points.cols() != centers.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("points have dimension {}, centers {}", points.cols(), centers.cols()));
  }
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
  return gaussian_of(squared_distances(points, centers), sigma);
}

Matrix select_centers(const Matrix& numerator, std::size_t n_centers, std::uint64_t seed) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(numerator.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  if (rows.size() > n_centers) {
    std::mt19937_64 rng(seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(n_centers);
  }
  Matrix centers(static_cast<Eigen::Index>(rows.size()), numerator.cols());
  for (std::size_t l = 0; l < rows.size(); ++l) centers.row(static_cast<Eigen::Index>(l)) = numerator.row(rows[l]);
  return centers;
}

RatioMoments ratio_moments(const Matrix& numerator, const Matrix& denominator, const Matrix& centers,
                           double sigma, double alpha) {
  check_samples(numerator, denominator);
  const Matrix phi_num = design_matrix(numerator, centers, sigma);
  const Matrix phi_den = design_matrix(denominator, centers, sigma);
  RatioMoments m;
  m.H = (alpha / static_cast<double>(phi_num.rows())) * (phi_num.transpose() * phi_num) +
        ((1.0 - alpha) / static_cast<double>(phi_den.rows())) * (phi_den.transpose() * phi_den);
  m.h = phi_num.colwise().mean().transpose();
  return m;
}

double loocv_score(const Matrix& numerator, const Matrix& denominator, const Matrix& centers, double sigma,
                   double lambda, double alpha) {
  check_samples(numerator, denominator);
  return loocv_from_design(design_matrix(numerator, centers, sigma), design_matrix(denominator, centers, sigma),
                           lambda, alpha);
}

double loocv_score(const Matrix& numerator, const Matrix& denominator, double sigma, double lambda,
                   double alpha) {
  return loocv_score(numerator, denominator, select_centers(numerator, 100, 0), sigma, lambda, alpha);
}

RatioModel fit_ulsif(const Matrix& numerator, const Matrix& denominator, const RatioCoreConfig& cfg) {
  cfg.validate();
  check_samples(numerator, denominator);
  RatioModel model;
  model.method = RatioMethod::Ulsif;
  model.alpha = cfg.alpha;
  model.centers = select_centers(numerator, cfg.n_centers, cfg.seed);
  const double unit = cfg.sigma_relative_to_median ? pooled_median(numerator, denominator, cfg.seed) : 1.0;
  const auto sigmas = scaled_grid(cfg.sigma_grid, unit);
  const auto lambdas = scaled_grid(cfg.lambda_grid, 1.0);

  const Matrix dist_num = squared_distances(numerator, model.centers);
  const Matrix dist_den = squared_distances(denominator, model.centers);

  GridChoice choice;
  if (sigmas.size() * lambdas.size() == 1) {
    choice = {sigmas.front(), lambdas.front(), std::numeric_limits<double>::quiet_NaN(), true};
  } else {
    for (double sigma : sigmas) {
      const Matrix phi_num = gaussian_of(dist_num, sigma);
      const Matrix phi_den = gaussian_of(dist_den, sigma);
      const Matrix H = (cfg.alpha / static_cast<double>(phi_num.rows())) * (phi_num.transpose() * phi_num) +
                       ((1.0 - cfg.alpha) / static_cast<double>(phi_den.rows())) * (phi_den.transpose() * phi_den);
      const Vector h = phi_num.colwise().mean().transpose();
      for (double lambda : lambdas) {
        if (!solve_regularized(H, h, lambda).ok) continue;
        double score = 0.0;
        try {
          score = loocv_from_design(phi_num, phi_den, lambda, cfg.alpha);
        } catch (const Error& e) {
          if (e.code() == ErrorCode::SingularSystem) continue;
          throw;
        }
        if (score < choice.score) choice = {sigma, lambda, score, true};
      }
    }
  }
  if (!choice.found) throw Error(ErrorCode::SingularSystem, "every grid point gave a singular system");

  const Matrix phi_num = gaussian_of(dist_num, choice.sigma);
  const Matrix phi_den = gaussian_of(dist_den, choice.sigma);
  const Matrix H = (cfg.alpha / static_cast<double>(phi_num.rows())) * (phi_num.transpose() * phi_num) +
                   ((1.0 - cfg.alpha) / static_cast<double>(phi_den.rows())) * (phi_den.transpose() * phi_den);
  const Vector h = phi_num.colwise().mean().transpose();
  const SolveResult solved = solve_regularized(H, h, choice.lambda);
  if (!solved.ok) {
    throw Error(ErrorCode::SingularSystem,
                fmt::format("H + lambda I singular at sigma={}, lambda={}", choice.sigma, choice.lambda));
  }
  model.sigma = choice.sigma;
  model.lambda = choice.lambda;
  model.selection_score = choice.score;
  model.raw_theta = solved.theta;
  model.theta = solved.theta.cwiseMax(0.0);
  return model;
}

Vector solve_lsif_qp(const Matrix& H, const Vector& h, double lambda, int max_iterations, double tolerance) {
  const Eigen::Index b = H.rows();
  const Vector c = h.array() - lambda;
  Vector theta = Vector::Zero(b);
  std::vector<bool> is_free(static_cast<std::size_t>(b), false);

  auto solve_free = [&](const std::vector<Eigen::Index>& free) {
    const auto m = static_cast<Eigen::Index>(free.size());
    Matrix sub(m, m);
    Vector rhs(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      rhs[a] = c[free[static_cast<std::size_t>(a)]];
      for (Eigen::Index q = 0; q < m; ++q) sub(a, q) = H(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(q)]);
    }
    Eigen::LDLT<Matrix> ldlt(sub);
    Vector z = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !z.allFinite()) {
      z = sub.completeOrthogonalDecomposition().solve(rhs);
    }
    return z;
  };

  int iterations = 0;
  while (iterations < max_iterations) {
    const Vector grad = H * theta - c;
    Eigen::Index entering = -1;
    double most_negative = -tolerance;
    for (Eigen::Index j = 0; j < b; ++j) {
      if (!is_free[static_cast<std::size_t>(j)] && grad[j] < most_negative) {
        most_negative = grad[j];
        entering = j;
      }
    }
    if (entering < 0) return theta;
    is_free[static_cast<std::size_t>(entering)] = true;

    bool first_inner = true;
    while (iterations < max_iterations) {
      ++iterations;
      std::vector<Eigen::Index> free;
      for (Eigen::Index j = 0; j < b; ++j) {
        if (is_free[static_cast<std::size_t>(j)]) free.push_back(j);
      }
      const Vector z = solve_free(free);
      bool feasible = true;
      for (Eigen::Index a = 0; a < z.size(); ++a) feasible = feasible && z[a] > 0.0;
      if (feasible) {
        for (std::size_t a = 0; a < free.size(); ++a) theta[free[a]] = z[static_cast<Eigen::Index>(a)];
        break;
      }
      double step = 1.0;
      for (std::size_t a = 0; a < free.size(); ++a) {
        const double za = z[static_cast<Eigen::Index>(a)];
        const double ta = theta[free[a]];
        if (za <= 0.0) step = std::min(step, ta / (ta - za));
      }
      for (std::size_t a = 0; a < free.size(); ++a) {
        theta[free[a]] += step * (z[static_cast<Eigen::Index>(a)] - theta[free[a]]);
      }
      bool entering_dropped = false;
      for (std::size_t a = 0; a < free.size(); ++a) {
        const auto j = free[a];
        if (theta[j] <= 0.0 || (z[static_cast<Eigen::Index>(a)] <= 0.0 && theta[j] <= 1e-300)) {
          theta[j] = 0.0;
          is_free[static_cast<std::size_t>(j)] = false;
          entering_dropped = entering_dropped || j == entering;
        }
      }
      if (first_inner && entering_dropped && step == 0.0) {
        // The entering coordinate cannot move: its gradient violation is
        // below the precision of the free-set solve.
        return theta;
      }
      first_inner = false;
    }
  }
  throw Error(ErrorCode::NonConvergence, fmt::format("LSIF active set exceeded {} iterations", max_iterations));
}

RatioModel fit_lsif(const Matrix& numerator, const Matrix& denominator, const RatioCoreConfig& cfg) {
  cfg.validate();
  check_samples(numerator, denominator);
  RatioModel model;
  model.method = RatioMethod::Lsif;
  model.alpha = 0.0;
  model.centers = select_centers(numerator, cfg.n_centers, cfg.seed);
  const double unit = cfg.sigma_relative_to_median ? pooled_median(numerator, denominator, cfg.seed) : 1.0;
  const auto sigmas = scaled_grid(cfg.sigma_grid, unit);
  const auto lambdas = scaled_grid(cfg.lambda_grid, 1.0);
  const Matrix dist_num = squared_distances(numerator, model.centers);
  const Matrix dist_den = squared_distances(denominator, model.centers);

  auto moments = [](const Matrix& phi_num, const Matrix& phi_den) {
    RatioMoments m;
    m.H = phi_den.transpose() * phi_den / static_cast<double>(phi_den.rows());
    m.h = phi_num.colwise().mean().transpose();
    return m;
  };

  GridChoice choice;
  const auto folds = static_cast<Eigen::Index>(
      std::min<Eigen::Index>({static_cast<Eigen::Index>(cfg.lsif_folds), numerator.rows(), denominator.rows()}));
  if (sigmas.size() * lambdas.size() == 1) {
    choice = {sigmas.front(), lambdas.front(), std::numeric_limits<double>::quiet_NaN(), true};
  } else {
    if (folds < 2) throw Error(ErrorCode::InvalidArgument, "hyperparameter selection needs 2 samples per set");
    auto fold_of = [&](Eigen::Index n, std::uint64_t salt) {
      std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 rng(cfg.seed ^ salt);
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<Eigen::Index> fold(static_cast<std::size_t>(n));
      for (std::size_t k = 0; k < order.size(); ++k) fold[static_cast<std::size_t>(order[k])] = static_cast<Eigen::Index>(k) % folds;
      return fold;
    };
    const auto fold_num = fold_of(numerator.rows(), 0x9e3779b97f4a7c15ULL);
    const auto fold_den = fold_of(denominator.rows(), 0xbf58476d1ce4e5b9ULL);
    auto rows_where = [](const Matrix& phi, const std::vector<Eigen::Index>& fold, Eigen::Index k, bool in) {
      std::vector<Eigen::Index> idx;
      for (std::size_t i = 0; i < fold.size(); ++i) {
        if ((fold[i] == k) == in) idx.push_back(static_cast<Eigen::Index>(i));
      }
      return Matrix(phi(idx, Eigen::all));
    };

    for (double sigma : sigmas) {
      const Matrix phi_num = gaussian_of(dist_num, sigma);
      const Matrix phi_den = gaussian_of(dist_den, sigma);
      for (double lambda : lambdas) {
        double total = 0.0;
        bool ok = true;
        for (Eigen::Index k = 0; k < folds && ok; ++k) {
          const Matrix train_num = rows_where(phi_num, fold_num, k, false);
          const Matrix train_den = rows_where(phi_den, fold_den, k, false);
          const Matrix test_num = rows_where(phi_num, fold_num, k, true);
          const Matrix test_den = rows_where(phi_den, fold_den, k, true);
          const RatioMoments m = moments(train_num, train_den);
          try {
            const Vector theta = solve_lsif_qp(m.H, m.h, lambda, cfg.lsif_max_iterations, cfg.lsif_tolerance);
            const Vector r_den = test_den * theta;
            const Vector r_num = test_num * theta;
            total += 0.5 * r_den.squaredNorm() / static_cast<double>(r_den.size()) - r_num.mean();
          } catch (const Error& e) {
            if (e.code() != ErrorCode::NonConvergence) throw;
            ok = false;
          }
        }
        const double score = total / static_cast<double>(folds);
        if (ok && std::isfinite(score) && score < choice.score) choice = {sigma, lambda, score, true};
      }
    }
  }
  if (!choice.found) throw Error(ErrorCode::NonConvergence, "no LSIF grid point converged");

  const Matrix phi_num = gaussian_of(dist_num, choice.sigma);
  const Matrix phi_den = gaussian_of(dist_den, choice.sigma);
  const RatioMoments m = moments(phi_num, phi_den);
  model.sigma = choice.sigma;
  model.lambda = choice.lambda;
  model.selection_score = choice.score;
  model.raw_theta = solve_lsif_qp(m.H, m.h, choice.lambda, cfg.lsif_max_iterations, cfg.lsif_tolerance);
  model.theta = model.raw_theta;
  return model;
}

RatioModel fit_ratio(RatioMethod method, const Matrix& numerator, const Matrix& denominator,
                     const RatioCoreConfig& cfg) {
  return method == RatioMethod::Lsif ? fit_lsif(numerator, denominator, cfg) : fit_ulsif(numerator, denominator, cfg);
}

double evaluate_ratio(const RatioModel& model, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != model.centers.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("model expects dimension {}, got {}", model.centers.cols(), x.size()));
  }
  const Eigen::Map<const Eigen::RowVectorXd> point(x.data(), static_cast<Eigen::Index>(x.size()));
  const double scale = -1.0 / (2.0 * model.sigma * model.sigma);
  double value = 0.0;
  for (Eigen::Index l = 0; l < model.centers.rows(); ++l) {
    value += model.theta[l] * std::exp(scale * (point - model.centers.row(l)).squaredNorm());
  }
  return std::max(value, 0.0);
}

Vector evaluate_ratio(const RatioModel& model, const Matrix& X) {
  if (X.cols() != model.centers.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("model expects dimension {}, got {}", model.centers.cols(), X.cols()));
  }
  return (design_matrix(X, model.centers, model.sigma) * model.theta).cwiseMax(0.0);
}

}  // namespace fairdr
