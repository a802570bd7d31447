#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fairdr/classifiers.hpp"
#include "fairdr/error.hpp"

using namespace fairdr;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix X(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) X(i++, 0) = x;
  return X;
}

struct Blobs {
  Matrix X;
  std::vector<int> y;
};

Blobs overlapping_blobs(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Blobs b{Matrix(n, d), std::vector<int>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    b.y[static_cast<std::size_t>(i)] = label;
    for (int j = 0; j < d; ++j) b.X(i, j) = g(rng) + (label ? 0.8 : 0.0) + 0.3 * j;
  }
  return b;
}

std::vector<int> flipped(const std::vector<int>& y) {
  std::vector<int> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = 1 - y[i];
  return out;
}

double logistic(double s) { return 1.0 / (1.0 + std::exp(-s)); }

}  // namespace

TEST_CASE("symmetric two-point data gives probability one half at the origin") {
  TrainConfig cfg;
  cfg.lambda = 0.1;
  const auto m = fit_linear_logistic(column({-1, 1}), std::vector<int>{0, 1}, Penalty::L2, cfg);
  const double x[] = {0.0};
  CHECK(predict_proba(m, x) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("single class and bad inputs") {
  const TrainConfig cfg;
  CHECK_THROWS_AS(fit_linear_logistic(column({1, 2, 3}), std::vector<int>{1, 1, 1}, Penalty::L2, cfg), Error);
  try {
    fit_linear_logistic(column({1, 2, 3}), std::vector<int>{0, 0, 0}, Penalty::None, cfg);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingleClassData);
  }
  try {
    fit_linear_logistic(column({1, NAN}), std::vector<int>{0, 1}, Penalty::None, cfg);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteInput);
  }
  const auto m = fit_linear_logistic(column({-1, 1}), std::vector<int>{0, 1}, Penalty::L2, cfg);
  const double xy[] = {0.0, 1.0};
  CHECK_THROWS_AS(predict_proba(m, xy), Error);
}

TEST_CASE("separable data: stabilized fit solves the penalized score equations") {
  const Matrix X = column({-2, -1, 1, 2});
  const std::vector<int> y{0, 0, 1, 1};
  const TrainConfig cfg;
  const auto m = fit_linear_logistic(X, y, Penalty::None, cfg);
  CHECK(m.lambda == kMinLambda);

  // Oracle: the data are antisymmetric so the bias is 0; bisection on
  // (1/n) sum x (sigma(w x) - y) + lambda w = 0, increasing in w.
  auto score = [&](double w) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += X(i, 0) * (logistic(w * X(i, 0)) - y[static_cast<std::size_t>(i)]);
    return s / 4.0 + kMinLambda * w;
  };
  double lo = 0.0, hi = 100.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (score(mid) > 0 ? hi : lo) = mid;
  }
  const double w_oracle = 0.5 * (lo + hi);
  CHECK(m.weights[0] == doctest::Approx(w_oracle).epsilon(1e-6));
  CHECK(std::abs(m.bias) <= 1e-6);

  double s0 = 0.0, s1 = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double r = logistic(m.weights[0] * X(i, 0) + m.bias) - y[static_cast<std::size_t>(i)];
    s0 += r;
    s1 += X(i, 0) * r;
  }
  CHECK(std::abs(s0) <= 1e-6);
  CHECK(std::abs(s1 / 4.0 + kMinLambda * m.weights[0]) <= 1e-6);
}

TEST_CASE("predict_proba and sigmoid") {
  LinearLogisticModel zero;
  zero.weights = Vector::Zero(1);
  const double five[] = {5.0};
  CHECK(predict_proba(zero, five) == 0.5);

  LinearLogisticModel unit;
  unit.weights = Vector::Ones(1);
  const double q[] = {std::log(999.0)};
  CHECK(predict_proba(unit, q) == doctest::Approx(0.999).epsilon(1e-12));

  CHECK(sigmoid(1e6) < 1.0);
  CHECK(sigmoid(-1e6) > 0.0);

  KernelLogisticModel k;
  k.kernel = GaussianKernel{1.0};
  k.support_points = column({0, 1});
  k.dual_coefficients = Vector::Zero(2);
  k.standardizer = Standardizer::fit(column({0, 1}));
  const double any[] = {-7.5};
  CHECK(predict_proba(k, any) == 0.5);
}

TEST_CASE("kernel values") {
  const double zero[] = {0.0}, two[] = {2.0}, one[] = {1.0};
  CHECK(kernel_eval(GaussianKernel{1.0}, two, two) == 1.0);
  CHECK(kernel_eval(GaussianKernel{1.0}, zero, two) == doctest::Approx(std::exp(-2.0)));
  CHECK(kernel_eval(GaussianKernel{1.0}, zero, two) == doctest::Approx(0.13534).epsilon(1e-4));
  CHECK(kernel_eval(PolynomialKernel{3, 1.0}, one, one) == 8.0);
  const double pair[] = {1.0, 2.0};
  CHECK_THROWS_AS(kernel_eval(GaussianKernel{1.0}, one, pair), Error);
}

TEST_CASE("median heuristic") {
  CHECK(median_heuristic_bandwidth(column({0, 2})) == 2.0);
  CHECK(median_heuristic_bandwidth(column({0, 1, 3})) == 2.0);
  CHECK(median_heuristic_bandwidth(column({5, 5, 5})) == 1.0);
  // Even pair count: the two middle distances are averaged.
  CHECK(median_heuristic_bandwidth(column({-3, -1, 1, 3})) == 3.0);
}

TEST_CASE("analytic gradient matches central differences") {
  const auto b = overlapping_blobs(40, 2, 9);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (auto penalty : {Penalty::None, Penalty::L2, Penalty::L1}) {
    for (int k = 0; k < 10; ++k) {
      Vector p(3);
      for (int j = 0; j < 3; ++j) p[j] = 2.0 * g(rng);
      const Vector grad = regularized_logistic_gradient(b.X, b.y, p, penalty, 0.05);
      Vector fd(3);
      for (int j = 0; j < 3; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(p[j]));
        Vector up = p, dn = p;
        up[j] += h;
        dn[j] -= h;
        fd[j] = (regularized_logistic_loss(b.X, b.y, up, penalty, 0.05) -
                 regularized_logistic_loss(b.X, b.y, dn, penalty, 0.05)) / (2.0 * h);
      }
      CHECK((grad - fd).norm() / fd.norm() <= 1e-5);
    }
  }
}

TEST_CASE("label flip mirrors probabilities") {
  const auto b = overlapping_blobs(60, 2, 2);
  const TrainConfig cfg;
  for (auto kind : kAllClassifiers) {
    CAPTURE(to_string(kind));
    const Vector p = fit_classifier(kind, b.X, b.y, cfg).predict(b.X);
    const Vector q = fit_classifier(kind, b.X, flipped(b.y), cfg).predict(b.X);
    const double tol = kind == ClassifierKind::KlrGaussian || kind == ClassifierKind::KlrPolynomial ? 1e-9 : 1e-6;
    CHECK((p + q - Vector::Ones(p.size())).cwiseAbs().maxCoeff() <= tol);
    CHECK(p.minCoeff() > 0.0);
    CHECK(p.maxCoeff() < 1.0);
    CHECK(p.allFinite());
  }
}

TEST_CASE("L2 shrinkage towards the base rate") {
  auto b = overlapping_blobs(90, 1, 5);
  b.y[0] = 1;  // 46 of 90 positive
  double base = 0.0;
  for (int v : b.y) base += v;
  base /= static_cast<double>(b.y.size());

  double previous = INFINITY;
  for (double lambda : {0.01, 1.0, 100.0}) {
    TrainConfig cfg;
    cfg.lambda = lambda;
    const auto m = fit_linear_logistic(b.X, b.y, Penalty::L2, cfg);
    CHECK(m.converged);
    CHECK(m.weights.norm() < previous);
    previous = m.weights.norm();
    if (lambda == 100.0) {
      const Vector p = predict_proba(m, b.X);
      CHECK((p.array() - base).abs().maxCoeff() <= 0.01);
    }
  }
}

TEST_CASE("lasso zeroes a useless feature under strong penalty") {
  auto b = overlapping_blobs(200, 2, 8);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (Eigen::Index i = 0; i < b.X.rows(); ++i) b.X(i, 1) = g(rng);
  TrainConfig cfg;
  cfg.lambda = 0.05;
  const auto m = fit_linear_logistic(b.X, b.y, Penalty::L1, cfg);
  CHECK(m.converged);
  CHECK(m.weights[1] == 0.0);
  CHECK(m.weights[0] > 0.0);
}

TEST_CASE("kernel logistic regression") {
  const TrainConfig cfg;
  SUBCASE("two separable points") {
    const auto m = fit_kernel_logistic(column({0, 1}), std::vector<int>{0, 1}, GaussianKernel{1.0}, cfg);
    const double one[] = {1.0};
    CHECK(predict_proba(m, one) > 0.5);
  }

  SUBCASE("monotone on four points, matches a grid-search fit") {
    const Matrix X = column({-3, -1, 1, 3});
    const std::vector<int> y{0, 0, 1, 1};
    const auto model = fit_classifier(ClassifierKind::KlrGaussian, X, y, cfg);
    const Vector p = model.predict(X);
    CHECK(p[0] < p[3]);

    // The Gaussian kernel matrix is scale-free once sigma is the median
    // distance (3 on raw inputs). The optimum is odd, f = (-u, -v, v, u),
    // with penalty (lambda/2) f' K^-1 f.
    Eigen::Matrix4d K;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) K(i, j) = std::exp(-std::pow(X(i, 0) - X(j, 0), 2) / 18.0);
    const Eigen::Matrix4d Kinv = K.inverse();
    double best = INFINITY, best_u = 0, best_v = 0;
    for (double u = 0.0; u <= 15.0; u += 0.02) {
      for (double v = 0.0; v <= 15.0; v += 0.02) {
        const Eigen::Vector4d f(-u, -v, v, u);
        const double nll = 0.5 * (std::log1p(std::exp(-u)) + std::log1p(std::exp(-v)));
        const double obj = nll + 0.5 * cfg.lambda * f.dot(Kinv * f);
        if (obj < best) {
          best = obj;
          best_u = u;
          best_v = v;
        }
      }
    }
    CHECK(logistic(-best_u) < logistic(best_u));
    CHECK(p[3] == doctest::Approx(logistic(best_u)).epsilon(0.01));
    CHECK(p[2] == doctest::Approx(logistic(best_v)).epsilon(0.01));
    CHECK(p[0] == doctest::Approx(logistic(-best_u)).epsilon(0.05));
  }

  SUBCASE("deterministic") {
    const auto b = overlapping_blobs(80, 2, 6);
    for (auto kind : kAllClassifiers) {
      const Vector p = fit_classifier(kind, b.X, b.y, cfg).predict(b.X);
      const Vector q = fit_classifier(kind, b.X, b.y, cfg).predict(b.X);
      CHECK(p == q);
    }
  }

  SUBCASE("size guard") {
    const Matrix big = Matrix::Zero(static_cast<Eigen::Index>(kMaxKernelPoints) + 1, 1);
    std::vector<int> y(kMaxKernelPoints + 1, 0);
    y[0] = 1;
    try {
      fit_kernel_logistic(big, y, GaussianKernel{1.0}, cfg);
      FAIL("expected KernelMatrixTooLarge");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::KernelMatrixTooLarge);
    }
  }
}

TEST_CASE("pivoted cholesky reproduces the kernel matrix") {
  const auto b = overlapping_blobs(50, 2, 3);
  for (Kernel kernel : {Kernel{GaussianKernel{0.7}}, Kernel{PolynomialKernel{3, 1.0}}}) {
    const auto chol = pivoted_cholesky(b.X, kernel, 1e-12);
    Matrix K(50, 50);
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 50; ++j) {
        const double xi[] = {b.X(i, 0), b.X(i, 1)}, xj[] = {b.X(j, 0), b.X(j, 1)};
        K(i, j) = kernel_eval(kernel, xi, xj);
      }
    CHECK((chol.factor * chol.factor.transpose() - K).cwiseAbs().maxCoeff() <= 1e-9 * K.cwiseAbs().maxCoeff());
  }
  // A degree 3 polynomial kernel on 2-D inputs has rank at most 10.
  CHECK(pivoted_cholesky(b.X, PolynomialKernel{3, 1.0}, 1e-12).pivots.size() <= 10);
}
