#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "lgfed/common/error.hpp"
#include "lgfed/common/rng.hpp"
#include "lgfed/theory/linear_world.hpp"

using namespace lgfed;
using namespace lgfed::theory;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng = make_rng({seed});
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Independent oracle: pseudoinverse from a thin SVD.
Vector svd_pinv_solve(const Matrix& x, const Vector& y) {
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Vector coef = svd.matrixU().transpose() * y;
  const double cut = 1e-12 * s.maxCoeff();
  for (Eigen::Index i = 0; i < s.size(); ++i) coef[i] = s[i] > cut ? coef[i] / s[i] : 0.0;
  return svd.matrixV() * coef;
}

WorldParams small_world() {
  WorldParams p;
  p.d = 5;
  p.devices = 8;
  p.n_train = 40;
  p.n_test = 30;
  p.rho = 0.3;
  p.sigma = 0.5;
  p.input_dist = InputDist::gaussian_iso;
  return p;
}

}  // namespace

TEST_CASE("world generation conventions") {
  auto p = small_world();
  p.rho = 0.0;
  auto w = generate_world(p, 1);
  for (std::size_t m = 0; m < p.devices; ++m) CHECK(w.world.teacher(m) == w.world.v);

  p.rho = 0.4;
  p.sigma = 0.0;
  w = generate_world(p, 2);
  for (std::size_t m = 0; m < p.devices; ++m) {
    const auto& dev = w.devices[m];
    CHECK((dev.y_train - dev.x_train * w.world.teacher(m)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((dev.y_test - dev.x_test * w.world.teacher(m)).cwiseAbs().maxCoeff() == 0.0);
  }

  p.sigma = 1.0;
  w = generate_world(p, 3);
  // test labels stay noiseless while train labels carry noise
  CHECK((w.devices[0].y_test - w.devices[0].x_test * w.world.teacher(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((w.devices[0].y_train - w.devices[0].x_train * w.world.teacher(0)).cwiseAbs().maxCoeff() > 0.1);

  p.input_dist = InputDist::uniform_pm1;
  w = generate_world(p, 4);
  CHECK(w.devices[1].x_train.cwiseAbs().maxCoeff() <= 1.0);

  WorldParams reference;
  reference.d = 20;
  reference.devices = 100;
  reference.n_train = 2000;
  reference.n_test = 1000;
  w = generate_world(reference, 5);
  CHECK(w.devices.size() == 100);
  CHECK(w.devices[99].x_train.rows() == 2000);
  CHECK(w.devices[99].x_test.rows() == 1000);
  CHECK(w.world.v.size() == 20);

  CHECK_THROWS_AS(generate_world(WorldParams{.d = 0}, 1), ArgumentError);
  WorldParams neg = small_world();
  neg.rho = -1.0;
  CHECK_THROWS_AS(generate_world(neg, 1), ArgumentError);
}

TEST_CASE("device variance conventions") {
  // mean |r_m|^2 over many devices: d rho^2 per coordinate, rho^2 in total
  WorldParams p = small_world();
  p.d = 10;
  p.devices = 4000;
  p.n_train = 1;
  p.n_test = 1;
  p.rho = 0.5;
  for (auto conv : {DeviceVariance::per_coordinate, DeviceVariance::total}) {
    p.device_variance = conv;
    const auto w = generate_world(p, 11);
    double sum = 0.0;
    for (const auto& r : w.world.r) sum += r.squaredNorm();
    const double expected = conv == DeviceVariance::per_coordinate ? 10 * 0.25 : 0.25;
    CHECK(sum / 4000.0 == doctest::Approx(expected).epsilon(0.05));
  }
  WorldParams g{.d = 20, .input_dist = InputDist::gaussian_iso, .device_variance = DeviceVariance::total};
  CHECK(device_factor(g) == doctest::Approx(1.0));
  g.device_variance = DeviceVariance::per_coordinate;
  CHECK(device_factor(g) == doctest::Approx(20.0));
  g.input_dist = InputDist::uniform_pm1;
  CHECK(device_factor(g) == doctest::Approx(20.0 / 3.0));
}

TEST_CASE("fit_local recovers noiseless teachers") {
  auto p = small_world();
  p.sigma = 0.0;
  const auto w = generate_world(p, 7);
  for (std::size_t m = 0; m < p.devices; ++m) {
    const Vector u = w.world.teacher(m);
    CHECK((fit_local(w.devices[m]) - u).norm() / u.norm() < 1e-8);
  }
}

TEST_CASE("least squares on identity, underdetermined and zero designs") {
  const Matrix eye = Matrix::Identity(6, 6);
  Vector y(6);
  y << 1, -2, 3, 0.5, 0, 7;
  CHECK((fit_least_squares(eye, y) - y).norm() < 1e-12);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix x = random_matrix(4, 9, 100 + seed);
    const Vector t = random_matrix(4, 1, 200 + seed);
    const Vector got = fit_least_squares(x, t);
    const Vector want = svd_pinv_solve(x, t);
    CHECK((got - want).norm() < 1e-8 * std::max(1.0, want.norm()));
    CHECK((x * got - t).norm() < 1e-8);
  }

  // rank-deficient tall design (duplicated column)
  Matrix x = random_matrix(20, 4, 300);
  x.col(3) = x.col(1);
  const Vector t = random_matrix(20, 1, 301);
  CHECK((fit_least_squares(x, t) - svd_pinv_solve(x, t)).norm() < 1e-8);

  const Matrix zero = Matrix::Zero(5, 3);
  CHECK(fit_least_squares(zero, Vector::Ones(5)).norm() == 0.0);

  CHECK_THROWS_AS(fit_least_squares(Matrix(0, 3), Vector(0)), ArgumentError);
  CHECK_THROWS_AS(fit_least_squares(Matrix::Ones(3, 2), Vector::Ones(4)), ShapeError);
}

TEST_CASE("fit_global identities") {
  auto p = small_world();
  p.devices = 1;
  auto w = generate_world(p, 8);
  CHECK((fit_global(w.devices) - fit_local(w.devices[0])).norm() < 1e-10);

  // shared design: pooled solution is the mean of per-device OLS solutions
  p.devices = 6;
  w = generate_world(p, 9);
  Vector mean = Vector::Zero(static_cast<Eigen::Index>(p.d));
  for (std::size_t m = 0; m < p.devices; ++m) {
    const Vector y = w.devices[m].x_train * w.world.teacher(m) +
                     0.3 * random_matrix(static_cast<Eigen::Index>(p.n_train), 1, 500 + m);
    w.devices[m].x_train = w.devices[0].x_train;
    w.devices[m].y_train = y;
    mean += fit_local(w.devices[m]);
  }
  mean /= static_cast<double>(p.devices);
  CHECK((fit_global(w.devices) - mean).norm() < 1e-8);

  p.rho = 0.0;
  p.sigma = 0.0;
  w = generate_world(p, 10);
  CHECK((fit_global(w.devices) - w.world.v).norm() < 1e-8 * w.world.v.norm());

  CHECK_THROWS_AS(fit_global(std::span<const DeviceSample>{}), ArgumentError);
}

TEST_CASE("predict_alpha") {
  Vector u(2), v(2), x(2);
  u << 1, 1;
  v << 3, -1;
  x << 0.5, 2;
  CHECK(predict_alpha(u, v, 1.0, x) == doctest::Approx(u.dot(x)));
  CHECK(predict_alpha(u, v, 0.0, x) == doctest::Approx(v.dot(x)));
  Vector a(1), b(1), one(1);
  a << 2;
  b << 0;
  one << 1;
  CHECK(predict_alpha(a, b, 0.5, one) == doctest::Approx(1.0));
  CHECK_THROWS_AS(predict_alpha(u, v, 1.5, x), ArgumentError);
  CHECK_THROWS_AS(predict_alpha(u, v, -0.1, x), ArgumentError);
}

TEST_CASE("closed forms") {
  auto e = closed_form_errors(20, 2000, 100, 0.1, 1.5, 0.5);
  CHECK(e.e_local == doctest::Approx(20.0 / 2000.0 * 2.25));
  CHECK(e.e_local == doctest::Approx(0.0225));
  CHECK(e.e_global == doctest::Approx(0.99 * 0.01 + 20.0 * 2.25 / 200000.0));
  CHECK(e.e_global == doctest::Approx(0.010125));
  CHECK(e.alpha_star == doctest::Approx(0.01 / 0.0325));
  CHECK(e.alpha_star == doctest::Approx(0.30769).epsilon(1e-4));

  CHECK(closed_form_errors(20, 2000, 100, 0.0, 1.5, 0.3).alpha_star == 0.0);
  CHECK(closed_form_errors(20, 2000, 100, 0.2, 0.0, 0.3).alpha_star == 1.0);

  for (double rho : {0.0, 0.06, 0.1, 0.5}) {
    for (double sigma : {0.0, 0.5, 1.5}) {
      const auto e0 = closed_form_errors(20, 2000, 100, rho, sigma, 0.0);
      const auto e1 = closed_form_errors(20, 2000, 100, rho, sigma, 1.0);
      CHECK(e0.e_alpha == doctest::Approx(e0.e_global).epsilon(1e-14));
      CHECK(e1.e_alpha == doctest::Approx(e1.e_local).epsilon(1e-14));
    }
  }

  // the device factor scales only the rho^2 term
  const auto k = closed_form_errors(20, 2000, 100, 0.1, 1.5, 0.0, 20.0);
  CHECK(k.e_global == doctest::Approx(20 * 0.99 * 0.01 + 20.0 * 2.25 / 200000.0));
  CHECK(k.alpha_star == doctest::Approx(0.2 / (0.2 + 0.0225)));
  CHECK_THROWS_AS(closed_form_errors(20, 0, 1, 0.1, 1.0, 0.5), ArgumentError);
}

TEST_CASE("closed form convexity and the mixing inequality") {
  for (std::size_t m : {2u, 10u, 100u}) {
    for (double rho : {0.02, 0.1, 0.5}) {
      for (double sigma : {0.3, 1.5}) {
        const double h = 1e-3;
        for (double a = h; a < 1.0; a += 0.05) {
          const double f0 = closed_form_errors(20, 2000, m, rho, sigma, a - h).e_alpha;
          const double f1 = closed_form_errors(20, 2000, m, rho, sigma, a).e_alpha;
          const double f2 = closed_form_errors(20, 2000, m, rho, sigma, a + h).e_alpha;
          // exact second derivative of the quadratic
          const double dd = 2 * (20.0 / 2000) * sigma * sigma + 2 * (m - 1.0) / m * rho * rho -
                            2 * 20.0 / (m * 2000.0) * sigma * sigma;
          CHECK(dd > 0.0);
          CHECK((f0 - 2 * f1 + f2) / (h * h) == doctest::Approx(dd).epsilon(1e-4));
        }
        const auto e = closed_form_errors(20, 2000, m, rho, sigma, 0.0);
        const double best = closed_form_errors(20, 2000, m, rho, sigma, e.alpha_star).e_alpha;
        CHECK(best < std::min(e.e_local, e.e_global));
        // alpha_star is the exact minimiser over a fine grid (up to the grid spacing)
        for (double a = 0.0; a <= 1.0; a += 0.001)
          CHECK(closed_form_errors(20, 2000, m, rho, sigma, a).e_alpha >= best - 1e-15);
      }
    }
  }
}

TEST_CASE("alpha grid") {
  const auto g = alpha_grid();
  REQUIRE(g.size() == 21);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
  CHECK(g[6] == doctest::Approx(0.3));
  CHECK_THROWS_AS(alpha_grid(0.0), ArgumentError);
}

TEST_CASE("local estimator is unbiased over noise redraws") {
  auto p = small_world();
  p.devices = 1;
  p.n_train = 30;
  auto w = generate_world(p, 21);
  const Vector u = w.world.teacher(0);
  const Vector clean = w.devices[0].x_train * u;
  const int redraws = 600;
  const auto d = static_cast<Eigen::Index>(p.d);
  Vector sum = Vector::Zero(d), sum_sq = Vector::Zero(d);
  Rng rng = make_rng({22});
  std::normal_distribution<double> noise(0.0, p.sigma);
  for (int k = 0; k < redraws; ++k) {
    auto& y = w.devices[0].y_train;
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = clean[i] + noise(rng);
    const Vector est = fit_local(w.devices[0]);
    sum += est;
    sum_sq += est.cwiseProduct(est);
  }
  const Vector mean = sum / redraws;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double var = sum_sq[i] / redraws - mean[i] * mean[i];
    const double se = std::sqrt(var / redraws);
    CHECK(std::abs(mean[i] - u[i]) < 3 * se);
  }
}

TEST_CASE("monte carlo curve agrees with the quadratic and with direct prediction") {
  auto p = small_world();
  const auto grid = alpha_grid(0.25);
  const auto curve = mc_generalization(p, grid, 3, 42, 1);
  REQUIRE(curve.mean.size() == grid.size());

  // recompute trial 0..2 by explicit pointwise predictions
  std::vector<double> direct(grid.size(), 0.0);
  for (std::uint64_t t = 0; t < 3; ++t) {
    const auto w = generate_world(p, derive_seed({42, 0x7e1a1, t}));
    const Vector v_hat = fit_global(w.devices);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      double err = 0.0;
      for (std::size_t m = 0; m < p.devices; ++m) {
        const Vector u_hat = fit_local(w.devices[m]);
        const auto& dev = w.devices[m];
        for (Eigen::Index i = 0; i < dev.x_test.rows(); ++i) {
          const Vector x = dev.x_test.row(i).transpose();
          const double r = predict_alpha(u_hat, v_hat, grid[j], x) - dev.y_test[i];
          err += r * r;
        }
      }
      direct[j] += err / static_cast<double>(p.devices * p.n_test) / 3.0;
    }
  }
  for (std::size_t j = 0; j < grid.size(); ++j) CHECK(curve.mean[j] == doctest::Approx(direct[j]).epsilon(1e-10));

  // threads do not change results
  const auto threaded = mc_generalization(p, grid, 3, 42, 3);
  CHECK(threaded.mean == curve.mean);
  CHECK(threaded.stddev == curve.stddev);

  CHECK_THROWS_AS(mc_generalization(p, grid, 0, 1), ArgumentError);
  const std::vector<double> bad{0.5, 1.2};
  CHECK_THROWS_AS(mc_generalization(p, bad, 1, 1), ArgumentError);
}

TEST_CASE("monte carlo local error matches the variance term") {
  WorldParams p;
  p.d = 20;
  p.devices = 20;
  p.n_train = 2000;
  p.n_test = 200;
  p.rho = 0.0;
  p.sigma = 1.5;
  p.input_dist = InputDist::gaussian_iso;
  const std::vector<double> ends{0.0, 1.0};
  const auto curve = mc_generalization(p, ends, 30, 5, 1);
  // finite-N gaussian design inflates d/N by N/(N-d-1)
  CHECK(curve.mean[1] == doctest::Approx(0.0225).epsilon(0.15));
  const auto cf = closed_form_errors(20, 2000, 20, 0.0, 1.5, 0.0);
  CHECK(curve.mean[0] == doctest::Approx(cf.e_global).epsilon(0.15));
}

TEST_CASE("empirical alpha star") {
  auto p = small_world();
  p.rho = 0.0;
  auto curve = mc_generalization(p, alpha_grid(), 4, 3, 1);
  CHECK(empirical_alpha_star(curve) == 0.0);

  p.rho = 0.3;
  p.sigma = 0.0;
  curve = mc_generalization(p, alpha_grid(), 4, 3, 1);
  CHECK(empirical_alpha_star(curve) == 1.0);

  McCurve tie;
  tie.alphas = {0.0, 0.05, 0.1};
  tie.mean = {2.0, 1.0, 1.0};
  CHECK(empirical_alpha_star(tie) == 0.05);
  tie.alphas = {0.0, 0.5, 1.0};
  CHECK_THROWS_AS(empirical_alpha_star(tie), ArgumentError);
}

TEST_CASE("bias variance decomposition is additive") {
  auto p = small_world();
  p.devices = 6;
  p.n_train = 25;
  p.n_test = 40;
  p.sigma = 1.0;
  for (double alpha : {0.0, 0.4, 1.0}) {
    const auto rep = mc_decomposition(p, alpha, 6, 60, 77);
    CHECK(rep.total_error >= 0.0);
    CHECK(rep.alpha == alpha);
    // total = bias^2 + Var holds per outer draw up to the variance estimator's 1/K scaling
    CHECK(std::abs(rep.total_error - (rep.bias_sq + rep.variance)) < 3 * rep.total_se + 1e-12);
    CHECK(rep.total_error == doctest::Approx(rep.bias_sq + rep.variance).epsilon(1e-9));
    if (alpha == 1.0) CHECK(rep.bias_sq < 0.1 * rep.total_error);
  }
  // at alpha = 0 the bias is the global model's delta
  const auto rep0 = mc_decomposition(p, 0.0, 3, 20, 5);
  CHECK(rep0.bias_sq == doctest::Approx(rep0.delta_sq).epsilon(1e-12));
  CHECK_THROWS_AS(mc_decomposition(p, 0.5, 1, 1, 1), ArgumentError);
}

TEST_CASE("curve csv") {
  McCurve c;
  c.alphas = {0.0, 0.05};
  c.mean = {0.5, 0.25};
  c.stddev = {0.01, 0.02};
  c.closed_form = {0.4, 0.3};
  std::ostringstream os;
  write_curve_csv(os, c);
  const std::string s = os.str();
  CHECK(s.rfind("alpha,mc_mean,mc_std,closed_form\n", 0) == 0);
  CHECK(s.find("0.0500,2.5000000000e-01,2.0000000000e-02,3.0000000000e-01\n") != std::string::npos);
}
