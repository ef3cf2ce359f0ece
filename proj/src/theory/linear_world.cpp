#include "lgfed/theory/linear_world.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "lgfed/common/error.hpp"
#include "lgfed/common/parallel.hpp"
#include "lgfed/common/rng.hpp"

namespace lgfed::theory {

namespace {

void fill_inputs(Matrix& x, InputDist dist, Rng& rng) {
  if (dist == InputDist::gaussian_iso) {
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = g(rng);
  } else {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = u(rng);
  }
}

void check_params(const WorldParams& p) {
  if (p.d < 1 || p.devices < 1 || p.n_train < 1) throw ArgumentError("d, M and N must be at least 1");
  if (!(p.rho >= 0.0) || !(p.sigma >= 0.0)) throw ArgumentError("rho and sigma must be nonnegative");
}

}  // namespace

GeneratedWorld generate_world(const WorldParams& params, std::uint64_t seed) {
  check_params(params);
  GeneratedWorld out;
  auto& w = out.world;
  w.params = params;
  const auto d = static_cast<Eigen::Index>(params.d);

  Rng teacher_rng = make_rng({seed, 0x7ea});
  std::uniform_real_distribution<double> v_dist(0.0, 1.0);
  w.v.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) w.v[i] = v_dist(teacher_rng);
  const double r_std = params.device_variance == DeviceVariance::per_coordinate
                           ? params.rho
                           : params.rho / std::sqrt(static_cast<double>(params.d));
  std::normal_distribution<double> r_dist(0.0, 1.0);
  w.r.assign(params.devices, Vector::Zero(d));
  for (auto& r : w.r)
    for (Eigen::Index i = 0; i < d; ++i) r[i] = r_std * r_dist(teacher_rng);

  out.devices.resize(params.devices);
  for (std::size_t m = 0; m < params.devices; ++m) {
    Rng rng = make_rng({seed, 0xda7a, m});
    auto& dev = out.devices[m];
    const Vector u = w.teacher(m);
    dev.x_train.resize(static_cast<Eigen::Index>(params.n_train), d);
    fill_inputs(dev.x_train, params.input_dist, rng);
    dev.y_train = dev.x_train * u;
    if (params.sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, params.sigma);
      for (Eigen::Index i = 0; i < dev.y_train.size(); ++i) dev.y_train[i] += noise(rng);
    }
    dev.x_test.resize(static_cast<Eigen::Index>(params.n_test), d);
    fill_inputs(dev.x_test, params.input_dist, rng);
    dev.y_test = dev.x_test * u;
  }
  return out;
}

namespace {

Vector solve_normal(const Matrix& gram, const Vector& rhs, const Matrix* design, const Vector* y) {
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() == Eigen::Success) {
    // Cholesky succeeds on numerically singular Gram matrices too; reject a tiny pivot.
    const Vector diag = llt.matrixL().toDenseMatrix().diagonal();
    const double scale = std::max(1.0, gram.diagonal().cwiseAbs().maxCoeff());
    if (diag.minCoeff() > 1e-10 * std::sqrt(scale)) return llt.solve(rhs);
  }
  if (design != nullptr) return design->completeOrthogonalDecomposition().solve(*y);
  return gram.completeOrthogonalDecomposition().solve(rhs);
}

}  // namespace

Vector fit_least_squares(const Matrix& x, const Vector& y) {
  if (x.rows() < 1) throw ArgumentError("least squares needs at least one sample");
  if (x.rows() != y.size()) throw ShapeError("design rows and targets differ");
  const Matrix gram = x.transpose() * x;
  const Vector rhs = x.transpose() * y;
  return solve_normal(gram, rhs, &x, &y);
}

Vector fit_local(const DeviceSample& device) { return fit_least_squares(device.x_train, device.y_train); }

Vector fit_global(std::span<const DeviceSample> devices) {
  if (devices.empty()) throw ArgumentError("pooled fit needs at least one device");
  const auto d = devices.front().x_train.cols();
  Matrix gram = Matrix::Zero(d, d);
  Vector rhs = Vector::Zero(d);
  Eigen::Index rows = 0;
  for (const auto& dev : devices) {
    gram.noalias() += dev.x_train.transpose() * dev.x_train;
    rhs.noalias() += dev.x_train.transpose() * dev.y_train;
    rows += dev.x_train.rows();
  }
  if (rows < 1) throw ArgumentError("pooled fit needs at least one sample");
  // Pseudoinverse of (sum X^T X) applied to sum X^T y is the minimum-norm pooled solution.
  return solve_normal(gram, rhs, nullptr, nullptr);
}

double predict_alpha(const Vector& u_hat, const Vector& v_hat, double alpha, const Vector& x) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must lie in [0, 1]");
  return alpha * u_hat.dot(x) + (1.0 - alpha) * v_hat.dot(x);
}

ClosedFormErrors closed_form_errors(std::size_t d, std::size_t n, std::size_t m, double rho,
                                    double sigma, double alpha, double device_factor) {
  if (n < 1 || m < 1) throw ArgumentError("N and M must be at least 1");
  const double dd = static_cast<double>(d), nn = static_cast<double>(n), mm = static_cast<double>(m);
  const double data_local = dd / nn * sigma * sigma;
  const double data_global = dd / (mm * nn) * sigma * sigma;
  const double device = device_factor * (mm - 1.0) / mm * rho * rho;
  ClosedFormErrors e;
  e.e_local = data_local;
  e.e_global = device + data_global;
  e.e_alpha = alpha * alpha * data_local + (1 - alpha) * (1 - alpha) * device + (1 - alpha * alpha) * data_global;
  const double dev_sq = device_factor * rho * rho;
  e.alpha_star = dev_sq + data_local > 0.0 ? dev_sq / (dev_sq + data_local) : 0.0;
  return e;
}

double device_factor(const WorldParams& params) {
  const double trace = params.input_dist == InputDist::gaussian_iso ? static_cast<double>(params.d)
                                                                     : static_cast<double>(params.d) / 3.0;
  return params.device_variance == DeviceVariance::per_coordinate ? trace
                                                                  : trace / static_cast<double>(params.d);
}

std::vector<double> alpha_grid(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw ArgumentError("alpha step must lie in (0, 1]");
  std::vector<double> grid;
  const auto n = static_cast<std::size_t>(std::llround(1.0 / step));
  for (std::size_t i = 0; i <= n; ++i) grid.push_back(std::min(1.0, static_cast<double>(i) * step));
  if (grid.back() < 1.0) grid.push_back(1.0);
  return grid;
}

namespace {

// Mean test error per alpha for one trial, via the exact quadratic form in alpha:
// err(a) = a^2 A'SA + 2a(1-a) A'SB + (1-a)^2 B'SB with A = u_hat - u, B = v_hat - u.
std::vector<double> trial_errors(const WorldParams& params, std::span<const double> alphas,
                                 std::uint64_t trial_seed) {
  const auto world = generate_world(params, trial_seed);
  const Vector v_hat = fit_global(world.devices);
  std::vector<double> err(alphas.size(), 0.0);
  for (std::size_t m = 0; m < params.devices; ++m) {
    const auto& dev = world.devices[m];
    const Vector u = world.world.teacher(m);
    const Vector a = fit_local(dev) - u;
    const Vector b = v_hat - u;
    const Vector xa = dev.x_test * a;
    const Vector xb = dev.x_test * b;
    const double inv = 1.0 / static_cast<double>(dev.x_test.rows());
    const double aa = xa.squaredNorm() * inv, ab = xa.dot(xb) * inv, bb = xb.squaredNorm() * inv;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      const double al = alphas[k];
      err[k] += al * al * aa + 2 * al * (1 - al) * ab + (1 - al) * (1 - al) * bb;
    }
  }
  for (auto& e : err) e /= static_cast<double>(params.devices);
  return err;
}

}  // namespace

McCurve mc_generalization(const WorldParams& params, std::span<const double> alphas,
                          std::size_t trials, std::uint64_t seed, std::size_t threads) {
  check_params(params);
  if (trials < 1) throw ArgumentError("trials must be at least 1");
  if (params.n_test < 1) throw ArgumentError("test set must be nonempty");
  for (double a : alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ArgumentError("alpha must lie in [0, 1]");

  std::vector<std::vector<double>> per_trial(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    per_trial[t] = trial_errors(params, alphas, derive_seed({seed, 0x7e1a1, t}));
  });

  McCurve curve;
  curve.params = params;
  curve.trials = trials;
  curve.alphas.assign(alphas.begin(), alphas.end());
  const double k = device_factor(params);
  for (std::size_t j = 0; j < alphas.size(); ++j) {
    double sum = 0.0;
    for (const auto& row : per_trial) sum += row[j];
    const double mean = sum / static_cast<double>(trials);
    double ss = 0.0;
    for (const auto& row : per_trial) ss += (row[j] - mean) * (row[j] - mean);
    curve.mean.push_back(mean);
    curve.stddev.push_back(std::sqrt(ss / static_cast<double>(trials)));
    curve.closed_form.push_back(
        closed_form_errors(params.d, params.n_train, params.devices, params.rho, params.sigma, alphas[j], k).e_alpha);
  }
  return curve;
}

double empirical_alpha_star(const McCurve& curve) {
  if (curve.alphas.empty()) throw ArgumentError("empty curve");
  for (std::size_t i = 1; i < curve.alphas.size(); ++i)
    if (curve.alphas[i] - curve.alphas[i - 1] > 0.05 + 1e-12) throw ArgumentError("alpha grid step exceeds 0.05");
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.mean.size(); ++i) {
    const bool better = curve.mean[i] < curve.mean[best] ||
                        (curve.mean[i] == curve.mean[best] && curve.alphas[i] < curve.alphas[best]);
    if (better) best = i;
  }
  return curve.alphas[best];
}

DecompositionReport mc_decomposition(const WorldParams& params, double alpha, std::size_t outer,
                                     std::size_t noise_redraws, std::uint64_t seed) {
  check_params(params);
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must lie in [0, 1]");
  if (outer < 1 || noise_redraws < 2) throw ArgumentError("need outer >= 1 and noise_redraws >= 2");

  DecompositionReport rep;
  rep.alpha = alpha;
  std::vector<double> totals;
  for (std::size_t o = 0; o < outer; ++o) {
    auto world = generate_world(params, derive_seed({seed, 0xdec0, o}));
    const std::size_t m_count = params.devices;
    // Noiseless training responses; each redraw adds fresh noise to them.
    std::vector<Vector> clean(m_count);
    for (std::size_t m = 0; m < m_count; ++m) clean[m] = world.devices[m].x_train * world.world.teacher(m);

    const auto nt = static_cast<Eigen::Index>(params.n_test);
    std::vector<Vector> sum(m_count, Vector::Zero(nt)), sum_sq(m_count, Vector::Zero(nt)),
        sum_global(m_count, Vector::Zero(nt));
    double total = 0.0;
    for (std::size_t k = 0; k < noise_redraws; ++k) {
      Rng rng = make_rng({seed, 0x9015e, o, k});
      std::normal_distribution<double> noise(0.0, params.sigma);
      for (std::size_t m = 0; m < m_count; ++m) {
        auto& y = world.devices[m].y_train;
        y = clean[m];
        if (params.sigma > 0.0)
          for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += noise(rng);
      }
      const Vector v_hat = fit_global(world.devices);
      for (std::size_t m = 0; m < m_count; ++m) {
        const auto& dev = world.devices[m];
        const Vector fg = dev.x_test * v_hat;
        const Vector f = alpha * (dev.x_test * fit_local(dev)) + (1.0 - alpha) * fg;
        sum[m] += f;
        sum_sq[m] += f.cwiseProduct(f);
        sum_global[m] += fg;
        total += (f - dev.y_test).squaredNorm();
      }
    }
    const double kk = static_cast<double>(noise_redraws);
    const double points = static_cast<double>(m_count) * static_cast<double>(nt);
    double bias = 0.0, var = 0.0, delta = 0.0;
    for (std::size_t m = 0; m < m_count; ++m) {
      const Vector mean = sum[m] / kk;
      bias += (world.devices[m].y_test - mean).squaredNorm();
      var += (sum_sq[m] / kk - mean.cwiseProduct(mean)).sum();
      delta += (world.devices[m].y_test - sum_global[m] / kk).squaredNorm();
    }
    const double t = total / (points * kk);
    totals.push_back(t);
    rep.total_error += t;
    rep.bias_sq += bias / points;
    rep.variance += var / points;
    rep.delta_sq += delta / points;
  }
  const double oo = static_cast<double>(outer);
  rep.total_error /= oo;
  rep.bias_sq /= oo;
  rep.variance /= oo;
  rep.delta_sq /= oo;
  double ss = 0.0;
  for (double t : totals) ss += (t - rep.total_error) * (t - rep.total_error);
  rep.total_se = outer > 1 ? std::sqrt(ss / (oo - 1.0) / oo) : 0.0;
  return rep;
}

void write_curve_csv(std::ostream& out, const McCurve& curve) {
  out << "alpha,mc_mean,mc_std,closed_form\n";
  char line[160];
  for (std::size_t i = 0; i < curve.alphas.size(); ++i) {
    std::snprintf(line, sizeof line, "%.4f,%.10e,%.10e,%.10e\n", curve.alphas[i], curve.mean[i],
                  curve.stddev[i], curve.closed_form[i]);
    out << line;
  }
}

}  // namespace lgfed::theory
