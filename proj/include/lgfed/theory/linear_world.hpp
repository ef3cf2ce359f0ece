#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace lgfed::theory {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class InputDist {
  gaussian_iso,  // x ~ N(0, I): E[xx^T] = I
  uniform_pm1,   // x ~ U[-1, 1]^d: E[xx^T] = I/3
};

// How rho enters the device deviations r_m.
enum class DeviceVariance {
  per_coordinate,  // r_m ~ N(0, rho^2 I): E|r_m|^2 = d rho^2
  total,           // r_m ~ N(0, rho^2/d I): E|r_m|^2 = rho^2
};

struct WorldParams {
  std::size_t d = 20;
  std::size_t devices = 100;
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  double rho = 0.1;
  double sigma = 1.5;
  InputDist input_dist = InputDist::uniform_pm1;
  DeviceVariance device_variance = DeviceVariance::per_coordinate;
};

/// Teacher state: device m labels with u_m = v + r_m.
struct LinearWorld {
  WorldParams params;
  Vector v;
  std::vector<Vector> r;

  Vector teacher(std::size_t m) const { return v + r[m]; }
};

struct DeviceSample {
  Matrix x_train;  // n_train x d
  Vector y_train;  // u_m^T x + eps
  Matrix x_test;   // n_test x d
  Vector y_test;   // noiseless u_m^T x
};

struct GeneratedWorld {
  LinearWorld world;
  std::vector<DeviceSample> devices;
};

GeneratedWorld generate_world(const WorldParams& params, std::uint64_t seed);

/// Minimum-norm least squares: normal equations by Cholesky, falling back to a complete
/// orthogonal decomposition of the design when the Gram matrix is singular.
Vector fit_least_squares(const Matrix& x, const Vector& y);

Vector fit_local(const DeviceSample& device);
/// Pooled least squares over every device's training set.
Vector fit_global(std::span<const DeviceSample> devices);

double predict_alpha(const Vector& u_hat, const Vector& v_hat, double alpha, const Vector& x);

struct ClosedFormErrors {
  double e_local = 0.0;
  double e_global = 0.0;
  double e_alpha = 0.0;
  double alpha_star = 0.0;
};

/// E_local = (d/N) s^2, E_global = k (M-1)/M r^2 + d/(MN) s^2,
/// E_alpha = a^2 (d/N) s^2 + (1-a)^2 k (M-1)/M r^2 + (1-a^2) d/(MN) s^2,
/// alpha* = k r^2 / (k r^2 + (d/N) s^2), where k = `device_factor` (1 for the printed
/// constants; see device_factor()).
ClosedFormErrors closed_form_errors(std::size_t d, std::size_t n, std::size_t m, double rho,
                                    double sigma, double alpha, double device_factor = 1.0);

/// E[(r^T x)^2] / rho^2 for a world: trace of the input second moment, divided by d under
/// DeviceVariance::total. Equals 1 for gaussian_iso with total device variance.
double device_factor(const WorldParams& params);

std::vector<double> alpha_grid(double step = 0.05);

struct McCurve {
  WorldParams params;
  std::vector<double> alphas;
  std::vector<double> mean;
  std::vector<double> stddev;       // across trials (population std)
  std::vector<double> closed_form;  // closed_form_errors(..., device_factor(params)).e_alpha
  std::size_t trials = 0;
};

/// Per trial: fresh r_m, inputs and noise; fit local and global estimators; average the
/// squared test error against noiseless teachers over devices and test points.
McCurve mc_generalization(const WorldParams& params, std::span<const double> alphas,
                          std::size_t trials, std::uint64_t seed, std::size_t threads = 1);

/// Grid argmin of the MC mean; ties go to the smaller alpha. Requires grid step <= 0.05.
double empirical_alpha_star(const McCurve& curve);

struct DecompositionReport {
  double total_error = 0.0;
  double bias_sq = 0.0;
  double variance = 0.0;
  double delta_sq = 0.0;
  double alpha = 0.0;
  double total_se = 0.0;  // MC standard error of total_error over outer draws
};

/// Bias/variance split of the alpha-mixed predictor. `outer` draws of (r_m, inputs);
/// inside each, `noise_redraws` label-noise draws give E_eps and Var_eps per test point.
DecompositionReport mc_decomposition(const WorldParams& params, double alpha, std::size_t outer,
                                     std::size_t noise_redraws, std::uint64_t seed);

void write_curve_csv(std::ostream& out, const McCurve& curve);

}  // namespace lgfed::theory
