#pragma once

#include "rkhs_ode/common.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rkhs_ode {

enum class KernelFamily {
  linear,
  gaussian,
  rational_quadratic,
  sinc,
  matern,
  laplacian,
  polynomial,
};

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// Scalar kernel K1(u, v).
///
/// Conventions per family (delta = u - v, s = |delta|):
///   linear              u^T A v
///   gaussian            exp(-delta^T A delta / 2)
///   rational_quadratic  theta / (s^2 + theta)
///   sinc                prod_i sin(delta_i / l) / (delta_i / l)
///   matern(p)           half-integer smoothness nu = p - 1/2, p in {1,2,3,4}
///   laplacian           exp(-s / theta)
///   polynomial          (u^T v + offset)^degree
///
/// An empty `metric` stands for the identity of whatever dimension the
/// inputs have. `range_fraction > 0` marks a gaussian whose per-coordinate
/// lengthscales are still to be set from data (see resolve_bandwidth).
struct ScalarKernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  Matrix metric;
  double theta = 1.0;
  double lengthscale = 1.0;
  double p = 3.0;
  int degree = 2;
  double offset = 1.0;
  double range_fraction = 0.0;

  static ScalarKernelSpec gaussian_lengthscales(const Vector& lengthscales);

  [[nodiscard]] bool resolved() const { return range_fraction <= 0.0; }
  /// Throws ConfigError on invalid parameters.
  void validate() const;
};

/// Separable matrix-valued kernel K(u, v) = K1(u, v) * mix.
struct MatrixKernelSpec {
  ScalarKernelSpec scalar;
  Matrix mix;

  static MatrixKernelSpec identity(const ScalarKernelSpec& scalar, int dim);

  [[nodiscard]] int output_dim() const { return static_cast<int>(mix.rows()); }
  void validate() const;
};

/// Random Fourier feature map
///   phi_i(x) = (sqrt(2 / n) cos(omega_i . x + b_i) - mean_i) / scale_i
/// with omega_i ~ N(0, diag(1 / lengthscale^2)) and b_i ~ U[0, 2 pi).
/// The induced kernel is phi(u) . phi(v) times the d x d identity.
struct FeatureMapSpec {
  int n_features = 0;
  int state_dim = 0;
  bool time_augmented = false;
  Vector lengthscales;
  std::uint64_t seed = 0;
  double range_fraction = 0.0;
  /// Standardize features on the training inputs when the kernel is resolved.
  bool standardize_on_fit = false;

  Matrix frequencies;  // n_features x input_dim
  Vector phases;       // n_features
  Vector mean;         // n_features
  Vector scale;        // n_features

  /// Samples frequencies and phases deterministically from `seed`.
  static FeatureMapSpec sample(int n_features, int state_dim, const Vector& lengthscales,
                               std::uint64_t seed, bool time_augmented = false);

  [[nodiscard]] int input_dim() const { return state_dim + (time_augmented ? 1 : 0); }
  [[nodiscard]] bool resolved() const { return frequencies.rows() == n_features && n_features > 0; }
  void validate() const;
};

using KernelSpec = std::variant<MatrixKernelSpec, FeatureMapSpec>;

struct LipschitzReport {
  std::string kernel;
  int n_pairs = 0;
  double max_ratio = 0.0;
  /// Log-log slope of the per-box maximum ratio against box radius.
  double ratio_trend = 0.0;
  /// Same slope for pairs at shrinking separation (catches kernels that are
  /// not differentiable at the diagonal).
  double local_trend = 0.0;
  std::vector<double> radii;
  std::vector<double> box_max;
  std::vector<double> local_max;
  bool pass = false;
};

/// Growth allowed per doubling of the radius before the checker fails.
inline constexpr double kLipschitzGrowthTolerance = 0.10;

// --- scalar kernels -------------------------------------------------------

double scalar_eval(const ScalarKernelSpec& spec, ConstVecRef u, ConstVecRef v);
/// Gradient of K1(u, v) with respect to u. Throws UnsupportedError for
/// families that are not differentiable on the diagonal.
Vector scalar_grad(const ScalarKernelSpec& spec, ConstVecRef u, ConstVecRef v);
bool is_differentiable(const ScalarKernelSpec& spec);

// --- matrix kernels -------------------------------------------------------

Matrix matrix_eval(const MatrixKernelSpec& spec, ConstVecRef u, ConstVecRef v);

// --- explicit features ----------------------------------------------------

/// phi(x[, t]). Throws UsageError when t is supplied to an autonomous map
/// or omitted for a time-augmented one.
Vector feature_map(const FeatureMapSpec& spec, ConstVecRef x, std::optional<double> t = {});
/// Features for a batch of inputs given column-wise (input_dim x N) -> n_features x N.
Matrix feature_matrix(const FeatureMapSpec& spec, ConstMatRef inputs);
/// d phi / d x at one input (spatial part only): n_features x state_dim.
Matrix feature_jacobian(const FeatureMapSpec& spec, ConstVecRef input);
/// Stores per-feature mean and standard deviation over `inputs` (input_dim x N).
FeatureMapSpec standardize(const FeatureMapSpec& spec, ConstMatRef inputs);
double feature_kernel(const FeatureMapSpec& spec, ConstVecRef u, ConstVecRef v);

// --- generic --------------------------------------------------------------

int output_dim(const KernelSpec& spec);
/// Dimension of kernel inputs; 0 when the kernel accepts any dimension.
int input_dim(const KernelSpec& spec);
Matrix kernel_eval(const KernelSpec& spec, ConstVecRef u, ConstVecRef v);
/// K_ii(u,u) - 2 K_ii(u,v) + K_ii(v,v), clamped to zero below 1e-12.
double kernel_metric_sq(const KernelSpec& spec, ConstVecRef u, ConstVecRef v, int i);
/// Block matrix with (a, b) block K(x_a, x_b); points are columns.
Matrix gram(const KernelSpec& spec, ConstMatRef points);
/// Scalar gram K1(x_a, x_b) (the d x d structure factored out).
Matrix scalar_gram(const KernelSpec& spec, ConstMatRef points);
/// Scalar cross gram K1(x_a, y_b).
Matrix scalar_cross_gram(const KernelSpec& spec, ConstMatRef xs, ConstMatRef ys);

/// Empirical check of |f_i(u) - f_i(v)| <= N |u - v| for the kernel's RKHS:
/// samples pairs in boxes of growing radius (and at shrinking separation),
/// fails if the maximum of d_K(u,v)/|u-v| grows by more than 10% per doubling.
LipschitzReport check_lipschitz(const KernelSpec& spec, int dim,
                                const std::vector<double>& radii = {1.0, 2.0, 4.0, 8.0},
                                int n_pairs = 2000, std::uint64_t seed = 0);

// --- JSON -----------------------------------------------------------------

nlohmann::json kernel_to_json(const KernelSpec& spec);
/// `state_dim` is used when the JSON does not pin the dimension (identity mix).
KernelSpec kernel_from_json(const nlohmann::json& j, int state_dim = 0);

}  // namespace rkhs_ode
