#pragma once

#include "rkhs_ode/common.hpp"
#include "rkhs_ode/data.hpp"
#include "rkhs_ode/kernels.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rkhs_ode {

enum class AnalyticKind {
  fhn,       // FitzHugh-Nagumo
  lorenz63,
  lorenz96,  // cyclic, any dimension >= 4
  harmonic,  // forced damped oscillator, non-autonomous
  linear,    // f(x) = M x
  constant,  // f(x) = c
};

std::string to_string(AnalyticKind kind);
AnalyticKind analytic_kind_from_string(const std::string& name);

struct AnalyticField {
  AnalyticKind kind = AnalyticKind::constant;
  int dim = 0;
  double forcing = 8.0;  // lorenz96
  Matrix matrix;         // linear
  Vector offset;         // constant
};

/// f(x) = sum_l K(x, c_l) w_l; centers are columns (input_dim x P), weights d x P.
/// Time-augmented centers carry time in their last row.
struct RepresenterField {
  MatrixKernelSpec kernel;
  Matrix centers;
  Matrix weights;
  bool time_augmented = false;
};

/// f(x) = C^T phi(x[, t]) with C of size n_features x d.
struct ExplicitField {
  FeatureMapSpec features;
  Matrix coefficients;
};

/// A vector field on R^d, optionally offset by a base field f0:
///   f(x) = f0(x) + own(x).
class VectorField {
 public:
  using Form = std::variant<AnalyticField, RepresenterField, ExplicitField>;

  VectorField() = default;
  explicit VectorField(Form form, std::shared_ptr<const VectorField> base = nullptr);

  static VectorField zero(int dim);
  static VectorField constant(const Vector& c);
  static VectorField linear(const Matrix& m);
  static VectorField fhn();
  static VectorField lorenz63();
  static VectorField lorenz96(int dim = 6, double forcing = 8.0);
  static VectorField harmonic();

  [[nodiscard]] const Form& form() const { return form_; }
  [[nodiscard]] const std::shared_ptr<const VectorField>& base() const { return base_; }
  [[nodiscard]] int dim() const;
  [[nodiscard]] bool autonomous() const;
  [[nodiscard]] bool differentiable() const;

  /// Checks the form's size invariants; throws ConfigError.
  void validate() const;

 private:
  Form form_ = AnalyticField{};
  std::shared_ptr<const VectorField> base_;
};

/// f(x[, t]). Throws UsageError on dimension mismatch or when t is missing
/// for a non-autonomous field (t is ignored by autonomous ones).
Vector eval_field(const VectorField& f, ConstVecRef x, std::optional<double> t = {});
/// d f / d x (space only). Throws UnsupportedError for non-differentiable kernels.
Matrix field_jacobian(const VectorField& f, ConstVecRef x, std::optional<double> t = {});

/// Values (d x N) and optionally Jacobians (N matrices d x d) at the columns of
/// `states`. `times` must hold N entries for non-autonomous fields.
void eval_field_batch(const VectorField& f, ConstMatRef states, const Vector* times, Matrix& values,
                      std::vector<Matrix>* jacobians = nullptr);

/// Explicit Euler: z_{l+1} = z_l + h f(t_l, z_l); returns d x (steps + 1).
/// Throws DivergenceError naming the first step with a non-finite state.
Matrix euler_integrate(const VectorField& f, ConstVecRef x0, double t0, double h, int steps);

/// Noiseless observations at t0 + l dt_obs, l = 0..n_obs-1, integrating with
/// `substeps` Euler steps per observation interval. One trajectory per
/// column of `initial_conditions`.
Dataset simulate_dataset(const VectorField& system, ConstMatRef initial_conditions, double t0,
                         double dt_obs, int n_obs, int substeps, int threads = 1);

/// Reference system by CLI name: fhn | lorenz63 | lorenz96 | harmonic.
VectorField analytic_system(const std::string& name, int dim = 6, double forcing = 8.0);

nlohmann::json field_to_json(const VectorField& f);
VectorField field_from_json(const nlohmann::json& j);

}  // namespace rkhs_ode
