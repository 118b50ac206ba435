#pragma once

#include "rkhs_ode/block_tridiagonal.hpp"
#include "rkhs_ode/common.hpp"
#include "rkhs_ode/data.hpp"
#include "rkhs_ode/kernels.hpp"
#include "rkhs_ode/ode.hpp"

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace rkhs_ode {

enum class InitMethod { gradient_matching, zero_field };

std::string to_string(InitMethod init);
InitMethod init_method_from_string(const std::string& name);

/// Default kernel: 200 random Fourier features, Gaussian bandwidth 20% of each
/// coordinate's data range.
KernelSpec default_kernel(std::uint64_t seed = 0);

struct SolverConfig {
  double h = 0.1;
  double rho = 0.1;
  double lambda = 1e-3;
  double gamma0 = 1.0;
  double gamma_max = 1e8;
  int max_iters = 500;
  double early_stop_eps = 1e-3;
  KernelSpec kernel = default_kernel();
  std::uint64_t seed = 0;
  InitMethod init = InitMethod::gradient_matching;
  /// Worker threads for the per-trajectory z-steps. Not serialized.
  int threads = 1;

  void validate() const;
};

/// Keys of the config JSON object, in schema order.
const std::vector<std::string>& solver_config_keys();
nlohmann::json config_to_json(const SolverConfig& config);
/// With `require_all`, every schema key must be present; the error names the
/// first missing key. Otherwise missing keys keep their value from `defaults`.
SolverConfig config_from_json(const nlohmann::json& j, bool require_all,
                              const SolverConfig& defaults = SolverConfig{});

struct IterationTrace {
  int iter = 0;
  double data_loss = 0.0;
  double constraint_residual = 0.0;
  double gamma = 0.0;
  double field_change = 0.0;
};

enum class StopReason { max_iters, early_stop };
std::string to_string(StopReason reason);

struct FitResult {
  VectorField field;
  VectorField initial_field;
  std::vector<TimeGrid> grids;
  /// Per trajectory, latent grid states z (d x (k + 1)).
  std::vector<Matrix> latents;
  std::vector<IterationTrace> traces;
  int iterations_run = 0;
  StopReason stop_reason = StopReason::max_iters;
  KernelSpec kernel;  // resolved kernel actually used
  std::vector<std::string> warnings;
};

/// Raised when z or f becomes non-finite; carries the traces recorded so far.
class FitDivergence : public DivergenceError {
 public:
  FitDivergence(const std::string& what, long iteration, std::vector<IterationTrace> traces)
      : DivergenceError(what, iteration), traces_(std::move(traces)) {}
  [[nodiscard]] const std::vector<IterationTrace>& traces() const { return traces_; }

 private:
  std::vector<IterationTrace> traces_;
};

// --- initialization ---------------------------------------------------------

/// Derivative estimates at the observation times (d x m): central differences
/// inside, one-sided at both ends.
Matrix central_differences(const Trajectory& trajectory);

/// Sets data-dependent kernel parameters (bandwidth from the data range,
/// feature standardization) and samples feature frequencies.
KernelSpec resolve_kernel(const KernelSpec& kernel, const Dataset& dataset);

/// Ridge regression of derivative estimates on observations, pooled over all
/// trajectories: min (1/M) sum |xdot_j - f0(y_j)|^2 + lambda |f0|_H^2.
VectorField gradient_matching_init(const Dataset& dataset, const KernelSpec& kernel, double lambda);

// --- z-step -----------------------------------------------------------------

/// Data term of one trajectory: observation j sits at grid node `node[j]`.
struct ObservationTerm {
  std::vector<int> node;
  Matrix values;   // d x m
  Vector weights;  // m
};

ObservationTerm observation_term(const Trajectory& trajectory, const TimeGrid& grid, double horizon);

/// Euler residual linearized around z_ref:
///   r_l = z_{l+1} - B_l z_l - c_l,  B_l = I + h J_f(z_ref_l),  c_l = h (f(z_ref_l) - J_f z_ref_l).
struct ZLinearization {
  std::vector<Matrix> transition;  // B_l, l = 0..k-1
  Matrix offset;                   // c_l as columns, d x k
  double penalty = 0.0;            // gamma / k
};

ZLinearization linearize(const Matrix& z_ref, const VectorField& f, double gamma, const TimeGrid& grid);

/// sum_j w_j |y_j - z_{k_j}|^2 + (gamma / k) sum_l |r_l|^2 for the linearized residual.
double z_objective(const ZLinearization& lin, const ObservationTerm& obs, const Matrix& z);
/// Gradient of z_objective, stacked node-major (d (k + 1)).
Vector z_objective_gradient(const ZLinearization& lin, const ObservationTerm& obs, const Matrix& z);

/// Normal equations of z_objective: (1/2) Hessian and right-hand side.
struct ZSystem {
  BlockTridiagonal<double> matrix;
  Vector rhs;
};
ZSystem assemble_z_system(const ZLinearization& lin, const ObservationTerm& obs, int nodes, int dim);

/// Exact minimizer of the linearized objective around z_prev.
Matrix z_step(const Matrix& z_prev, const VectorField& f, double gamma, const TimeGrid& grid,
              const ObservationTerm& obs);

// --- f-step -----------------------------------------------------------------

/// Kernel ridge regression of Euler slopes (z_{l+1} - z_l)/h - f0(z_l) over all
/// trajectories' nodes l < k with weight gamma h^2 / (n k). Representer
/// kernels solve the d P block system, explicit features a single
/// n_features ridge system with d right-hand sides. Returns f0 + correction.
VectorField f_step(const std::vector<Matrix>& latents, const std::vector<TimeGrid>& grids, double gamma,
                   double lambda, const VectorField& f0, const KernelSpec& kernel,
                   std::vector<std::string>* warnings = nullptr);

// --- driver -----------------------------------------------------------------

/// Penalty method over all trajectories: alternate per-trajectory z-steps and
/// a pooled f-step while gamma grows geometrically up to gamma_max.
FitResult penalty_fit(const Dataset& dataset, const SolverConfig& config);

/// Relative change between two fields; +infinity when the old field is zero.
/// `nodes` (d x N) are used when the parameterizations cannot be compared directly.
double field_change_norm(const VectorField& f_new, const VectorField& f_old, const Matrix& nodes,
                         const Vector* node_times = nullptr);

/// Euler prediction from x0 at t0 over [t0, t0 + horizon].
Trajectory predict(const VectorField& f, ConstVecRef x0, double t0, double horizon, double h);

}  // namespace rkhs_ode
