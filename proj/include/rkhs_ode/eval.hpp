#pragma once

#include "rkhs_ode/common.hpp"
#include "rkhs_ode/data.hpp"
#include "rkhs_ode/ode.hpp"
#include "rkhs_ode/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rkhs_ode {

// --- metrics ----------------------------------------------------------------

/// sqrt(sum_{i>=2} (t_i - t_{i-1}) |y_i - yhat_i|^2). Throws UsageError when
/// times or dimensions differ, or fewer than two points are given.
double err_metric(const Trajectory& pred, const Trajectory& truth);
double err_metric(const Vector& times, const Matrix& pred, const Matrix& truth);

/// Integral over [t_begin, t_end] of |xhat(t) - xstar(t)|^2 with both curves
/// piecewise linear between their nodes. Exact on every segment of the union
/// of node sets. Throws UsageError if either curve does not cover the interval.
double l2_sq_distance(const Trajectory& xhat, const Trajectory& xstar, double t_begin, double t_end);

/// (1/n) sum_i (1/k_i) sum_l |z_{i,l+1} - z_{il} - h f(z_{il})|^2.
double constraint_residual(const std::vector<Matrix>& latents, const VectorField& f,
                           const std::vector<TimeGrid>& grids);
/// Single trajectory on a grid s_l = t_start + l h.
double constraint_residual(const Matrix& latents, const VectorField& f, double h, double t_start = 0.0);

/// Err of the Euler prediction of `f` from the first observation of `truth`,
/// read off at the observation times (linear interpolation between steps).
/// `window` limits the comparison to the first `window` time units.
double prediction_err(const VectorField& f, const Trajectory& truth, double h,
                      std::optional<double> window = {});

struct ErrReport {
  std::vector<double> err;  // one per test trajectory
  double mean = 0.0;
  double sem = 0.0;  // standard error over `err`; 0 for a single entry
};

/// Mean and standard error of the mean; sem = 0 when fewer than two values.
std::pair<double, double> mean_sem(const std::vector<double>& values);

// --- noise sweep ------------------------------------------------------------

/// Train/test topology of one benchmark. Initial conditions are drawn
/// uniformly from `ic_low` / `ic_high` (per coordinate).
struct BenchmarkProtocol {
  std::string system = "fhn";
  int dim = 2;
  double forcing = 8.0;
  int n_train = 50;
  int n_test = 100;
  int n_obs = 201;
  double dt_obs = 0.1;
  int substeps = 100;
  Vector ic_low;
  Vector ic_high;
  /// Err only over the first `err_horizon` time units when set.
  std::optional<double> err_horizon;
  std::vector<double> sigmas;
  SolverConfig solver;

  static BenchmarkProtocol fhn();
  static BenchmarkProtocol lorenz63();
  static BenchmarkProtocol lorenz96(int dim = 6, double forcing = 8.0);
  static BenchmarkProtocol by_name(const std::string& name);

  void validate() const;
};

struct SweepCell {
  double sigma = 0.0;
  int replicate = 0;
  ErrReport err;
  /// Err of the constant (zero-field) predictor on the same test set.
  ErrReport baseline;
  double runtime_s = 0.0;
  int iterations = 0;
  bool diverged = false;
  std::string error;
};

struct SweepSummary {
  double sigma = 0.0;
  double mean = 0.0;  // mean over replicates of per-replicate mean Err
  double sem = 0.0;   // across replicates
  int n_ok = 0;
};

struct SweepReport {
  std::string system;
  std::uint64_t seed = 0;
  std::vector<SweepCell> cells;
  std::vector<SweepSummary> summary;
};

/// For each replicate: clean train and test sets; for each sigma: noisy copy
/// of the training set, fit, Euler prediction of every test trajectory from
/// its initial condition, Err at the observation times. Fit failures are
/// recorded in the cell.
SweepReport noise_sweep(const BenchmarkProtocol& protocol, int replicates, std::uint64_t seed,
                        int threads = 1);

nlohmann::json sweep_to_json(const SweepReport& report);
/// Columns: system,sigma,replicate,err_mean,err_sem,runtime_s. With
/// `deterministic`, runtime_s is written as 0 so reruns compare equal.
std::string sweep_to_csv(const SweepReport& report, bool deterministic);

// --- convergence ------------------------------------------------------------

struct ConvergenceConfig {
  int n_features = 200;
  int replicates = 10;
  double sigma = 0.05;
  int full_m = 5120;
  int min_m = 5;
  double horizon = 5.0;
  /// Observation-time window [0, horizon]; ground truth from `substeps`
  /// Euler steps per full-resolution interval.
  int substeps = 10;
  double x0 = 0.5;
  double lengthscale = 1.0;
  /// Scale of the ground-truth coefficients.
  double coefficient_scale = 1.0;
  /// Largest grid step allowed, in units of the full-resolution interval.
  int max_h_intervals = 8;
  SolverConfig solver;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ConvergenceReport {
  std::vector<int> sample_counts;
  std::vector<double> mean_l2_sq;
  std::vector<int> n_ok;
  double slope = 0.0;
  double intercept = 0.0;
  /// (m, replicate, message) of excluded fits.
  std::vector<std::string> flags;
  /// Per (m, replicate) squared distances, m-major.
  std::vector<std::vector<double>> l2_sq;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Unweighted least squares on (log x, log y). Needs two distinct x.
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// Ground-truth 1D field: n random features with seeded Gaussian coefficients.
VectorField convergence_truth(const ConvergenceConfig& config);

ConvergenceReport convergence_experiment(const ConvergenceConfig& config, int threads = 1);

nlohmann::json convergence_to_json(const ConvergenceReport& report);
/// Columns: m,mean_l2_sq,n_ok.
std::string convergence_to_csv(const ConvergenceReport& report);

// --- validation search ------------------------------------------------------

struct GridSearchEntry {
  double lambda = 0.0;
  double rho = 0.0;
  double err = 0.0;  // mean Err on held-out trajectories; +inf on failure
};

struct GridSearchResult {
  double lambda = 0.0;
  double rho = 0.0;
  std::vector<GridSearchEntry> table;
};

/// Splits trajectories (fraction held out, seeded shuffle), fits every
/// (lambda, rho) pair on the rest, scores held-out trajectories by Err of the
/// Euler prediction from their first observation. Needs at least two trajectories.
GridSearchResult grid_search(const Dataset& dataset, const SolverConfig& config,
                             const std::vector<double>& lambdas, const std::vector<double>& rhos,
                             double validation_fraction, std::uint64_t seed);

}  // namespace rkhs_ode
