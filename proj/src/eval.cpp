#include "rkhs_ode/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace rkhs_ode {

namespace {

constexpr std::uint64_t kTrainStream = 11;
constexpr std::uint64_t kTestStream = 12;
constexpr std::uint64_t kNoiseStream = 13;
constexpr std::uint64_t kTruthStream = 21;
constexpr std::uint64_t kReplicateStream = 22;

double time_tolerance(double t) { return 1e-9 * (1.0 + std::abs(t)); }

/// Values of a piecewise-linear curve at ascending times, by a merge walk.
Matrix sample_linear(const Trajectory& curve, const std::vector<double>& times) {
  const Eigen::Index m = curve.size();
  Matrix out(curve.dim(), static_cast<Eigen::Index>(times.size()));
  Eigen::Index seg = 0;
  for (std::size_t q = 0; q < times.size(); ++q) {
    const double t = times[q];
    while (seg + 2 < m && curve.times(seg + 1) <= t) ++seg;
    if (m == 1 || t <= curve.times(0)) {
      out.col(static_cast<Eigen::Index>(q)) = curve.values.col(0);
    } else if (t >= curve.times(m - 1)) {
      out.col(static_cast<Eigen::Index>(q)) = curve.values.col(m - 1);
    } else {
      const double a = (t - curve.times(seg)) / (curve.times(seg + 1) - curve.times(seg));
      out.col(static_cast<Eigen::Index>(q)) = (1.0 - a) * curve.values.col(seg) + a * curve.values.col(seg + 1);
    }
  }
  return out;
}

Matrix uniform_box(const Vector& low, const Vector& high, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix out(low.size(), count);
  for (int i = 0; i < count; ++i) {
    for (Eigen::Index c = 0; c < low.size(); ++c) out(c, i) = low(c) + (high(c) - low(c)) * unit(rng);
  }
  return out;
}

ErrReport make_report(std::vector<double> err) {
  ErrReport r;
  r.err = std::move(err);
  const auto [mean, sem] = mean_sem(r.err);
  r.mean = mean;
  r.sem = sem;
  return r;
}

nlohmann::json number_json(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

// --- metrics ----------------------------------------------------------------

double err_metric(const Vector& times, const Matrix& pred, const Matrix& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw UsageError("err_metric: prediction and truth differ in shape");
  }
  if (times.size() != truth.cols()) throw UsageError("err_metric: times do not match the trajectories");
  if (times.size() < 2) throw UsageError("err_metric needs at least two time points");
  double sum = 0.0;
  for (Eigen::Index i = 1; i < times.size(); ++i) {
    const double gap = times(i) - times(i - 1);
    if (!(gap > 0.0)) throw UsageError("err_metric: times must ascend strictly");
    sum += gap * (truth.col(i) - pred.col(i)).squaredNorm();
  }
  return std::sqrt(sum);
}

double err_metric(const Trajectory& pred, const Trajectory& truth) {
  if (pred.times.size() != truth.times.size()) throw UsageError("err_metric: time mismatch");
  for (Eigen::Index i = 0; i < truth.times.size(); ++i) {
    if (std::abs(pred.times(i) - truth.times(i)) > time_tolerance(truth.times(i))) {
      throw UsageError("err_metric: time mismatch at index " + std::to_string(i));
    }
  }
  return err_metric(truth.times, pred.values, truth.values);
}

double l2_sq_distance(const Trajectory& xhat, const Trajectory& xstar, double t_begin, double t_end) {
  if (!(t_end >= t_begin)) throw UsageError("l2_sq_distance: empty interval");
  if (xhat.dim() != xstar.dim()) throw UsageError("l2_sq_distance: dimension mismatch");
  for (const Trajectory* c : {&xhat, &xstar}) {
    if (c->size() < 1 || c->times(0) > t_begin + time_tolerance(t_begin) ||
        c->times(c->size() - 1) < t_end - time_tolerance(t_end)) {
      throw UsageError("l2_sq_distance: curve does not cover [" + format_number(t_begin) + ", " +
                       format_number(t_end) + "]");
    }
  }
  std::vector<double> nodes{t_begin, t_end};
  for (const Trajectory* c : {&xhat, &xstar}) {
    for (Eigen::Index i = 0; i < c->size(); ++i) {
      const double t = c->times(i);
      if (t > t_begin && t < t_end) nodes.push_back(t);
    }
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  const Matrix e = sample_linear(xhat, nodes) - sample_linear(xstar, nodes);
  double sum = 0.0;
  for (std::size_t q = 0; q + 1 < nodes.size(); ++q) {
    const auto a = static_cast<Eigen::Index>(q);
    // The difference is linear on the segment: integral of |e|^2 in closed form.
    const double len = nodes[q + 1] - nodes[q];
    sum += len * (e.col(a).squaredNorm() + e.col(a).dot(e.col(a + 1)) + e.col(a + 1).squaredNorm()) / 3.0;
  }
  return sum;
}

double constraint_residual(const Matrix& latents, const VectorField& f, double h, double t_start) {
  const Eigen::Index k = latents.cols() - 1;
  if (k < 1) return 0.0;
  if (latents.rows() != f.dim()) throw UsageError("constraint_residual: dimension mismatch");
  Vector times(k);
  for (Eigen::Index l = 0; l < k; ++l) times(l) = t_start + static_cast<double>(l) * h;
  Matrix values;
  eval_field_batch(f, latents.leftCols(k), &times, values);
  const Matrix r = latents.rightCols(k) - latents.leftCols(k) - h * values;
  return r.squaredNorm() / static_cast<double>(k);
}

double constraint_residual(const std::vector<Matrix>& latents, const VectorField& f,
                           const std::vector<TimeGrid>& grids) {
  if (latents.size() != grids.size()) throw UsageError("constraint_residual: latents and grids differ");
  if (latents.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < latents.size(); ++i) {
    sum += constraint_residual(latents[i], f, grids[i].h, grids[i].t_start);
  }
  return sum / static_cast<double>(latents.size());
}

double prediction_err(const VectorField& f, const Trajectory& truth, double h, std::optional<double> window) {
  if (truth.size() < 2) throw UsageError("prediction_err needs at least two observations");
  const double t0 = truth.times(0);
  Eigen::Index count = truth.size();
  if (window) {
    count = 0;
    while (count < truth.size() && truth.times(count) <= t0 + *window + time_tolerance(t0 + *window)) ++count;
    if (count < 2) throw UsageError("prediction_err: window holds fewer than two observations");
  }
  const double span = truth.times(count - 1) - t0;
  const int steps = static_cast<int>(std::ceil(span / h - 1e-9));
  Trajectory pred;
  pred.values = euler_integrate(f, truth.values.col(0), t0, h, steps);
  pred.times.resize(steps + 1);
  for (int l = 0; l <= steps; ++l) pred.times(l) = t0 + l * h;
  const std::vector<double> at(truth.times.data(), truth.times.data() + count);
  const Matrix yhat = sample_linear(pred, at);
  return err_metric(truth.times.head(count), yhat, truth.values.leftCols(count));
}

std::pair<double, double> mean_sem(const std::vector<double>& values) {
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double n = static_cast<double>(values.size());
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

// --- noise sweep ------------------------------------------------------------

BenchmarkProtocol BenchmarkProtocol::fhn() {
  BenchmarkProtocol p;
  p.system = "fhn";
  p.dim = 2;
  p.n_train = 50;
  p.n_test = 100;
  p.n_obs = 201;
  p.dt_obs = 0.1;
  p.ic_low = Vector::Constant(2, -2.0);
  p.ic_high = Vector::Constant(2, 2.0);
  p.sigmas = {0.120, 0.365, 0.610, 0.855, 1.100};
  p.solver.h = 0.1;
  return p;
}

BenchmarkProtocol BenchmarkProtocol::lorenz63() {
  BenchmarkProtocol p;
  p.system = "lorenz63";
  p.dim = 3;
  p.n_train = 50;
  p.n_test = 100;
  p.n_obs = 201;
  p.dt_obs = 0.01;
  p.ic_low = Vector(3);
  p.ic_low << -10.0, -10.0, 10.0;
  p.ic_high = Vector(3);
  p.ic_high << 10.0, 10.0, 30.0;
  p.err_horizon = 0.2;
  p.sigmas = {0.5, 1.2, 1.9, 2.6, 3.3};
  p.solver.h = 0.01;
  return p;
}

BenchmarkProtocol BenchmarkProtocol::lorenz96(int dim, double forcing) {
  BenchmarkProtocol p;
  p.system = "lorenz96";
  p.dim = dim;
  p.forcing = forcing;
  p.n_train = 50;
  p.n_test = 100;
  p.n_obs = 201;
  p.dt_obs = 0.01;
  p.ic_low = Vector::Constant(dim, forcing - 4.0);
  p.ic_high = Vector::Constant(dim, forcing + 4.0);
  p.err_horizon = 0.2;
  p.sigmas = {0.5, 1.2, 1.9, 2.6, 3.3};
  p.solver.h = 0.01;
  return p;
}

BenchmarkProtocol BenchmarkProtocol::by_name(const std::string& name) {
  if (name == "fhn") return fhn();
  if (name == "lorenz63") return lorenz63();
  if (name == "lorenz96") return lorenz96();
  throw ConfigError("unknown benchmark protocol: " + name + " (expected fhn, lorenz63 or lorenz96)");
}

void BenchmarkProtocol::validate() const {
  if (n_train < 1 || n_test < 1) throw ConfigError("protocol needs at least one train and one test trajectory");
  if (n_obs < 2) throw ConfigError("protocol needs n_obs >= 2");
  if (!(dt_obs > 0.0)) throw ConfigError("protocol needs dt_obs > 0");
  if (substeps < 1) throw ConfigError("protocol needs substeps >= 1");
  if (ic_low.size() != dim || ic_high.size() != dim) throw ConfigError("initial-condition box has the wrong dimension");
  if ((ic_high.array() < ic_low.array()).any()) throw ConfigError("initial-condition box is empty");
  if (err_horizon && !(*err_horizon > 0.0)) throw ConfigError("err horizon must be > 0");
  if (sigmas.empty()) throw ConfigError("protocol needs at least one noise level");
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw ConfigError("noise levels must be >= 0");
  }
  solver.validate();
}

SweepReport noise_sweep(const BenchmarkProtocol& protocol, int replicates, std::uint64_t seed, int threads) {
  protocol.validate();
  if (replicates < 1) throw ConfigError("noise sweep needs at least one replicate");
  const VectorField system = analytic_system(protocol.system, protocol.dim, protocol.forcing);
  const Matrix train_ic = uniform_box(protocol.ic_low, protocol.ic_high, protocol.n_train, derive_seed(seed, kTrainStream));
  const Matrix test_ic = uniform_box(protocol.ic_low, protocol.ic_high, protocol.n_test, derive_seed(seed, kTestStream));
  const Dataset train =
      simulate_dataset(system, train_ic, 0.0, protocol.dt_obs, protocol.n_obs, protocol.substeps, threads);
  const Dataset test =
      simulate_dataset(system, test_ic, 0.0, protocol.dt_obs, protocol.n_obs, protocol.substeps, threads);

  std::vector<double> baseline_err;
  const VectorField zero = VectorField::zero(protocol.dim);
  for (const auto& tr : test.trajectories) {
    baseline_err.push_back(prediction_err(zero, tr, protocol.solver.h, protocol.err_horizon));
  }
  const ErrReport baseline = make_report(baseline_err);

  SweepReport report;
  report.system = protocol.system;
  report.seed = seed;
  const std::size_t n_sigma = protocol.sigmas.size();
  report.cells.resize(n_sigma * static_cast<std::size_t>(replicates));

  parallel_for(report.cells.size(), threads, [&](std::size_t job) {
    const std::size_t si = job / static_cast<std::size_t>(replicates);
    const int rep = static_cast<int>(job % static_cast<std::size_t>(replicates));
    SweepCell& cell = report.cells[job];
    cell.sigma = protocol.sigmas[si];
    cell.replicate = rep;
    cell.baseline = baseline;
    const auto start = std::chrono::steady_clock::now();
    try {
      const Dataset noisy = add_noise(train, cell.sigma, derive_seed(derive_seed(seed, kNoiseStream), job));
      SolverConfig cfg = protocol.solver;
      cfg.threads = 1;
      const FitResult fit = penalty_fit(noisy, cfg);
      cell.iterations = fit.iterations_run;
      std::vector<double> err;
      err.reserve(test.size());
      for (const auto& tr : test.trajectories) err.push_back(prediction_err(fit.field, tr, cfg.h, protocol.err_horizon));
      cell.err = make_report(std::move(err));
    } catch (const NumericalError& e) {
      cell.diverged = true;
      cell.error = e.what();
      cell.err.mean = std::numeric_limits<double>::quiet_NaN();
    }
    cell.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });

  for (std::size_t si = 0; si < n_sigma; ++si) {
    SweepSummary s;
    s.sigma = protocol.sigmas[si];
    std::vector<double> means;
    for (int rep = 0; rep < replicates; ++rep) {
      const SweepCell& cell = report.cells[si * static_cast<std::size_t>(replicates) + rep];
      if (!cell.diverged) means.push_back(cell.err.mean);
    }
    s.n_ok = static_cast<int>(means.size());
    const auto [mean, sem] = mean_sem(means);
    s.mean = mean;
    s.sem = sem;
    report.summary.push_back(s);
  }
  return report;
}

nlohmann::json sweep_to_json(const SweepReport& report) {
  nlohmann::json j;
  j["system"] = report.system;
  j["seed"] = report.seed;
  auto cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json cj;
    cj["sigma"] = c.sigma;
    cj["replicate"] = c.replicate;
    cj["err_mean"] = number_json(c.err.mean);
    cj["err_sem"] = number_json(c.err.sem);
    cj["err"] = c.err.err;
    cj["baseline_err"] = c.baseline.err;
    cj["baseline_mean"] = number_json(c.baseline.mean);
    cj["iterations"] = c.iterations;
    cj["runtime_s"] = c.runtime_s;
    cj["diverged"] = c.diverged;
    if (c.diverged) cj["error"] = c.error;
    cells.push_back(cj);
  }
  j["cells"] = cells;
  auto summary = nlohmann::json::array();
  for (const auto& s : report.summary) {
    summary.push_back({{"sigma", s.sigma}, {"mean", number_json(s.mean)}, {"sem", number_json(s.sem)}, {"n_ok", s.n_ok}});
  }
  j["summary"] = summary;
  return j;
}

std::string sweep_to_csv(const SweepReport& report, bool deterministic) {
  std::string out = "system,sigma,replicate,err_mean,err_sem,runtime_s\n";
  for (const auto& c : report.cells) {
    out += report.system;
    out += ',';
    append_number(out, c.sigma);
    out += ',' + std::to_string(c.replicate) + ',';
    append_number(out, c.err.mean);
    out += ',';
    append_number(out, c.diverged ? std::numeric_limits<double>::quiet_NaN() : c.err.sem);
    out += ',';
    append_number(out, deterministic ? 0.0 : c.runtime_s);
    out += '\n';
  }
  return out;
}

// --- convergence ------------------------------------------------------------

void ConvergenceConfig::validate() const {
  if (n_features < 1) throw ConfigError("n_features must be >= 1");
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  if (min_m < 2) throw ConfigError("min_m must be >= 2");
  if (full_m < min_m || full_m % min_m != 0) throw ConfigError("full_m must be a multiple of min_m");
  const int ratio = full_m / min_m;
  if ((ratio & (ratio - 1)) != 0) throw ConfigError("full_m must be a power-of-two multiple of min_m");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
  if (substeps < 1) throw ConfigError("substeps must be >= 1");
  if (!(lengthscale > 0.0)) throw ConfigError("lengthscale must be > 0");
  if (max_h_intervals < 1) throw ConfigError("max_h_intervals must be >= 1");
  solver.validate();
}

LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("log-log fit needs at least two points");
  const auto n = static_cast<Eigen::Index>(x.size());
  Matrix a(n, 2);
  Vector b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw UsageError("log-log fit needs positive values");
    a(i, 0) = std::log(x[i]);
    a(i, 1) = 1.0;
    b(i) = std::log(y[i]);
  }
  if (a.col(0).maxCoeff() == a.col(0).minCoeff()) throw UsageError("log-log fit needs two distinct x values");
  const Vector coef = a.colPivHouseholderQr().solve(b);
  return LineFit{coef(0), coef(1)};
}

VectorField convergence_truth(const ConvergenceConfig& config) {
  const std::uint64_t s = derive_seed(config.seed, kTruthStream);
  FeatureMapSpec fm = FeatureMapSpec::sample(config.n_features, 1, Vector::Constant(1, config.lengthscale), s);
  std::mt19937_64 rng(derive_seed(s, 1));
  std::normal_distribution<double> normal(0.0, config.coefficient_scale);
  Matrix coef(config.n_features, 1);
  for (int i = 0; i < config.n_features; ++i) coef(i, 0) = normal(rng);
  return VectorField(ExplicitField{fm, coef});
}

ConvergenceReport convergence_experiment(const ConvergenceConfig& config, int threads) {
  config.validate();
  const VectorField truth = convergence_truth(config);
  const auto& truth_features = std::get<ExplicitField>(truth.form()).features;
  const double dt = config.horizon / static_cast<double>(config.full_m);
  const double t_end = dt * static_cast<double>(config.full_m - 1);
  const Vector x0 = Vector::Constant(1, config.x0);

  const Dataset clean = simulate_dataset(truth, x0, 0.0, dt, config.full_m, config.substeps);
  Trajectory reference;
  const int fine_steps = (config.full_m - 1) * config.substeps;
  const double fine_h = dt / config.substeps;
  reference.values = euler_integrate(truth, x0, 0.0, fine_h, fine_steps);
  reference.times.resize(fine_steps + 1);
  for (int l = 0; l <= fine_steps; ++l) reference.times(l) = l * fine_h;

  std::vector<int> strides;
  for (int s = config.full_m / config.min_m; s >= 1; s /= 2) strides.push_back(s);

  ConvergenceReport report;
  for (int s : strides) report.sample_counts.push_back(config.full_m / s);
  const std::size_t n_m = strides.size();
  const auto reps = static_cast<std::size_t>(config.replicates);
  std::vector<double> l2(n_m * reps, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> failure(n_m * reps);

  std::vector<Dataset> noisy(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    noisy[r] = add_noise(clean, config.sigma, derive_seed(derive_seed(config.seed, kReplicateStream), r));
  }

  parallel_for(n_m * reps, threads, [&](std::size_t job) {
    const std::size_t mi = job / reps;
    const std::size_t r = job % reps;
    const int stride = strides[mi];
    const Trajectory& full = noisy[r].trajectories.front();
    Dataset sub;
    sub.dim = 1;
    Trajectory tr;
    tr.id = "0";
    const int m = config.full_m / stride;
    tr.times.resize(m);
    tr.values.resize(1, m);
    for (int j = 0; j < m; ++j) {
      tr.times(j) = full.times(j * stride);
      tr.values(0, j) = full.values(0, j * stride);
    }
    sub.trajectories.push_back(std::move(tr));
    SolverConfig cfg = config.solver;
    cfg.h = std::min(stride, config.max_h_intervals) * dt;
    cfg.kernel = truth_features;
    cfg.threads = 1;
    try {
      const FitResult fit = penalty_fit(sub, cfg);
      const int steps = static_cast<int>(std::ceil(t_end / cfg.h - 1e-9));
      Trajectory xhat;
      xhat.values = euler_integrate(fit.field, fit.latents.front().col(0), 0.0, cfg.h, steps);
      xhat.times.resize(steps + 1);
      for (int l = 0; l <= steps; ++l) xhat.times(l) = l * cfg.h;
      l2[job] = l2_sq_distance(xhat, reference, 0.0, t_end);
    } catch (const NumericalError& e) {
      failure[job] = e.what();
    }
  });

  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t mi = 0; mi < n_m; ++mi) {
    std::vector<double> ok;
    std::vector<double> row;
    for (std::size_t r = 0; r < reps; ++r) {
      const double v = l2[mi * reps + r];
      row.push_back(v);
      if (std::isfinite(v)) {
        ok.push_back(v);
      } else {
        report.flags.push_back("m=" + std::to_string(report.sample_counts[mi]) + " replicate=" + std::to_string(r) +
                               ": " + (failure[mi * reps + r].empty() ? "non-finite distance" : failure[mi * reps + r]));
      }
    }
    report.l2_sq.push_back(std::move(row));
    report.n_ok.push_back(static_cast<int>(ok.size()));
    const double mean = ok.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_sem(ok).first;
    report.mean_l2_sq.push_back(mean);
    if (std::isfinite(mean) && mean > 0.0) {
      xs.push_back(report.sample_counts[mi]);
      ys.push_back(mean);
    }
  }
  if (xs.size() >= 2) {
    const LineFit fit = fit_loglog(xs, ys);
    report.slope = fit.slope;
    report.intercept = fit.intercept;
  } else {
    report.slope = std::numeric_limits<double>::quiet_NaN();
    report.intercept = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

nlohmann::json convergence_to_json(const ConvergenceReport& report) {
  nlohmann::json j;
  j["sample_counts"] = report.sample_counts;
  auto means = nlohmann::json::array();
  for (double v : report.mean_l2_sq) means.push_back(number_json(v));
  j["mean_l2_sq"] = means;
  j["n_ok"] = report.n_ok;
  j["slope"] = number_json(report.slope);
  j["intercept"] = number_json(report.intercept);
  j["flags"] = report.flags;
  auto rows = nlohmann::json::array();
  for (const auto& row : report.l2_sq) {
    auto r = nlohmann::json::array();
    for (double v : row) r.push_back(number_json(v));
    rows.push_back(r);
  }
  j["l2_sq"] = rows;
  return j;
}

std::string convergence_to_csv(const ConvergenceReport& report) {
  std::string out = "m,mean_l2_sq,n_ok\n";
  for (std::size_t i = 0; i < report.sample_counts.size(); ++i) {
    out += std::to_string(report.sample_counts[i]) + ',';
    append_number(out, report.mean_l2_sq[i]);
    out += ',' + std::to_string(report.n_ok[i]) + '\n';
  }
  return out;
}

// --- validation search ------------------------------------------------------

GridSearchResult grid_search(const Dataset& dataset, const SolverConfig& config, const std::vector<double>& lambdas,
                             const std::vector<double>& rhos, double validation_fraction, std::uint64_t seed) {
  if (dataset.size() < 2) throw ConfigError("validation split needs at least two trajectories");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  if (lambdas.empty() || rhos.empty()) throw ConfigError("grid search needs at least one lambda and one rho");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  auto held = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(dataset.size())));
  held = std::clamp<std::size_t>(held, 1, dataset.size() - 1);
  Dataset train;
  Dataset valid;
  train.dim = valid.dim = dataset.dim;
  train.horizon = dataset.horizon;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < held ? valid : train).trajectories.push_back(dataset.trajectories[order[i]]);
  }
  if (train.horizon > 0.0 && train.horizon < train.max_time()) train.horizon = 0.0;

  GridSearchResult result;
  double best = std::numeric_limits<double>::infinity();
  for (double lambda : lambdas) {
    for (double rho : rhos) {
      SolverConfig cfg = config;
      cfg.lambda = lambda;
      cfg.rho = rho;
      GridSearchEntry entry{lambda, rho, std::numeric_limits<double>::infinity()};
      try {
        const FitResult fit = penalty_fit(train, cfg);
        std::vector<double> err;
        for (const auto& tr : valid.trajectories) {
          if (tr.size() >= 2) err.push_back(prediction_err(fit.field, tr, cfg.h));
        }
        if (!err.empty()) entry.err = mean_sem(err).first;
      } catch (const NumericalError&) {
      }
      if (!std::isfinite(entry.err)) entry.err = std::numeric_limits<double>::infinity();
      if (entry.err < best) {
        best = entry.err;
        result.lambda = lambda;
        result.rho = rho;
      }
      result.table.push_back(entry);
    }
  }
  if (!std::isfinite(best)) throw NumericalError("grid search: every (lambda, rho) fit failed");
  return result;
}

}  // namespace rkhs_ode
