#include "rkhs_ode/solver.hpp"

#include "rkhs_ode/eval.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rkhs_ode {

namespace {

constexpr std::uint64_t kFeatureStream = 1;
constexpr double kConditionWarning = 1e-13;

Vector coordinate_range(const Dataset& dataset, bool with_time) {
  const Matrix all = dataset.stacked_values();
  const int d = dataset.dim;
  Vector range(d + (with_time ? 1 : 0));
  for (int c = 0; c < d; ++c) {
    const double r = all.row(c).maxCoeff() - all.row(c).minCoeff();
    range(c) = r > 0.0 ? r : 1.0;
  }
  if (with_time) {
    const double r = dataset.max_time() - dataset.min_time();
    range(d) = r > 0.0 ? r : 1.0;
  }
  return range;
}

/// Observation inputs (state, and time when augmented) side by side.
Matrix observation_inputs(const Dataset& dataset, bool with_time) {
  const Matrix states = dataset.stacked_values();
  Matrix inputs(states.rows() + (with_time ? 1 : 0), states.cols());
  inputs.topRows(states.rows()) = states;
  if (with_time) {
    Eigen::Index col = 0;
    for (const auto& tr : dataset.trajectories) {
      inputs.row(states.rows()).segment(col, tr.size()) = tr.times.transpose();
      col += tr.size();
    }
  }
  return inputs;
}

bool same_features(const FeatureMapSpec& a, const FeatureMapSpec& b) {
  return a.n_features == b.n_features && a.state_dim == b.state_dim &&
         a.time_augmented == b.time_augmented && a.frequencies == b.frequencies &&
         a.phases == b.phases && a.mean == b.mean && a.scale == b.scale;
}

Vector grid_times(const TimeGrid& grid, int count) {
  Vector t(count);
  for (int l = 0; l < count; ++l) t(l) = grid.node(l);
  return t;
}

void note(std::vector<std::string>* warnings, const std::string& message) {
  warn(message);
  if (warnings) warnings->push_back(message);
}

std::string format_rcond(double rcond) {
  std::ostringstream os;
  os << rcond;
  return os.str();
}

}  // namespace

std::string to_string(InitMethod init) {
  return init == InitMethod::gradient_matching ? "gradient_matching" : "zero_field";
}

InitMethod init_method_from_string(const std::string& name) {
  if (name == "gradient_matching") return InitMethod::gradient_matching;
  if (name == "zero_field") return InitMethod::zero_field;
  throw ConfigError("unknown init method: " + name);
}

std::string to_string(StopReason reason) {
  return reason == StopReason::early_stop ? "early_stop" : "max_iters";
}

KernelSpec default_kernel(std::uint64_t seed) {
  FeatureMapSpec f;
  f.n_features = 200;
  f.range_fraction = 0.2;
  f.seed = seed;
  return f;
}

void SolverConfig::validate() const {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("h must be > 0");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("rho must be > 0");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be > 0");
  if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) throw ConfigError("gamma0 must be > 0");
  if (!(gamma_max >= gamma0)) throw ConfigError("gamma_max must be >= gamma0");
  if (max_iters < 0) throw ConfigError("max_iters must be >= 0");
  if (!(early_stop_eps > 0.0 && early_stop_eps < 1.0)) throw ConfigError("early_stop_eps must lie in (0, 1)");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (const auto* m = std::get_if<MatrixKernelSpec>(&kernel)) {
    m->validate();
  } else {
    const auto& f = std::get<FeatureMapSpec>(kernel);
    if (f.n_features <= 0) throw ConfigError("n_features must be positive");
    if (f.resolved()) f.validate();
  }
}

const std::vector<std::string>& solver_config_keys() {
  static const std::vector<std::string> keys{"h",        "rho",       "lambda",         "gamma0", "gamma_max",
                                             "max_iters", "early_stop_eps", "kernel", "seed",   "init"};
  return keys;
}

nlohmann::json config_to_json(const SolverConfig& config) {
  nlohmann::json j;
  j["h"] = config.h;
  j["rho"] = config.rho;
  j["lambda"] = config.lambda;
  j["gamma0"] = config.gamma0;
  j["gamma_max"] = config.gamma_max;
  j["max_iters"] = config.max_iters;
  j["early_stop_eps"] = config.early_stop_eps;
  j["kernel"] = kernel_to_json(config.kernel);
  j["seed"] = config.seed;
  j["init"] = to_string(config.init);
  return j;
}

SolverConfig config_from_json(const nlohmann::json& j, bool require_all, const SolverConfig& defaults) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& key : j.items()) {
    const auto& keys = solver_config_keys();
    if (std::find(keys.begin(), keys.end(), key.key()) == keys.end()) {
      throw ConfigError("unknown config key: " + key.key());
    }
  }
  if (require_all) {
    for (const auto& key : solver_config_keys()) {
      if (!j.contains(key)) throw ConfigError("missing config key: " + key);
    }
  }
  SolverConfig c = defaults;
  try {
    c.h = j.value("h", c.h);
    c.rho = j.value("rho", c.rho);
    c.lambda = j.value("lambda", c.lambda);
    c.gamma0 = j.value("gamma0", c.gamma0);
    c.gamma_max = j.value("gamma_max", c.gamma_max);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.early_stop_eps = j.value("early_stop_eps", c.early_stop_eps);
    c.seed = j.value("seed", c.seed);
    if (j.contains("init")) c.init = init_method_from_string(j.at("init").get<std::string>());
    if (j.contains("kernel")) {
      nlohmann::json kj = j.at("kernel");
      if (kj.is_object() && kj.value("family", "") == "random_fourier" && !kj.contains("seed")) {
        kj["seed"] = derive_seed(c.seed, kFeatureStream);
      }
      c.kernel = kernel_from_json(kj);
    } else if (auto* f = std::get_if<FeatureMapSpec>(&c.kernel); f && !f->resolved() && j.contains("seed")) {
      f->seed = derive_seed(c.seed, kFeatureStream);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

// --- initialization ---------------------------------------------------------

Matrix central_differences(const Trajectory& trajectory) {
  const Eigen::Index m = trajectory.size();
  if (m < 2) throw UsageError("central differences need at least two observations (trajectory " + trajectory.id + ")");
  const Vector& t = trajectory.times;
  const Matrix& y = trajectory.values;
  Matrix d(y.rows(), m);
  d.col(0) = (y.col(1) - y.col(0)) / (t(1) - t(0));
  d.col(m - 1) = (y.col(m - 1) - y.col(m - 2)) / (t(m - 1) - t(m - 2));
  for (Eigen::Index j = 1; j + 1 < m; ++j) d.col(j) = (y.col(j + 1) - y.col(j - 1)) / (t(j + 1) - t(j - 1));
  return d;
}

KernelSpec resolve_kernel(const KernelSpec& kernel, const Dataset& dataset) {
  const int d = dataset.dim;
  if (const auto* m = std::get_if<MatrixKernelSpec>(&kernel)) {
    MatrixKernelSpec out = *m;
    if (out.mix.size() == 0) out.mix = Matrix::Identity(d, d);
    if (out.output_dim() != d) throw ConfigError("kernel mix matrix does not match the data dimension");
    if (!out.scalar.resolved()) {
      const Vector ls = out.scalar.range_fraction * coordinate_range(dataset, false);
      const double fraction = out.scalar.range_fraction;
      out.scalar.metric = ScalarKernelSpec::gaussian_lengthscales(ls).metric;
      out.scalar.range_fraction = 0.0;
      if (out.scalar.family != KernelFamily::gaussian && out.scalar.family != KernelFamily::linear) {
        throw ConfigError("range_fraction is only defined for gaussian and linear kernels (got " +
                          std::to_string(fraction) + ")");
      }
    }
    out.validate();
    return out;
  }
  FeatureMapSpec f = std::get<FeatureMapSpec>(kernel);
  if (f.state_dim == 0) f.state_dim = d;
  if (f.state_dim != d) throw ConfigError("feature map state dimension does not match the data");
  if (!f.resolved()) {
    const double fraction = f.range_fraction > 0.0 ? f.range_fraction : 0.2;
    const Vector ls = f.lengthscales.size() == f.input_dim()
                          ? f.lengthscales
                          : Vector(fraction * coordinate_range(dataset, f.time_augmented));
    FeatureMapSpec sampled = FeatureMapSpec::sample(f.n_features, d, ls, f.seed, f.time_augmented);
    sampled.standardize_on_fit = f.standardize_on_fit;
    sampled.range_fraction = f.range_fraction;
    f = sampled;
  }
  const bool raw = (f.mean.array() == 0.0).all() && (f.scale.array() == 1.0).all();
  if (f.standardize_on_fit && raw) {
    const bool keep = f.standardize_on_fit;
    f = standardize(f, observation_inputs(dataset, f.time_augmented));
    f.standardize_on_fit = keep;
  }
  f.validate();
  return f;
}

VectorField gradient_matching_init(const Dataset& dataset, const KernelSpec& kernel, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("gradient matching needs lambda > 0");
  dataset.validate();
  const int d = dataset.dim;
  const Eigen::Index total = dataset.total_observations();
  Matrix derivs(d, total);
  Eigen::Index col = 0;
  for (const auto& tr : dataset.trajectories) {
    derivs.middleCols(col, tr.size()) = central_differences(tr);
    col += tr.size();
  }
  const double mcount = static_cast<double>(total);

  if (const auto* fm = std::get_if<FeatureMapSpec>(&kernel)) {
    if (!fm->resolved()) throw UsageError("gradient matching needs a resolved feature map");
    const Matrix phi = feature_matrix(*fm, observation_inputs(dataset, fm->time_augmented));
    Matrix a = Matrix::Zero(fm->n_features, fm->n_features);
    a.selfadjointView<Eigen::Lower>().rankUpdate(phi, 1.0 / mcount);
    a = a.selfadjointView<Eigen::Lower>();
    a.diagonal().array() += lambda;
    const Matrix rhs = phi * derivs.transpose() / mcount;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) throw NumericalError("gradient matching: ridge system is not positive definite");
    Matrix coef = llt.solve(rhs);
    if (!coef.allFinite()) throw NumericalError("gradient matching produced non-finite coefficients");
    return VectorField(ExplicitField{*fm, std::move(coef)});
  }

  const auto& mk = std::get<MatrixKernelSpec>(kernel);
  const bool time_aug = false;
  const Matrix centers = observation_inputs(dataset, time_aug);
  Matrix g = gram(mk, centers);
  g.diagonal().array() += lambda * mcount;
  Eigen::LDLT<Matrix> ldlt(g);
  const Eigen::Map<const Vector> rhs(derivs.data(), derivs.size());
  const Vector w = ldlt.solve(rhs);
  if (!w.allFinite()) throw NumericalError("gradient matching produced non-finite weights");
  Matrix weights = Eigen::Map<const Matrix>(w.data(), d, total);
  return VectorField(RepresenterField{mk, centers, std::move(weights), time_aug});
}

// --- z-step -----------------------------------------------------------------

ObservationTerm observation_term(const Trajectory& trajectory, const TimeGrid& grid, double horizon) {
  ObservationTerm obs;
  obs.node = grid.obs_index;
  obs.values = trajectory.values;
  obs.weights = sample_weights(trajectory, horizon, grid.h).weights;
  return obs;
}

ZLinearization linearize(const Matrix& z_ref, const VectorField& f, double gamma, const TimeGrid& grid) {
  const int d = static_cast<int>(z_ref.rows());
  const int k = grid.k;
  if (z_ref.cols() != k + 1) throw UsageError("latent states do not match the grid");
  ZLinearization lin;
  lin.penalty = k > 0 ? gamma / k : 0.0;
  lin.offset.resize(d, k);
  lin.transition.resize(static_cast<std::size_t>(k));
  if (k == 0) return lin;

  Matrix values;
  std::vector<Matrix> jac;
  const Vector times = grid_times(grid, k);
  eval_field_batch(f, z_ref.leftCols(k), &times, values, &jac);
  const double h = grid.h;
  for (int l = 0; l < k; ++l) {
    Matrix b = h * jac[l];
    b.diagonal().array() += 1.0;
    Vector c = h * (values.col(l) - jac[l] * z_ref.col(l));
    if (!b.allFinite() || !c.allFinite()) {
      throw NumericalError("non-finite linearization at node " + std::to_string(l));
    }
    lin.transition[l] = std::move(b);
    lin.offset.col(l) = c;
  }
  return lin;
}

double z_objective(const ZLinearization& lin, const ObservationTerm& obs, const Matrix& z) {
  double value = 0.0;
  for (std::size_t j = 0; j < obs.node.size(); ++j) {
    value += obs.weights(j) * (obs.values.col(j) - z.col(obs.node[j])).squaredNorm();
  }
  for (std::size_t l = 0; l < lin.transition.size(); ++l) {
    const Vector r = z.col(l + 1) - lin.transition[l] * z.col(l) - lin.offset.col(l);
    value += lin.penalty * r.squaredNorm();
  }
  return value;
}

Vector z_objective_gradient(const ZLinearization& lin, const ObservationTerm& obs, const Matrix& z) {
  Matrix g = Matrix::Zero(z.rows(), z.cols());
  for (std::size_t j = 0; j < obs.node.size(); ++j) {
    g.col(obs.node[j]) -= 2.0 * obs.weights(j) * (obs.values.col(j) - z.col(obs.node[j]));
  }
  for (std::size_t l = 0; l < lin.transition.size(); ++l) {
    const Vector r = z.col(l + 1) - lin.transition[l] * z.col(l) - lin.offset.col(l);
    g.col(l + 1) += 2.0 * lin.penalty * r;
    g.col(l) -= 2.0 * lin.penalty * lin.transition[l].transpose() * r;
  }
  return Eigen::Map<const Vector>(g.data(), g.size());
}

ZSystem assemble_z_system(const ZLinearization& lin, const ObservationTerm& obs, int nodes, int dim) {
  ZSystem sys{BlockTridiagonal<double>(nodes, dim), Vector::Zero(static_cast<Eigen::Index>(nodes) * dim)};
  for (std::size_t j = 0; j < obs.node.size(); ++j) {
    const int l = obs.node[j];
    if (l < 0 || l >= nodes) throw UsageError("observation node outside the grid");
    sys.matrix.diag[l].diagonal().array() += obs.weights(j);
    sys.rhs.segment(l * dim, dim) += obs.weights(j) * obs.values.col(j);
  }
  const double a = lin.penalty;
  for (std::size_t l = 0; l < lin.transition.size(); ++l) {
    const Matrix& b = lin.transition[l];
    sys.matrix.diag[l + 1].diagonal().array() += a;
    sys.matrix.diag[l].noalias() += a * b.transpose() * b;
    sys.matrix.lower[l] -= a * b;
    sys.rhs.segment((l + 1) * dim, dim) += a * lin.offset.col(l);
    sys.rhs.segment(l * dim, dim).noalias() -= a * b.transpose() * lin.offset.col(l);
  }
  return sys;
}

Matrix z_step(const Matrix& z_prev, const VectorField& f, double gamma, const TimeGrid& grid,
              const ObservationTerm& obs) {
  if (!z_prev.allFinite()) throw NumericalError("z-step: non-finite previous latent states");
  if (!(gamma >= 0.0)) throw UsageError("z-step: gamma must be >= 0");
  const int d = static_cast<int>(z_prev.rows());
  const ZLinearization lin = linearize(z_prev, f, gamma, grid);
  const ZSystem sys = assemble_z_system(lin, obs, grid.nodes(), d);
  const Vector x = solve_block_tridiagonal(sys.matrix, sys.rhs);
  return Eigen::Map<const Matrix>(x.data(), d, grid.nodes());
}

// --- f-step -----------------------------------------------------------------

VectorField f_step(const std::vector<Matrix>& latents, const std::vector<TimeGrid>& grids, double gamma,
                   double lambda, const VectorField& f0, const KernelSpec& kernel,
                   std::vector<std::string>* warnings) {
  if (!(gamma > 0.0) || !(lambda > 0.0)) throw UsageError("f-step needs gamma > 0 and lambda > 0");
  if (latents.size() != grids.size() || latents.empty()) throw UsageError("f-step: latents and grids differ");
  const int d = static_cast<int>(latents.front().rows());
  const bool time_aug = [&] {
    if (const auto* fm = std::get_if<FeatureMapSpec>(&kernel)) return fm->time_augmented;
    return false;
  }();
  const double n = static_cast<double>(latents.size());

  Eigen::Index total = 0;
  for (const auto& g : grids) total += g.k;
  if (total == 0) throw UsageError("f-step: no grid intervals");
  Matrix inputs(d + (time_aug ? 1 : 0), total);
  Matrix slopes(d, total);
  Vector times(total);
  Vector weight(total);
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < latents.size(); ++i) {
    const TimeGrid& g = grids[i];
    const Matrix& z = latents[i];
    if (z.rows() != d || z.cols() != g.nodes()) throw UsageError("f-step: latent states do not match the grid");
    if (g.k == 0) continue;
    inputs.block(0, col, d, g.k) = z.leftCols(g.k);
    slopes.middleCols(col, g.k) = (z.rightCols(g.k) - z.leftCols(g.k)) / g.h;
    const double c = gamma * g.h * g.h / (n * g.k);
    for (int l = 0; l < g.k; ++l) {
      times(col + l) = g.node(l);
      weight(col + l) = c;
    }
    col += g.k;
  }
  if (time_aug) inputs.row(d) = times.transpose();
  if (!inputs.allFinite()) throw NumericalError("f-step: non-finite latent states");

  if (const auto* fm = std::get_if<FeatureMapSpec>(&kernel)) {
    const Matrix phi = feature_matrix(*fm, inputs);
    Matrix a = Matrix::Zero(fm->n_features, fm->n_features);
    const Matrix scaled = phi * weight.cwiseSqrt().asDiagonal();
    a.selfadjointView<Eigen::Lower>().rankUpdate(scaled, 1.0);
    a = a.selfadjointView<Eigen::Lower>();
    a.diagonal().array() += lambda;

    const auto* ex0 = std::get_if<ExplicitField>(&f0.form());
    const bool merged = ex0 && !f0.base() && same_features(ex0->features, *fm);
    Matrix targets = slopes;
    if (!merged) {
      Matrix base_values;
      eval_field_batch(f0, inputs.topRows(d), time_aug ? &times : nullptr, base_values);
      targets -= base_values;
    }
    Matrix rhs = phi * weight.asDiagonal() * targets.transpose();
    if (merged) rhs += lambda * ex0->coefficients;

    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) throw NumericalError("f-step: ridge system is not positive definite");
    const double rcond = llt.rcond();
    if (rcond < kConditionWarning) note(warnings, "f-step: ill-conditioned ridge system (rcond " + format_rcond(rcond) + ")");
    Matrix coef = llt.solve(rhs);
    if (!coef.allFinite()) throw NumericalError("f-step produced non-finite coefficients");
    if (merged) return VectorField(ExplicitField{*fm, std::move(coef)});
    return VectorField(ExplicitField{*fm, std::move(coef)}, std::make_shared<const VectorField>(f0));
  }

  const auto& mk = std::get<MatrixKernelSpec>(kernel);
  Matrix base_values;
  eval_field_batch(f0, inputs.topRows(d), time_aug ? &times : nullptr, base_values);
  const Matrix targets = slopes - base_values;
  Matrix g = gram(mk, inputs);
  for (Eigen::Index p = 0; p < total; ++p) {
    g.block(p * d, p * d, d, d).diagonal().array() += lambda / weight(p);
  }
  Eigen::LDLT<Matrix> ldlt(g);
  if (ldlt.info() != Eigen::Success) throw NumericalError("f-step: representer factorization failed");
  const double rcond = ldlt.rcond();
  if (rcond < kConditionWarning) note(warnings, "f-step: ill-conditioned representer system (rcond " + format_rcond(rcond) + ")");
  const Eigen::Map<const Vector> rhs(targets.data(), targets.size());
  const Vector w = ldlt.solve(rhs);
  if (!w.allFinite()) throw NumericalError("f-step produced non-finite weights");
  Matrix weights = Eigen::Map<const Matrix>(w.data(), d, total);
  return VectorField(RepresenterField{mk, inputs, std::move(weights), time_aug},
                     std::make_shared<const VectorField>(f0));
}

// --- driver -----------------------------------------------------------------

double field_change_norm(const VectorField& f_new, const VectorField& f_old, const Matrix& nodes,
                         const Vector* node_times) {
  const auto* en = std::get_if<ExplicitField>(&f_new.form());
  const auto* eo = std::get_if<ExplicitField>(&f_old.form());
  if (en && eo && f_new.base() == f_old.base() && same_features(en->features, eo->features)) {
    const double denom = eo->coefficients.norm();
    if (denom == 0.0) return std::numeric_limits<double>::infinity();
    return (en->coefficients - eo->coefficients).norm() / denom;
  }
  const auto* rn = std::get_if<RepresenterField>(&f_new.form());
  const auto* ro = std::get_if<RepresenterField>(&f_old.form());
  const bool same_base = f_new.base() == f_old.base() ||
                         (f_new.base() && f_old.base() &&
                          field_to_json(*f_new.base()) == field_to_json(*f_old.base()));
  if (rn && ro && same_base && rn->centers.rows() == ro->centers.rows() &&
      rn->centers.cols() == ro->centers.cols() && rn->centers == ro->centers) {
    const double denom = ro->weights.norm();
    if (denom == 0.0) return std::numeric_limits<double>::infinity();
    return (rn->weights - ro->weights).norm() / denom;
  }
  Matrix vn;
  Matrix vo;
  eval_field_batch(f_new, nodes, node_times, vn);
  eval_field_batch(f_old, nodes, node_times, vo);
  const double denom = vo.norm();
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  return (vn - vo).norm() / denom;
}

namespace {

double data_loss(const std::vector<Matrix>& latents, const std::vector<ObservationTerm>& obs) {
  double loss = 0.0;
  double weight = 0.0;
  for (std::size_t i = 0; i < latents.size(); ++i) {
    for (std::size_t j = 0; j < obs[i].node.size(); ++j) {
      loss += obs[i].weights(j) * (obs[i].values.col(j) - latents[i].col(obs[i].node[j])).squaredNorm();
      weight += obs[i].weights(j);
    }
  }
  return weight > 0.0 ? loss / weight : 0.0;
}

/// Left grid nodes of all trajectories (and their times), used by the RMS
/// field-change norm.
void stacked_nodes(const std::vector<Matrix>& latents, const std::vector<TimeGrid>& grids, Matrix& nodes,
                   Vector& times) {
  Eigen::Index total = 0;
  for (const auto& z : latents) total += z.cols();
  nodes.resize(latents.front().rows(), total);
  times.resize(total);
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < latents.size(); ++i) {
    nodes.middleCols(col, latents[i].cols()) = latents[i];
    for (Eigen::Index l = 0; l < latents[i].cols(); ++l) times(col + l) = grids[i].node(static_cast<int>(l));
    col += latents[i].cols();
  }
}

}  // namespace

FitResult penalty_fit(const Dataset& dataset, const SolverConfig& config) {
  config.validate();
  dataset.validate();
  if (dataset.trajectories.empty()) throw UsageError("dataset has no trajectories");

  FitResult result;
  result.kernel = resolve_kernel(config.kernel, dataset);
  if (const auto* mk = std::get_if<MatrixKernelSpec>(&result.kernel); mk && !is_differentiable(mk->scalar)) {
    throw ConfigError("kernel family " + to_string(mk->scalar.family) +
                      " is not differentiable; the z-step linearization needs its Jacobian");
  }
  result.grids = build_grid(dataset, config.h);
  const double horizon = std::max(dataset.effective_horizon(), dataset.max_time());
  std::vector<ObservationTerm> obs;
  obs.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    obs.push_back(observation_term(dataset.trajectories[i], result.grids[i], horizon));
  }

  const int d = dataset.dim;
  if (config.init == InitMethod::gradient_matching) {
    result.initial_field = gradient_matching_init(dataset, result.kernel, config.lambda);
  } else if (const auto* fm = std::get_if<FeatureMapSpec>(&result.kernel)) {
    result.initial_field = VectorField(ExplicitField{*fm, Matrix::Zero(fm->n_features, d)});
  } else {
    result.initial_field = VectorField::zero(d);
  }
  result.field = result.initial_field;

  result.latents.resize(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const TimeGrid& g = result.grids[i];
    Matrix z(d, g.nodes());
    for (int l = 0; l < g.nodes(); ++l) z.col(l) = interpolate(dataset.trajectories[i], g.node(l));
    result.latents[i] = std::move(z);
  }

  double gamma = config.gamma0;
  for (int s = 0; s < config.max_iters; ++s) {
    std::vector<Matrix> next(dataset.size());
    try {
      parallel_for(dataset.size(), config.threads, [&](std::size_t i) {
        next[i] = z_step(result.latents[i], result.field, gamma, result.grids[i], obs[i]);
      });
      for (std::size_t i = 0; i < next.size(); ++i) {
        if (!next[i].allFinite()) {
          throw NumericalError("z-step produced non-finite states for trajectory " + dataset.trajectories[i].id);
        }
      }
    } catch (const NumericalError& e) {
      throw FitDivergence(std::string(e.what()) + " (iteration " + std::to_string(s + 1) + ")", s + 1,
                          result.traces);
    }

    VectorField f_new;
    try {
      f_new = f_step(next, result.grids, gamma, config.lambda, result.initial_field, result.kernel,
                     &result.warnings);
    } catch (const NumericalError& e) {
      throw FitDivergence(std::string(e.what()) + " (iteration " + std::to_string(s + 1) + ")", s + 1,
                          result.traces);
    }

    Matrix nodes;
    Vector node_times;
    stacked_nodes(next, result.grids, nodes, node_times);
    IterationTrace trace;
    trace.iter = s + 1;
    trace.gamma = gamma;
    trace.field_change = field_change_norm(f_new, result.field, nodes, &node_times);
    result.latents = std::move(next);
    result.field = std::move(f_new);
    trace.data_loss = data_loss(result.latents, obs);
    trace.constraint_residual = constraint_residual(result.latents, result.field, result.grids);
    if (!std::isfinite(trace.data_loss) || !std::isfinite(trace.constraint_residual)) {
      result.traces.push_back(trace);
      throw FitDivergence("fit diverged at iteration " + std::to_string(s + 1), s + 1, result.traces);
    }
    result.traces.push_back(trace);
    gamma = std::min(gamma * (1.0 + config.rho), config.gamma_max);
    if (trace.field_change < config.early_stop_eps) {
      result.stop_reason = StopReason::early_stop;
      break;
    }
  }
  result.iterations_run = static_cast<int>(result.traces.size());
  return result;
}

Trajectory predict(const VectorField& f, ConstVecRef x0, double t0, double horizon, double h) {
  if (!(horizon >= 0.0)) throw UsageError("prediction horizon must be >= 0");
  if (!(h > 0.0)) throw UsageError("prediction step must be > 0");
  const int steps = static_cast<int>(std::llround(horizon / h));
  Trajectory out;
  out.id = "prediction";
  out.values = euler_integrate(f, x0, t0, h, steps);
  out.times.resize(steps + 1);
  for (int l = 0; l <= steps; ++l) out.times(l) = t0 + l * h;
  return out;
}

}  // namespace rkhs_ode
