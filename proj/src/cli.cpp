#include "rkhs_ode/cli.hpp"

#include "rkhs_ode/data.hpp"
#include "rkhs_ode/eval.hpp"
#include "rkhs_ode/ode.hpp"
#include "rkhs_ode/solver.hpp"

#include <CLI11.hpp>

#include <cctype>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

namespace rkhs_ode {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kIcStream = 31;
constexpr std::uint64_t kNoiseStream = 32;

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

std::string sanitize(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += keep ? c : '_';
  }
  return out.empty() ? "_" : out;
}

/// Solver flags that override config-file values.
struct SolverFlags {
  double h = 0.0;
  double rho = 0.0;
  double lambda = 0.0;
  double gamma0 = 0.0;
  double gamma_max = 0.0;
  int max_iters = 0;
  double early_stop_eps = 0.0;
  std::string init;
  std::uint64_t seed = 0;
  std::string config_path;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Solver config JSON (every key required unless given as a flag)");
    app->add_option("--h", h, "Grid step");
    app->add_option("--rho", rho, "Penalty growth rate");
    app->add_option("--lambda", lambda, "Regularization");
    app->add_option("--gamma0", gamma0, "Initial penalty");
    app->add_option("--gamma-max", gamma_max, "Penalty cap");
    app->add_option("--max-iters", max_iters, "Maximum penalty iterations");
    app->add_option("--early-stop-eps", early_stop_eps, "Relative field change for early stopping");
    app->add_option("--init", init, "gradient_matching | zero_field");
    app->add_option("--seed", seed, "Root seed");
  }

  nlohmann::json overrides(const CLI::App* app) const {
    nlohmann::json j = nlohmann::json::object();
    if (app->count("--h")) j["h"] = h;
    if (app->count("--rho")) j["rho"] = rho;
    if (app->count("--lambda")) j["lambda"] = lambda;
    if (app->count("--gamma0")) j["gamma0"] = gamma0;
    if (app->count("--gamma-max")) j["gamma_max"] = gamma_max;
    if (app->count("--max-iters")) j["max_iters"] = max_iters;
    if (app->count("--early-stop-eps")) j["early_stop_eps"] = early_stop_eps;
    if (app->count("--init")) j["init"] = init;
    if (app->count("--seed")) j["seed"] = seed;
    return j;
  }

  /// Precedence: flag > config file > built-in default.
  SolverConfig resolve(const CLI::App* app, const SolverConfig& builtin, std::vector<std::string>& inputs) const {
    nlohmann::json j = overrides(app);
    if (!config_path.empty()) {
      nlohmann::json file = read_json(config_path);
      if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
      for (auto& [key, value] : j.items()) file[key] = value;
      inputs.push_back(config_path);
      return config_from_json(file, true, builtin);
    }
    return config_from_json(j, false, builtin);
  }
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> argv;
  int threads = 1;
};

void finish_manifest(RunManifest& manifest, const Context& ctx, std::chrono::steady_clock::time_point start,
                     const fs::path& path) {
  manifest.argv = ctx.argv;
  manifest.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text(path, manifest_to_json(manifest).dump(2) + "\n");
}

Vector parse_vector(const std::vector<double>& values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
  return v;
}

std::string traces_csv(const std::vector<IterationTrace>& traces) {
  std::string out = "iter,data_loss,constraint_residual,gamma,field_change\n";
  for (const auto& t : traces) {
    out += std::to_string(t.iter) + ',';
    append_number(out, t.data_loss);
    out += ',';
    append_number(out, t.constraint_residual);
    out += ',';
    append_number(out, t.gamma);
    out += ',';
    append_number(out, t.field_change);
    out += '\n';
  }
  return out;
}

std::string latents_csv(const Matrix& z, const TimeGrid& grid) {
  std::string out = "t";
  for (Eigen::Index c = 0; c < z.rows(); ++c) out += ",z" + std::to_string(c + 1);
  out += '\n';
  for (Eigen::Index l = 0; l < z.cols(); ++l) {
    append_number(out, grid.node(static_cast<int>(l)));
    for (Eigen::Index c = 0; c < z.rows(); ++c) {
      out += ',';
      append_number(out, z(c, l));
    }
    out += '\n';
  }
  return out;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string system = "fhn";
  int n_traj = 50;
  int n_obs = 201;
  double dt = 0.1;
  double t0 = 0.0;
  int substeps = 100;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t ic_seed = 0;
  int dim = 6;
  double forcing = 8.0;
  std::vector<double> ic_low;
  std::vector<double> ic_high;
  std::string out;
};

void default_box(const std::string& system, int dim, double forcing, Vector& low, Vector& high) {
  if (system == "fhn") {
    const auto p = BenchmarkProtocol::fhn();
    low = p.ic_low;
    high = p.ic_high;
  } else if (system == "lorenz63") {
    const auto p = BenchmarkProtocol::lorenz63();
    low = p.ic_low;
    high = p.ic_high;
  } else if (system == "lorenz96") {
    const auto p = BenchmarkProtocol::lorenz96(dim, forcing);
    low = p.ic_low;
    high = p.ic_high;
  } else {
    low = Vector::Constant(2, -1.0);
    high = Vector::Constant(2, 1.0);
  }
}

int cmd_simulate(const SimulateArgs& a, const Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  if (a.n_traj < 1) throw ConfigError("--n-traj must be >= 1");
  if (a.n_obs < 1) throw ConfigError("--n-obs must be >= 1");
  if (!(a.dt > 0.0)) throw ConfigError("--dt must be > 0");
  if (a.substeps < 1) throw ConfigError("--substeps must be >= 1");
  if (!(a.sigma >= 0.0)) throw ConfigError("--sigma must be >= 0");
  const VectorField system = analytic_system(a.system, a.dim, a.forcing);
  Vector low;
  Vector high;
  default_box(a.system, a.dim, a.forcing, low, high);
  if (!a.ic_low.empty()) low = parse_vector(a.ic_low);
  if (!a.ic_high.empty()) high = parse_vector(a.ic_high);
  if (low.size() != system.dim() || high.size() != system.dim()) {
    throw ConfigError("initial-condition box must have " + std::to_string(system.dim()) + " coordinates");
  }
  std::mt19937_64 rng(derive_seed(a.ic_seed, kIcStream));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix ic(system.dim(), a.n_traj);
  for (int i = 0; i < a.n_traj; ++i) {
    for (int c = 0; c < system.dim(); ++c) ic(c, i) = low(c) + (high(c) - low(c)) * unit(rng);
  }
  Dataset data = simulate_dataset(system, ic, a.t0, a.dt, a.n_obs, a.substeps, ctx.threads);
  if (a.sigma > 0.0) data = add_noise(data, a.sigma, derive_seed(a.seed, kNoiseStream));
  write_text(a.out, format_dataset(data));

  nlohmann::json params{{"system", a.system}, {"n_traj", a.n_traj}, {"n_obs", a.n_obs}, {"dt", a.dt},
                        {"t0", a.t0},         {"substeps", a.substeps}, {"sigma", a.sigma}, {"dim", system.dim()},
                        {"forcing", a.forcing}, {"ic_seed", a.ic_seed}};
  RunManifest m;
  m.command = "simulate";
  m.config_hash = config_hash(params);
  m.seed = a.seed;
  m.outputs = {a.out};
  finish_manifest(m, ctx, start, a.out + ".manifest.json");
  ctx.out << "wrote " << a.n_traj << " trajectories x " << a.n_obs << " observations to " << a.out << "\n";
  return kExitOk;
}

// --- fit --------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string out;
  double horizon = 0.0;
  double validate = 0.0;
  std::vector<double> lambdas{1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<double> rhos{0.05, 0.1, 0.2};
  SolverFlags solver;
};

int cmd_fit(const FitArgs& a, const CLI::App* app, const Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  RunManifest m;
  m.command = "fit";
  m.inputs.push_back(a.data);
  SolverConfig cfg = a.solver.resolve(app, SolverConfig{}, m.inputs);
  cfg.threads = ctx.threads;
  Dataset data = load_dataset(a.data);
  if (a.horizon > 0.0) data.horizon = a.horizon;
  const fs::path dir(a.out);

  if (app->count("--validate")) {
    const GridSearchResult gs = grid_search(data, cfg, a.lambdas, a.rhos, a.validate, cfg.seed);
    std::string csv = "lambda,rho,err\n";
    for (const auto& e : gs.table) {
      append_number(csv, e.lambda);
      csv += ',';
      append_number(csv, e.rho);
      csv += ',';
      append_number(csv, e.err);
      csv += '\n';
    }
    write_text(dir / "validation.csv", csv);
    m.outputs.push_back((dir / "validation.csv").string());
    cfg.lambda = gs.lambda;
    cfg.rho = gs.rho;
    ctx.out << "validation picked lambda=" << gs.lambda << " rho=" << gs.rho << "\n";
  }

  const nlohmann::json cfg_json = config_to_json(cfg);
  m.config_hash = config_hash(cfg_json);
  m.seed = cfg.seed;
  int code = kExitOk;
  FitResult fit;
  try {
    fit = penalty_fit(data, cfg);
  } catch (const FitDivergence& e) {
    write_text(dir / "traces.csv", traces_csv(e.traces()));
    m.outputs.push_back((dir / "traces.csv").string());
    finish_manifest(m, ctx, start, dir / "manifest.json");
    throw;
  }

  write_text(dir / "field.json", field_to_json(fit.field).dump(2) + "\n");
  write_text(dir / "traces.csv", traces_csv(fit.traces));
  write_text(dir / "config.json", cfg_json.dump(2) + "\n");
  m.outputs.push_back((dir / "field.json").string());
  m.outputs.push_back((dir / "traces.csv").string());
  m.outputs.push_back((dir / "config.json").string());
  for (std::size_t i = 0; i < fit.latents.size(); ++i) {
    const fs::path p = dir / ("latents_" + sanitize(data.trajectories[i].id) + ".csv");
    write_text(p, latents_csv(fit.latents[i], fit.grids[i]));
    m.outputs.push_back(p.string());
  }
  nlohmann::json summary{{"iterations_run", fit.iterations_run},
                         {"stop_reason", to_string(fit.stop_reason)},
                         {"warnings", fit.warnings},
                         {"kernel", kernel_to_json(fit.kernel)}};
  if (!fit.traces.empty()) {
    summary["final_data_loss"] = fit.traces.back().data_loss;
    summary["final_constraint_residual"] = fit.traces.back().constraint_residual;
  }
  write_text(dir / "fit.json", summary.dump(2) + "\n");
  m.outputs.push_back((dir / "fit.json").string());
  finish_manifest(m, ctx, start, dir / "manifest.json");
  ctx.out << "fit: " << fit.iterations_run << " iterations (" << to_string(fit.stop_reason) << ")";
  if (!fit.traces.empty()) ctx.out << ", data_loss=" << fit.traces.back().data_loss;
  ctx.out << "\n";
  return code;
}

// --- predict ----------------------------------------------------------------

struct PredictArgs {
  std::string field;
  std::vector<double> x0;
  double t0 = 0.0;
  double horizon = 0.0;
  double h = 0.1;
  std::string out;
};

int cmd_predict(const PredictArgs& a, const Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  const VectorField f = field_from_json(read_json(a.field));
  const Vector x0 = parse_vector(a.x0);
  if (x0.size() != f.dim()) throw ConfigError("--x0 needs " + std::to_string(f.dim()) + " values");
  Trajectory tr = predict(f, x0, a.t0, a.horizon, a.h);
  tr.id = "0";
  Dataset ds;
  ds.dim = f.dim();
  ds.trajectories.push_back(tr);
  write_text(a.out, format_dataset(ds));
  RunManifest m;
  m.command = "predict";
  m.config_hash = config_hash({{"x0", a.x0}, {"t0", a.t0}, {"horizon", a.horizon}, {"h", a.h}});
  m.inputs = {a.field};
  m.outputs = {a.out};
  finish_manifest(m, ctx, start, a.out + ".manifest.json");
  ctx.out << "wrote " << tr.size() << " points to " << a.out << "\n";
  return kExitOk;
}

// --- benchmark --------------------------------------------------------------

struct BenchmarkArgs {
  std::string protocol = "fhn";
  std::vector<double> sigmas;
  int replicates = 5;
  int n_train = 0;
  int n_test = 0;
  int n_obs = 0;
  double dt = 0.0;
  int substeps = 0;
  int dim = 6;
  double forcing = 8.0;
  double err_horizon = 0.0;
  bool record_runtime = false;
  std::string out;
  SolverFlags solver;
};

int cmd_benchmark(const BenchmarkArgs& a, const CLI::App* app, const Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  BenchmarkProtocol p = a.protocol == "lorenz96" ? BenchmarkProtocol::lorenz96(a.dim, a.forcing)
                                                 : BenchmarkProtocol::by_name(a.protocol);
  if (!a.sigmas.empty()) p.sigmas = a.sigmas;
  if (app->count("--n-train")) p.n_train = a.n_train;
  if (app->count("--n-test")) p.n_test = a.n_test;
  if (app->count("--n-obs")) p.n_obs = a.n_obs;
  if (app->count("--dt")) p.dt_obs = a.dt;
  if (app->count("--substeps")) p.substeps = a.substeps;
  if (app->count("--err-horizon")) p.err_horizon = a.err_horizon;
  RunManifest m;
  m.command = "benchmark";
  p.solver = a.solver.resolve(app, p.solver, m.inputs);
  const std::uint64_t seed = p.solver.seed;
  const SweepReport report = noise_sweep(p, a.replicates, seed, ctx.threads);

  const fs::path dir(a.out);
  nlohmann::json j = sweep_to_json(report);
  j["solver"] = config_to_json(p.solver);
  write_text(dir / "sweep.json", j.dump(2) + "\n");
  write_text(dir / "sweep.csv", sweep_to_csv(report, !a.record_runtime));
  m.config_hash = config_hash({{"solver", config_to_json(p.solver)},
                               {"protocol", p.system},
                               {"sigmas", p.sigmas},
                               {"replicates", a.replicates}});
  m.seed = seed;
  m.outputs = {(dir / "sweep.json").string(), (dir / "sweep.csv").string()};
  finish_manifest(m, ctx, start, dir / "manifest.json");
  for (const auto& s : report.summary) {
    ctx.out << "sigma=" << s.sigma << " err=" << s.mean << " sem=" << s.sem << " ok=" << s.n_ok << "\n";
  }
  return kExitOk;
}

// --- convergence ------------------------------------------------------------

struct ConvergenceArgs {
  ConvergenceConfig config;
  std::string out;
  SolverFlags solver;
};

int cmd_convergence(ConvergenceArgs a, const CLI::App* app, const Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  RunManifest m;
  m.command = "convergence";
  a.config.solver = a.solver.resolve(app, a.config.solver, m.inputs);
  a.config.seed = a.config.solver.seed;
  const ConvergenceReport report = convergence_experiment(a.config, ctx.threads);
  const fs::path dir(a.out);
  write_text(dir / "convergence.json", convergence_to_json(report).dump(2) + "\n");
  write_text(dir / "convergence.csv", convergence_to_csv(report));
  m.config_hash = config_hash({{"solver", config_to_json(a.config.solver)},
                               {"n_features", a.config.n_features},
                               {"replicates", a.config.replicates},
                               {"sigma", a.config.sigma},
                               {"full_m", a.config.full_m},
                               {"min_m", a.config.min_m},
                               {"horizon", a.config.horizon}});
  m.seed = a.config.seed;
  m.outputs = {(dir / "convergence.json").string(), (dir / "convergence.csv").string()};
  finish_manifest(m, ctx, start, dir / "manifest.json");
  ctx.out << "slope=" << report.slope << " intercept=" << report.intercept << "\n";
  return kExitOk;
}

}  // namespace

nlohmann::json manifest_to_json(const RunManifest& manifest) {
  return {{"command", manifest.command},   {"config_hash", manifest.config_hash}, {"seed", manifest.seed},
          {"inputs", manifest.inputs},     {"outputs", manifest.outputs},         {"wall_clock_s", manifest.wall_clock_s},
          {"version", manifest.version},   {"argv", manifest.argv}};
}

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kernel vector-field fitting for trajectory data", "rkhs-ode"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", kArtifactVersion);
  int threads = default_threads();
  app.add_option("--threads", threads, "Worker threads (default: RKHS_ODE_THREADS or 1)")->check(CLI::PositiveNumber);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate a reference system and write a dataset CSV");
  s->add_option("--system", sim.system, "fhn | lorenz63 | lorenz96 | harmonic")->capture_default_str();
  s->add_option("--n-traj", sim.n_traj, "Number of trajectories")->capture_default_str();
  s->add_option("--n-obs", sim.n_obs, "Observations per trajectory")->capture_default_str();
  s->add_option("--dt", sim.dt, "Observation spacing")->capture_default_str();
  s->add_option("--t0", sim.t0, "First observation time")->capture_default_str();
  s->add_option("--substeps", sim.substeps, "Euler steps per observation interval")->capture_default_str();
  s->add_option("--sigma", sim.sigma, "Observation noise standard deviation")->capture_default_str();
  s->add_option("--seed", sim.seed, "Noise seed")->capture_default_str();
  s->add_option("--ic-seed", sim.ic_seed, "Initial-condition seed")->capture_default_str();
  s->add_option("--dim", sim.dim, "Dimension (lorenz96)")->capture_default_str();
  s->add_option("--forcing", sim.forcing, "Forcing F (lorenz96)")->capture_default_str();
  s->add_option("--ic-low", sim.ic_low, "Lower corner of the initial-condition box")->delimiter(',');
  s->add_option("--ic-high", sim.ic_high, "Upper corner of the initial-condition box")->delimiter(',');
  s->add_option("--out", sim.out, "Output CSV")->required();
  s->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit a vector field to a dataset CSV");
  f->add_option("--data", fit.data, "Dataset CSV")->required();
  f->add_option("--out", fit.out, "Output directory")->required();
  f->add_option("--horizon", fit.horizon, "Maximum time T (default: last observation)");
  f->add_option("--validate", fit.validate, "Grid-search (lambda, rho) on this held-out fraction first");
  f->add_option("--lambdas", fit.lambdas, "Lambda grid for --validate")->delimiter(',');
  f->add_option("--rhos", fit.rhos, "Rho grid for --validate")->delimiter(',');
  f->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  fit.solver.attach(f);

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "Euler prediction with a fitted field");
  p->add_option("--field", pred.field, "Field JSON")->required();
  p->add_option("--x0", pred.x0, "Initial state")->delimiter(',')->required();
  p->add_option("--t0", pred.t0, "Initial time")->capture_default_str();
  p->add_option("--horizon", pred.horizon, "Prediction horizon")->required();
  p->add_option("--h", pred.h, "Euler step")->capture_default_str();
  p->add_option("--out", pred.out, "Output CSV")->required();

  BenchmarkArgs bench;
  auto* b = app.add_subcommand("benchmark", "Noise sweep on a reference protocol");
  b->add_option("--protocol", bench.protocol, "fhn | lorenz63 | lorenz96")->capture_default_str();
  b->add_option("--sigmas", bench.sigmas, "Noise levels")->delimiter(',');
  b->add_option("--replicates", bench.replicates, "Noise replicates per level")->capture_default_str();
  b->add_option("--n-train", bench.n_train, "Training trajectories");
  b->add_option("--n-test", bench.n_test, "Test trajectories");
  b->add_option("--n-obs", bench.n_obs, "Observations per trajectory");
  b->add_option("--dt", bench.dt, "Observation spacing");
  b->add_option("--substeps", bench.substeps, "Euler steps per observation interval");
  b->add_option("--dim", bench.dim, "Dimension (lorenz96)")->capture_default_str();
  b->add_option("--forcing", bench.forcing, "Forcing F (lorenz96)")->capture_default_str();
  b->add_option("--err-horizon", bench.err_horizon, "Measure Err over the first this many time units");
  b->add_flag("--record-runtime", bench.record_runtime, "Write measured runtimes into the CSV");
  b->add_option("--out", bench.out, "Output directory")->required();
  b->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  bench.solver.attach(b);

  ConvergenceArgs conv;
  auto* c = app.add_subcommand("convergence", "Error decay with the number of samples");
  c->add_option("--n-features", conv.config.n_features, "Random features of the ground-truth field")->capture_default_str();
  c->add_option("--replicates", conv.config.replicates, "Noisy copies")->capture_default_str();
  c->add_option("--sigma", conv.config.sigma, "Noise standard deviation")->capture_default_str();
  c->add_option("--full-m", conv.config.full_m, "Largest sample count")->capture_default_str();
  c->add_option("--min-m", conv.config.min_m, "Smallest sample count")->capture_default_str();
  c->add_option("--horizon", conv.config.horizon, "Observation window length")->capture_default_str();
  c->add_option("--x0", conv.config.x0, "Initial state")->capture_default_str();
  c->add_option("--lengthscale", conv.config.lengthscale, "Feature lengthscale")->capture_default_str();
  c->add_option("--out", conv.out, "Output directory")->required();
  c->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  conv.solver.attach(c);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  Context ctx{out, err, args, threads};
  try {
    if (*s) return cmd_simulate(sim, ctx);
    if (*f) return cmd_fit(fit, f, ctx);
    if (*p) return cmd_predict(pred, ctx);
    if (*b) return cmd_benchmark(bench, b, ctx);
    if (*c) return cmd_convergence(conv, c, ctx);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UnsupportedError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace rkhs_ode
