// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Pass criterion numbers as arguments to run a subset.

#include "rkhs_ode/cli.hpp"
#include "rkhs_ode/eval.hpp"
#include "rkhs_ode/kernels.hpp"
#include "rkhs_ode/solver.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace rkhs_ode;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const fs::path kWork = fs::temp_directory_path() / "rkhs_ode_acceptance";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

int cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::cerr << "rkhs-ode exited with " << code << ": " << err.str();
  return code;
}

// --- pipelines for criteria 1-3 (shared with the determinism rerun) ---------

std::vector<std::string> convergence_args(const fs::path& out) {
  return {"convergence", "--n-features", "200", "--replicates", "10", "--sigma", "0.05", "--full-m", "5120",
          "--min-m", "5", "--gamma0", "1000", "--rho", "0.5", "--lambda", "1e-6", "--early-stop-eps", "1e-6",
          "--max-iters", "40", "--out", out.string(), "--threads", "1"};
}

std::vector<std::string> fhn_args(const fs::path& out) {
  return {"benchmark", "--protocol", "fhn", "--sigmas", "0.12,0.61,1.10", "--replicates", "2", "--n-test", "10",
          "--out", out.string(), "--threads", "1"};
}

std::vector<std::string> lorenz_args(const fs::path& out) {
  return {"benchmark", "--protocol", "lorenz63", "--sigmas", "0.5", "--replicates", "1", "--gamma0", "1000",
          "--rho", "0.5", "--early-stop-eps", "1e-4", "--max-iters", "40", "--out", out.string(), "--threads", "1"};
}

std::map<std::string, fs::path> g_first_run;

Outcome criterion1() {
  const fs::path out = kWork / "c1";
  if (cli(convergence_args(out)) != 0) return {false, "convergence command failed"};
  g_first_run["convergence.csv"] = out / "convergence.csv";
  const auto j = nlohmann::json::parse(slurp(out / "convergence.json"));
  if (j.at("slope").is_null()) return {false, "slope undefined"};
  const double slope = j.at("slope").get<double>();
  return {slope >= -1.1 && slope <= -0.5,
          "slope " + fmt(slope) + " (target [-1.1, -0.5]), flagged fits " + std::to_string(j.at("flags").size())};
}

Outcome criterion2() {
  const fs::path out = kWork / "c2";
  if (cli(fhn_args(out)) != 0) return {false, "benchmark command failed"};
  g_first_run["fhn_sweep.csv"] = out / "sweep.csv";
  const auto j = nlohmann::json::parse(slurp(out / "sweep.json"));
  std::vector<double> means;
  std::string detail = "mean Err";
  for (const auto& s : j.at("summary")) {
    means.push_back(s.at("mean").is_null() ? std::nan("") : s.at("mean").get<double>());
    detail += " " + fmt(means.back());
  }
  bool increasing = means.size() == 3;
  for (std::size_t i = 1; i < means.size(); ++i) increasing = increasing && means[i] > means[i - 1];
  return {increasing, detail + " at sigma 0.12, 0.61, 1.10"};
}

Outcome criterion3() {
  const fs::path out = kWork / "c3";
  if (cli(lorenz_args(out)) != 0) return {false, "benchmark command failed"};
  g_first_run["lorenz_sweep.csv"] = out / "sweep.csv";
  const auto j = nlohmann::json::parse(slurp(out / "sweep.json"));
  const auto& cell = j.at("cells").at(0);
  if (cell.at("diverged").get<bool>()) return {false, "fit diverged"};
  const auto err = cell.at("err").get<std::vector<double>>();
  const auto base = cell.at("baseline_err").get<std::vector<double>>();
  int wins = 0;
  for (std::size_t i = 0; i < err.size(); ++i) wins += err[i] <= 0.8 * base[i] ? 1 : 0;
  const double frac = static_cast<double>(wins) / static_cast<double>(err.size());
  return {frac >= 0.7, std::to_string(wins) + "/" + std::to_string(err.size()) +
                           " test trajectories beat the constant predictor by >= 20% (mean Err " +
                           fmt(cell.at("err_mean").get<double>()) + " vs " +
                           fmt(cell.at("baseline_mean").get<double>()) + ")"};
}

// --- criterion 4: solver steps against dense oracles -------------------------

Outcome criterion4() {
  oracle::Gen g(4);
  double worst_z = 0.0;
  double worst_f = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = g.integer(1, 3);
    VectorField field;
    std::function<Vector(const Vector&)> fx;
    std::function<Matrix(const Vector&)> jx;
    if (d == 1) {
      const Matrix m = g.mat(1, 1);
      field = VectorField::linear(m);
      fx = [m](const Vector& x) { return Vector(m * x); };
      jx = [m](const Vector&) { return m; };
    } else if (d == 2) {
      field = VectorField::fhn();
      fx = oracle::fhn;
      jx = oracle::fhn_jacobian;
    } else {
      field = VectorField::lorenz63();
      fx = oracle::lorenz63;
      jx = oracle::lorenz63_jacobian;
    }
    TimeGrid grid;
    grid.h = g.uniform(0.005, 0.05);
    grid.k = g.integer(1, 10);
    ObservationTerm obs;
    const int m = g.integer(1, grid.k + 2);
    for (int j = 0; j < m; ++j) obs.node.push_back(j == 0 ? 0 : g.integer(0, grid.k));
    std::sort(obs.node.begin(), obs.node.end());
    obs.values = g.mat(d, m, 2.0);
    obs.weights = g.vec(m, 0.1, 1.0);
    const Matrix z_prev = g.mat(d, grid.k + 1, 2.0);
    const double gamma = std::pow(10.0, g.uniform(-1, 3));

    std::vector<Matrix> b;
    Matrix c(d, grid.k);
    for (int l = 0; l < grid.k; ++l) {
      const Vector zl = z_prev.col(l);
      b.push_back(Matrix::Identity(d, d) + grid.h * jx(zl));
      c.col(l) = grid.h * (fx(zl) - jx(zl) * zl);
    }
    const Matrix z_ref = oracle::dense_z_minimizer(obs.node, obs.values, obs.weights, b, c, gamma / grid.k,
                                                   grid.nodes());
    const Matrix z = z_step(z_prev, field, gamma, grid, obs);
    worst_z = std::max(worst_z, (z - z_ref).cwiseAbs().maxCoeff());

    const double lambda = std::pow(10.0, g.uniform(-4, -1));
    const double ls = g.uniform(0.5, 2.0);
    const Matrix a = g.mat(d, d);
    const MatrixKernelSpec mk{ScalarKernelSpec::gaussian_lengthscales(Vector::Constant(d, ls)),
                              a * a.transpose() + 0.5 * Matrix::Identity(d, d)};
    const Matrix lat = g.mat(d, grid.k + 1);
    const Matrix centers = lat.leftCols(grid.k);
    Matrix u(d, grid.k);
    for (int l = 0; l < grid.k; ++l) u.col(l) = (lat.col(l + 1) - lat.col(l)) / grid.h - fx(lat.col(l));
    const Vector cw = Vector::Constant(grid.k, gamma * grid.h * grid.h / grid.k);
    const Matrix w_ref = oracle::dense_representer_weights(oracle::gaussian_gram(centers, ls), mk.mix, u, cw, lambda);
    const VectorField f = f_step({lat}, {grid}, gamma, lambda, field, mk);
    Matrix probes(d, grid.k + 10);
    probes << centers, g.mat(d, 10);
    const Matrix expected = mk.mix * w_ref * oracle::gaussian_cross_gram(centers, probes, ls);
    for (Eigen::Index q = 0; q < probes.cols(); ++q) {
      const Vector x = probes.col(q);
      worst_f = std::max(worst_f, (eval_field(f, x) - fx(x) - expected.col(q)).cwiseAbs().maxCoeff());
    }
  }
  return {worst_z <= 1e-8 && worst_f <= 1e-8,
          "max abs deviation z-step " + fmt(worst_z) + ", f-step " + fmt(worst_f) + " (limit 1e-8)"};
}

// --- criterion 5: Euler order ------------------------------------------------

Outcome criterion5() {
  const Vector x0 = Vector::Zero(2);
  auto rhs = [](const Vector& x, double) { return oracle::fhn(x); };
  const Vector ref = oracle::euler(rhs, x0, 0.0, 1e-5, 100000).col(100000);
  const double e1 = (euler_integrate(VectorField::fhn(), x0, 0.0, 1e-2, 100).col(100) - ref).norm();
  const double e2 = (euler_integrate(VectorField::fhn(), x0, 0.0, 5e-3, 200).col(200) - ref).norm();
  const double ratio = e2 / e1;
  return {ratio >= 0.4 && ratio <= 0.6, "error ratio " + fmt(ratio) + " (target [0.4, 0.6])"};
}

// --- criterion 6: Jacobians --------------------------------------------------

Outcome criterion6() {
  oracle::Gen g(6);
  const int d = 3;
  const VectorField explicit_field(
      ExplicitField{FeatureMapSpec::sample(100, d, Vector::Constant(d, 1.2), 17), g.mat(100, d)});
  const Matrix a = g.mat(d, d);
  const VectorField representer(
      RepresenterField{MatrixKernelSpec{ScalarKernelSpec::gaussian_lengthscales(Vector::Constant(d, 0.9)),
                                        a * a.transpose() + Matrix::Identity(d, d)},
                       g.mat(d, 20), g.mat(d, 20), false});
  double worst = 0.0;
  for (const VectorField* f : {&explicit_field, &representer}) {
    for (int i = 0; i < 100; ++i) {
      const Vector x = g.vec(d, -2, 2);
      const Matrix fd = oracle::fd_jacobian([&](const Vector& y) { return eval_field(*f, y); }, x);
      const Matrix an = field_jacobian(*f, x);
      worst = std::max(worst, (an - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1e-300));
    }
  }
  return {worst <= 1e-5, "max relative error " + fmt(worst) + " (limit 1e-5)"};
}

// --- criterion 7: Lipschitz checker ------------------------------------------

Outcome criterion7() {
  std::string detail;
  bool ok = true;
  auto check = [&](ScalarKernelSpec s, bool expect) {
    const LipschitzReport r = check_lipschitz(MatrixKernelSpec::identity(s, 1), 2);
    ok = ok && r.pass == expect;
    detail += to_string(s.family) + (r.pass ? " pass" : " fail") + (r.pass == expect ? "" : " (unexpected)") + "; ";
  };
  ScalarKernelSpec s;
  s.family = KernelFamily::gaussian;
  check(s, true);
  s.family = KernelFamily::linear;
  check(s, true);
  s.family = KernelFamily::rational_quadratic;
  check(s, true);
  s.family = KernelFamily::sinc;
  check(s, true);
  s.family = KernelFamily::polynomial;
  s.degree = 2;
  check(s, false);
  return {ok, detail};
}

// --- criterion 8: penalty enforcement ------------------------------------------

Outcome criterion8() {
  const fs::path out = kWork / "c8";
  if (cli({"simulate", "--system", "fhn", "--n-traj", "50", "--n-obs", "201", "--dt", "0.1", "--sigma", "0.12",
           "--seed", "8", "--out", (out / "train.csv").string()}) != 0) {
    return {false, "simulate failed"};
  }
  if (cli({"fit", "--data", (out / "train.csv").string(), "--out", (out / "fit").string(), "--threads", "1"}) != 0) {
    return {false, "fit failed"};
  }
  const auto cfg = nlohmann::json::parse(slurp(out / "fit" / "config.json"));
  const double gamma0 = cfg.at("gamma0");
  const double rho = cfg.at("rho");
  const double gamma_max = cfg.at("gamma_max");
  std::vector<std::vector<double>> rows;
  {
    std::istringstream in(slurp(out / "fit" / "traces.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::vector<double> row;
      std::istringstream cells(line);
      std::string cell;
      while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
      rows.push_back(row);
    }
  }
  if (rows.empty()) return {false, "no iterations recorded"};
  const double first = rows.front()[2];
  const double last = rows.back()[2];
  double gamma = gamma0;
  bool exact = true;
  for (const auto& row : rows) {
    exact = exact && row[3] == gamma;
    gamma = std::min(gamma * (1.0 + rho), gamma_max);
  }
  return {last <= 0.1 * first && exact, "constraint residual " + fmt(first) + " -> " + fmt(last) + " over " +
                                            std::to_string(rows.size()) + " iterations; gamma trace " +
                                            (exact ? "exact" : "MISMATCH")};
}

// --- criterion 9: realizable self-consistency --------------------------------

Outcome criterion9() {
  oracle::Gen g(9);
  const int d = 2;
  const FeatureMapSpec features = FeatureMapSpec::sample(100, d, Vector::Constant(d, 1.5), 99);
  const VectorField truth(ExplicitField{features, g.mat(100, d, 0.15)});
  Matrix ics(d, 5);
  for (int i = 0; i < 5; ++i) ics.col(i) = g.vec(d, -1, 1);
  const double dt = 0.05;
  const int n_obs = 81;
  const Dataset data = simulate_dataset(truth, ics, 0.0, dt, n_obs, 10);
  SolverConfig cfg;
  cfg.h = dt;
  cfg.kernel = features;
  cfg.lambda = 1e-8;
  cfg.gamma0 = 10.0;
  cfg.rho = 0.3;
  cfg.max_iters = 200;
  cfg.early_stop_eps = 1e-6;
  const FitResult fit = penalty_fit(data, cfg);
  const double loss = fit.traces.empty() ? std::nan("") : fit.traces.back().data_loss;
  double worst = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Trajectory& obs = data.trajectories[i];
    const double t_end = obs.times(obs.size() - 1);
    Trajectory fine;
    const int steps = (n_obs - 1) * 100;
    fine.values = euler_integrate(truth, obs.values.col(0), 0.0, t_end / steps, steps);
    fine.times = Vector::LinSpaced(steps + 1, 0.0, t_end);
    const Trajectory xhat = predict(fit.field, fit.latents[i].col(0), 0.0, t_end, cfg.h);
    worst = std::max(worst, l2_sq_distance(xhat, fine, 0.0, t_end) / t_end);
  }
  return {loss <= 1e-4 && worst <= 1e-3, "final data loss " + fmt(loss) + " (limit 1e-4), worst L2^2 per unit time " +
                                             fmt(worst) + " (limit 1e-3)"};
}

// --- criterion 10: determinism -----------------------------------------------

Outcome criterion10() {
  std::string detail;
  bool ok = true;
  auto compare = [&](const std::string& name, const std::vector<std::string>& args, const fs::path& second) {
    if (!g_first_run.count(name)) {
      fs::path first_dir = kWork / ("c10_first_" + name);
      std::vector<std::string> a = args;
      a[std::find(a.begin(), a.end(), "--out") - a.begin() + 1] = first_dir.string();
      if (cli(a) != 0) {
        ok = false;
        detail += name + " failed; ";
        return;
      }
      g_first_run[name] = first_dir / second.filename();
    }
    if (cli(args) != 0) {
      ok = false;
      detail += name + " rerun failed; ";
      return;
    }
    const bool same = slurp(g_first_run[name]) == slurp(second) && !slurp(second).empty();
    ok = ok && same;
    detail += name + (same ? " identical; " : " DIFFERS; ");
  };
  const fs::path c1 = kWork / "c10_conv";
  const fs::path c2 = kWork / "c10_fhn";
  const fs::path c3 = kWork / "c10_lorenz";
  compare("convergence.csv", convergence_args(c1), c1 / "convergence.csv");
  compare("fhn_sweep.csv", fhn_args(c2), c2 / "sweep.csv");
  compare("lorenz_sweep.csv", lorenz_args(c3), c3 / "sweep.csv");
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  set_warning_handler({});
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  const std::vector<Outcome (*)()> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                            criterion6, criterion7, criterion8, criterion9, criterion10};
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(n)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail << " [" << fmt(secs)
              << " s]" << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
