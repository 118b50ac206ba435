#include "rkhs_ode/eval.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace rkhs_ode;

namespace {

Trajectory curve(std::vector<double> t, std::vector<double> y) {
  Trajectory tr;
  tr.id = "c";
  tr.times = Eigen::Map<Vector>(t.data(), static_cast<Eigen::Index>(t.size()));
  tr.values = Eigen::Map<Matrix>(y.data(), 1, static_cast<Eigen::Index>(y.size()));
  return tr;
}

double lerp_at(const Trajectory& c, double t) {
  const Eigen::Index m = c.size();
  if (t <= c.times(0)) return c.values(0, 0);
  if (t >= c.times(m - 1)) return c.values(0, m - 1);
  Eigen::Index i = 0;
  while (c.times(i + 1) < t) ++i;
  const double a = (t - c.times(i)) / (c.times(i + 1) - c.times(i));
  return (1 - a) * c.values(0, i) + a * c.values(0, i + 1);
}

/// Simpson's rule on every segment of the union grid: exact for the
/// piecewise-quadratic integrand.
double simpson_l2(const Trajectory& a, const Trajectory& b, double t0, double t1) {
  std::vector<double> nodes{t0, t1};
  for (const Trajectory* c : {&a, &b})
    for (Eigen::Index i = 0; i < c->size(); ++i)
      if (c->times(i) > t0 && c->times(i) < t1) nodes.push_back(c->times(i));
  std::sort(nodes.begin(), nodes.end());
  double sum = 0;
  for (std::size_t q = 0; q + 1 < nodes.size(); ++q) {
    const double l = nodes[q], r = nodes[q + 1], mid = 0.5 * (l + r);
    auto e2 = [&](double t) { return std::pow(lerp_at(a, t) - lerp_at(b, t), 2); };
    sum += (r - l) / 6.0 * (e2(l) + 4 * e2(mid) + e2(r));
  }
  return sum;
}

BenchmarkProtocol tiny_fhn() {
  BenchmarkProtocol p = BenchmarkProtocol::fhn();
  p.n_train = 3;
  p.n_test = 3;
  p.n_obs = 21;
  p.substeps = 10;
  p.sigmas = {0.0};
  p.solver.max_iters = 3;
  p.solver.kernel = default_kernel(1);
  std::get<FeatureMapSpec>(p.solver.kernel).n_features = 30;
  return p;
}

}  // namespace

TEST(ErrMetric, Examples) {
  const Trajectory t = curve({0, 1}, {0, 0});
  EXPECT_EQ(err_metric(t, t), 0.0);
  EXPECT_DOUBLE_EQ(err_metric(curve({0, 1}, {0, 3}), t), 3.0);
  const double base = err_metric(curve({0, 1, 3}, {0, 1, 2}), curve({0, 1, 3}, {0, 0, 0}));
  const double doubled = err_metric(curve({0, 2, 6}, {0, 1, 2}), curve({0, 2, 6}, {0, 0, 0}));
  EXPECT_NEAR(doubled, std::sqrt(2.0) * base, 1e-14);
}

TEST(ErrMetric, Errors) {
  EXPECT_THROW(err_metric(curve({0, 1}, {0, 0}), curve({0, 2}, {0, 0})), UsageError);
  EXPECT_THROW(err_metric(curve({0}, {0}), curve({0}, {0})), UsageError);
}

TEST(ErrMetric, HomogeneousAndZeroIffEqualProperty) {
  oracle::Gen g(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = g.integer(2, 20);
    const int d = g.integer(1, 3);
    Vector t(n);
    double s = 0;
    for (int i = 0; i < n; ++i) t(i) = s += g.uniform(0.01, 1);
    const Matrix truth = g.mat(d, n);
    const Matrix r = g.mat(d, n);
    const double a = g.uniform(0.1, 10);
    EXPECT_EQ(err_metric(t, truth, truth), 0.0);
    const double e1 = err_metric(t, truth + r, truth);
    EXPECT_NEAR(err_metric(t, truth + a * r, truth), a * e1, 1e-12 * (1 + a * e1));
    EXPECT_GE(e1, 0.0);
  }
}

TEST(L2Distance, Examples) {
  const Trajectory one = curve({0, 2}, {1, 1});
  const Trajectory zero = curve({0, 2}, {0, 0});
  EXPECT_EQ(l2_sq_distance(one, one, 0, 2), 0.0);
  EXPECT_NEAR(l2_sq_distance(one, zero, 0, 2), 2.0, 1e-15);
  std::vector<double> t(1000), y(1000);
  for (int i = 0; i < 1000; ++i) t[i] = y[i] = i / 999.0;
  EXPECT_NEAR(l2_sq_distance(curve(t, y), curve({0, 1}, {0, 0}), 0, 1), 1.0 / 3.0, 1e-6);
}

TEST(L2Distance, CoverageGap) {
  EXPECT_THROW(l2_sq_distance(curve({0.5, 2}, {0, 0}), curve({0, 2}, {0, 0}), 0, 2), UsageError);
}

TEST(L2Distance, MatchesSimpsonOracleProperty) {
  oracle::Gen g(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto random_curve = [&](int n) {
      std::vector<double> t{0.0}, y{g.normal()};
      for (int i = 1; i < n; ++i) {
        t.push_back(t.back() + g.uniform(0.01, 0.5));
        y.push_back(g.normal());
      }
      return curve(t, y);
    };
    const Trajectory a = random_curve(g.integer(2, 15));
    const Trajectory b = random_curve(g.integer(2, 15));
    const double t1 = std::min(a.times(a.size() - 1), b.times(b.size() - 1)) * g.uniform(0.3, 1.0);
    const double t0 = t1 * g.uniform(0.0, 0.5);
    EXPECT_NEAR(l2_sq_distance(a, b, t0, t1), simpson_l2(a, b, t0, t1), 1e-10);
  }
}

TEST(ConstraintResidual, Examples) {
  const VectorField f = VectorField::fhn();
  const Matrix z = euler_integrate(f, Vector::Ones(2), 0.0, 0.1, 20);
  EXPECT_LE(constraint_residual(z, f, 0.1), 1e-20);
  EXPECT_EQ(constraint_residual(Matrix::Ones(2, 5), VectorField::zero(2), 0.3), 0.0);
  Matrix step(1, 2);
  step << 0, 1;
  EXPECT_DOUBLE_EQ(constraint_residual(step, VectorField::zero(1), 0.7), 1.0);
}

TEST(ConstraintResidual, AveragesOverTrajectories) {
  Matrix a(1, 2), b(1, 3);
  a << 0, 1;
  b << 0, 0, 2;
  TimeGrid ga, gb;
  ga.h = gb.h = 0.1;
  ga.k = 1;
  gb.k = 2;
  EXPECT_DOUBLE_EQ(constraint_residual({a, b}, VectorField::zero(1), {ga, gb}), (1.0 + 4.0 / 2.0) / 2.0);
}

TEST(PredictionErr, ExactFieldAndWindow) {
  const VectorField f = VectorField::fhn();
  Dataset ds = simulate_dataset(f, Vector::Ones(2), 0.0, 0.1, 11, 1);
  EXPECT_LE(prediction_err(f, ds.trajectories[0], 0.1), 1e-12);
  const double full = prediction_err(VectorField::zero(2), ds.trajectories[0], 0.1);
  const double head = prediction_err(VectorField::zero(2), ds.trajectories[0], 0.1, 0.3);
  EXPECT_GT(full, head);
  const double by_hand = err_metric(ds.trajectories[0].times.head(4), Matrix(Vector::Ones(2).replicate(1, 4)),
                                    ds.trajectories[0].values.leftCols(4));
  EXPECT_NEAR(head, by_hand, 1e-14);
}

TEST(MeanSem, Values) {
  auto [m, s] = mean_sem({2.0});
  EXPECT_EQ(m, 2.0);
  EXPECT_EQ(s, 0.0);
  std::tie(m, s) = mean_sem({1.0, 3.0});
  EXPECT_EQ(m, 2.0);
  EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(FitLoglog, TwoPointsAndPowerLaw) {
  const LineFit two = fit_loglog({10, 40}, {3, 0.5});
  EXPECT_NEAR(two.slope, (std::log(0.5) - std::log(3)) / (std::log(40) - std::log(10)), 1e-12);
  std::vector<double> x, y;
  for (double m = 5; m <= 5120; m *= 2) {
    x.push_back(m);
    y.push_back(7.0 * std::pow(m, -0.8));
  }
  const LineFit f = fit_loglog(x, y);
  EXPECT_NEAR(f.slope, -0.8, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 7.0, 1e-10);
  EXPECT_THROW(fit_loglog({1, 1}, {2, 3}), UsageError);
}

TEST(Protocols, DefaultTopologies) {
  const BenchmarkProtocol f = BenchmarkProtocol::fhn();
  EXPECT_EQ(f.n_train, 50);
  EXPECT_EQ(f.n_obs, 201);
  EXPECT_EQ(f.sigmas, (std::vector<double>{0.120, 0.365, 0.610, 0.855, 1.100}));
  const BenchmarkProtocol l = BenchmarkProtocol::lorenz63();
  EXPECT_EQ(l.dt_obs, 0.01);
  EXPECT_EQ(*l.err_horizon, 0.2);
  EXPECT_EQ(l.sigmas.front(), 0.5);
  EXPECT_EQ(BenchmarkProtocol::by_name("lorenz96").dim, 6);
  EXPECT_THROW(BenchmarkProtocol::by_name("x"), ConfigError);
}

TEST(NoiseSweep, SingleCellZeroSigma) {
  const SweepReport r = noise_sweep(tiny_fhn(), 1, 3);
  ASSERT_EQ(r.cells.size(), 1u);
  ASSERT_EQ(r.summary.size(), 1u);
  EXPECT_EQ(r.summary[0].sem, 0.0);
  EXPECT_FALSE(r.cells[0].diverged);
  EXPECT_EQ(r.cells[0].err.err.size(), 3u);
  EXPECT_TRUE(std::isfinite(r.summary[0].mean));
  const std::string csv = sweep_to_csv(r, true);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "system,sigma,replicate,err_mean,err_sem,runtime_s");
  EXPECT_EQ(csv.substr(csv.rfind(',') + 1), "0\n");
  EXPECT_EQ(sweep_to_json(r).at("cells").size(), 1u);
}

TEST(NoiseSweep, DeterministicAcrossRunsAndThreads) {
  BenchmarkProtocol p = tiny_fhn();
  p.sigmas = {0.1, 0.5};
  const std::string a = sweep_to_csv(noise_sweep(p, 2, 7, 1), true);
  const std::string b = sweep_to_csv(noise_sweep(p, 2, 7, 1), true);
  const std::string c = sweep_to_csv(noise_sweep(p, 2, 7, 3), true);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Convergence, SmallRunShape) {
  ConvergenceConfig c;
  c.n_features = 20;
  c.replicates = 2;
  c.full_m = 40;
  c.min_m = 10;
  c.solver.max_iters = 10;
  const ConvergenceReport r = convergence_experiment(c);
  EXPECT_EQ(r.sample_counts, (std::vector<int>{10, 20, 40}));
  for (double v : r.mean_l2_sq) EXPECT_GT(v, 0.0);
  EXPECT_TRUE(std::isfinite(r.slope));
  EXPECT_EQ(convergence_to_csv(r).substr(0, 17), "m,mean_l2_sq,n_ok");
  c.full_m = 30;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Convergence, TruthIsSeeded) {
  ConvergenceConfig c;
  c.n_features = 10;
  const Vector x = Vector::Constant(1, 0.3);
  EXPECT_EQ(eval_field(convergence_truth(c), x), eval_field(convergence_truth(c), x));
  ConvergenceConfig other = c;
  other.seed = 1;
  EXPECT_NE(eval_field(convergence_truth(c), x), eval_field(convergence_truth(other), x));
}

TEST(GridSearch, PicksFromTable) {
  oracle::Gen g(4);
  Matrix ics(2, 5);
  for (int i = 0; i < 5; ++i) ics.col(i) = g.vec(2, -2, 2);
  const Dataset ds = add_noise(simulate_dataset(VectorField::fhn(), ics, 0.0, 0.1, 21, 10), 0.05, 1);
  SolverConfig c;
  c.max_iters = 3;
  c.kernel = FeatureMapSpec::sample(20, 2, Vector::Ones(2), 1);
  const GridSearchResult r = grid_search(ds, c, {1e-3, 1e-1}, {0.1, 0.5}, 0.2, 9);
  ASSERT_EQ(r.table.size(), 4u);
  const auto best = std::min_element(r.table.begin(), r.table.end(),
                                     [](const auto& a, const auto& b) { return a.err < b.err; });
  EXPECT_EQ(r.lambda, best->lambda);
  EXPECT_EQ(r.rho, best->rho);
  Dataset single;
  single.dim = 2;
  single.trajectories.push_back(ds.trajectories[0]);
  EXPECT_THROW(grid_search(single, c, {1e-3}, {0.1}, 0.2, 9), ConfigError);
}
