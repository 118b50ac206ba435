#include "rkhs_ode/ode.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rkhs_ode;

namespace {

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

VectorField random_explicit(oracle::Gen& g, int d, int n_features, std::uint64_t seed) {
  ExplicitField e{FeatureMapSpec::sample(n_features, d, Vector::Ones(d), seed), g.mat(n_features, d)};
  return VectorField(e);
}

VectorField random_representer(oracle::Gen& g, int d, int p) {
  Matrix a = g.mat(d, d);
  RepresenterField r{MatrixKernelSpec{ScalarKernelSpec::gaussian_lengthscales(Vector::Constant(d, 0.8)),
                                      a * a.transpose() + Matrix::Identity(d, d)},
                     g.mat(d, p), g.mat(d, p), false};
  return VectorField(r);
}

double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(EvalField, FhnAtOrigin) {
  const Vector f = eval_field(VectorField::fhn(), Vector::Zero(2));
  EXPECT_DOUBLE_EQ(f(0), 1.0);
  EXPECT_NEAR(f(1), 0.056, 1e-15);
}

TEST(EvalField, Lorenz63AtOnes) {
  const Vector f = eval_field(VectorField::lorenz63(), Vector::Ones(3));
  EXPECT_DOUBLE_EQ(f(0), 0.0);
  EXPECT_DOUBLE_EQ(f(1), 26.0);
  EXPECT_NEAR(f(2), -5.0 / 3.0, 1e-15);
}

TEST(EvalField, ZeroWeightRepresenterIsZero) {
  oracle::Gen g(1);
  RepresenterField r{MatrixKernelSpec::identity(ScalarKernelSpec{}, 2), g.mat(2, 5), Matrix::Zero(2, 5), false};
  EXPECT_EQ(eval_field(VectorField(r), v2(0.3, -1)), Vector::Zero(2));
}

TEST(EvalField, BaseFieldIsAdded) {
  oracle::Gen g(2);
  const auto base = std::make_shared<const VectorField>(VectorField::fhn());
  const VectorField own = random_explicit(g, 2, 10, 3);
  const VectorField sum(own.form(), base);
  const Vector x = v2(0.4, -0.2);
  EXPECT_TRUE(eval_field(sum, x).isApprox(eval_field(own, x) + oracle::fhn(x)));
}

TEST(EvalField, ErrorsOnDimensionAndMissingTime) {
  EXPECT_THROW(eval_field(VectorField::fhn(), Vector::Zero(3)), UsageError);
  EXPECT_THROW(eval_field(VectorField::harmonic(), Vector::Zero(2)), UsageError);
  EXPECT_NO_THROW(eval_field(VectorField::harmonic(), Vector::Zero(2), 0.0));
}

TEST(EvalField, HarmonicForcing) {
  const Vector f = eval_field(VectorField::harmonic(), v2(1e-3, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(f(0), 2.0);
  EXPECT_NEAR(f(1), 1.0 - 0.002 - 10.0, 1e-12);
}

TEST(EvalFieldBatch, MatchesPointwise) {
  oracle::Gen g(3);
  for (const VectorField& f : {random_explicit(g, 2, 20, 5), random_representer(g, 2, 6), VectorField::fhn()}) {
    const Matrix states = g.mat(2, 7);
    Matrix values;
    std::vector<Matrix> jac;
    eval_field_batch(f, states, nullptr, values, &jac);
    for (int c = 0; c < 7; ++c) {
      EXPECT_LE((values.col(c) - eval_field(f, states.col(c))).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((jac[c] - field_jacobian(f, states.col(c))).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(FieldJacobian, LinearIsMatrix) {
  oracle::Gen g(4);
  const Matrix m = g.mat(3, 3);
  EXPECT_EQ(field_jacobian(VectorField::linear(m), g.vec(3, -1, 1)), m);
}

TEST(FieldJacobian, FhnAtOrigin) {
  Matrix expect(2, 2);
  expect << 1, -1, 0.08, -0.064;
  EXPECT_LE((field_jacobian(VectorField::fhn(), Vector::Zero(2)) - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(FieldJacobian, AnalyticSystemsMatchFiniteDifferences) {
  oracle::Gen g(5);
  for (const VectorField& f : {VectorField::fhn(), VectorField::lorenz63(), VectorField::lorenz96(6, 8.0)}) {
    for (int i = 0; i < 20; ++i) {
      const Vector x = g.vec(f.dim(), -3, 3);
      const Matrix fd = oracle::fd_jacobian([&](const Vector& y) { return eval_field(f, y); }, x);
      EXPECT_LE(rel_err(field_jacobian(f, x), fd), 1e-6);
    }
  }
}

TEST(FieldJacobian, LearnedFieldsMatchFiniteDifferences) {
  oracle::Gen g(6);
  const VectorField e = random_explicit(g, 3, 50, 8);
  const VectorField r = random_representer(g, 3, 10);
  for (int i = 0; i < 100; ++i) {
    const Vector x = g.vec(3, -2, 2);
    for (const VectorField* f : {&e, &r}) {
      const Matrix fd = oracle::fd_jacobian([&](const Vector& y) { return eval_field(*f, y); }, x);
      EXPECT_LE(rel_err(field_jacobian(*f, x), fd), 1e-5);
    }
  }
}

TEST(FieldJacobian, NonDifferentiableKernelUnsupported) {
  ScalarKernelSpec lap;
  lap.family = KernelFamily::laplacian;
  RepresenterField r{MatrixKernelSpec::identity(lap, 2), Matrix::Zero(2, 1), Matrix::Ones(2, 1), false};
  EXPECT_THROW(field_jacobian(VectorField(r), v2(1, 1)), UnsupportedError);
}

TEST(Euler, ConstantFieldStraightLine) {
  const Matrix z = euler_integrate(VectorField::constant(v2(1, -2)), Vector::Zero(2), 0.0, 0.1, 10);
  ASSERT_EQ(z.cols(), 11);
  for (int l = 0; l <= 10; ++l) EXPECT_LE((z.col(l) - 0.1 * l * v2(1, -2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Euler, CompoundGrowth) {
  const Matrix z = euler_integrate(VectorField::linear(Matrix::Identity(1, 1)), Vector::Ones(1), 0.0, 0.1, 10);
  EXPECT_NEAR(z(0, 10), std::pow(1.1, 10), 1e-12);
  EXPECT_NEAR(z(0, 10), 2.5937, 1e-4);
}

TEST(Euler, ZeroSteps) {
  const Matrix z = euler_integrate(VectorField::fhn(), v2(0.5, 0.5), 0.0, 0.1, 0);
  ASSERT_EQ(z.cols(), 1);
  EXPECT_EQ(z.col(0), v2(0.5, 0.5));
}

TEST(Euler, MatchesHandLoopNonAutonomous) {
  const VectorField f = VectorField::harmonic();
  const Matrix z = euler_integrate(f, v2(0.01, 0), 0.3, 1e-4, 500);
  const Matrix ref = oracle::euler(
      [](const Vector& x, double t) { return v2(x(1), std::cos(t) - 0.001 * x(1) - 10000.0 * x(0)); }, v2(0.01, 0),
      0.3, 1e-4, 500);
  EXPECT_LE((z - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Euler, DivergenceNamesStep) {
  const VectorField f = VectorField::linear(Matrix::Constant(1, 1, 1e300));
  try {
    euler_integrate(f, Vector::Ones(1), 0.0, 1.0, 5);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.index(), 2);
  }
}

TEST(Euler, FirstOrderConvergenceFhn) {
  const VectorField f = VectorField::fhn();
  const Vector x0 = Vector::Zero(2);
  const Vector xr = euler_integrate(f, x0, 0.0, 1e-5, 100000).col(100000);
  const double e1 = (euler_integrate(f, x0, 0.0, 1e-2, 100).col(100) - xr).norm();
  const double e2 = (euler_integrate(f, x0, 0.0, 5e-3, 200).col(200) - xr).norm();
  EXPECT_GE(e2 / e1, 0.4);
  EXPECT_LE(e2 / e1, 0.6);
}

TEST(Lorenz96, CyclicEquivariance) {
  oracle::Gen g(7);
  for (int d : {4, 6, 9}) {
    const VectorField f = VectorField::lorenz96(d, 8.0);
    for (int i = 0; i < 50; ++i) {
      const Vector x = g.vec(d, -10, 10);
      const int s = g.integer(1, d - 1);
      Vector shifted(d);
      for (int k = 0; k < d; ++k) shifted((k + s) % d) = x(k);
      const Vector fx = eval_field(f, x);
      Vector fx_shifted(d);
      for (int k = 0; k < d; ++k) fx_shifted((k + s) % d) = fx(k);
      EXPECT_EQ(eval_field(f, shifted), fx_shifted);
    }
  }
  EXPECT_THROW(VectorField::lorenz96(3, 8.0).validate(), ConfigError);
}

TEST(Lorenz96, FixedPointAtForcing) {
  EXPECT_LE(eval_field(VectorField::lorenz96(6, 8.0), Vector::Constant(6, 8.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Simulate, TopologyAndInitialConditions) {
  oracle::Gen g(8);
  const Matrix ics = g.mat(2, 5);
  const Dataset ds = simulate_dataset(VectorField::fhn(), ics, 0.0, 0.1, 21, 10);
  ASSERT_EQ(ds.size(), 5u);
  EXPECT_EQ(ds.dim, 2);
  for (int i = 0; i < 5; ++i) {
    const Trajectory& tr = ds.trajectories[i];
    EXPECT_EQ(tr.size(), 21);
    EXPECT_EQ(tr.values.col(0), ics.col(i));
    EXPECT_NEAR(tr.times(20), 2.0, 1e-12);
    const Matrix fine = oracle::euler([](const Vector& x, double) { return oracle::fhn(x); }, ics.col(i), 0.0,
                                      0.01, 200);
    EXPECT_LE((tr.values.col(20) - fine.col(200)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Simulate, SingleObservationAndThreadsAgree) {
  oracle::Gen g(9);
  const Matrix ics = g.mat(3, 4, 5.0);
  const Dataset one = simulate_dataset(VectorField::lorenz63(), ics, 0.0, 0.01, 1, 10);
  EXPECT_EQ(one.trajectories[0].size(), 1);
  const Dataset a = simulate_dataset(VectorField::lorenz63(), ics, 0.0, 0.01, 50, 5, 1);
  const Dataset b = simulate_dataset(VectorField::lorenz63(), ics, 0.0, 0.01, 50, 5, 3);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(a.trajectories[i].values, b.trajectories[i].values);
}

TEST(AnalyticSystem, ByName) {
  EXPECT_EQ(analytic_system("fhn").dim(), 2);
  EXPECT_EQ(analytic_system("lorenz63").dim(), 3);
  EXPECT_EQ(analytic_system("lorenz96", 6, 8).dim(), 6);
  EXPECT_FALSE(analytic_system("harmonic").autonomous());
  EXPECT_THROW(analytic_system("nope"), ConfigError);
}

TEST(FieldJson, RoundTrip) {
  oracle::Gen g(10);
  const auto base = std::make_shared<const VectorField>(random_explicit(g, 2, 12, 4));
  const VectorField r(random_representer(g, 2, 4).form(), base);
  for (const VectorField& f : {VectorField::fhn(), VectorField::lorenz96(7, 3.5), random_explicit(g, 2, 12, 5), r}) {
    const VectorField back = field_from_json(field_to_json(f));
    for (int i = 0; i < 5; ++i) {
      const Vector x = g.vec(f.dim(), -1, 1);
      EXPECT_LE((eval_field(back, x) - eval_field(f, x)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}
