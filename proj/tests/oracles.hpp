#pragma once

// Independent reference computations used only by tests. Nothing here calls
// the library's assembly or solve paths.

#include "rkhs_ode/common.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using rkhs_ode::Matrix;
using rkhs_ode::Vector;

/// Seeded generator helpers for hand-rolled property tests.
struct Gen {
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  Vector vec(int n, double lo, double hi) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }
  Matrix mat(int r, int c, double sd = 1.0) {
    Matrix m(r, c);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) m(i, j) = normal(sd);
    return m;
  }
  std::mt19937_64 rng;
};

/// Minimizer of sum_j w_j |y_j - z_{node_j}|^2 + a sum_l |z_{l+1} - B_l z_l - c_l|^2
/// by dense least squares over all (k+1) d unknowns (QR of the stacked residual map).
Matrix dense_z_minimizer(const std::vector<int>& node, const Matrix& y, const Vector& w,
                         const std::vector<Matrix>& b, const Matrix& c, double a, int nodes);

/// Representer weights W (d x P) minimizing
///   sum_p c_p |u_p - sum_q k(x_p, x_q) mix w_q|^2 + lambda sum_{p,q} w_p^T k(x_p, x_q) mix w_q
/// from the symmetrically scaled stationarity system, solved by dense full-pivot LU.
Matrix dense_representer_weights(const Matrix& gram_scalar, const Matrix& mix, const Matrix& u,
                                 const Vector& c, double lambda);

/// Explicit Euler with a hand-written loop.
Matrix euler(const std::function<Vector(const Vector&, double)>& f, const Vector& x0, double t0, double h,
             int steps);

/// Central finite-difference Jacobian.
Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double step = 1e-6);

/// FitzHugh-Nagumo right-hand side and Jacobian written out by hand.
Vector fhn(const Vector& x);
Matrix fhn_jacobian(const Vector& x);

/// Lorenz63 (sigma 10, rho 28, beta 8/3) right-hand side and Jacobian.
Vector lorenz63(const Vector& x);
Matrix lorenz63_jacobian(const Vector& x);

/// exp(-|x_p - x_q|^2 / (2 l^2)) over the columns of `points`.
Matrix gaussian_gram(const Matrix& points, double lengthscale);
/// exp(-|a_p - b_q|^2 / (2 l^2)), rows over a's columns.
Matrix gaussian_cross_gram(const Matrix& a, const Matrix& b, double lengthscale);

}  // namespace oracle
