#pragma once

#include "rkhs_ode/common.hpp"

#include <Eigen/Cholesky>

#include <string>
#include <vector>

namespace rkhs_ode {

/// Symmetric positive definite block-tridiagonal matrix with n square blocks
/// of size d on the diagonal. `lower[l]` is block (l + 1, l); block (l, l + 1)
/// is its transpose. Node-major ordering: unknown l*d + c is coordinate c of node l.
template <typename Scalar>
struct BlockTridiagonal {
  using Block = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BlockTridiagonal() = default;
  BlockTridiagonal(int nodes, int block_size)
      : d(block_size),
        diag(static_cast<std::size_t>(nodes), Block::Zero(block_size, block_size)),
        lower(static_cast<std::size_t>(nodes > 0 ? nodes - 1 : 0), Block::Zero(block_size, block_size)) {}

  [[nodiscard]] int nodes() const { return static_cast<int>(diag.size()); }

  [[nodiscard]] Block dense() const {
    const int n = nodes();
    Block full = Block::Zero(n * d, n * d);
    for (int l = 0; l < n; ++l) full.block(l * d, l * d, d, d) = diag[l];
    for (int l = 0; l + 1 < n; ++l) {
      full.block((l + 1) * d, l * d, d, d) = lower[l];
      full.block(l * d, (l + 1) * d, d, d) = lower[l].transpose();
    }
    return full;
  }

  /// Product with a stacked vector.
  [[nodiscard]] Vec multiply(const Vec& x) const {
    const int n = nodes();
    Vec y = Vec::Zero(x.size());
    for (int l = 0; l < n; ++l) {
      y.segment(l * d, d) += diag[l] * x.segment(l * d, d);
      if (l + 1 < n) {
        y.segment((l + 1) * d, d) += lower[l] * x.segment(l * d, d);
        y.segment(l * d, d) += lower[l].transpose() * x.segment((l + 1) * d, d);
      }
    }
    return y;
  }

  int d = 0;
  std::vector<Block> diag;
  std::vector<Block> lower;
};

/// Block Thomas elimination with a Cholesky factor per pivot block;
/// O(n d^3). Throws NumericalError naming the node whose pivot is not
/// positive definite.
template <typename Scalar>
typename BlockTridiagonal<Scalar>::Vec solve_block_tridiagonal(
    const BlockTridiagonal<Scalar>& a, const typename BlockTridiagonal<Scalar>::Vec& rhs) {
  using Block = typename BlockTridiagonal<Scalar>::Block;
  using Vec = typename BlockTridiagonal<Scalar>::Vec;
  const int n = a.nodes();
  const int d = a.d;
  if (rhs.size() != static_cast<Eigen::Index>(n) * d) {
    throw UsageError("block tridiagonal solve: right-hand side has the wrong size");
  }
  std::vector<Eigen::LLT<Block>> pivots;
  pivots.reserve(static_cast<std::size_t>(n));
  Vec y = rhs;
  for (int l = 0; l < n; ++l) {
    Block s = a.diag[l];
    if (l > 0) {
      // S_l = D_l - L_{l-1} S_{l-1}^{-1} L_{l-1}^T
      const Block t = pivots.back().solve(a.lower[l - 1].transpose());
      s.noalias() -= a.lower[l - 1] * t;
      y.segment(l * d, d).noalias() -= a.lower[l - 1] * pivots.back().solve(y.segment((l - 1) * d, d));
    }
    pivots.emplace_back(s);
    if (pivots.back().info() != Eigen::Success) {
      throw NumericalError("block tridiagonal system is not positive definite at node " +
                           std::to_string(l));
    }
  }
  Vec x(rhs.size());
  x.segment((n - 1) * d, d) = pivots[n - 1].solve(y.segment((n - 1) * d, d));
  for (int l = n - 2; l >= 0; --l) {
    x.segment(l * d, d) =
        pivots[l].solve(y.segment(l * d, d) - a.lower[l].transpose() * x.segment((l + 1) * d, d));
  }
  return x;
}

}  // namespace rkhs_ode
