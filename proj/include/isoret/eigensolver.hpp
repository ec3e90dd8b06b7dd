#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace isoret {

struct EigenOptions {
  double tolerance = 1e-10;        // on ||A y - theta y|| relative to |theta_max|
  std::size_t max_matvecs = 0;     // 0 selects 10 * k * n
  std::uint64_t seed = 0x150A'3E0Bu;
};

struct EigenResult {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // orthonormal columns, matching values
  std::size_t matvecs = 0;
  std::size_t restarts = 0;
  double max_residual = 0.0;
};

/// Largest-algebraic k eigenpairs of a dense symmetric matrix.
///
/// Thick-restart block Krylov method: the basis is grown by applying the
/// matrix to the newest orthonormal block, Ritz pairs are extracted from the
/// full projection V^T A V, and the best Ritz vectors are kept on restart.
/// Tiny problems (n no larger than the working basis) are solved densely.
/// Throws NumericError if the residual tolerance is not met in budget.
EigenResult top_eigenpairs(const Eigen::MatrixXd& a, Eigen::Index k, const EigenOptions& opts = {});

}  // namespace isoret
