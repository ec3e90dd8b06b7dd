#include "isoret/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "isoret/errors.hpp"

namespace isoret {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

EigenResult dense_top(const MatrixXd& a, Index k) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw NumericError("dense symmetric eigensolver failed");
  const Index n = a.rows();
  EigenResult r;
  r.values.resize(k);
  r.vectors.resize(n, k);
  for (Index i = 0; i < k; ++i) {
    r.values[i] = es.eigenvalues()[n - 1 - i];
    r.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  r.max_residual = (a * r.vectors - r.vectors * r.values.asDiagonal()).colwise().norm().maxCoeff();
  return r;
}

/// Orthonormalizes the columns of `w` against `basis` and each other (two
/// Gram-Schmidt passes). Columns that vanish are replaced by random directions.
void orthonormalize_block(const Eigen::Ref<const MatrixXd>& basis, MatrixXd& w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (Index c = 0; c < w.cols(); ++c) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      const double before = w.col(c).norm();
      for (int pass = 0; pass < 2; ++pass) {
        if (basis.cols() > 0) w.col(c) -= basis * (basis.transpose() * w.col(c));
        for (Index p = 0; p < c; ++p) w.col(c) -= w.col(p).dot(w.col(c)) * w.col(p);
      }
      const double after = w.col(c).norm();
      if (after > 1e-10 * before && after > std::numeric_limits<double>::min() * 1e4) {
        w.col(c) /= after;
        break;
      }
      for (Index i = 0; i < w.rows(); ++i) w(i, c) = unif(rng);
      if (attempt == 3) throw NumericError("eigensolver: could not extend the Krylov basis");
    }
  }
}

}  // namespace

EigenResult top_eigenpairs(const MatrixXd& a, Index k, const EigenOptions& opts) {
  const Index n = a.rows();
  if (a.cols() != n) throw ArgumentError("eigensolver: matrix must be square");
  if (k <= 0 || k > n) {
    throw ArgumentError("eigensolver: requested " + std::to_string(k) + " eigenpairs of a " + std::to_string(n) +
                        "x" + std::to_string(n) + " matrix");
  }

  const Index b = std::min<Index>(k, 4);
  const Index want = std::max<Index>(2 * k, k + 8 * b);
  const Index m_max = b * ((want + b - 1) / b);
  if (m_max >= n) return dense_top(a, k);

  const std::size_t budget = opts.max_matvecs > 0 ? opts.max_matvecs : static_cast<std::size_t>(10 * k * n);
  const Index keep = m_max - b * std::max<Index>(1, (m_max - k) / (2 * b));

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  MatrixXd v(n, m_max);
  MatrixXd av(n, m_max);
  MatrixXd block(n, b);
  for (Index j = 0; j < b; ++j)
    for (Index i = 0; i < n; ++i) block(i, j) = unif(rng);
  orthonormalize_block(v.leftCols(0), block, rng);

  EigenResult result;
  Index cols = 0;
  for (;;) {
    while (cols < m_max) {
      v.middleCols(cols, b) = block;
      av.middleCols(cols, b).noalias() = a * block;
      result.matvecs += static_cast<std::size_t>(b);
      cols += b;
      block = av.middleCols(cols - b, b);
      orthonormalize_block(v.leftCols(cols), block, rng);
    }

    MatrixXd h = v.transpose() * av;
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
    if (es.info() != Eigen::Success) throw NumericError("eigensolver: projected eigenproblem failed");

    // Descending order.
    MatrixXd s = es.eigenvectors().rowwise().reverse();
    VectorXd theta = es.eigenvalues().reverse();

    MatrixXd y = v * s.leftCols(k);
    MatrixXd ay = av * s.leftCols(k);
    const VectorXd res = (ay - y * theta.head(k).asDiagonal()).colwise().norm();
    const double scale = std::max(theta.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    result.max_residual = res.maxCoeff();

    if (result.max_residual <= opts.tolerance * scale) {
      result.values = theta.head(k);
      result.vectors = std::move(y);
      return result;
    }
    if (result.matvecs >= budget) {
      throw NumericError("eigensolver did not converge after " + std::to_string(result.matvecs) +
                         " matrix-vector products; max residual " + std::to_string(result.max_residual) +
                         " (tolerance " + std::to_string(opts.tolerance * scale) + ")");
    }

    // Thick restart: keep the leading Ritz vectors; the pending block already
    // holds the residual directions of the whole basis.
    const MatrixXd vk = v * s.leftCols(keep);
    const MatrixXd avk = av * s.leftCols(keep);
    v.leftCols(keep) = vk;
    av.leftCols(keep) = avk;
    cols = keep;
    orthonormalize_block(v.leftCols(cols), block, rng);
    ++result.restarts;
  }
}

}  // namespace isoret
