#pragma once

// Orthogonal matching pursuit: greedy atom selection against a unit-norm
// dictionary with a least-squares refit on the support after every pick.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dadl/errors.hpp"
#include "dadl/multiarray.hpp"

namespace dadl {

/// Dense code vector carrying its sparsity budget.
template <typename Scalar>
struct SparseCode {
  VectorX<Scalar> values;
  Index sparsity_cap = 0;

  Index nnz() const {
    Index k = 0;
    for (Index i = 0; i < values.size(); ++i)
      if (values[i] != Scalar(0)) ++k;
    return k;
  }
};

using SparseCoded = SparseCode<double>;

namespace detail {

/// Least squares on the selected columns via normal equations; falls back to a
/// tiny ridge when the Gram factorization goes numerically bad.
template <typename Scalar>
VectorX<Scalar> support_refit(const MatrixX<Scalar>& dict, const std::vector<Index>& support,
                              const VectorX<Scalar>& y) {
  const Index s = static_cast<Index>(support.size());
  MatrixX<Scalar> ds(dict.rows(), s);
  for (Index i = 0; i < s; ++i) ds.col(i) = dict.col(support[static_cast<std::size_t>(i)]);
  const MatrixX<Scalar> gram = ds.transpose() * ds;
  const VectorX<Scalar> rhs = ds.transpose() * y;
  VectorX<Scalar> x = gram.ldlt().solve(rhs);
  const Scalar check = (gram * x - rhs).norm();
  if (!x.allFinite() || check > Scalar(1e-8) * (Scalar(1) + rhs.norm())) {
    MatrixX<Scalar> ridged = gram;
    ridged.diagonal().array() += Scalar(1e-12);
    x = ridged.ldlt().solve(rhs);
  }
  return x;
}

}  // namespace detail

/// OMP with sparsity cap `t`.  Stops early once the residual drops to
/// `residual_tol` (default 1e-9 * ||y||, selected by passing a negative value)
/// or no remaining atom correlates with the residual.  Ties in |correlation|
/// resolve to the lowest column index.  Requires unit-norm columns (1e-6).
template <typename Scalar>
SparseCode<Scalar> omp(const MatrixX<Scalar>& dict, const VectorX<Scalar>& y, Index t,
                       Scalar residual_tol = Scalar(-1)) {
  if (dict.rows() != y.size())
    throw DimensionMismatch("omp: dictionary rows " + std::to_string(dict.rows()) +
                            " vs signal length " + std::to_string(y.size()));
  if (t < 0 || t > dict.cols())
    throw ConfigError("omp: sparsity cap must lie in [0, num_atoms]");
  for (Index j = 0; j < dict.cols(); ++j) {
    if (std::abs(dict.col(j).norm() - Scalar(1)) > Scalar(1e-6))
      throw NonNormalizedDictionary("omp: column " + std::to_string(j) + " has norm " +
                                    std::to_string(static_cast<double>(dict.col(j).norm())));
  }
  const Scalar tol = residual_tol >= Scalar(0) ? residual_tol : Scalar(1e-9) * y.norm();

  SparseCode<Scalar> code{VectorX<Scalar>::Zero(dict.cols()), t};
  std::vector<Index> support;
  std::vector<bool> used(static_cast<std::size_t>(dict.cols()), false);
  VectorX<Scalar> residual = y;
  VectorX<Scalar> coeffs;

  while (static_cast<Index>(support.size()) < t && residual.norm() > tol) {
    const VectorX<Scalar> corr = dict.transpose() * residual;
    Index best = -1;
    Scalar best_abs = Scalar(0);
    for (Index j = 0; j < corr.size(); ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const Scalar a = std::abs(corr[j]);
      if (a > best_abs) {  // strict: ties keep the earlier (lower) index
        best_abs = a;
        best = j;
      }
    }
    if (best < 0 || best_abs == Scalar(0)) break;  // nothing left correlates
    used[static_cast<std::size_t>(best)] = true;
    support.push_back(best);
    coeffs = detail::support_refit(dict, support, y);
    residual = y;
    for (std::size_t i = 0; i < support.size(); ++i)
      residual -= coeffs[static_cast<Index>(i)] * dict.col(support[i]);
  }
  for (std::size_t i = 0; i < support.size(); ++i)
    code.values[support[i]] = coeffs[static_cast<Index>(i)];
  return code;
}

}  // namespace dadl
