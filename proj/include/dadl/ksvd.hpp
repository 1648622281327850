#pragma once

// K-SVD dictionary learning: alternate OMP sparse coding of all signals with
// sequential rank-1 atom updates on the restricted residual.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "dadl/errors.hpp"
#include "dadl/multiarray.hpp"
#include "dadl/pursuit.hpp"

namespace dadl {

struct KsvdConfig {
  Index num_atoms = 0;
  Index sparsity = 0;
  int iterations = 10;
  std::uint64_t seed = 0;
  bool replace_unused = true;  // swap never-used atoms for the worst-fit signal
};

template <typename Scalar>
struct KsvdResult {
  MatrixX<Scalar> dict;            // n x num_atoms, unit-norm columns
  MatrixX<Scalar> codes;           // num_atoms x N
  std::vector<Scalar> objective;   // ||Y - D X||_F after each iteration
  bool degenerate_input = false;   // Y was all zeros
};

using KsvdResultd = KsvdResult<double>;

namespace detail {

/// Leading singular triple of `e` by power iteration (50 steps, tol 1e-12),
/// warm-started from `u0`.  Returns false when e is numerically zero.
template <typename Scalar>
bool leading_pair(const MatrixX<Scalar>& e, VectorX<Scalar> u0, VectorX<Scalar>& u,
                  Scalar& sigma, VectorX<Scalar>& v) {
  if (e.norm() == Scalar(0)) return false;
  if ((e.transpose() * u0).norm() == Scalar(0)) {
    Index best = 0;
    e.colwise().norm().maxCoeff(&best);
    u0 = e.col(best).normalized();
  }
  u = u0;
  for (int step = 0; step < 50; ++step) {
    VectorX<Scalar> w = e.transpose() * u;
    const Scalar wn = w.norm();
    if (wn == Scalar(0)) return false;
    v = w / wn;
    VectorX<Scalar> eu = e * v;
    sigma = eu.norm();
    if (sigma == Scalar(0)) return false;
    VectorX<Scalar> u_next = eu / sigma;
    const Scalar delta = (u_next - u).norm();
    u = u_next;
    if (delta < Scalar(1e-12)) break;
  }
  // deterministic sign: largest-magnitude entry of u made positive
  Index imax = 0;
  u.cwiseAbs().maxCoeff(&imax);
  if (u[imax] < Scalar(0)) {
    u = -u;
    v = -v;
  }
  return true;
}

/// Seeded random dictionary with orthonormalized leading columns.
template <typename Scalar>
MatrixX<Scalar> random_dictionary(Index n, Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  MatrixX<Scalar> g(n, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = static_cast<Scalar>(gauss(rng));
  const Index r = std::min(n, k);
  Eigen::HouseholderQR<MatrixX<Scalar>> qr(g.leftCols(r));
  MatrixX<Scalar> q = qr.householderQ() * MatrixX<Scalar>::Identity(n, r);
  MatrixX<Scalar> dict(n, k);
  dict.leftCols(r) = q;
  for (Index j = r; j < k; ++j) dict.col(j) = g.col(j).normalized();
  return dict;
}

}  // namespace detail

/// Learns (dict, codes) minimizing ||Y - dict * codes||_F with every code
/// column at most cfg.sparsity-sparse.  `init` (when non-empty) seeds the
/// dictionary; otherwise the first num_atoms distinct data columns do, padded
/// with seeded Gaussian atoms when the data runs out.
template <typename Scalar>
KsvdResult<Scalar> ksvd_learn(const MatrixX<Scalar>& y, const KsvdConfig& cfg,
                              const MatrixX<Scalar>& init = MatrixX<Scalar>()) {
  const Index n = y.rows();
  const Index num_signals = y.cols();
  if (n < 1 || num_signals < 1) throw DimensionMismatch("ksvd: empty data matrix");
  if (cfg.num_atoms < 1) throw ConfigError("ksvd: num_atoms must be positive");
  if (cfg.sparsity < 1 || cfg.sparsity > cfg.num_atoms)
    throw ConfigError("ksvd: sparsity must lie in [1, num_atoms]");
  if (cfg.iterations < 1) throw ConfigError("ksvd: iterations must be positive");

  std::mt19937_64 rng(cfg.seed);
  KsvdResult<Scalar> result;

  if (y.norm() == Scalar(0)) {
    result.dict = detail::random_dictionary<Scalar>(n, cfg.num_atoms, rng);
    result.codes = MatrixX<Scalar>::Zero(cfg.num_atoms, num_signals);
    result.objective.assign(1, Scalar(0));
    result.degenerate_input = true;
    return result;
  }

  MatrixX<Scalar> dict(n, cfg.num_atoms);
  if (init.size() > 0) {
    if (init.rows() != n || init.cols() != cfg.num_atoms)
      throw DimensionMismatch("ksvd: init dictionary shape mismatch");
    dict = init;
    for (Index j = 0; j < dict.cols(); ++j) {
      const Scalar norm = dict.col(j).norm();
      if (norm == Scalar(0)) throw DegenerateDictionary("ksvd: zero column in init dictionary");
      dict.col(j) /= norm;
    }
  } else {
    Index filled = 0;
    for (Index i = 0; i < num_signals && filled < cfg.num_atoms; ++i) {
      if (y.col(i).norm() == Scalar(0)) continue;
      const VectorX<Scalar> cand = y.col(i).normalized();
      bool distinct = true;
      for (Index j = 0; j < filled && distinct; ++j)
        if ((dict.col(j) - cand).norm() < Scalar(1e-12)) distinct = false;
      if (distinct) dict.col(filled++) = cand;
    }
    std::normal_distribution<double> gauss;
    for (; filled < cfg.num_atoms; ++filled) {
      VectorX<Scalar> atom(n);
      for (Index i = 0; i < n; ++i) atom[i] = static_cast<Scalar>(gauss(rng));
      dict.col(filled) = atom.normalized();
    }
  }

  MatrixX<Scalar> codes = MatrixX<Scalar>::Zero(cfg.num_atoms, num_signals);
  result.objective.reserve(static_cast<std::size_t>(cfg.iterations));

  const auto run_iteration = [&](MatrixX<Scalar>& d, MatrixX<Scalar>& x) {
    // sparse coding pass; a fresh greedy code can regress a signal that the
    // previous atom updates already fit better, so keep whichever code wins
    // (this is what makes the recorded objective non-increasing)
    for (Index i = 0; i < num_signals; ++i) {
      const VectorX<Scalar> fresh = omp<Scalar>(d, y.col(i), cfg.sparsity).values;
      if ((y.col(i) - d * fresh).norm() <= (y.col(i) - d * x.col(i)).norm())
        x.col(i) = fresh;
    }
    MatrixX<Scalar> residual = y - d * x;

    // sequential atom updates
    std::vector<bool> claimed(static_cast<std::size_t>(num_signals), false);
    for (Index k = 0; k < cfg.num_atoms; ++k) {
      std::vector<Index> omega;
      for (Index i = 0; i < num_signals; ++i)
        if (x(k, i) != Scalar(0)) omega.push_back(i);

      if (omega.empty()) {
        if (!cfg.replace_unused) continue;
        // replace with the currently worst-represented unclaimed signal
        Index worst = -1;
        Scalar worst_norm = Scalar(0);
        for (Index i = 0; i < num_signals; ++i) {
          if (claimed[static_cast<std::size_t>(i)]) continue;
          const Scalar rn = residual.col(i).norm();
          if (rn > worst_norm) {
            worst_norm = rn;
            worst = i;
          }
        }
        if (worst >= 0 && y.col(worst).norm() > Scalar(0)) {
          d.col(k) = y.col(worst).normalized();
          claimed[static_cast<std::size_t>(worst)] = true;
        }
        continue;
      }

      MatrixX<Scalar> e(n, static_cast<Index>(omega.size()));
      for (std::size_t i = 0; i < omega.size(); ++i)
        e.col(static_cast<Index>(i)) = residual.col(omega[i]) + d.col(k) * x(k, omega[i]);

      VectorX<Scalar> u, v;
      Scalar sigma = Scalar(0);
      if (!detail::leading_pair(e, VectorX<Scalar>(d.col(k)), u, sigma, v)) {
        for (std::size_t i = 0; i < omega.size(); ++i) {
          residual.col(omega[i]) += d.col(k) * x(k, omega[i]);
          x(k, omega[i]) = Scalar(0);
        }
        continue;
      }
      d.col(k) = u;
      for (std::size_t i = 0; i < omega.size(); ++i) {
        x(k, omega[i]) = sigma * v[static_cast<Index>(i)];
        residual.col(omega[i]) = e.col(static_cast<Index>(i)) - u * (sigma * v[static_cast<Index>(i)]);
      }
    }
  };

  for (int it = 0; it < cfg.iterations; ++it) {
    // Near-duplicate atoms waste capacity and trap the learner in local
    // minima; retire the less-used twin onto the worst-represented signal.
    // The swap is speculative: if the iteration ends with a larger objective
    // than the last recorded one, roll back and redo the iteration plainly,
    // keeping the recorded objective non-increasing.
    bool purged = false;
    MatrixX<Scalar> dict_snap, codes_snap;
    if (cfg.replace_unused && it > 0) {
      std::vector<Index> usage(static_cast<std::size_t>(cfg.num_atoms), 0);
      for (Index k = 0; k < cfg.num_atoms; ++k)
        for (Index i = 0; i < num_signals; ++i)
          if (codes(k, i) != Scalar(0)) ++usage[static_cast<std::size_t>(k)];
      std::vector<bool> candidate(static_cast<std::size_t>(cfg.num_atoms), false);
      for (Index k1 = 0; k1 < cfg.num_atoms; ++k1)
        for (Index k2 = k1 + 1; k2 < cfg.num_atoms; ++k2)
          if (std::abs(dict.col(k1).dot(dict.col(k2))) > Scalar(0.99)) {
            const bool drop_k1 = usage[static_cast<std::size_t>(k1)] <
                                 usage[static_cast<std::size_t>(k2)];
            candidate[static_cast<std::size_t>(drop_k1 ? k1 : k2)] = true;
          }
      bool any = false;
      for (Index k = 0; k < cfg.num_atoms; ++k) any = any || candidate[static_cast<std::size_t>(k)];
      if (any) {
        dict_snap = dict;
        codes_snap = codes;
        MatrixX<Scalar> resid = y - dict * codes;
        std::vector<bool> claimed(static_cast<std::size_t>(num_signals), false);
        for (Index k = 0; k < cfg.num_atoms; ++k) {
          if (!candidate[static_cast<std::size_t>(k)]) continue;
          Index worst = -1;
          Scalar worst_norm = Scalar(0);
          for (Index i = 0; i < num_signals; ++i) {
            if (claimed[static_cast<std::size_t>(i)]) continue;
            const Scalar rn = resid.col(i).norm();
            if (rn > worst_norm) {
              worst_norm = rn;
              worst = i;
            }
          }
          if (worst < 0 || y.col(worst).norm() == Scalar(0)) continue;
          for (Index i = 0; i < num_signals; ++i)
            if (codes(k, i) != Scalar(0)) {
              resid.col(i) += dict.col(k) * codes(k, i);
              codes(k, i) = Scalar(0);
            }
          dict.col(k) = y.col(worst).normalized();
          claimed[static_cast<std::size_t>(worst)] = true;
          purged = true;
        }
      }
    }

    run_iteration(dict, codes);
    Scalar obj = (y - dict * codes).norm();
    if (purged && !result.objective.empty() && obj > result.objective.back()) {
      dict = dict_snap;
      codes = codes_snap;
      run_iteration(dict, codes);
      obj = (y - dict * codes).norm();
    }
    result.objective.push_back(obj);
  }

  result.dict = std::move(dict);
  result.codes = std::move(codes);
  return result;
}

}  // namespace dadl
