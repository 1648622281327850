#pragma once

// Seeded synthetic data with a planted model: unit-norm dictionary fibers,
// exact cap-sized sparse codes, optional pixel noise.  Also hosts the
// exhaustive sparse fitting reference used to audit greedy pursuits.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "dadl/errors.hpp"
#include "dadl/model.hpp"
#include "dadl/multiarray.hpp"
#include "dadl/pursuit.hpp"

namespace dadl {

struct SynthSpec {
  Index n = 0;                       // pixels per image
  Index subjects = 0, poses = 0, illums = 0;
  Index d_a = 0, d_b = 0, d_c = 0;   // planted dictionary dims (pose/subject/illum)
  Index t_a = 0, t_b = 0, t_c = 0;   // exact support sizes of the planted codes
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

template <typename Scalar>
struct SynthData {
  DomainGrid<Scalar> grid;   // form 1, noise included
  DadlModel<Scalar> truth;   // the planted dictionary and codes
};

using SynthDatad = SynthData<double>;

namespace detail {

/// Sorted support of size t drawn without replacement from [0, d).
inline std::vector<Index> draw_support(Index d, Index t, std::mt19937_64& rng) {
  std::vector<Index> pool(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < t; ++i) {
    std::uniform_int_distribution<Index> pick(i, d - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<Index> support(pool.begin(), pool.begin() + t);
  std::sort(support.begin(), support.end());
  return support;
}

template <typename Scalar>
MatrixX<Scalar> draw_code_matrix(Index d, Index t, Index count, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  MatrixX<Scalar> codes = MatrixX<Scalar>::Zero(d, count);
  for (Index j = 0; j < count; ++j)
    for (Index i : draw_support(d, t, rng)) codes(i, j) = static_cast<Scalar>(gauss(rng));
  return codes;
}

}  // namespace detail

/// Draws a planted model and the grid it generates.  Dictionary pixel fibers
/// are unit-norm; every code column has exactly the configured support size
/// with standard-normal values.  Deterministic per seed.
template <typename Scalar = double>
SynthData<Scalar> generate(const SynthSpec& spec) {
  if (spec.n < 1 || spec.subjects < 1 || spec.poses < 1 || spec.illums < 1)
    throw ConfigError("generate: grid extents must be positive");
  auto check = [](Index t, Index d, Index count, const char* what) {
    if (d < 1 || d > count)
      throw ConfigError(std::string("generate: ") + what + " dim must lie in [1, count]");
    if (t < 1 || t > d)
      throw ConfigError(std::string("generate: ") + what + " support must lie in [1, dim]");
  };
  check(spec.t_a, spec.d_a, spec.poses, "pose");
  check(spec.t_b, spec.d_b, spec.subjects, "subject");
  check(spec.t_c, spec.d_c, spec.illums, "illum");
  if (spec.noise_sigma < 0) throw ConfigError("generate: noise_sigma must be nonnegative");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss;

  SynthData<Scalar> out;
  DadlModel<Scalar>& truth = out.truth;
  truth.base = BaseDictionary<Scalar>(spec.n, spec.d_a, spec.d_b, spec.d_c);
  for (Index c = 0; c < spec.d_c; ++c)
    for (Index b = 0; b < spec.d_b; ++b)
      for (Index a = 0; a < spec.d_a; ++a) {
        VectorX<Scalar> fiber(spec.n);
        for (Index p = 0; p < spec.n; ++p) fiber[p] = static_cast<Scalar>(gauss(rng));
        fiber.normalize();
        for (Index p = 0; p < spec.n; ++p) truth.base(p, a, b, c) = fiber[p];
      }

  truth.pose_codes = detail::draw_code_matrix<Scalar>(spec.d_a, spec.t_a, spec.poses, rng);
  truth.subject_codes = detail::draw_code_matrix<Scalar>(spec.d_b, spec.t_b, spec.subjects, rng);
  truth.illum_codes = detail::draw_code_matrix<Scalar>(spec.d_c, spec.t_c, spec.illums, rng);

  truth.config.d_a = spec.d_a;
  truth.config.d_b = spec.d_b;
  truth.config.d_c = spec.d_c;
  truth.config.t_a = spec.t_a;
  truth.config.t_b = spec.t_b;
  truth.config.t_c = spec.t_c;
  truth.config.seed = spec.seed;
  truth.pose_labels = detail::default_labels("p", spec.poses);
  truth.subject_labels = detail::default_labels("s", spec.subjects);
  truth.illum_labels = detail::default_labels("i", spec.illums);

  out.grid = DomainGrid<Scalar>(spec.n, ModeLabel{ModeKind::Pose, spec.poses},
                                ModeLabel{ModeKind::Illum, spec.illums},
                                ModeLabel{ModeKind::Subject, spec.subjects});
  for (Index k = 0; k < spec.subjects; ++k)
    for (Index j = 0; j < spec.poses; ++j)
      for (Index l = 0; l < spec.illums; ++l)
        out.grid.cell(j, l, k) = synthesize(truth.base, truth.pose_codes.col(j),
                                            truth.subject_codes.col(k), truth.illum_codes.col(l));
  if (spec.noise_sigma > 0) {
    for (Index k = 0; k < spec.subjects; ++k)
      for (Index j = 0; j < spec.poses; ++j)
        for (Index l = 0; l < spec.illums; ++l) {
          auto cell = out.grid.cell(j, l, k);
          for (Index p = 0; p < spec.n; ++p)
            cell(p, 0) += static_cast<Scalar>(spec.noise_sigma * gauss(rng));
        }
  }
  return out;
}

template <typename Scalar>
struct ExhaustiveFit {
  SparseCode<Scalar> code;
  Scalar objective = Scalar(0);  // ||y - dict * code||_2 at the global optimum
};

/// Globally optimal fit over every support of size <= t by least squares.
/// Reference implementation for auditing pursuits; cost grows combinatorially,
/// so supports beyond C(num_atoms, t) = 1e5 are rejected.
template <typename Scalar>
ExhaustiveFit<Scalar> exhaustive_sparse_fit(const MatrixX<Scalar>& dict, const VectorX<Scalar>& y,
                                            Index t) {
  if (dict.rows() != y.size()) throw DimensionMismatch("exhaustive fit: shape mismatch");
  const Index k = dict.cols();
  if (t < 0 || t > k) throw ConfigError("exhaustive fit: support size must lie in [0, num_atoms]");
  double combos = 1.0;
  for (Index i = 0; i < t; ++i) combos *= static_cast<double>(k - i) / static_cast<double>(i + 1);
  if (combos > 1e5)
    throw TooLarge("exhaustive fit: C(num_atoms, t) exceeds 1e5");

  ExhaustiveFit<Scalar> best;
  best.code = SparseCode<Scalar>{VectorX<Scalar>::Zero(k), t};
  best.objective = y.norm();  // empty support

  std::vector<Index> support;
  for (Index size = 1; size <= t; ++size) {
    support.assign(static_cast<std::size_t>(size), 0);
    for (Index i = 0; i < size; ++i) support[static_cast<std::size_t>(i)] = i;
    while (true) {
      MatrixX<Scalar> ds(dict.rows(), size);
      for (Index i = 0; i < size; ++i) ds.col(i) = dict.col(support[static_cast<std::size_t>(i)]);
      const VectorX<Scalar> x = ds.colPivHouseholderQr().solve(y);
      const Scalar obj = (y - ds * x).norm();
      if (obj < best.objective) {
        best.objective = obj;
        best.code.values.setZero();
        for (Index i = 0; i < size; ++i)
          best.code.values[support[static_cast<std::size_t>(i)]] = x[i];
      }
      // advance to the next lexicographic combination
      Index pos = size - 1;
      while (pos >= 0 && support[static_cast<std::size_t>(pos)] == k - size + pos) --pos;
      if (pos < 0) break;
      ++support[static_cast<std::size_t>(pos)];
      for (Index i = pos + 1; i < size; ++i)
        support[static_cast<std::size_t>(i)] = support[static_cast<std::size_t>(i - 1)] + 1;
    }
  }
  return best;
}

}  // namespace dadl
