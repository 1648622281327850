#pragma once

// Domain-adaptive dictionary model: a 4-way base dictionary learned over a
// subject x pose x illumination image grid, plus the three code matrices.
//
// Learning alternates k-SVD fits of one factor at a time, moving the grid
// between canonical forms so the factor under update spans the columns.
// Decomposition alternates OMP pursuits against adapted dictionaries obtained
// by contracting the base with the two currently-fixed codes.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dadl/errors.hpp"
#include "dadl/ksvd.hpp"
#include "dadl/multiarray.hpp"
#include "dadl/pursuit.hpp"

namespace dadl {

struct DadlConfig {
  Index d_a = 0, d_b = 0, d_c = 0;  // pose / subject / illum atom counts
  Index t_a = 0, t_b = 0, t_c = 0;  // sparsity caps for the three codes
  int outer_iters = 5;              // base-learning alternation rounds
  int ksvd_iters = 20;              // k-SVD iterations inside each round
  int coding_iters = 100;           // decomposition sweep cap
  double code_tol = 1e-6;           // decomposition relative-change stop
  double ridge = 1e-8;              // pseudo-inverse ridge, relative to the mean Gram diagonal
  std::uint64_t seed = 0;
};

template <typename Scalar>
struct DadlModel {
  BaseDictionary<Scalar> base;
  MatrixX<Scalar> pose_codes;     // A: d_a x J
  MatrixX<Scalar> subject_codes;  // B: d_b x K
  MatrixX<Scalar> illum_codes;    // C: d_c x L
  DadlConfig config;
  std::vector<std::string> pose_labels;
  std::vector<std::string> subject_labels;
  std::vector<std::string> illum_labels;
  std::vector<double> training_errors;  // relative Frobenius error per outer iteration

  Index n() const { return base.n(); }
  Index poses() const { return pose_codes.cols(); }
  Index subjects() const { return subject_codes.cols(); }
  Index illums() const { return illum_codes.cols(); }
};

using DadlModeld = DadlModel<double>;

/// Codes recovered for a single image.
template <typename Scalar>
struct Decomposition {
  SparseCode<Scalar> pose;     // a
  SparseCode<Scalar> subject;  // b
  SparseCode<Scalar> illum;    // c
  Scalar residual_norm = Scalar(0);
  int iterations_used = 0;
  bool converged = false;
  std::vector<Scalar> objective;  // residual norm after each sweep
};

using Decompositiond = Decomposition<double>;

namespace detail {

inline std::vector<std::string> default_labels(const char* prefix, Index count) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

inline Index label_index(const std::vector<std::string>& labels, const std::string& label,
                         const char* what) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<Index>(i);
  throw UnknownLabel(std::string(what) + " label '" + label + "' not in model");
}

/// Normalize columns, run OMP on the non-degenerate ones, and undo the scaling
/// so the returned code applies to the *unnormalized* dictionary.  Columns that
/// are numerically zero sit out of the pursuit.
template <typename Scalar>
SparseCode<Scalar> pursue_scaled(const MatrixX<Scalar>& dict, const VectorX<Scalar>& y, Index cap) {
  const Index k = dict.cols();
  SparseCode<Scalar> code{VectorX<Scalar>::Zero(k), cap};

  VectorX<Scalar> norms(k);
  for (Index j = 0; j < k; ++j) norms[j] = dict.col(j).norm();
  const Scalar max_norm = norms.maxCoeff();
  if (max_norm == Scalar(0)) return code;  // fully degenerate dictionary: zero code
  const Scalar cutoff = Scalar(1e-12) * max_norm;

  std::vector<Index> kept;
  for (Index j = 0; j < k; ++j)
    if (norms[j] > cutoff) kept.push_back(j);

  MatrixX<Scalar> unit(dict.rows(), static_cast<Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i)
    unit.col(static_cast<Index>(i)) = dict.col(kept[i]) / norms[kept[i]];

  const Index eff_cap = std::min<Index>(cap, static_cast<Index>(kept.size()));
  const SparseCode<Scalar> scaled = omp<Scalar>(unit, y, eff_cap);
  for (std::size_t i = 0; i < kept.size(); ++i)
    code.values[kept[i]] = scaled.values[static_cast<Index>(i)] / norms[kept[i]];
  return code;
}

}  // namespace detail

/// Learns the base dictionary and code matrices from a complete image grid.
///
/// Round structure per alternation: fit (pose dictionary, A) on the grid with
/// the subject codes peeled off by pseudo-inverse, then (illum dictionary, C)
/// with pose peeled off, then (subject dictionary, B) with illum peeled off;
/// afterwards the base is recovered from the last subject dictionary by
/// peeling A.  The subject factor is bootstrapped by a plain k-SVD first.
template <typename Scalar>
DadlModel<Scalar> learn_base_dictionary(const DomainGrid<Scalar>& grid, const DadlConfig& cfg) {
  const DomainGrid<Scalar> y1 = vt(grid, FormId::F1);
  const Index n = y1.cell_dim();
  const Index num_subjects = y1.col().size;
  const Index num_poses = y1.outer().size;
  const Index num_illums = y1.inner().size;
  if (is_atom(y1.col().kind) || is_atom(y1.outer().kind) || is_atom(y1.inner().kind))
    throw ModeMismatch("training grid must carry content modes only");

  auto check = [](Index t, Index d, Index count, const char* what) {
    if (t < 1 || t > d)
      throw ConfigError(std::string(what) + ": sparsity cap must lie in [1, dim]");
    if (d > count)
      throw ConfigError(std::string(what) + ": dictionary dim exceeds the grid extent");
  };
  check(cfg.t_a, cfg.d_a, num_poses, "pose factor");
  check(cfg.t_b, cfg.d_b, num_subjects, "subject factor");
  check(cfg.t_c, cfg.d_c, num_illums, "illum factor");
  if (cfg.outer_iters < 1) throw ConfigError("outer_iters must be positive");
  if (cfg.ksvd_iters < 1) throw ConfigError("ksvd_iters must be positive");
  if (cfg.ridge < 0) throw ConfigError("ridge must be nonnegative");

  const DomainGrid<Scalar> y4 = vt(grid, FormId::F4);
  const DomainGrid<Scalar> y5 = vt(grid, FormId::F5);
  const Scalar y_norm = y1.data().norm();

  auto sub_ksvd = [&](const MatrixX<Scalar>& data, Index atoms, Index cap,
                      const MatrixX<Scalar>& warm) {
    KsvdConfig kc;
    kc.num_atoms = atoms;
    kc.sparsity = cap;
    kc.iterations = cfg.ksvd_iters;
    kc.seed = cfg.seed;
    return ksvd_learn<Scalar>(data, kc, warm);
  };
  auto pinv = [&](const MatrixX<Scalar>& codes) {
    return ridge_pinv(codes, relative_ridge(codes, static_cast<Scalar>(cfg.ridge)));
  };

  // bootstrap subject factor on the form-1 matrix
  KsvdResult<Scalar> sub = sub_ksvd(y1.data(), cfg.d_b, cfg.t_b, MatrixX<Scalar>());
  MatrixX<Scalar> b_codes = sub.codes;

  DadlModel<Scalar> model;
  model.config = cfg;
  MatrixX<Scalar> a_codes, c_codes;
  MatrixX<Scalar> warm_a, warm_c, warm_b;

  // The raw alternation can regress between rounds (each stage refits a
  // pseudo-inverse-peeled target, not the joint objective), so the model kept
  // per round — and finally returned — is the best one seen so far, while the
  // alternation itself continues from the free trajectory.
  Scalar best_err = std::numeric_limits<Scalar>::infinity();
  BaseDictionary<Scalar> best_base;
  MatrixX<Scalar> best_a, best_b, best_c;

  for (int round = 0; round < cfg.outer_iters; ++round) {
    // pose factor: peel subjects off form 1, refit in form 2
    DomainGrid<Scalar> peeled = contract(y1, y1.col().kind, pinv(b_codes));
    KsvdResult<Scalar> pose = sub_ksvd(vt(peeled, FormId::F2).data(), cfg.d_a, cfg.t_a, warm_a);
    a_codes = pose.codes;
    warm_a = pose.dict;

    // illum factor: peel poses off form 4, refit in form 3
    peeled = contract(y4, y4.col().kind, pinv(a_codes));
    KsvdResult<Scalar> illum = sub_ksvd(vt(peeled, FormId::F3).data(), cfg.d_c, cfg.t_c, warm_c);
    c_codes = illum.codes;
    warm_c = illum.dict;

    // subject factor: peel illums off form 5, refit in form 1
    peeled = contract(y5, y5.col().kind, pinv(c_codes));
    KsvdResult<Scalar> subject = sub_ksvd(vt(peeled, FormId::F1).data(), cfg.d_b, cfg.t_b, warm_b);
    b_codes = subject.codes;
    warm_b = subject.dict;

    // base recovery: the subject dictionary is the base with A applied, laid
    // out in form 1; peel A back off in form 2 and repack.
    DomainGrid<Scalar> subject_dict(n, ModeLabel{ModeKind::Pose, num_poses},
                                    ModeLabel{ModeKind::IllumAtom, cfg.d_c},
                                    ModeLabel{ModeKind::SubjectAtom, cfg.d_b}, subject.dict);
    DomainGrid<Scalar> base_grid =
        contract(vt(subject_dict, FormId::F2), ModeKind::Pose, pinv(a_codes));
    model.base = from_grid(base_grid);

    const DomainGrid<Scalar> rebuilt = staged_synthesis(model.base, a_codes, b_codes, c_codes,
                                                        FormId::F1);
    const Scalar err = (y1.data() - rebuilt.data()).norm() / y_norm;
    if (err < best_err) {
      best_err = err;
      best_base = model.base;
      best_a = a_codes;
      best_b = b_codes;
      best_c = c_codes;
    }
    model.training_errors.push_back(static_cast<double>(best_err));
  }

  model.base = std::move(best_base);
  model.pose_codes = std::move(best_a);
  model.subject_codes = std::move(best_b);
  model.illum_codes = std::move(best_c);
  model.pose_labels = detail::default_labels("p", num_poses);
  model.subject_labels = detail::default_labels("s", num_subjects);
  model.illum_labels = detail::default_labels("i", num_illums);
  return model;
}

/// Recovers (pose, subject, illum) codes for one image by alternating pursuits
/// against adapted dictionaries.  Pose and illum codes start from a seeded
/// Gaussian draw, so the result is a deterministic function of (y, model).
template <typename Scalar>
Decomposition<Scalar> decompose(const VectorX<Scalar>& y, const DadlModel<Scalar>& model) {
  const DadlConfig& cfg = model.config;
  if (y.size() != model.n())
    throw DimensionMismatch("decompose: image length does not match the model");
  if (cfg.coding_iters < 1) throw ConfigError("coding_iters must be positive");

  const DomainGrid<Scalar> base1 = as_grid(model.base, FormId::F1);
  const DomainGrid<Scalar> base2 = as_grid(model.base, FormId::F2);
  const DomainGrid<Scalar> base3 = as_grid(model.base, FormId::F3);

  // The reconstruction is unchanged under (a, b, c) -> (λa, b/(λμ), μc), so
  // raw code vectors can drift along that gauge without the fit improving.
  // Pin the gauge after every sweep: unit-norm a and c with positive peak
  // entries, all scale and sign carried by b.  Pursuits normalize adapted
  // dictionary columns, so this rescaling never alters which atoms they pick.
  auto fix_gauge = [](VectorX<Scalar>& u, VectorX<Scalar>& into) {
    const Scalar norm = u.norm();
    if (norm <= Scalar(0)) return;
    Index peak = 0;
    u.cwiseAbs().maxCoeff(&peak);
    const Scalar scale = u[peak] < Scalar(0) ? -norm : norm;
    u /= scale;
    into *= scale;
  };

  // adapted dictionaries: the base with the other two codes applied, laid out
  // with the pursued mode's atoms in columns
  auto adapted_b = [&](const VectorX<Scalar>& a, const VectorX<Scalar>& c) {
    DomainGrid<Scalar> g = contract(base3, ModeKind::IllumAtom, c);
    return MatrixX<Scalar>(vt(apply_in_form(g, FormId::F2, MatrixX<Scalar>(a)), FormId::F1).data());
  };
  auto adapted_a = [&](const VectorX<Scalar>& b, const VectorX<Scalar>& c) {
    DomainGrid<Scalar> g = contract(base1, ModeKind::SubjectAtom, b);
    return MatrixX<Scalar>(vt(apply_in_form(g, FormId::F3, MatrixX<Scalar>(c)), FormId::F4).data());
  };
  auto adapted_c = [&](const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
    DomainGrid<Scalar> g = contract(base2, ModeKind::PoseAtom, a);
    return MatrixX<Scalar>(vt(apply_in_form(g, FormId::F1, MatrixX<Scalar>(b)), FormId::F5).data());
  };

  auto support_of = [](const VectorX<Scalar>& v) {
    std::vector<Index> s;
    for (Index i = 0; i < v.size(); ++i)
      if (v[i] != Scalar(0)) s.push_back(i);
    return s;
  };
  auto refit = [&y](const MatrixX<Scalar>& dict, const std::vector<Index>& support,
                    VectorX<Scalar>& code) {
    if (support.empty()) return;
    const VectorX<Scalar> vals = detail::support_refit(dict, support, y);
    code.setZero();
    for (std::size_t i = 0; i < support.size(); ++i)
      code[support[i]] = vals[static_cast<Index>(i)];
  };

  // Each pursuit leaves its values fitted against the other two codes as they
  // stood earlier in the sweep, so the raw triple drifts toward mutual
  // consistency only geometrically across sweeps.  With supports held fixed,
  // alternating exact least-squares refits of the three value vectors land on
  // the fixed point for those supports in one call, so the code change between
  // sweeps reflects support changes alone.
  auto refine_values = [&](VectorX<Scalar>& a, VectorX<Scalar>& b, VectorX<Scalar>& c) {
    const std::vector<Index> sup_a = support_of(a), sup_b = support_of(b), sup_c = support_of(c);
    const Scalar inner_tol = Scalar(100) * std::numeric_limits<Scalar>::epsilon();
    for (int inner = 0; inner < 50; ++inner) {
      const VectorX<Scalar> a_in = a, b_in = b, c_in = c;
      refit(adapted_b(a, c), sup_b, b);
      refit(adapted_a(b, c), sup_a, a);
      refit(adapted_c(a, b), sup_c, c);
      if ((a - a_in).norm() <= inner_tol * (a_in.norm() + Scalar(1e-12)) &&
          (b - b_in).norm() <= inner_tol * (b_in.norm() + Scalar(1e-12)) &&
          (c - c_in).norm() <= inner_tol * (c_in.norm() + Scalar(1e-12)))
        break;
    }
  };

  // Greedy pursuit can settle on a support whose best single-atom exchange
  // fits far better: the correlation pick at step t is not the best joint
  // fit, and the sweep loop cannot leave such a point because every pursuit
  // re-makes the same greedy choice.  Once the alternation has settled, try
  // exchanging each chosen atom for each unchosen one with an exact refit,
  // keeping strict improvements.  Runs only after the sweeps, so an improved
  // support is not handed back to the pursuit that would re-trap it.
  auto swap_polish = [&](VectorX<Scalar>& u, const MatrixX<Scalar>& dict) -> bool {
    std::vector<Index> supp = support_of(u);
    if (supp.empty()) return false;
    VectorX<Scalar> norms(dict.cols());
    for (Index j = 0; j < dict.cols(); ++j) norms[j] = dict.col(j).norm();
    const Scalar cutoff = Scalar(1e-12) * norms.maxCoeff();
    bool any = false;
    // The accepted residual is carried between passes instead of re-measured:
    // near the noise floor two summation orders of the same fit disagree by
    // ulps, which would let a pair of supports "improve" on each other
    // forever.  With a carried value the accepted sequence is strictly
    // decreasing against per-support constants, so no support repeats.
    Scalar best_res = (y - dict * u).norm();
    const Scalar res_floor = Scalar(1e-8) * y.norm();
    for (bool improved = true; improved && best_res > res_floor;) {
      improved = false;
      std::vector<Index> best_supp;
      VectorX<Scalar> best_vals;
      Scalar pass_best = best_res;
      for (std::size_t si = 0; si < supp.size(); ++si) {
        for (Index cand = 0; cand < dict.cols(); ++cand) {
          if (norms[cand] <= cutoff) continue;  // degenerate atoms sit out
          bool member = false;
          for (Index s : supp) member = member || s == cand;
          if (member) continue;
          std::vector<Index> trial = supp;
          trial[si] = cand;
          const VectorX<Scalar> vals = detail::support_refit(dict, trial, y);
          VectorX<Scalar> fit = VectorX<Scalar>::Zero(y.size());
          for (std::size_t i = 0; i < trial.size(); ++i)
            fit += dict.col(trial[i]) * vals[static_cast<Index>(i)];
          const Scalar res = (y - fit).norm();
          if (res < pass_best * (Scalar(1) - Scalar(1e-12))) {
            pass_best = res;
            best_supp = trial;
            best_vals = vals;
          }
        }
      }
      if (!best_supp.empty()) {
        u.setZero();
        for (std::size_t i = 0; i < best_supp.size(); ++i)
          u[best_supp[i]] = best_vals[static_cast<Index>(i)];
        supp = best_supp;
        best_res = pass_best;
        any = improved = true;
      }
    }
    return any;
  };

  auto attempt = [&](VectorX<Scalar> a, VectorX<Scalar> c) {
    VectorX<Scalar> b = VectorX<Scalar>::Zero(cfg.d_b);

    Decomposition<Scalar> result;
    for (int sweep = 0; sweep < cfg.coding_iters; ++sweep) {
      const VectorX<Scalar> a_prev = a, b_prev = b, c_prev = c;

      // subject code against [[D c] a] laid out with subject atoms in columns,
      // then pose via the form-4 layout and illum via form 5
      b = detail::pursue_scaled(adapted_b(a, c), y, cfg.t_b).values;
      a = detail::pursue_scaled(adapted_a(b, c), y, cfg.t_a).values;
      c = detail::pursue_scaled(adapted_c(a, b), y, cfg.t_c).values;

      refine_values(a, b, c);

      fix_gauge(a, b);
      fix_gauge(c, b);

      result.iterations_used = sweep + 1;
      result.objective.push_back((y - synthesize(model.base, a, b, c)).norm());

      auto rel_change = [](const VectorX<Scalar>& now, const VectorX<Scalar>& before) {
        return (now - before).norm() / (before.norm() + Scalar(1e-12));
      };
      if (rel_change(a, a_prev) < cfg.code_tol && rel_change(b, b_prev) < cfg.code_tol &&
          rel_change(c, c_prev) < cfg.code_tol) {
        result.converged = true;
        break;
      }
    }

    if (!result.objective.empty() && result.objective.back() > Scalar(1e-8) * y.norm()) {
      for (int round = 0; round < 4; ++round) {
        bool any = swap_polish(b, adapted_b(a, c));
        any = swap_polish(a, adapted_a(b, c)) || any;
        any = swap_polish(c, adapted_c(a, b)) || any;
        if (!any) break;
        refine_values(a, b, c);
        fix_gauge(a, b);
        fix_gauge(c, b);
        if ((y - synthesize(model.base, a, b, c)).norm() <= Scalar(1e-8) * y.norm()) break;
      }
    }

    // Return the gauge representative aligned with the model's own columns:
    // rescale a (and c) to the norm and sign of the nearest column of the
    // learned pose (illum) code matrix, folding the inverse scale into b.
    // A pure gauge move — the reconstruction is untouched — but codes of
    // training images then land on the model's columns directly, so a
    // decomposed subject code composes with label-selected pose/illum
    // columns without a scale mismatch.
    auto snap_gauge = [](VectorX<Scalar>& u, const MatrixX<Scalar>& cols, VectorX<Scalar>& into) {
      const Scalar u_norm = u.norm();
      if (u_norm <= Scalar(0) || cols.cols() == 0) return;
      Index best = -1;
      Scalar best_cos = Scalar(0);
      for (Index j = 0; j < cols.cols(); ++j) {
        const Scalar col_norm = cols.col(j).norm();
        if (col_norm <= Scalar(0)) continue;
        const Scalar cosine = u.dot(cols.col(j)) / (u_norm * col_norm);
        if (best < 0 || std::abs(cosine) > std::abs(best_cos)) {
          best = j;
          best_cos = cosine;
        }
      }
      if (best < 0 || best_cos == Scalar(0)) return;
      const Scalar target = cols.col(best).norm();
      const Scalar t = (best_cos < Scalar(0) ? -target : target) / u_norm;
      u *= t;
      into /= t;
    };
    snap_gauge(a, model.pose_codes, b);
    snap_gauge(c, model.illum_codes, b);
    // The leftover (a, b) pair freedom is spent on the subject code, the
    // one the matcher compares across domains: snap b to the norm and sign
    // of its nearest learned subject column, compensating in a. Training
    // images already sit on a subject column (factor one, nothing moves);
    // images rendered under unseen poses keep subject codes sign- and
    // scale-comparable with the model instead of inheriting an arbitrary
    // pose-dependent gauge.
    snap_gauge(b, model.subject_codes, a);

    result.pose = SparseCode<Scalar>{a, cfg.t_a};
    result.subject = SparseCode<Scalar>{b, cfg.t_b};
    result.illum = SparseCode<Scalar>{c, cfg.t_c};
    // final residual of the returned codes; below the last sweep objective
    // whenever the exchange polish improved the support
    result.residual_norm = (y - synthesize(model.base, a, b, c)).norm();
    return result;
  };

  // The alternation can settle in a poor basin from an unlucky random init —
  // especially when every image shares a dominant component (a brightness
  // offset, say) that greedy pursuit chases before the discriminative atoms.
  // The model's own trained pose/illum columns mark the basins that matter,
  // so those inits run first: each (pose, illum) column pair is scored by a
  // single subject-code pursuit, and the alternation starts from the most
  // promising pairs.  Seeded random restarts follow for images far from any
  // trained domain.  Lowest residual wins; a machine-precision fit ends the
  // search early.
  constexpr int kWarmStarts = 4;
  constexpr int kRestarts = 6;

  std::vector<std::pair<Scalar, std::pair<Index, Index>>> ranked;
  if (model.pose_codes.cols() > 0 && model.illum_codes.cols() > 0 &&
      model.pose_codes.rows() == cfg.d_a && model.illum_codes.rows() == cfg.d_c) {
    for (Index j = 0; j < model.pose_codes.cols(); ++j)
      for (Index l = 0; l < model.illum_codes.cols(); ++l) {
        const MatrixX<Scalar> dict =
            adapted_b(model.pose_codes.col(j), model.illum_codes.col(l));
        const VectorX<Scalar> b = detail::pursue_scaled(dict, y, cfg.t_b).values;
        ranked.emplace_back((y - dict * b).norm(), std::make_pair(j, l));
      }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& p, const auto& q) { return p.first < q.first; });
  }

  Decomposition<Scalar> best;
  bool have_best = false;
  auto consider = [&](Decomposition<Scalar> d) {
    if (!have_best || d.residual_norm < best.residual_norm) {
      best = std::move(d);
      have_best = true;
    }
    return best.converged && best.residual_norm <= Scalar(1e-8) * y.norm();
  };

  bool done = false;
  for (std::size_t w = 0; w < ranked.size() && w < kWarmStarts && !done; ++w)
    done = consider(attempt(model.pose_codes.col(ranked[w].second.first),
                            model.illum_codes.col(ranked[w].second.second)));
  for (int r = 0; r < kRestarts && !done; ++r) {
    std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(r) * 0x9E3779B97F4A7C15ULL);
    std::normal_distribution<double> gauss;
    VectorX<Scalar> a(cfg.d_a), c(cfg.d_c);
    for (Index i = 0; i < a.size(); ++i) a[i] = static_cast<Scalar>(gauss(rng));
    for (Index i = 0; i < c.size(); ++i) c[i] = static_cast<Scalar>(gauss(rng));
    done = consider(attempt(std::move(a), std::move(c)));
  }
  return best;
}

/// Base with the illum-atom mode contracted by the learned illum codes: a
/// pose-atom-column grid carrying one block per training illumination.
template <typename Scalar>
DomainGrid<Scalar> marginalize_illum(const DadlModel<Scalar>& model) {
  return vt(contract(as_grid(model.base, FormId::F3), ModeKind::IllumAtom, model.illum_codes),
            FormId::F2);
}

/// Base with the pose-atom mode contracted by the learned pose codes.
template <typename Scalar>
DomainGrid<Scalar> marginalize_pose(const DadlModel<Scalar>& model) {
  return vt(contract(as_grid(model.base, FormId::F2), ModeKind::PoseAtom, model.pose_codes),
            FormId::F3);
}

/// Renders a subject code under explicit pose/illum codes.
template <typename Scalar>
VectorX<Scalar> compose(const DadlModel<Scalar>& model, const VectorX<Scalar>& subject_code,
                        const VectorX<Scalar>& pose_code, const VectorX<Scalar>& illum_code) {
  return synthesize(model.base, pose_code, subject_code, illum_code);
}

/// Renders a subject code under trained pose/illum columns picked by index.
template <typename Scalar>
VectorX<Scalar> compose(const DadlModel<Scalar>& model, const VectorX<Scalar>& subject_code,
                        Index pose_index, Index illum_index) {
  if (pose_index < 0 || pose_index >= model.poses() || illum_index < 0 ||
      illum_index >= model.illums())
    throw ConfigError("compose: pose/illum index out of range");
  return synthesize(model.base, model.pose_codes.col(pose_index), subject_code,
                    model.illum_codes.col(illum_index));
}

/// Renders a subject code under trained pose/illum columns picked by label.
template <typename Scalar>
VectorX<Scalar> compose(const DadlModel<Scalar>& model, const VectorX<Scalar>& subject_code,
                        const std::string& pose_label, const std::string& illum_label) {
  return compose(model, subject_code,
                 detail::label_index(model.pose_labels, pose_label, "pose"),
                 detail::label_index(model.illum_labels, illum_label, "illum"));
}

}  // namespace dadl
