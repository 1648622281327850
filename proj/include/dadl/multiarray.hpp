#pragma once

// Block-matrix machinery for image grids indexed by subject x pose x illumination.
//
// A DomainGrid stores one n-vector cell per (subject-like, pose-like, illum-like)
// index triple, packed into a dense matrix: one mode spans the columns and the
// other two span the rows (outer-major, inner-minor, pixel-fastest).  The six
// ways of assigning the three modes to (column, outer row, inner row) are the
// six canonical forms; `vt` (vector transpose) rearranges between them, and
// `contract` multiplies one mode by a code matrix.  A BaseDictionary is the
// 4-way array [pixel, pose atom, subject atom, illum atom] that generates
// images through `synthesize`.

#include <array>
#include <cassert>
#include <cstdint>
#include <limits>
#include <string>

#include <Eigen/Core>
#include <Eigen/Cholesky>

#include "dadl/errors.hpp"

namespace dadl {

using Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// Modes and forms
// ---------------------------------------------------------------------------

/// What a grid mode ranges over.  Content kinds index observed images; atom
/// kinds index dictionary atoms of the corresponding factor.
enum class ModeKind : std::uint8_t { Subject, Pose, Illum, SubjectAtom, PoseAtom, IllumAtom };

constexpr bool is_atom(ModeKind k) {
  return k == ModeKind::SubjectAtom || k == ModeKind::PoseAtom || k == ModeKind::IllumAtom;
}

/// Content counterpart: SubjectAtom -> Subject, Subject -> Subject, etc.
/// Two kinds with the same content class are interchangeable in form layouts.
constexpr ModeKind content_class(ModeKind k) {
  switch (k) {
    case ModeKind::SubjectAtom: return ModeKind::Subject;
    case ModeKind::PoseAtom: return ModeKind::Pose;
    case ModeKind::IllumAtom: return ModeKind::Illum;
    default: return k;
  }
}

/// Swaps content and atom kinds (Subject <-> SubjectAtom, ...).  Contracting a
/// mode with a code matrix flips its kind: atoms combine into content images,
/// and content contracted with a pseudo-inverse becomes atom-like.
constexpr ModeKind flipped(ModeKind k) {
  switch (k) {
    case ModeKind::Subject: return ModeKind::SubjectAtom;
    case ModeKind::Pose: return ModeKind::PoseAtom;
    case ModeKind::Illum: return ModeKind::IllumAtom;
    case ModeKind::SubjectAtom: return ModeKind::Subject;
    case ModeKind::PoseAtom: return ModeKind::Pose;
    case ModeKind::IllumAtom: return ModeKind::Illum;
  }
  return k;
}

inline const char* to_string(ModeKind k) {
  switch (k) {
    case ModeKind::Subject: return "subject";
    case ModeKind::Pose: return "pose";
    case ModeKind::Illum: return "illum";
    case ModeKind::SubjectAtom: return "subject_atom";
    case ModeKind::PoseAtom: return "pose_atom";
    case ModeKind::IllumAtom: return "illum_atom";
  }
  return "?";
}

/// A named, sized grid mode.
struct ModeLabel {
  ModeKind kind = ModeKind::Subject;
  Index size = 0;
};

/// Canonical form identifier (1-6).
enum class FormId : int { F1 = 1, F2 = 2, F3 = 3, F4 = 4, F5 = 5, F6 = 6 };

/// Content classes assigned to (columns, outer rows, inner rows) by each form.
struct FormSpec {
  ModeKind col;
  ModeKind outer;
  ModeKind inner;
};

inline constexpr std::array<FormSpec, 6> kFormTable = {{
    {ModeKind::Subject, ModeKind::Pose, ModeKind::Illum},  // form 1
    {ModeKind::Pose, ModeKind::Illum, ModeKind::Subject},  // form 2
    {ModeKind::Illum, ModeKind::Subject, ModeKind::Pose},  // form 3
    {ModeKind::Pose, ModeKind::Subject, ModeKind::Illum},  // form 4
    {ModeKind::Illum, ModeKind::Pose, ModeKind::Subject},  // form 5
    {ModeKind::Subject, ModeKind::Illum, ModeKind::Pose},  // form 6
}};

inline const FormSpec& form_spec(FormId f) { return kFormTable[static_cast<int>(f) - 1]; }

// ---------------------------------------------------------------------------
// DomainGrid
// ---------------------------------------------------------------------------

/// Dense block matrix of n-vector cells over three modes with distinct content
/// classes.  Cell (outer u, inner v, column w) occupies rows
/// [((u * inner.size) + v) * n, +n) of column w.
template <typename Scalar>
class DomainGrid {
 public:
  DomainGrid() = default;

  /// Zero-initialized grid.
  DomainGrid(Index cell_dim, ModeLabel outer, ModeLabel inner, ModeLabel col)
      : cell_dim_(cell_dim), outer_(outer), inner_(inner), col_(col) {
    validate_labels();
    data_ = MatrixX<Scalar>::Zero(cell_dim_ * outer_.size * inner_.size, col_.size);
  }

  /// Wraps an existing matrix whose shape matches the labels.
  DomainGrid(Index cell_dim, ModeLabel outer, ModeLabel inner, ModeLabel col,
             MatrixX<Scalar> data)
      : cell_dim_(cell_dim), outer_(outer), inner_(inner), col_(col), data_(std::move(data)) {
    validate_labels();
    if (data_.rows() != cell_dim_ * outer_.size * inner_.size || data_.cols() != col_.size) {
      throw DimensionMismatch("grid data is " + std::to_string(data_.rows()) + "x" +
                              std::to_string(data_.cols()) + ", labels require " +
                              std::to_string(cell_dim_ * outer_.size * inner_.size) + "x" +
                              std::to_string(col_.size));
    }
  }

  Index cell_dim() const { return cell_dim_; }
  const ModeLabel& outer() const { return outer_; }
  const ModeLabel& inner() const { return inner_; }
  const ModeLabel& col() const { return col_; }
  const MatrixX<Scalar>& data() const { return data_; }
  MatrixX<Scalar>& data() { return data_; }

  Index cell_row(Index u, Index v) const { return (u * inner_.size + v) * cell_dim_; }

  auto cell(Index u, Index v, Index w) {
    assert(u >= 0 && u < outer_.size && v >= 0 && v < inner_.size && w >= 0 && w < col_.size);
    return data_.block(cell_row(u, v), w, cell_dim_, 1);
  }
  auto cell(Index u, Index v, Index w) const {
    assert(u >= 0 && u < outer_.size && v >= 0 && v < inner_.size && w >= 0 && w < col_.size);
    return data_.block(cell_row(u, v), w, cell_dim_, 1);
  }

  /// Label whose content class matches `cls` (which must be a content kind).
  const ModeLabel& mode_of_class(ModeKind cls) const {
    if (content_class(outer_.kind) == cls) return outer_;
    if (content_class(inner_.kind) == cls) return inner_;
    if (content_class(col_.kind) == cls) return col_;
    throw ModeMismatch(std::string("grid has no mode of class ") + to_string(cls));
  }

  /// Label with this exact kind; throws ModeMismatch when absent.
  const ModeLabel& mode_of_kind(ModeKind kind) const {
    if (outer_.kind == kind) return outer_;
    if (inner_.kind == kind) return inner_;
    if (col_.kind == kind) return col_;
    throw ModeMismatch(std::string("grid has no mode of kind ") + to_string(kind));
  }

 private:
  void validate_labels() const {
    if (cell_dim_ < 1) throw DimensionMismatch("cell dimension must be positive");
    if (outer_.size < 1 || inner_.size < 1 || col_.size < 1)
      throw DimensionMismatch("every grid mode needs positive size");
    const ModeKind a = content_class(outer_.kind);
    const ModeKind b = content_class(inner_.kind);
    const ModeKind c = content_class(col_.kind);
    if (a == b || a == c || b == c)
      throw ModeMismatch("grid modes must cover three distinct content classes");
  }

  Index cell_dim_ = 0;
  ModeLabel outer_{};
  ModeLabel inner_{};
  ModeLabel col_{};
  MatrixX<Scalar> data_;
};

using DomainGridd = DomainGrid<double>;

/// The canonical form a grid currently sits in (derived from its mode layout).
template <typename Scalar>
FormId form_of(const DomainGrid<Scalar>& g) {
  const ModeKind col = content_class(g.col().kind);
  const ModeKind outer = content_class(g.outer().kind);
  for (int f = 0; f < 6; ++f) {
    if (kFormTable[f].col == col && kFormTable[f].outer == outer)
      return static_cast<FormId>(f + 1);
  }
  throw ModeMismatch("grid layout matches no canonical form");  // unreachable
}

/// Vector transpose: rearranges the grid's cells into the layout of `target`.
/// Pure permutation of cells; every mode keeps its kind and size.
template <typename Scalar>
DomainGrid<Scalar> vt(const DomainGrid<Scalar>& g, FormId target) {
  const FormSpec& spec = form_spec(target);
  const ModeLabel& s_mode = g.mode_of_class(ModeKind::Subject);
  const ModeLabel& p_mode = g.mode_of_class(ModeKind::Pose);
  const ModeLabel& i_mode = g.mode_of_class(ModeKind::Illum);

  auto pick = [&](ModeKind cls) -> const ModeLabel& {
    if (cls == ModeKind::Subject) return s_mode;
    if (cls == ModeKind::Pose) return p_mode;
    return i_mode;
  };
  DomainGrid<Scalar> out(g.cell_dim(), pick(spec.outer), pick(spec.inner), pick(spec.col));

  // Positions of the (subject, pose, illum) indices in a grid's (outer, inner,
  // column) slots, as a selector returning the right one of (s, p, i).
  auto slot = [](const DomainGrid<Scalar>& grid) {
    std::array<int, 3> at{};  // 0 = outer, 1 = inner, 2 = col -> class 0/1/2
    auto cls_id = [](ModeKind k) {
      const ModeKind c = content_class(k);
      return c == ModeKind::Subject ? 0 : (c == ModeKind::Pose ? 1 : 2);
    };
    at[0] = cls_id(grid.outer().kind);
    at[1] = cls_id(grid.inner().kind);
    at[2] = cls_id(grid.col().kind);
    return at;
  };
  const auto src_slot = slot(g);
  const auto dst_slot = slot(out);

  for (Index s = 0; s < s_mode.size; ++s)
    for (Index p = 0; p < p_mode.size; ++p)
      for (Index i = 0; i < i_mode.size; ++i) {
        const std::array<Index, 3> by_class{s, p, i};
        out.cell(by_class[dst_slot[0]], by_class[dst_slot[1]], by_class[dst_slot[2]]) =
            g.cell(by_class[src_slot[0]], by_class[src_slot[1]], by_class[src_slot[2]]);
      }
  return out;
}

/// Contracts the mode with exactly kind `kind` against `codes`
/// (rows = current mode size, cols = new mode size):
///   out[..., m, ...] = sum_t g[..., t, ...] * codes(t, m).
/// The mode keeps its position but flips kind (atoms -> content and back).
template <typename Scalar, typename Derived>
DomainGrid<Scalar> contract(const DomainGrid<Scalar>& g, ModeKind kind,
                            const Eigen::MatrixBase<Derived>& codes_expr) {
  static_assert(std::is_same_v<typename Derived::Scalar, Scalar>,
                "code matrix scalar must match the grid scalar");
  const MatrixX<Scalar> codes = codes_expr;
  const ModeLabel& mode = g.mode_of_kind(kind);
  if (codes.rows() != mode.size) {
    throw DimensionMismatch(std::string("contract over ") + to_string(kind) + ": mode size " +
                            std::to_string(mode.size) + " vs codes rows " +
                            std::to_string(codes.rows()));
  }
  const ModeLabel replaced{flipped(kind), codes.cols()};
  const Index n = g.cell_dim();

  if (g.col().kind == kind) {
    DomainGrid<Scalar> out(n, g.outer(), g.inner(), replaced, g.data() * codes);
    return out;
  }
  if (g.outer().kind == kind) {
    DomainGrid<Scalar> out(n, replaced, g.inner(), g.col());
    const Index block = n * g.inner().size;  // rows per outer index
    for (Index m = 0; m < codes.cols(); ++m)
      for (Index t = 0; t < mode.size; ++t)
        out.data().middleRows(m * block, block) += codes(t, m) * g.data().middleRows(t * block, block);
    return out;
  }
  // inner mode
  DomainGrid<Scalar> out(n, g.outer(), replaced, g.col());
  for (Index u = 0; u < g.outer().size; ++u)
    for (Index m = 0; m < codes.cols(); ++m)
      for (Index t = 0; t < mode.size; ++t)
        out.data().middleRows((u * codes.cols() + m) * n, n) +=
            codes(t, m) * g.data().middleRows((u * mode.size + t) * n, n);
  return out;
}

/// vt into `form`, then contract that form's column mode with `codes`.
/// This is the single step every staged factorization is made of: rearrange so
/// the wanted mode spans the columns, then right-multiply by a code matrix.
template <typename Scalar, typename Derived>
DomainGrid<Scalar> apply_in_form(const DomainGrid<Scalar>& g, FormId form,
                                 const Eigen::MatrixBase<Derived>& codes) {
  DomainGrid<Scalar> r = vt(g, form);
  return contract(r, r.col().kind, codes);
}

// ---------------------------------------------------------------------------
// Base dictionary
// ---------------------------------------------------------------------------

/// Flat 4-way array with the first index fastest.
template <typename Scalar>
class Tensor4 {
 public:
  Tensor4() : dims_{0, 0, 0, 0} {}
  Tensor4(Index d0, Index d1, Index d2, Index d3) : dims_{d0, d1, d2, d3} {
    data_ = VectorX<Scalar>::Zero(d0 * d1 * d2 * d3);
  }

  Index dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
  Index size() const { return data_.size(); }

  Scalar operator()(Index i0, Index i1, Index i2, Index i3) const {
    return data_[flat(i0, i1, i2, i3)];
  }
  Scalar& operator()(Index i0, Index i1, Index i2, Index i3) {
    return data_[flat(i0, i1, i2, i3)];
  }

  const VectorX<Scalar>& vec() const { return data_; }
  VectorX<Scalar>& vec() { return data_; }

 private:
  Index flat(Index i0, Index i1, Index i2, Index i3) const {
    assert(i0 >= 0 && i0 < dims_[0] && i1 >= 0 && i1 < dims_[1] && i2 >= 0 && i2 < dims_[2] &&
           i3 >= 0 && i3 < dims_[3]);
    return i0 + dims_[0] * (i1 + dims_[1] * (i2 + dims_[2] * i3));
  }

  std::array<Index, 4> dims_;
  VectorX<Scalar> data_;
};

/// 4-way base dictionary D[pixel, pose atom, subject atom, illum atom].
template <typename Scalar>
struct BaseDictionary {
  Tensor4<Scalar> data;

  BaseDictionary() = default;
  BaseDictionary(Index n, Index d_a, Index d_b, Index d_c) : data(n, d_a, d_b, d_c) {}

  Index n() const { return data.dim(0); }
  Index d_a() const { return data.dim(1); }  // pose atoms
  Index d_b() const { return data.dim(2); }  // subject atoms
  Index d_c() const { return data.dim(3); }  // illum atoms

  Scalar operator()(Index p, Index a, Index b, Index c) const { return data(p, a, b, c); }
  Scalar& operator()(Index p, Index a, Index b, Index c) { return data(p, a, b, c); }
};

using BaseDictionaryd = BaseDictionary<double>;

/// Lays the base dictionary out as a grid over its three atom modes.
template <typename Scalar>
DomainGrid<Scalar> as_grid(const BaseDictionary<Scalar>& d, FormId form) {
  const ModeLabel a_mode{ModeKind::PoseAtom, d.d_a()};
  const ModeLabel b_mode{ModeKind::SubjectAtom, d.d_b()};
  const ModeLabel i_mode{ModeKind::IllumAtom, d.d_c()};
  const FormSpec& spec = form_spec(form);
  auto pick = [&](ModeKind cls) {
    if (cls == ModeKind::Subject) return b_mode;
    if (cls == ModeKind::Pose) return a_mode;
    return i_mode;
  };
  DomainGrid<Scalar> out(d.n(), pick(spec.outer), pick(spec.inner), pick(spec.col));

  auto slot = [&](ModeKind cls, Index a, Index b, Index c) {
    if (cls == ModeKind::Subject) return b;
    if (cls == ModeKind::Pose) return a;
    return c;
  };
  for (Index a = 0; a < d.d_a(); ++a)
    for (Index b = 0; b < d.d_b(); ++b)
      for (Index c = 0; c < d.d_c(); ++c) {
        auto cell = out.cell(slot(spec.outer, a, b, c), slot(spec.inner, a, b, c),
                             slot(spec.col, a, b, c));
        for (Index p = 0; p < d.n(); ++p) cell(p, 0) = d(p, a, b, c);
      }
  return out;
}

/// Inverse of as_grid: repacks a grid whose three modes are all atom kinds.
template <typename Scalar>
BaseDictionary<Scalar> from_grid(const DomainGrid<Scalar>& g) {
  if (!is_atom(g.outer().kind) || !is_atom(g.inner().kind) || !is_atom(g.col().kind))
    throw ModeMismatch("base dictionary grid must carry three atom modes");
  const ModeLabel& a_mode = g.mode_of_kind(ModeKind::PoseAtom);
  const ModeLabel& b_mode = g.mode_of_kind(ModeKind::SubjectAtom);
  const ModeLabel& i_mode = g.mode_of_kind(ModeKind::IllumAtom);
  BaseDictionary<Scalar> d(g.cell_dim(), a_mode.size, b_mode.size, i_mode.size);

  const DomainGrid<Scalar> g1 = vt(g, FormId::F1);  // cols subject atoms, rows (pose, illum)
  for (Index a = 0; a < d.d_a(); ++a)
    for (Index b = 0; b < d.d_b(); ++b)
      for (Index c = 0; c < d.d_c(); ++c) {
        const auto cell = g1.cell(a, c, b);
        for (Index p = 0; p < d.n(); ++p) d(p, a, b, c) = cell(p, 0);
      }
  return d;
}

/// y[p] = sum_{a,b,c} D[p,a,b,c] * pose[a] * subject[b] * illum[c].
template <typename Scalar, typename DA, typename DB, typename DC>
VectorX<Scalar> synthesize(const BaseDictionary<Scalar>& d, const Eigen::MatrixBase<DA>& pose_expr,
                           const Eigen::MatrixBase<DB>& subject_expr,
                           const Eigen::MatrixBase<DC>& illum_expr) {
  const VectorX<Scalar> pose = pose_expr;
  const VectorX<Scalar> subject = subject_expr;
  const VectorX<Scalar> illum = illum_expr;
  if (pose.size() != d.d_a() || subject.size() != d.d_b() || illum.size() != d.d_c())
    throw DimensionMismatch("synthesize: code lengths must match dictionary dims");
  VectorX<Scalar> y = VectorX<Scalar>::Zero(d.n());
  for (Index c = 0; c < d.d_c(); ++c) {
    if (illum[c] == Scalar(0)) continue;
    for (Index b = 0; b < d.d_b(); ++b) {
      if (subject[b] == Scalar(0)) continue;
      const Scalar bc = subject[b] * illum[c];
      for (Index a = 0; a < d.d_a(); ++a) {
        if (pose[a] == Scalar(0)) continue;
        const Scalar w = pose[a] * bc;
        for (Index p = 0; p < d.n(); ++p) y[p] += w * d(p, a, b, c);
      }
    }
  }
  return y;
}

/// Full grid synthesis staged as three code applications, delivered in `form`.
/// The application order is the one whose final rearrangement lands exactly in
/// the requested canonical layout; all six agree cell-for-cell.
template <typename Scalar, typename DA, typename DB, typename DC>
DomainGrid<Scalar> staged_synthesis(const BaseDictionary<Scalar>& d,
                                    const Eigen::MatrixBase<DA>& a_expr,
                                    const Eigen::MatrixBase<DB>& b_expr,
                                    const Eigen::MatrixBase<DC>& c_expr, FormId form) {
  const MatrixX<Scalar> a = a_expr;
  const MatrixX<Scalar> b = b_expr;
  const MatrixX<Scalar> c = c_expr;
  struct Step {
    FormId form;
    int code;  // 0 = pose (a), 1 = subject (b), 2 = illum (c)
  };
  // Stage orders per target form; the last step's form is the target itself.
  static constexpr std::array<std::array<Step, 3>, 6> orders = {{
      {{{FormId::F3, 2}, {FormId::F2, 0}, {FormId::F1, 1}}},
      {{{FormId::F3, 2}, {FormId::F1, 1}, {FormId::F2, 0}}},
      {{{FormId::F1, 1}, {FormId::F2, 0}, {FormId::F3, 2}}},
      {{{FormId::F1, 1}, {FormId::F3, 2}, {FormId::F4, 0}}},
      {{{FormId::F2, 0}, {FormId::F1, 1}, {FormId::F5, 2}}},
      {{{FormId::F2, 0}, {FormId::F3, 2}, {FormId::F6, 1}}},
  }};
  const auto& order = orders[static_cast<std::size_t>(static_cast<int>(form) - 1)];
  DomainGrid<Scalar> g = as_grid(d, order[0].form);
  for (const Step& step : order) {
    const MatrixX<Scalar>& codes = step.code == 0 ? a : (step.code == 1 ? b : c);
    g = apply_in_form(g, step.form, codes);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Regularized pseudo-inverse
// ---------------------------------------------------------------------------

/// Ridge value equal to `rel` times the mean diagonal of the Gram matrix of m.
template <typename Derived>
typename Derived::Scalar relative_ridge(const Eigen::MatrixBase<Derived>& m,
                                        typename Derived::Scalar rel) {
  const Index gram_dim = std::min(m.rows(), m.cols());
  if (gram_dim == 0) return typename Derived::Scalar(0);
  return rel * m.squaredNorm() / static_cast<typename Derived::Scalar>(gram_dim);
}

/// Regularized Moore-Penrose pseudo-inverse (cols x rows).  Uses the Gram
/// matrix on the smaller side:  (m'm + ridge I)^-1 m'  when rows >= cols,
/// otherwise  m' (mm' + ridge I)^-1.  With ridge 0 a numerically singular Gram
/// matrix raises SingularMatrix instead of returning garbage.
template <typename Derived>
MatrixX<typename Derived::Scalar> ridge_pinv(
    const Eigen::MatrixBase<Derived>& m_expr,
    typename Derived::Scalar ridge = typename Derived::Scalar(0)) {
  using Scalar = typename Derived::Scalar;
  const MatrixX<Scalar> m = m_expr;
  if (ridge < Scalar(0)) throw ConfigError("ridge must be nonnegative");
  if (m.rows() == 0 || m.cols() == 0) throw DimensionMismatch("ridge_pinv of empty matrix");

  const bool tall = m.rows() >= m.cols();
  MatrixX<Scalar> gram = tall ? MatrixX<Scalar>(m.transpose() * m)
                              : MatrixX<Scalar>(m * m.transpose());
  gram.diagonal().array() += ridge;

  Eigen::LDLT<MatrixX<Scalar>> ldlt(gram);
  if (ridge == Scalar(0)) {
    const auto dvec = ldlt.vectorD();
    const Scalar dmax = dvec.maxCoeff();
    const Scalar dmin = dvec.minCoeff();
    const Scalar limit = Scalar(1) / std::numeric_limits<Scalar>::epsilon();
    if (!(dmin > Scalar(0)) || !(dmax / dmin < limit))
      throw SingularMatrix("Gram matrix numerically singular at ridge 0");
  }
  if (tall) return ldlt.solve(m.transpose());
  return m.transpose() * ldlt.solve(MatrixX<Scalar>::Identity(gram.rows(), gram.cols()));
}

}  // namespace dadl
