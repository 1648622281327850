#pragma once

// Multilinear (N-mode SVD) baseline over the same image grid: orthogonal mode
// matrices from the left singular vectors of each mode flattening, a core
// tensor by inverse projection, and subject extraction by exhaustively
// projecting a probe onto the candidate basis of every (pose, illum) pair.

#include <array>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dadl/errors.hpp"
#include "dadl/multiarray.hpp"

namespace dadl {

/// Orthogonal multilinear model of a complete image grid.  The pixel mode may
/// be truncated; the three label modes are always kept at full rank.
template <typename Scalar>
struct HosvdModel {
  Tensor4<Scalar> core;       // [pixel_rank, poses, subjects, illums]
  MatrixX<Scalar> u_pixels;   // n x pixel_rank, orthonormal columns
  MatrixX<Scalar> u_pose;     // J x J, orthogonal
  MatrixX<Scalar> u_subject;  // K x K, orthogonal
  MatrixX<Scalar> u_illum;    // L x L, orthogonal

  Index n() const { return u_pixels.rows(); }
  Index pixel_rank() const { return u_pixels.cols(); }
  Index poses() const { return u_pose.rows(); }
  Index subjects() const { return u_subject.rows(); }
  Index illums() const { return u_illum.rows(); }
};

using HosvdModeld = HosvdModel<double>;

/// Subject-coefficient readout of one probe image.
template <typename Scalar>
struct SubjectExtract {
  VectorX<Scalar> coeffs;  // length K, least-squares fit under the best basis
  Index pose = 0;          // (j, l) of the winning candidate basis
  Index illum = 0;
  Index subject = 0;        // nearest row of u_subject to the coefficients
  Scalar distance = Scalar(0);  // Euclidean distance to that row
  bool degenerate = false;      // zero probe: coefficients carry no signal
};

namespace detail {

/// t x_mode m, contracting dim(mode) against the columns of m.
template <typename Scalar>
Tensor4<Scalar> mode_product(const Tensor4<Scalar>& t, const MatrixX<Scalar>& m, int mode) {
  const std::array<Index, 4> d{t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
  std::array<Index, 4> od = d;
  od[static_cast<std::size_t>(mode)] = m.rows();
  Tensor4<Scalar> out(od[0], od[1], od[2], od[3]);
  std::array<Index, 4> ix{};
  for (ix[3] = 0; ix[3] < od[3]; ++ix[3])
    for (ix[2] = 0; ix[2] < od[2]; ++ix[2])
      for (ix[1] = 0; ix[1] < od[1]; ++ix[1])
        for (ix[0] = 0; ix[0] < od[0]; ++ix[0]) {
          std::array<Index, 4> src = ix;
          Scalar acc = Scalar(0);
          for (Index s = 0; s < d[static_cast<std::size_t>(mode)]; ++s) {
            src[static_cast<std::size_t>(mode)] = s;
            acc += m(ix[static_cast<std::size_t>(mode)], s) * t(src[0], src[1], src[2], src[3]);
          }
          out(ix[0], ix[1], ix[2], ix[3]) = acc;
        }
  return out;
}

/// Mode-m flattening: rows index dim(mode), columns the remaining modes in
/// increasing order with the lowest mode fastest.
template <typename Scalar>
MatrixX<Scalar> flattening(const Tensor4<Scalar>& t, int mode) {
  const std::array<Index, 4> d{t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
  const Index rows = d[static_cast<std::size_t>(mode)];
  const Index cols = t.size() / rows;
  MatrixX<Scalar> out(rows, cols);
  std::array<Index, 4> ix{};
  for (ix[3] = 0; ix[3] < d[3]; ++ix[3])
    for (ix[2] = 0; ix[2] < d[2]; ++ix[2])
      for (ix[1] = 0; ix[1] < d[1]; ++ix[1])
        for (ix[0] = 0; ix[0] < d[0]; ++ix[0]) {
          Index col = 0, stride = 1;
          for (int m = 0; m < 4; ++m) {
            if (m == mode) continue;
            col += ix[static_cast<std::size_t>(m)] * stride;
            stride *= d[static_cast<std::size_t>(m)];
          }
          out(ix[static_cast<std::size_t>(mode)], col) = t(ix[0], ix[1], ix[2], ix[3]);
        }
  return out;
}

/// Full orthogonal U of a (small-rowed) flattening.
template <typename Scalar>
MatrixX<Scalar> full_left_basis(const MatrixX<Scalar>& m) {
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(m, Eigen::ComputeFullU);
  return svd.matrixU();
}

}  // namespace detail

/// Decomposes the grid into a core tensor and one orthogonal matrix per mode.
/// pixel_rank <= 0 keeps the full pixel rank; label modes are never truncated.
template <typename Scalar>
HosvdModel<Scalar> hosvd(const DomainGrid<Scalar>& grid, Index pixel_rank = 0) {
  const DomainGrid<Scalar> f1 = vt(grid, FormId::F1);
  const Index n = f1.cell_dim();
  const Index J = f1.outer().size;
  const Index L = f1.inner().size;
  const Index K = f1.col().size;

  Tensor4<Scalar> data(n, J, K, L);
  for (Index j = 0; j < J; ++j)
    for (Index l = 0; l < L; ++l)
      for (Index k = 0; k < K; ++k) {
        const auto cell = f1.cell(j, l, k);
        for (Index p = 0; p < n; ++p) data(p, j, k, l) = cell(p, 0);
      }

  const Index full = std::min(n, J * K * L);
  if (pixel_rank > full)
    throw ConfigError("hosvd: pixel_rank exceeds the rank of the pixel flattening");
  const Index r_p = pixel_rank <= 0 ? full : pixel_rank;

  HosvdModel<Scalar> model;
  {
    const MatrixX<Scalar> m0 = detail::flattening(data, 0);
    Eigen::BDCSVD<MatrixX<Scalar>> svd(m0, Eigen::ComputeThinU);
    model.u_pixels = svd.matrixU().leftCols(r_p);
  }
  model.u_pose = detail::full_left_basis(detail::flattening(data, 1));
  model.u_subject = detail::full_left_basis(detail::flattening(data, 2));
  model.u_illum = detail::full_left_basis(detail::flattening(data, 3));

  model.core = detail::mode_product(data, MatrixX<Scalar>(model.u_pixels.transpose()), 0);
  model.core = detail::mode_product(model.core, MatrixX<Scalar>(model.u_pose.transpose()), 1);
  model.core = detail::mode_product(model.core, MatrixX<Scalar>(model.u_subject.transpose()), 2);
  model.core = detail::mode_product(model.core, MatrixX<Scalar>(model.u_illum.transpose()), 3);
  return model;
}

/// Re-renders the model onto a grid (columns = subjects, rows = pose, illum).
template <typename Scalar>
DomainGrid<Scalar> hosvd_reconstruct(const HosvdModel<Scalar>& model) {
  Tensor4<Scalar> data = detail::mode_product(model.core, model.u_pixels, 0);
  data = detail::mode_product(data, model.u_pose, 1);
  data = detail::mode_product(data, model.u_subject, 2);
  data = detail::mode_product(data, model.u_illum, 3);

  DomainGrid<Scalar> out(model.n(), ModeLabel{ModeKind::Pose, model.poses()},
                         ModeLabel{ModeKind::Illum, model.illums()},
                         ModeLabel{ModeKind::Subject, model.subjects()});
  for (Index j = 0; j < model.poses(); ++j)
    for (Index l = 0; l < model.illums(); ++l)
      for (Index k = 0; k < model.subjects(); ++k) {
        auto cell = out.cell(j, l, k);
        for (Index p = 0; p < model.n(); ++p) cell(p, 0) = data(p, j, k, l);
      }
  return out;
}

/// Fits the probe against the candidate basis of every (pose, illum) pair and
/// keeps the coefficient vector closest to a row of u_subject.  Ties resolve
/// to the lowest (pose, illum) and lowest subject index.
template <typename Scalar>
SubjectExtract<Scalar> tf_extract_subject(const VectorX<Scalar>& y,
                                          const HosvdModel<Scalar>& model) {
  if (y.size() != model.n())
    throw DimensionMismatch("tf_extract_subject: image length does not match the model");

  // Carry the subject mode in core coordinates so that slice (j, l) is the
  // n x K basis whose coefficients live in u_subject row space.
  Tensor4<Scalar> t = detail::mode_product(model.core, model.u_pixels, 0);
  t = detail::mode_product(t, model.u_pose, 1);
  t = detail::mode_product(t, model.u_illum, 3);

  const Index K = model.subjects();
  SubjectExtract<Scalar> best;
  Scalar best_distance = std::numeric_limits<Scalar>::infinity();
  MatrixX<Scalar> basis(model.n(), K);
  for (Index j = 0; j < model.poses(); ++j)
    for (Index l = 0; l < model.illums(); ++l) {
      for (Index k = 0; k < K; ++k)
        for (Index p = 0; p < model.n(); ++p) basis(p, k) = t(p, j, k, l);
      const VectorX<Scalar> coeffs = basis.colPivHouseholderQr().solve(y);

      Index nearest = 0;
      Scalar dist = std::numeric_limits<Scalar>::infinity();
      for (Index k = 0; k < K; ++k) {
        const Scalar d = (coeffs - model.u_subject.row(k).transpose()).norm();
        if (d < dist) {
          dist = d;
          nearest = k;
        }
      }
      if (dist < best_distance) {
        best_distance = dist;
        best.coeffs = coeffs;
        best.pose = j;
        best.illum = l;
        best.subject = nearest;
        best.distance = dist;
      }
    }
  best.degenerate = y.norm() == Scalar(0);
  return best;
}

}  // namespace dadl
