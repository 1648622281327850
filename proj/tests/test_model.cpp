#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "dadl/ksvd.hpp"
#include "dadl/model.hpp"
#include "dadl/synthetic.hpp"

using dadl::DadlConfig;
using dadl::DadlModel;
using dadl::DomainGrid;
using dadl::FormId;
using dadl::Index;
using dadl::ModeKind;
using dadl::ModeLabel;
using dadl::SynthData;
using dadl::SynthSpec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Tolerances are pinned well above the values measured on these seeds so the
// checks stay robust to harmless floating-point drift.
constexpr double kTrainTol = 1e-3;     // measured 4.8e-08
constexpr double kCellResidual = 1e-6; // relative; measured 1.6e-15
constexpr double kCosineFloor = 0.99;  // signed; measured 1.0
constexpr int kIterCap = 10;           // measured max 6
constexpr double kRoundTrip = 1e-4;    // relative; measured 2.2e-15
constexpr double kSwapTol = 1e-2;      // relative; measured 4.9e-07
constexpr double kMirrorTol = 1e-6;    // measured 1.6e-15
constexpr double kSummation = 1e-12;   // contraction vs. explicit loops

double cosine(const VectorXd& u, const VectorXd& v) {
  const double d = u.norm() * v.norm();
  return d == 0.0 ? 0.0 : u.dot(v) / d;
}

Index nnz(const VectorXd& v) {
  Index count = 0;
  for (Index i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) ++count;
  return count;
}

std::set<Index> support_of(const VectorXd& v) {
  std::set<Index> s;
  for (Index i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) s.insert(i);
  return s;
}

// One planted grid (4 subjects x 3 poses x 3 illuminations, 16 pixels) and the
// model learned from it, shared by the cases below.  Learning is deterministic,
// so computing it once keeps the suite fast without coupling the checks.
struct SmallWorld {
  SynthData<double> data;
  DadlModel<double> model;
};

const SmallWorld& small_world() {
  static const SmallWorld world = [] {
    SynthSpec sp;
    sp.n = 16;
    sp.subjects = 4;
    sp.poses = 3;
    sp.illums = 3;
    sp.d_a = 3;
    sp.d_b = 4;
    sp.d_c = 3;
    sp.t_a = 2;
    sp.t_b = 2;
    sp.t_c = 2;
    sp.seed = 0;
    SynthData<double> data = dadl::generate<double>(sp);
    DadlConfig cfg;
    cfg.d_a = 3;
    cfg.d_b = 4;
    cfg.d_c = 3;
    cfg.t_a = 2;
    cfg.t_b = 2;
    cfg.t_c = 2;
    cfg.outer_iters = 5;
    cfg.seed = 0;
    DadlModel<double> model = dadl::learn_base_dictionary(data.grid, cfg);
    return SmallWorld{std::move(data), std::move(model)};
  }();
  return world;
}

VectorXd render(const DadlModel<double>& m, Index j, Index k, Index l) {
  return dadl::synthesize(m.base, VectorXd(m.pose_codes.col(j)),
                          VectorXd(m.subject_codes.col(k)),
                          VectorXd(m.illum_codes.col(l)));
}

}  // namespace

TEST_CASE("learning fits a planted grid and keeps the best model per round") {
  const auto& [data, model] = small_world();

  REQUIRE(model.training_errors.size() == 5);
  CHECK(model.training_errors.back() <= kTrainTol);
  for (std::size_t i = 1; i < model.training_errors.size(); ++i)
    CHECK(model.training_errors[i] <= model.training_errors[i - 1]);

  // shapes, labels, and config echo
  CHECK(model.n() == 16);
  CHECK(model.poses() == 3);
  CHECK(model.subjects() == 4);
  CHECK(model.illums() == 3);
  CHECK(model.pose_codes.rows() == 3);
  CHECK(model.subject_codes.rows() == 4);
  CHECK(model.illum_codes.rows() == 3);
  CHECK(model.base.d_a() == 3);
  CHECK(model.base.d_b() == 4);
  CHECK(model.base.d_c() == 3);
  CHECK(model.config.t_b == 2);
  REQUIRE(model.pose_labels.size() == 3);
  REQUIRE(model.subject_labels.size() == 4);
  REQUIRE(model.illum_labels.size() == 3);
  CHECK(model.pose_labels.front() == "p1");
  CHECK(model.subject_labels.back() == "s4");
  CHECK(model.illum_labels[1] == "i2");

  // every stored code column respects its sparsity cap
  for (Index j = 0; j < model.pose_codes.cols(); ++j)
    CHECK(nnz(model.pose_codes.col(j)) <= 2);
  for (Index k = 0; k < model.subject_codes.cols(); ++k)
    CHECK(nnz(model.subject_codes.col(k)) <= 2);
  for (Index l = 0; l < model.illum_codes.cols(); ++l)
    CHECK(nnz(model.illum_codes.col(l)) <= 2);

  // the recorded final error matches a direct re-rendering of the grid
  double sq = 0.0;
  for (Index k = 0; k < 4; ++k)
    for (Index j = 0; j < 3; ++j)
      for (Index l = 0; l < 3; ++l)
        sq += (render(model, j, k, l) - VectorXd(data.grid.cell(j, l, k))).squaredNorm();
  const double direct = std::sqrt(sq) / data.grid.data().norm();
  CHECK(direct == doctest::Approx(model.training_errors.back()).epsilon(1e-9));
}

TEST_CASE("decomposition recovers the codes of every training cell") {
  const auto& [data, model] = small_world();

  for (Index k = 0; k < 4; ++k)
    for (Index j = 0; j < 3; ++j)
      for (Index l = 0; l < 3; ++l) {
        CAPTURE(k);
        CAPTURE(j);
        CAPTURE(l);
        const VectorXd y = render(model, j, k, l);
        const auto dec = dadl::decompose(y, model);

        CHECK(dec.converged);
        CHECK(dec.iterations_used <= kIterCap);
        CHECK(dec.iterations_used <= model.config.coding_iters);
        CHECK(dec.residual_norm >= 0.0);
        CHECK(dec.residual_norm <= kCellResidual * y.norm());

        // signed agreement with the stored columns (gauge included)
        CHECK(cosine(dec.pose.values, VectorXd(model.pose_codes.col(j))) >= kCosineFloor);
        CHECK(cosine(dec.subject.values, VectorXd(model.subject_codes.col(k))) >= kCosineFloor);
        CHECK(cosine(dec.illum.values, VectorXd(model.illum_codes.col(l))) >= kCosineFloor);

        // sparsity caps hold for the recovered codes
        CHECK(nnz(dec.pose.values) <= 2);
        CHECK(nnz(dec.subject.values) <= 2);
        CHECK(nnz(dec.illum.values) <= 2);

        // the reported residual matches a re-synthesis of the codes
        const VectorXd back =
            dadl::synthesize(model.base, dec.pose.values, dec.subject.values, dec.illum.values);
        CHECK((y - back).norm() <= dec.residual_norm + 1e-12 * y.norm());

        // sweep objectives never increase (measured worst uptick 8.9e-17),
        // and the final residual is at least as good as the last sweep
        REQUIRE(!dec.objective.empty());
        for (std::size_t i = 1; i < dec.objective.size(); ++i)
          CHECK(dec.objective[i] <= dec.objective[i - 1] + 1e-9 * y.norm());
        CHECK(dec.residual_norm <= dec.objective.back() + 1e-12 * y.norm());
      }
}

TEST_CASE("decomposed subject codes compose back under label selection") {
  const auto& [data, model] = small_world();

  for (Index k = 0; k < 4; ++k)
    for (Index j = 0; j < 3; ++j)
      for (Index l = 0; l < 3; ++l) {
        CAPTURE(k);
        CAPTURE(j);
        CAPTURE(l);
        const VectorXd y = render(model, j, k, l);
        const auto dec = dadl::decompose(y, model);
        const VectorXd again =
            dadl::compose(model, dec.subject.values, "p" + std::to_string(j + 1),
                          "i" + std::to_string(l + 1));
        CHECK((again - y).norm() <= kRoundTrip * y.norm());
      }
}

TEST_CASE("composition selectors agree: explicit codes, indices, labels") {
  const auto& [data, model] = small_world();
  const VectorXd b = model.subject_codes.col(0);

  const VectorXd by_codes = dadl::compose(model, b, VectorXd(model.pose_codes.col(1)),
                                          VectorXd(model.illum_codes.col(2)));
  const VectorXd by_index = dadl::compose(model, b, Index(1), Index(2));
  const VectorXd by_label = dadl::compose(model, b, std::string("p2"), std::string("i3"));
  CHECK((by_codes - by_index).norm() == 0.0);
  CHECK((by_index - by_label).norm() == 0.0);
}

TEST_CASE("pose and illum marginalizations match explicit summation") {
  const auto& [data, model] = small_world();
  const Index n = 16, d_a = 3, d_b = 4, d_c = 3, J = 3, L = 3;

  const DomainGrid<double> mi = dadl::marginalize_illum(model);
  CHECK(mi.cell_dim() == n);
  CHECK(mi.col().kind == ModeKind::PoseAtom);
  CHECK(mi.col().size == d_a);
  CHECK(mi.outer().kind == ModeKind::Illum);
  CHECK(mi.outer().size == L);
  CHECK(mi.inner().kind == ModeKind::SubjectAtom);
  CHECK(mi.inner().size == d_b);
  for (Index l = 0; l < L; ++l)
    for (Index beta = 0; beta < d_b; ++beta)
      for (Index alpha = 0; alpha < d_a; ++alpha)
        for (Index p = 0; p < n; ++p) {
          double want = 0.0;
          for (Index gamma = 0; gamma < d_c; ++gamma)
            want += model.base(p, alpha, beta, gamma) * model.illum_codes(gamma, l);
          CHECK(std::abs(mi.cell(l, beta, alpha)(p, 0) - want) <= kSummation);
        }

  const DomainGrid<double> mp = dadl::marginalize_pose(model);
  CHECK(mp.cell_dim() == n);
  CHECK(mp.col().kind == ModeKind::IllumAtom);
  CHECK(mp.col().size == d_c);
  CHECK(mp.outer().kind == ModeKind::SubjectAtom);
  CHECK(mp.outer().size == d_b);
  CHECK(mp.inner().kind == ModeKind::Pose);
  CHECK(mp.inner().size == J);
  for (Index beta = 0; beta < d_b; ++beta)
    for (Index j = 0; j < J; ++j)
      for (Index gamma = 0; gamma < d_c; ++gamma)
        for (Index p = 0; p < n; ++p) {
          double want = 0.0;
          for (Index alpha = 0; alpha < d_a; ++alpha)
            want += model.base(p, alpha, beta, gamma) * model.pose_codes(alpha, j);
          CHECK(std::abs(mp.cell(beta, j, gamma)(p, 0) - want) <= kSummation);
        }
}

TEST_CASE("marginalizing one-hot illumination codes slices the base") {
  DadlModel<double> model = small_world().model;
  model.illum_codes = MatrixXd::Identity(3, 3);

  const DomainGrid<double> mi = dadl::marginalize_illum(model);
  for (Index l = 0; l < 3; ++l)
    for (Index beta = 0; beta < 4; ++beta)
      for (Index alpha = 0; alpha < 3; ++alpha)
        for (Index p = 0; p < 16; ++p)
          CHECK(mi.cell(l, beta, alpha)(p, 0) == model.base(p, alpha, beta, l));
}

TEST_CASE("illumination swap matches the generator's rendering") {
  const auto& [data, model] = small_world();
  const auto& truth = data.truth;

  for (Index k = 0; k < 4; ++k)
    for (Index j = 0; j < 3; ++j) {
      CAPTURE(k);
      CAPTURE(j);
      const VectorXd y = render(truth, j, k, 0);
      const auto dec = dadl::decompose(y, model);
      const VectorXd swapped = dadl::compose(model, dec.subject.values, Index(j), Index(2));
      const VectorXd want = render(truth, j, k, 2);
      CHECK((swapped - want).norm() <= kSwapTol * want.norm());
    }
}

TEST_CASE("decomposition is deterministic and its supports are seed-stable") {
  const auto& [data, model] = small_world();
  DadlModel<double> reseeded = model;
  reseeded.config.seed = 123;

  for (Index k = 0; k < 4; ++k)
    for (Index j = 0; j < 3; ++j)
      for (Index l = 0; l < 3; ++l) {
        CAPTURE(k);
        CAPTURE(j);
        CAPTURE(l);
        const VectorXd y = render(model, j, k, l);
        const auto d1 = dadl::decompose(y, model);
        const auto d2 = dadl::decompose(y, model);
        CHECK((d1.pose.values - d2.pose.values).norm() == 0.0);
        CHECK((d1.subject.values - d2.subject.values).norm() == 0.0);
        CHECK((d1.illum.values - d2.illum.values).norm() == 0.0);

        const auto d3 = dadl::decompose(y, reseeded);
        CHECK(support_of(d3.subject.values) == support_of(d1.subject.values));
      }
}

TEST_CASE("a dead subject atom is skipped by pursuit") {
  DadlModel<double> model = small_world().model;
  for (Index p = 0; p < 16; ++p)
    for (Index alpha = 0; alpha < 3; ++alpha)
      for (Index gamma = 0; gamma < 3; ++gamma) model.base(p, alpha, 0, gamma) = 0.0;

  const VectorXd y = render(model, 0, 1, 1);
  const auto dec = dadl::decompose(y, model);
  CHECK(dec.subject.values[0] == 0.0);
  CHECK(dec.residual_norm <= kCellResidual * y.norm());
}

TEST_CASE("a zero image decomposes to zero codes") {
  const auto& [data, model] = small_world();
  const VectorXd y = VectorXd::Zero(16);
  const auto dec = dadl::decompose(y, model);
  CHECK(dec.subject.values.norm() == 0.0);
  CHECK(dec.residual_norm == 0.0);
  CHECK(dec.converged);
}

TEST_CASE("single-illumination training matches a flat bilinear reference") {
  SynthSpec sp;
  sp.n = 12;
  sp.subjects = 5;
  sp.poses = 4;
  sp.illums = 1;
  sp.d_a = 3;
  sp.d_b = 5;
  sp.d_c = 1;
  sp.t_a = 2;
  sp.t_b = 3;
  sp.t_c = 1;
  sp.seed = 7;
  const SynthData<double> data = dadl::generate<double>(sp);
  DadlConfig cfg;
  cfg.d_a = 3;
  cfg.d_b = 5;
  cfg.d_c = 1;
  cfg.t_a = 2;
  cfg.t_b = 3;
  cfg.t_c = 1;
  cfg.outer_iters = 3;
  cfg.seed = 7;
  const DadlModel<double> model = dadl::learn_base_dictionary(data.grid, cfg);
  const double e_tri = model.training_errors.back();

  // With one illumination the tensor alternation collapses to a bilinear
  // dictionary problem on flat matrices: the illum stage contributes only a
  // scalar, which cancels through the scale-relative pseudo-inverse.  This
  // mirror re-runs the rounds with plain loops and matrix products.
  const Index n = 12, K = 5, J = 4, d_a = 3, d_b = 5;
  const MatrixXd ysub = dadl::vt(data.grid, FormId::F1).data();  // rows j*n+p, cols k
  auto pinv = [](const MatrixXd& m) {
    return dadl::ridge_pinv(m, dadl::relative_ridge(m, 1e-8));
  };
  dadl::KsvdConfig kc;
  kc.iterations = cfg.ksvd_iters;
  kc.seed = 7;
  kc.num_atoms = d_b;
  kc.sparsity = 3;
  const auto boot = dadl::ksvd_learn<double>(ysub, kc, MatrixXd());
  MatrixXd b_codes = boot.codes;
  MatrixXd warm_a, warm_b;
  double e_best = std::numeric_limits<double>::infinity();
  for (int round = 0; round < 3; ++round) {
    // pose stage: peel the subject codes, regroup rows to (subject-atom, pixel)
    const MatrixXd peeled = ysub * pinv(b_codes);  // rows j*n+p, cols beta
    MatrixXd regrouped(d_b * n, J);
    for (Index j = 0; j < J; ++j)
      for (Index beta = 0; beta < d_b; ++beta)
        for (Index p = 0; p < n; ++p) regrouped(beta * n + p, j) = peeled(j * n + p, beta);
    kc.num_atoms = d_a;
    kc.sparsity = 2;
    const auto pose = dadl::ksvd_learn<double>(regrouped, kc, warm_a);
    warm_a = pose.dict;

    // subject stage: the single-illumination peel rescales the same flat data
    kc.num_atoms = d_b;
    kc.sparsity = 3;
    const auto subj = dadl::ksvd_learn<double>(ysub, kc, warm_b);
    warm_b = subj.dict;
    b_codes = subj.codes;

    // recovery: peel the pose codes off the subject dictionary and re-render
    const MatrixXd aa = pinv(pose.codes) * pose.codes;  // J x J
    MatrixXd rebuilt = MatrixXd::Zero(J * n, K);
    for (Index j = 0; j < J; ++j) {
      MatrixXd slice = MatrixXd::Zero(n, d_b);
      for (Index jp = 0; jp < J; ++jp)
        for (Index beta = 0; beta < d_b; ++beta)
          for (Index p = 0; p < n; ++p) slice(p, beta) += subj.dict(jp * n + p, beta) * aa(jp, j);
      rebuilt.block(j * n, 0, n, K) = slice * b_codes;
    }
    e_best = std::min(e_best, (ysub - rebuilt).norm() / ysub.norm());
  }
  CHECK(std::abs(e_tri - e_best) <= kMirrorTol);
}

TEST_CASE("a larger configuration is accepted and echoed") {
  SynthSpec sp;
  sp.n = 8;
  sp.subjects = 68;
  sp.poses = 10;
  sp.illums = 9;
  sp.d_a = 10;
  sp.d_b = 68;
  sp.d_c = 9;
  sp.t_a = 8;
  sp.t_b = 20;
  sp.t_c = 9;
  sp.seed = 1;
  const SynthData<double> data = dadl::generate<double>(sp);
  DadlConfig cfg;
  cfg.d_a = 10;
  cfg.d_b = 68;
  cfg.d_c = 9;
  cfg.t_a = 8;
  cfg.t_b = 20;
  cfg.t_c = 9;
  cfg.outer_iters = 1;
  cfg.ksvd_iters = 1;
  cfg.seed = 1;
  const DadlModel<double> model = dadl::learn_base_dictionary(data.grid, cfg);
  CHECK(model.n() == 8);
  CHECK(model.base.d_a() == 10);
  CHECK(model.base.d_b() == 68);
  CHECK(model.base.d_c() == 9);
  CHECK(model.poses() == 10);
  CHECK(model.subjects() == 68);
  CHECK(model.illums() == 9);
  CHECK(model.pose_labels.size() == 10);
  CHECK(model.subject_labels.size() == 68);
  CHECK(model.illum_labels.size() == 9);
  CHECK(model.training_errors.size() == 1);
}

TEST_CASE("learning rejects invalid configurations and degenerate input") {
  const auto& [data, model] = small_world();

  DadlConfig cfg = model.config;
  cfg.t_a = cfg.d_a + 1;  // cap above the atom count
  CHECK_THROWS_AS(dadl::learn_base_dictionary(data.grid, cfg), dadl::ConfigError);

  cfg = model.config;
  cfg.d_a = 4;  // more pose atoms than training poses
  CHECK_THROWS_AS(dadl::learn_base_dictionary(data.grid, cfg), dadl::ConfigError);

  cfg = model.config;
  cfg.outer_iters = 0;
  CHECK_THROWS_AS(dadl::learn_base_dictionary(data.grid, cfg), dadl::ConfigError);

  cfg = model.config;
  cfg.ridge = -1.0;
  CHECK_THROWS_AS(dadl::learn_base_dictionary(data.grid, cfg), dadl::ConfigError);

  // an all-zero grid has singular code Grams; with no ridge that must surface
  DomainGrid<double> zero_grid(4, ModeLabel{ModeKind::Pose, 2}, ModeLabel{ModeKind::Illum, 2},
                               ModeLabel{ModeKind::Subject, 2}, MatrixXd::Zero(16, 2));
  DadlConfig zc;
  zc.d_a = 2;
  zc.d_b = 2;
  zc.d_c = 2;
  zc.t_a = 1;
  zc.t_b = 1;
  zc.t_c = 1;
  zc.ridge = 0.0;
  CHECK_THROWS_AS(dadl::learn_base_dictionary(zero_grid, zc), dadl::SingularMatrix);
}

TEST_CASE("decomposition and composition validate their inputs") {
  const auto& [data, model] = small_world();

  CHECK_THROWS_AS(dadl::decompose(VectorXd(VectorXd::Zero(15)), model), dadl::DimensionMismatch);

  DadlModel<double> bad = model;
  bad.config.coding_iters = 0;
  CHECK_THROWS_AS(dadl::decompose(VectorXd(VectorXd::Zero(16)), bad), dadl::ConfigError);

  const VectorXd b = model.subject_codes.col(0);
  CHECK_THROWS_AS(dadl::compose(model, b, Index(3), Index(0)), dadl::ConfigError);
  CHECK_THROWS_AS(dadl::compose(model, b, Index(0), Index(-1)), dadl::ConfigError);
  CHECK_THROWS_AS(dadl::compose(model, b, std::string("p9"), std::string("i1")),
                  dadl::UnknownLabel);
  CHECK_THROWS_AS(dadl::compose(model, b, std::string("p1"), std::string("nope")),
                  dadl::UnknownLabel);
}
