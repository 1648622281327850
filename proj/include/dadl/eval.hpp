#pragma once

// Recognition and domain-estimation metrics: nearest-code classification of
// subject/pose/illumination codes, gallery-probe recognition protocols with
// confusion matrices, and pooled code statistics across domains.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dadl/errors.hpp"
#include "dadl/model.hpp"
#include "dadl/tensorfaces.hpp"

namespace dadl {

/// Code magnitudes depend on the adapted-dictionary normalization, so cosine
/// similarity is the default matcher; Euclidean distance is kept for ablation.
enum class Metric { Cosine, Euclidean };

/// Gallery subjects can be enrolled from decompositions of gallery images or
/// straight from the code columns recorded at training time.
enum class Enrollment { GalleryCodes, TrainingCodes };

template <typename Scalar>
struct LabeledImage {
  VectorX<Scalar> image;
  std::string subject;
};

template <typename Scalar>
struct GalleryProbeProtocol {
  std::vector<LabeledImage<Scalar>> gallery;
  std::vector<LabeledImage<Scalar>> probes;
};

/// Enrolled code columns with their subject labels.
template <typename Scalar>
struct CodeTable {
  MatrixX<Scalar> codes;            // one column per enrolled code
  std::vector<std::string> labels;  // parallel to the columns
};

struct RecognitionReport {
  double rate = 0.0;
  Eigen::MatrixXi confusion;        // row: true class, column: predicted class
  std::vector<std::string> labels;  // shared row/column labels, sorted
  Index correct = 0;
  Index total = 0;
};

namespace detail {

template <typename Scalar>
Scalar cosine_similarity(const VectorX<Scalar>& u, const VectorX<Scalar>& v) {
  const Scalar d = u.norm() * v.norm();
  return d == Scalar(0) ? Scalar(0) : u.dot(v) / d;
}

}  // namespace detail

/// Index of the enrolled column best matching the probe; ties resolve to the
/// lowest index.  Cosine maximizes similarity, Euclidean minimizes distance.
template <typename Scalar>
Index nearest_code(const VectorX<Scalar>& probe, const MatrixX<Scalar>& columns,
                   Metric metric = Metric::Cosine) {
  if (columns.cols() == 0) throw EmptyGallery("nearest_code: no enrolled codes");
  if (probe.size() != columns.rows())
    throw DimensionMismatch("nearest_code: probe length does not match enrolled codes");
  Index best = 0;
  Scalar best_score = -std::numeric_limits<Scalar>::infinity();
  for (Index j = 0; j < columns.cols(); ++j) {
    const VectorX<Scalar> col = columns.col(j);
    const Scalar score = metric == Metric::Cosine ? detail::cosine_similarity(probe, col)
                                                  : -(probe - col).norm();
    if (score > best_score) {
      best_score = score;
      best = j;
    }
  }
  return best;
}

template <typename Scalar>
std::string classify_subject(const VectorX<Scalar>& subject_code, const CodeTable<Scalar>& table,
                             Metric metric = Metric::Cosine) {
  if (table.labels.size() != static_cast<std::size_t>(table.codes.cols()))
    throw DimensionMismatch("classify_subject: table labels do not match its columns");
  return table.labels[static_cast<std::size_t>(nearest_code(subject_code, table.codes, metric))];
}

template <typename Scalar>
std::string classify_subject(const VectorX<Scalar>& subject_code, const DadlModel<Scalar>& model,
                             Metric metric = Metric::Cosine) {
  return model
      .subject_labels[static_cast<std::size_t>(nearest_code(subject_code, model.subject_codes, metric))];
}

template <typename Scalar>
std::string estimate_pose(const VectorX<Scalar>& pose_code, const DadlModel<Scalar>& model,
                          Metric metric = Metric::Cosine) {
  return model
      .pose_labels[static_cast<std::size_t>(nearest_code(pose_code, model.pose_codes, metric))];
}

template <typename Scalar>
std::string estimate_illum(const VectorX<Scalar>& illum_code, const DadlModel<Scalar>& model,
                           Metric metric = Metric::Cosine) {
  return model
      .illum_labels[static_cast<std::size_t>(nearest_code(illum_code, model.illum_codes, metric))];
}

namespace detail {

/// Builds the report from (truth, predicted) pairs.  Classes are the union of
/// both label sets, sorted, so the layout is independent of probe order.
inline RecognitionReport build_report(
    const std::vector<std::pair<std::string, std::string>>& outcomes) {
  RecognitionReport report;
  for (const auto& [truth, predicted] : outcomes) {
    report.labels.push_back(truth);
    report.labels.push_back(predicted);
  }
  std::sort(report.labels.begin(), report.labels.end());
  report.labels.erase(std::unique(report.labels.begin(), report.labels.end()),
                      report.labels.end());
  auto index_of = [&](const std::string& label) {
    return static_cast<Index>(std::lower_bound(report.labels.begin(), report.labels.end(), label) -
                              report.labels.begin());
  };
  const Index c = static_cast<Index>(report.labels.size());
  report.confusion = Eigen::MatrixXi::Zero(c, c);
  for (const auto& [truth, predicted] : outcomes) {
    report.confusion(index_of(truth), index_of(predicted)) += 1;
    report.correct += truth == predicted ? 1 : 0;
    report.total += 1;
  }
  report.rate = static_cast<double>(report.correct) / static_cast<double>(report.total);
  return report;
}

}  // namespace detail

/// Runs the protocol with DADL subject codes: probes (and, for gallery
/// enrollment, gallery images) are decomposed and matched by nearest code.
template <typename Scalar>
RecognitionReport recognition_rate(const GalleryProbeProtocol<Scalar>& protocol,
                                   const DadlModel<Scalar>& model,
                                   Enrollment enrollment = Enrollment::TrainingCodes,
                                   Metric metric = Metric::Cosine) {
  if (protocol.probes.empty()) throw EmptyProtocol("recognition_rate: no probes");

  CodeTable<Scalar> table;
  if (enrollment == Enrollment::TrainingCodes) {
    table.codes = model.subject_codes;
    table.labels = model.subject_labels;
  } else {
    if (protocol.gallery.empty())
      throw EmptyGallery("recognition_rate: gallery enrollment with no gallery images");
    table.codes.resize(model.subject_codes.rows(), static_cast<Index>(protocol.gallery.size()));
    for (std::size_t g = 0; g < protocol.gallery.size(); ++g) {
      table.codes.col(static_cast<Index>(g)) =
          decompose(protocol.gallery[g].image, model).subject.values;
      table.labels.push_back(protocol.gallery[g].subject);
    }
  }

  std::vector<std::pair<std::string, std::string>> outcomes;
  outcomes.reserve(protocol.probes.size());
  for (const auto& probe : protocol.probes) {
    const VectorX<Scalar> code = decompose(probe.image, model).subject.values;
    outcomes.emplace_back(probe.subject, classify_subject(code, table, metric));
  }
  return detail::build_report(outcomes);
}

/// Runs the protocol with the multilinear baseline: each probe is classified
/// by exhaustive projection onto its nearest subject-space row.
template <typename Scalar>
RecognitionReport recognition_rate(const GalleryProbeProtocol<Scalar>& protocol,
                                   const HosvdModel<Scalar>& model,
                                   const std::vector<std::string>& subject_labels) {
  if (protocol.probes.empty()) throw EmptyProtocol("recognition_rate: no probes");
  if (subject_labels.size() != static_cast<std::size_t>(model.subjects()))
    throw DimensionMismatch("recognition_rate: subject labels do not match the model");

  std::vector<std::pair<std::string, std::string>> outcomes;
  outcomes.reserve(protocol.probes.size());
  for (const auto& probe : protocol.probes) {
    const auto extract = tf_extract_subject(probe.image, model);
    outcomes.emplace_back(probe.subject,
                          subject_labels[static_cast<std::size_t>(extract.subject)]);
  }
  return detail::build_report(outcomes);
}

/// Codes of one subject collected across domains, one column per sample.
template <typename Scalar>
struct CodeGroup {
  std::string label;
  MatrixX<Scalar> codes;
};

template <typename Scalar>
struct PooledStats {
  std::vector<std::string> labels;
  MatrixX<Scalar> means;       // coefficient x group: per-group mean code
  MatrixX<Scalar> std_errors;  // coefficient x group: standard error of each mean
  Scalar pooled_sd = Scalar(0);
};

/// Per-group mean and standard errors plus the square root of the pooled
/// per-coefficient variance sum_g (n_g-1) s_g^2 / sum_g (n_g-1), where s_g^2
/// averages the sample variance over coefficients.
template <typename Scalar>
PooledStats<Scalar> pooled_code_stats(const std::vector<CodeGroup<Scalar>>& groups) {
  if (groups.empty()) throw InsufficientSamples("pooled_code_stats: no groups");
  const Index d = groups.front().codes.rows();

  PooledStats<Scalar> stats;
  stats.means.resize(d, static_cast<Index>(groups.size()));
  stats.std_errors.resize(d, static_cast<Index>(groups.size()));
  Scalar weighted = Scalar(0), dof = Scalar(0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const MatrixX<Scalar>& codes = groups[g].codes;
    const Index count = codes.cols();
    if (codes.rows() != d)
      throw DimensionMismatch("pooled_code_stats: group code lengths differ");
    if (count < 2)
      throw InsufficientSamples("pooled_code_stats: group '" + groups[g].label +
                                "' needs at least two codes");
    stats.labels.push_back(groups[g].label);
    const VectorX<Scalar> mean = codes.rowwise().mean();
    const MatrixX<Scalar> centered = codes.colwise() - mean;
    stats.means.col(static_cast<Index>(g)) = mean;
    stats.std_errors.col(static_cast<Index>(g)) =
        (centered.array().square().rowwise().sum() / Scalar(count - 1)).sqrt() /
        std::sqrt(Scalar(count));
    const Scalar var = centered.squaredNorm() / (Scalar(d) * Scalar(count - 1));
    weighted += Scalar(count - 1) * var;
    dof += Scalar(count - 1);
  }
  stats.pooled_sd = std::sqrt(weighted / dof);
  return stats;
}

}  // namespace dadl
