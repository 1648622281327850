// Command-line surface for the domain-adaptive dictionary learning library.
//
// Subcommands: train, decompose, compose, classify, estimate, synth,
// baseline, eval.  Exit codes: 0 success, 2 usage/configuration errors,
// 3 data errors, 4 numerical failures.  Errors print one machine-parseable
// line to stderr: "error: <Code>: <detail>".  All numeric output uses six
// significant digits.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dadl/eval.hpp"
#include "dadl/io.hpp"
#include "dadl/synthetic.hpp"
#include "dadl/tensorfaces.hpp"

namespace {

namespace fs = std::filesystem;
using dadl::Index;
using Eigen::VectorXd;

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string single_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

Index find_label(const std::vector<std::string>& labels, const std::string& label,
                 const char* what) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<Index>(i);
  throw dadl::UnknownLabel(std::string(what) + " label '" + label + "' not in model");
}

void parse_size(const std::string& size, Index& width, Index& height) {
  long w = 0, h = 0;
  char extra = 0;
  if (std::sscanf(size.c_str(), "%ldx%ld%c", &w, &h, &extra) != 2 || w <= 0 || h <= 0)
    throw dadl::ConfigError("--size must be WIDTHxHEIGHT, got '" + size + "'");
  width = w;
  height = h;
}

void expect_triple(const std::vector<Index>& v, const char* flag) {
  if (v.size() != 3)
    throw dadl::ConfigError(std::string(flag) + " needs three comma-separated values a,b,c");
}

/// Writes to --out when given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw dadl::DataError(path + ": cannot open for writing");
    }
  }
  std::ostream& out() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::string join6(const VectorXd& v, const char* sep) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += fmt6(v[i]);
  }
  return s;
}

void emit_codes(std::ostream& os, const dadl::Decomposition<double>& d, bool tsv) {
  const char* sep = tsv ? "\t" : " ";
  const char* mid = tsv ? "\t" : ": ";
  os << "pose" << mid << join6(d.pose.values, sep) << "\n";
  os << "subject" << mid << join6(d.subject.values, sep) << "\n";
  os << "illum" << mid << join6(d.illum.values, sep) << "\n";
  os << "residual" << mid << fmt6(d.residual_norm) << "\n";
  os << "iterations" << mid << d.iterations_used << "\n";
  os << "converged" << mid << (d.converged ? 1 : 0) << "\n";
}

void emit_report(std::ostream& os, const dadl::RecognitionReport& report, bool tsv) {
  if (tsv) {
    os << "rate\t" << fmt6(report.rate) << "\n";
    os << "correct\t" << report.correct << "\n";
    os << "total\t" << report.total << "\n";
    os << "labels";
    for (const auto& l : report.labels) os << "\t" << l;
    os << "\n";
    for (Index r = 0; r < report.confusion.rows(); ++r) {
      os << "confusion\t" << report.labels[static_cast<std::size_t>(r)];
      for (Index c = 0; c < report.confusion.cols(); ++c) os << "\t" << report.confusion(r, c);
      os << "\n";
    }
    return;
  }
  os << "rate: " << fmt6(report.rate) << " (" << report.correct << "/" << report.total << ")\n";
  os << "confusion (rows: true, columns: predicted):\n";
  os << "      ";
  for (const auto& l : report.labels) os << " " << l;
  os << "\n";
  for (Index r = 0; r < report.confusion.rows(); ++r) {
    os << "  " << report.labels[static_cast<std::size_t>(r)] << ":";
    for (Index c = 0; c < report.confusion.cols(); ++c) os << " " << report.confusion(r, c);
    os << "\n";
  }
}

/// Parses one code-vector line ("pose\tv1\tv2..." or "pose: v1 v2...") as
/// written by the decompose subcommand.
bool parse_code_line(const std::string& line, const std::string& key, VectorXd& into) {
  std::string payload;
  if (line.rfind(key + "\t", 0) == 0)
    payload = line.substr(key.size() + 1);
  else if (line.rfind(key + ": ", 0) == 0)
    payload = line.substr(key.size() + 2);
  else
    return false;
  for (char& c : payload)
    if (c == '\t') c = ' ';
  std::istringstream is(payload);
  std::vector<double> values;
  double v;
  while (is >> v) values.push_back(v);
  into.resize(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) into[static_cast<Index>(i)] = values[i];
  return true;
}

dadl::Metric parse_metric(const std::string& name) {
  if (name == "cosine") return dadl::Metric::Cosine;
  if (name == "euclidean") return dadl::Metric::Euclidean;
  throw dadl::ConfigError("--metric must be cosine or euclidean, got '" + name + "'");
}

bool parse_format(const std::string& name) {  // true = tsv
  if (name == "tsv") return true;
  if (name == "table") return false;
  throw dadl::ConfigError("--format must be table or tsv, got '" + name + "'");
}

VectorXd load_probe(const std::string& path, Index expected) {
  const VectorXd y = dadl::pgm_to_vector(dadl::read_pgm(path));
  if (y.size() != expected)
    throw dadl::DimensionMismatch("probe " + path + " has " + std::to_string(y.size()) +
                                  " pixels, model expects " + std::to_string(expected));
  return y;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-adaptive trilinear dictionary learning over face image grids"};
  app.require_subcommand(1);

  // ---- train ---------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Learn a base dictionary from a complete corpus");
  struct {
    std::string manifest, root = ".", out, format = "table";
    std::vector<Index> dims, sparsity;
    Index iters = 5, ksvd_iters = 20, coding_iters = 100;
    double tol = 1e-6, ridge = 1e-8;
    std::uint64_t seed = 0;
  } tr;
  train->add_option("--manifest", tr.manifest, "training corpus manifest (TSV)")->required();
  train->add_option("--root", tr.root, "directory image paths are relative to");
  train->add_option("--dims", tr.dims, "atom counts a,b,c (pose,subject,illum)")
      ->required()
      ->delimiter(',');
  train->add_option("--sparsity", tr.sparsity, "code sparsity caps a,b,c")
      ->required()
      ->delimiter(',');
  train->add_option("--iters", tr.iters, "outer learning iterations");
  train->add_option("--ksvd-iters", tr.ksvd_iters, "k-SVD iterations per stage");
  train->add_option("--coding-iters", tr.coding_iters, "decomposition sweep cap");
  train->add_option("--tol", tr.tol, "decomposition convergence tolerance");
  train->add_option("--ridge", tr.ridge, "relative ridge for pseudo-inverses");
  train->add_option("--seed", tr.seed, "random seed");
  train->add_option("--out", tr.out, "model file to write")->required();
  train->add_option("--format", tr.format, "table or tsv");
  train->callback([&tr] {
    expect_triple(tr.dims, "--dims");
    expect_triple(tr.sparsity, "--sparsity");
    const bool tsv = parse_format(tr.format);
    const dadl::Corpus corpus = dadl::load_corpus(tr.manifest, tr.root);
    dadl::DadlConfig cfg;
    cfg.d_a = tr.dims[0];
    cfg.d_b = tr.dims[1];
    cfg.d_c = tr.dims[2];
    cfg.t_a = tr.sparsity[0];
    cfg.t_b = tr.sparsity[1];
    cfg.t_c = tr.sparsity[2];
    cfg.outer_iters = tr.iters;
    cfg.ksvd_iters = tr.ksvd_iters;
    cfg.coding_iters = tr.coding_iters;
    cfg.code_tol = tr.tol;
    cfg.ridge = tr.ridge;
    cfg.seed = tr.seed;
    dadl::DadlModel<double> model = dadl::learn_base_dictionary(corpus.grid, cfg);
    model.pose_labels = corpus.pose_labels;
    model.subject_labels = corpus.subject_labels;
    model.illum_labels = corpus.illum_labels;
    dadl::save_model(tr.out, model);
    for (std::size_t i = 0; i < model.training_errors.size(); ++i) {
      if (tsv)
        std::cout << "iteration\t" << i + 1 << "\t" << fmt6(model.training_errors[i]) << "\n";
      else
        std::cout << "iteration " << i + 1 << ": error " << fmt6(model.training_errors[i])
                  << "\n";
    }
    std::cout << (tsv ? "model\t" : "model: ") << tr.out << "\n";
  });

  // ---- decompose -----------------------------------------------------------
  auto* decompose =
      app.add_subcommand("decompose", "Split one image into pose/subject/illum codes");
  struct {
    std::string model, probe, out, format = "table";
  } de;
  decompose->add_option("--model", de.model, "trained model file")->required();
  decompose->add_option("--probe", de.probe, "input image (PGM)")->required();
  decompose->add_option("--out", de.out, "write the report here instead of stdout");
  decompose->add_option("--format", de.format, "table or tsv");
  decompose->callback([&de] {
    const bool tsv = parse_format(de.format);
    const auto model = dadl::load_model(de.model);
    const VectorXd y = load_probe(de.probe, model.n());
    const auto d = dadl::decompose(y, model);
    Sink sink(de.out);
    emit_codes(sink.out(), d, tsv);
  });

  // ---- compose -------------------------------------------------------------
  auto* compose =
      app.add_subcommand("compose", "Render a subject code under chosen pose/illumination");
  struct {
    std::string model, subject, pose, illum, codes, out, size;
  } co;
  compose->add_option("--model", co.model, "trained model file")->required();
  compose->add_option("--subject", co.subject, "trained subject label to render");
  compose->add_option("--codes", co.codes, "decompose output file supplying codes");
  compose->add_option("--pose", co.pose, "trained pose label");
  compose->add_option("--illum", co.illum, "trained illumination label");
  compose->add_option("--out", co.out, "output image (PGM)")->required();
  compose->add_option("--size", co.size, "output WIDTHxHEIGHT (default n x 1)");
  compose->callback([&co] {
    const auto model = dadl::load_model(co.model);
    VectorXd a, b, c;
    if (!co.codes.empty()) {
      if (!co.subject.empty())
        throw dadl::ConfigError("compose: --subject and --codes are mutually exclusive");
      std::ifstream in(co.codes);
      if (!in) throw dadl::DataError(co.codes + ": cannot open codes file");
      std::string line;
      while (std::getline(in, line)) {
        parse_code_line(line, "pose", a) || parse_code_line(line, "subject", b) ||
            parse_code_line(line, "illum", c);
      }
      if (b.size() != model.config.d_b)
        throw dadl::DimensionMismatch("codes file " + co.codes + " carries no subject code of length " +
                                      std::to_string(model.config.d_b));
    } else {
      if (co.subject.empty())
        throw dadl::ConfigError("compose: pick a subject with --subject or supply --codes");
      b = model.subject_codes.col(find_label(model.subject_labels, co.subject, "subject"));
    }
    if (!co.pose.empty())
      a = model.pose_codes.col(find_label(model.pose_labels, co.pose, "pose"));
    if (!co.illum.empty())
      c = model.illum_codes.col(find_label(model.illum_labels, co.illum, "illum"));
    if (a.size() != model.config.d_a)
      throw dadl::ConfigError("compose: pick a pose with --pose or supply --codes");
    if (c.size() != model.config.d_c)
      throw dadl::ConfigError("compose: pick an illumination with --illum or supply --codes");

    Index width = model.n(), height = 1;
    if (!co.size.empty()) parse_size(co.size, width, height);
    const VectorXd y = dadl::compose(model, b, a, c);
    dadl::write_pgm(co.out, dadl::vector_to_pgm(y, width, height));
    std::cout << "image: " << co.out << "\n";
  });

  // ---- classify ------------------------------------------------------------
  auto* classify = app.add_subcommand("classify", "Identify the subject of one image");
  struct {
    std::string model, probe, gallery, root = ".", metric = "cosine", format = "table";
  } cl;
  classify->add_option("--model", cl.model, "trained model file")->required();
  classify->add_option("--probe", cl.probe, "input image (PGM)")->required();
  classify->add_option("--gallery", cl.gallery,
                       "manifest of gallery images (enrolls their codes instead of the "
                       "training subjects)");
  classify->add_option("--root", cl.root, "directory gallery paths are relative to");
  classify->add_option("--metric", cl.metric, "cosine or euclidean");
  classify->add_option("--format", cl.format, "table or tsv");
  classify->callback([&cl] {
    const bool tsv = parse_format(cl.format);
    const dadl::Metric metric = parse_metric(cl.metric);
    const auto model = dadl::load_model(cl.model);
    const VectorXd y = load_probe(cl.probe, model.n());
    const auto d = dadl::decompose(y, model);

    dadl::CodeTable<double> table;
    if (cl.gallery.empty()) {
      table.codes = model.subject_codes;
      table.labels = model.subject_labels;
    } else {
      const dadl::LabeledSet gallery = dadl::load_labeled_set(cl.gallery, cl.root);
      if (gallery.cells.empty()) throw dadl::EmptyGallery("classify: gallery manifest is empty");
      table.codes.resize(model.config.d_b, static_cast<Index>(gallery.cells.size()));
      for (std::size_t g = 0; g < gallery.cells.size(); ++g) {
        table.codes.col(static_cast<Index>(g)) =
            dadl::decompose(gallery.cells[g].image, model).subject.values;
        table.labels.push_back(gallery.cells[g].subject);
      }
    }
    const Index winner = dadl::nearest_code(d.subject.values, table.codes, metric);
    const std::string& label = table.labels[static_cast<std::size_t>(winner)];
    const double score =
        metric == dadl::Metric::Cosine
            ? dadl::detail::cosine_similarity(d.subject.values, VectorXd(table.codes.col(winner)))
            : (d.subject.values - table.codes.col(winner)).norm();
    const char* score_name = metric == dadl::Metric::Cosine ? "similarity" : "distance";
    if (tsv)
      std::cout << "subject\t" << label << "\n"
                << score_name << "\t" << fmt6(score) << "\n"
                << "residual\t" << fmt6(d.residual_norm) << "\n";
    else
      std::cout << "subject: " << label << " (" << score_name << " " << fmt6(score)
                << ", residual " << fmt6(d.residual_norm) << ")\n";
  });

  // ---- estimate ------------------------------------------------------------
  auto* estimate =
      app.add_subcommand("estimate", "Estimate the pose and illumination of one image");
  struct {
    std::string model, probe, metric = "cosine", format = "table";
  } es;
  estimate->add_option("--model", es.model, "trained model file")->required();
  estimate->add_option("--probe", es.probe, "input image (PGM)")->required();
  estimate->add_option("--metric", es.metric, "cosine or euclidean");
  estimate->add_option("--format", es.format, "table or tsv");
  estimate->callback([&es] {
    const bool tsv = parse_format(es.format);
    const dadl::Metric metric = parse_metric(es.metric);
    const auto model = dadl::load_model(es.model);
    const VectorXd y = load_probe(es.probe, model.n());
    const auto d = dadl::decompose(y, model);
    const std::string pose = dadl::estimate_pose(d.pose.values, model, metric);
    const std::string illum = dadl::estimate_illum(d.illum.values, model, metric);
    if (tsv)
      std::cout << "pose\t" << pose << "\n"
                << "illum\t" << illum << "\n"
                << "residual\t" << fmt6(d.residual_norm) << "\n";
    else
      std::cout << "pose: " << pose << "\nillum: " << illum << "\nresidual: "
                << fmt6(d.residual_norm) << "\n";
  });

  // ---- synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus from a planted model");
  struct {
    std::string out, size;
    Index subjects = 0, poses = 0, illums = 0;
    std::vector<Index> dims, sparsity;
    double noise = 0.0;
    std::uint64_t seed = 0;
  } sy;
  synth->add_option("--out", sy.out, "directory for images + manifest.tsv")->required();
  synth->add_option("--size", sy.size, "image WIDTHxHEIGHT")->required();
  synth->add_option("--subjects", sy.subjects, "number of subjects")->required();
  synth->add_option("--poses", sy.poses, "number of poses")->required();
  synth->add_option("--illums", sy.illums, "number of illuminations")->required();
  synth->add_option("--dims", sy.dims, "planted atom counts a,b,c")->required()->delimiter(',');
  synth->add_option("--sparsity", sy.sparsity, "planted support sizes a,b,c")
      ->required()
      ->delimiter(',');
  synth->add_option("--noise", sy.noise, "pixel noise sigma");
  synth->add_option("--seed", sy.seed, "random seed");
  synth->callback([&sy] {
    expect_triple(sy.dims, "--dims");
    expect_triple(sy.sparsity, "--sparsity");
    Index width = 0, height = 0;
    parse_size(sy.size, width, height);
    dadl::SynthSpec spec;
    spec.n = width * height;
    spec.subjects = sy.subjects;
    spec.poses = sy.poses;
    spec.illums = sy.illums;
    spec.d_a = sy.dims[0];
    spec.d_b = sy.dims[1];
    spec.d_c = sy.dims[2];
    spec.t_a = sy.sparsity[0];
    spec.t_b = sy.sparsity[1];
    spec.t_c = sy.sparsity[2];
    spec.noise_sigma = sy.noise;
    spec.seed = sy.seed;
    const auto data = dadl::generate<double>(spec);

    // one affine map takes the whole corpus into [0,1] ahead of quantization
    dadl::DomainGrid<double> unit = data.grid;
    const double lo = unit.data().minCoeff();
    const double hi = unit.data().maxCoeff();
    if (hi > lo)
      unit.data() = (unit.data().array() - lo) / (hi - lo);
    else
      unit.data().setZero();
    dadl::save_corpus(sy.out, unit, data.truth.pose_labels, data.truth.illum_labels,
                      data.truth.subject_labels, width, height);
    std::cout << "corpus: " << sy.out << " (" << sy.subjects << " subjects x " << sy.poses
              << " poses x " << sy.illums << " illums, " << width << "x" << height << ")\n";
  });

  // ---- baseline ------------------------------------------------------------
  auto* baseline =
      app.add_subcommand("baseline", "Multilinear-SVD baseline: fit, reconstruction error, "
                                     "optional probe extraction");
  struct {
    std::string manifest, root = ".", probe, format = "table";
    Index rank = 0;
  } ba;
  baseline->add_option("--manifest", ba.manifest, "training corpus manifest")->required();
  baseline->add_option("--root", ba.root, "directory image paths are relative to");
  baseline->add_option("--rank", ba.rank, "pixel-mode rank (0 = full)");
  baseline->add_option("--probe", ba.probe, "image to run subject extraction on (PGM)");
  baseline->add_option("--format", ba.format, "table or tsv");
  baseline->callback([&ba] {
    const bool tsv = parse_format(ba.format);
    const dadl::Corpus corpus = dadl::load_corpus(ba.manifest, ba.root);
    const auto model = dadl::hosvd(corpus.grid, ba.rank);
    const auto rec = dadl::hosvd_reconstruct(model);
    const double denom = corpus.grid.data().norm();
    const double err =
        denom == 0.0 ? 0.0 : (rec.data() - corpus.grid.data()).norm() / denom;
    const char* mid = tsv ? "\t" : ": ";
    std::cout << "pixel-rank" << mid << model.pixel_rank() << "\n";
    std::cout << "reconstruction-error" << mid << fmt6(err) << "\n";
    if (!ba.probe.empty()) {
      const VectorXd y = load_probe(ba.probe, corpus.grid.cell_dim());
      const auto extract = dadl::tf_extract_subject(y, model);
      std::cout << "subject" << mid
                << corpus.subject_labels[static_cast<std::size_t>(extract.subject)] << "\n";
      std::cout << "pose" << mid << corpus.pose_labels[static_cast<std::size_t>(extract.pose)]
                << "\n";
      std::cout << "illum" << mid
                << corpus.illum_labels[static_cast<std::size_t>(extract.illum)] << "\n";
      std::cout << "distance" << mid << fmt6(extract.distance) << "\n";
      std::cout << "degenerate" << mid << (extract.degenerate ? 1 : 0) << "\n";
    }
  });

  // ---- eval ----------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Recognition rate over a labeled probe set");
  struct {
    std::string model, manifest, root = ".", gallery, probe;
    std::string matcher = "dadl", metric = "cosine", format = "table";
  } ev;
  eval->add_option("--model", ev.model, "trained model file (matcher dadl)");
  eval->add_option("--manifest", ev.manifest, "training corpus manifest (matcher tensorfaces)");
  eval->add_option("--root", ev.root, "directory manifest paths are relative to");
  eval->add_option("--gallery", ev.gallery,
                   "gallery manifest; enrolls decomposed gallery codes instead of training "
                   "subjects");
  eval->add_option("--probe", ev.probe, "probe manifest (TSV with subject truth labels)")
      ->required();
  eval->add_option("--matcher", ev.matcher, "dadl or tensorfaces");
  eval->add_option("--metric", ev.metric, "cosine or euclidean");
  eval->add_option("--format", ev.format, "table or tsv");
  eval->callback([&ev] {
    const bool tsv = parse_format(ev.format);
    const dadl::Metric metric = parse_metric(ev.metric);
    if (ev.matcher != "dadl" && ev.matcher != "tensorfaces")
      throw dadl::ConfigError("--matcher must be dadl or tensorfaces, got '" + ev.matcher + "'");

    dadl::GalleryProbeProtocol<double> protocol;
    const dadl::LabeledSet probes = dadl::load_labeled_set(ev.probe, ev.root);
    for (const auto& cell : probes.cells) protocol.probes.push_back({cell.image, cell.subject});

    dadl::RecognitionReport report;
    if (ev.matcher == "dadl") {
      if (ev.model.empty()) throw dadl::ConfigError("eval: matcher dadl needs --model");
      const auto model = dadl::load_model(ev.model);
      auto enrollment = dadl::Enrollment::TrainingCodes;
      if (!ev.gallery.empty()) {
        const dadl::LabeledSet gallery = dadl::load_labeled_set(ev.gallery, ev.root);
        for (const auto& cell : gallery.cells)
          protocol.gallery.push_back({cell.image, cell.subject});
        enrollment = dadl::Enrollment::GalleryCodes;
      }
      report = dadl::recognition_rate(protocol, model, enrollment, metric);
    } else {
      if (ev.manifest.empty())
        throw dadl::ConfigError("eval: matcher tensorfaces needs --manifest (training corpus)");
      const dadl::Corpus corpus = dadl::load_corpus(ev.manifest, ev.root);
      const auto model = dadl::hosvd(corpus.grid);
      report = dadl::recognition_rate(protocol, model, corpus.subject_labels);
    }
    emit_report(std::cout, report, tsv);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "error: Usage: " << single_line(e.what()) << "\n";
    return 2;
  } catch (const dadl::ConfigError& e) {
    std::cerr << "error: " << single_line(e.what()) << "\n";
    return 2;
  } catch (const dadl::DataError& e) {
    std::cerr << "error: " << single_line(e.what()) << "\n";
    return 3;
  } catch (const dadl::NumericError& e) {
    std::cerr << "error: " << single_line(e.what()) << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << single_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
