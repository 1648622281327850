// End-to-end checks of the command-line binary: subcommand output schemas,
// the synth -> train -> decompose/compose closed loop, determinism, and the
// exit-code contract.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dadl/io.hpp"

#ifndef DADL_CLI_PATH
#error "DADL_CLI_PATH must name the CLI binary"
#endif

namespace {

namespace fs = std::filesystem;

using dadl::Index;
using Eigen::VectorXd;

fs::path scratch_root() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "dadl_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out = scratch_root() / ("stdout" + std::to_string(counter) + ".txt");
  const fs::path err = scratch_root() / ("stderr" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd =
      std::string(DADL_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

/// Key -> tab-separated fields of a TSV report, first occurrence wins.
std::map<std::string, std::vector<std::string>> parse_tsv(const std::string& text) {
  std::map<std::string, std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (!fields.empty() && !rows.count(fields[0]))
      rows[fields[0]] = std::vector<std::string>(fields.begin() + 1, fields.end());
  }
  return rows;
}

bool same_bytes(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

/// A single error line: "error: <Code>: <detail>\n" and nothing else.
void check_error_shape(const RunResult& r) {
  CHECK(r.err.rfind("error: ", 0) == 0);
  CHECK(!r.err.empty());
  CHECK(r.err.back() == '\n');
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

/// One noiseless corpus and a model trained on it, shared across cases.  The
/// trained dictionary gets one atom per mode beyond the planted one so it can
/// absorb the brightness offset introduced when the corpus is mapped into
/// [0,1] for PGM storage.
struct Pipeline {
  fs::path dir = scratch_root() / "pipeline";
  fs::path corpus = dir / "corpus";
  fs::path manifest = corpus / "manifest.tsv";
  fs::path model_file = dir / "model.dadl";
  dadl::DadlModel<double> model;

  Pipeline() {
    fs::create_directories(dir);
    RunResult r = run_cli("synth --out " + corpus.string() +
                          " --size 8x8 --subjects 5 --poses 4 --illums 4"
                          " --dims 3,4,3 --sparsity 2,2,2 --noise 0 --seed 11");
    REQUIRE(r.exit_code == 0);
    r = run_cli("train --manifest " + manifest.string() + " --root " + corpus.string() +
                " --dims 4,5,4 --sparsity 3,3,3 --iters 8 --seed 3 --out " +
                model_file.string());
    REQUIRE(r.exit_code == 0);
    model = dadl::load_model(model_file);
  }

  static const Pipeline& get() {
    static Pipeline p;
    return p;
  }
};

}  // namespace

TEST_CASE("synth is deterministic per seed and the seed matters") {
  const fs::path a = scratch_root() / "det_a";
  const fs::path b = scratch_root() / "det_b";
  const fs::path c = scratch_root() / "det_c";
  const std::string flags =
      " --size 6x5 --subjects 3 --poses 3 --illums 2"
      " --dims 2,3,2 --sparsity 1,2,1 --noise 0.05";
  REQUIRE(run_cli("synth --out " + a.string() + flags + " --seed 7").exit_code == 0);
  REQUIRE(run_cli("synth --out " + b.string() + flags + " --seed 7").exit_code == 0);
  REQUIRE(run_cli("synth --out " + c.string() + flags + " --seed 8").exit_code == 0);

  std::vector<fs::path> names;
  for (const auto& entry : fs::directory_iterator(a)) names.push_back(entry.path().filename());
  std::sort(names.begin(), names.end());
  CHECK(names.size() == 19);  // 18 cells + manifest

  bool all_equal = true, any_differs = false;
  for (const auto& name : names) {
    all_equal = all_equal && same_bytes(a / name, b / name);
    any_differs = any_differs || !same_bytes(a / name, c / name);
  }
  CHECK(all_equal);
  CHECK(any_differs);
}

TEST_CASE("closed loop: every training cell decomposes back to numerical zero") {
  const Pipeline& p = Pipeline::get();
  const dadl::Corpus corpus = dadl::load_corpus(p.manifest, p.corpus);

  double worst_rel = 0.0;
  for (const auto& k : corpus.subject_labels)
    for (const auto& j : corpus.pose_labels)
      for (const auto& l : corpus.illum_labels) {
        const fs::path image = p.corpus / (k + "_" + j + "_" + l + ".pgm");
        const RunResult r = run_cli("decompose --model " + p.model_file.string() +
                                    " --probe " + image.string() + " --format tsv");
        REQUIRE(r.exit_code == 0);
        const auto rows = parse_tsv(r.out);
        REQUIRE(rows.count("residual"));
        REQUIRE(rows.count("converged"));
        CHECK(rows.at("converged").at(0) == "1");
        const double residual = std::stod(rows.at("residual").at(0));
        const double norm = dadl::pgm_to_vector(dadl::read_pgm(image)).norm();
        worst_rel = std::max(worst_rel, residual / norm);
      }
  CHECK(worst_rel <= 1e-6);  // observed 8.6e-16 over all 80 cells
}

TEST_CASE("decompose report carries full-length codes in the documented schema") {
  const Pipeline& p = Pipeline::get();
  const fs::path probe = p.corpus / "s3_p2_i2.pgm";
  const RunResult r = run_cli("decompose --model " + p.model_file.string() + " --probe " +
                              probe.string() + " --format tsv");
  REQUIRE(r.exit_code == 0);
  const auto rows = parse_tsv(r.out);
  REQUIRE(rows.count("pose"));
  REQUIRE(rows.count("subject"));
  REQUIRE(rows.count("illum"));
  REQUIRE(rows.count("iterations"));
  CHECK(rows.at("pose").size() == 4);
  CHECK(rows.at("subject").size() == 5);
  CHECK(rows.at("illum").size() == 4);
  CHECK(std::stoi(rows.at("iterations").at(0)) >= 1);

  // --out lands the same report in a file instead of stdout
  const fs::path out = scratch_root() / "codes.tsv";
  const RunResult r2 = run_cli("decompose --model " + p.model_file.string() + " --probe " +
                               probe.string() + " --format tsv --out " + out.string());
  REQUIRE(r2.exit_code == 0);
  CHECK(r2.out.empty());
  CHECK(slurp(out) == r.out);
}

TEST_CASE("compose reproduces training cells byte for byte") {
  const Pipeline& p = Pipeline::get();
  const fs::path direct = scratch_root() / "direct.pgm";
  RunResult r = run_cli("compose --model " + p.model_file.string() +
                        " --subject s3 --pose p2 --illum i2 --size 8x8 --out " +
                        direct.string());
  REQUIRE(r.exit_code == 0);
  CHECK(same_bytes(direct, p.corpus / "s3_p2_i2.pgm"));

  // decomposed codes re-render under a swapped illumination onto the
  // matching training cell
  const fs::path codes = scratch_root() / "swap_codes.tsv";
  REQUIRE(run_cli("decompose --model " + p.model_file.string() + " --probe " +
                  (p.corpus / "s3_p2_i2.pgm").string() + " --format tsv --out " +
                  codes.string())
              .exit_code == 0);
  const fs::path relit = scratch_root() / "relit.pgm";
  r = run_cli("compose --model " + p.model_file.string() + " --codes " + codes.string() +
              " --illum i4 --size 8x8 --out " + relit.string());
  REQUIRE(r.exit_code == 0);
  CHECK(same_bytes(relit, p.corpus / "s3_p2_i4.pgm"));
}

TEST_CASE("classify and estimate name the right labels on training cells") {
  const Pipeline& p = Pipeline::get();
  const std::string probe = (p.corpus / "s4_p3_i1.pgm").string();
  RunResult r = run_cli("classify --model " + p.model_file.string() + " --probe " + probe +
                        " --format tsv");
  REQUIRE(r.exit_code == 0);
  CHECK(parse_tsv(r.out).at("subject").at(0) == "s4");

  r = run_cli("estimate --model " + p.model_file.string() + " --probe " + probe +
              " --format tsv");
  REQUIRE(r.exit_code == 0);
  const auto rows = parse_tsv(r.out);
  CHECK(rows.at("pose").at(0) == "p3");
  CHECK(rows.at("illum").at(0) == "i1");
}

TEST_CASE("eval scores a labeled probe set and honors gallery enrollment") {
  const Pipeline& p = Pipeline::get();
  RunResult r = run_cli("eval --model " + p.model_file.string() + " --probe " +
                        p.manifest.string() + " --root " + p.corpus.string() +
                        " --format tsv");
  REQUIRE(r.exit_code == 0);
  auto rows = parse_tsv(r.out);
  CHECK(rows.at("rate").at(0) == "1");
  CHECK(rows.at("total").at(0) == "80");
  CHECK(rows.at("labels").size() == 5);

  r = run_cli("eval --model " + p.model_file.string() + " --gallery " + p.manifest.string() +
              " --probe " + p.manifest.string() + " --root " + p.corpus.string() +
              " --format tsv");
  REQUIRE(r.exit_code == 0);
  CHECK(parse_tsv(r.out).at("rate").at(0) == "1");
}

TEST_CASE("baseline reports a near-zero full-rank reconstruction and extracts subjects") {
  const Pipeline& p = Pipeline::get();
  const RunResult r = run_cli("baseline --manifest " + p.manifest.string() + " --root " +
                              p.corpus.string() + " --probe " +
                              (p.corpus / "s2_p4_i3.pgm").string() + " --format tsv");
  REQUIRE(r.exit_code == 0);
  const auto rows = parse_tsv(r.out);
  CHECK(std::stod(rows.at("reconstruction-error").at(0)) <= 1e-10);
  CHECK(rows.at("subject").at(0) == "s2");
  CHECK(rows.at("pose").at(0) == "p4");
  CHECK(rows.at("illum").at(0) == "i3");
  CHECK(rows.at("degenerate").at(0) == "0");
}

TEST_CASE("training runs are deterministic given identical flags") {
  const Pipeline& p = Pipeline::get();
  const fs::path again = scratch_root() / "model_again.dadl";
  const RunResult r = run_cli("train --manifest " + p.manifest.string() + " --root " +
                              p.corpus.string() +
                              " --dims 4,5,4 --sparsity 3,3,3 --iters 8 --seed 3 --out " +
                              again.string());
  REQUIRE(r.exit_code == 0);
  CHECK(same_bytes(again, p.model_file));
}

TEST_CASE("the 10-pose preset configuration is accepted end to end") {
  const fs::path dir = scratch_root() / "preset";
  REQUIRE(run_cli("synth --out " + dir.string() +
                  " --size 8x4 --subjects 68 --poses 10 --illums 9"
                  " --dims 3,6,3 --sparsity 2,3,2 --noise 0.01 --seed 4")
              .exit_code == 0);
  const fs::path model_file = dir / "model.dadl";
  const RunResult r =
      run_cli("train --manifest " + (dir / "manifest.tsv").string() + " --root " +
              dir.string() + " --dims 10,68,9 --sparsity 8,20,9 --iters 1 --ksvd-iters 2" +
              " --seed 1 --out " + model_file.string());
  REQUIRE(r.exit_code == 0);
  const auto model = dadl::load_model(model_file);
  CHECK(model.config.d_a == 10);
  CHECK(model.config.d_b == 68);
  CHECK(model.config.d_c == 9);
  CHECK(model.config.t_a == 8);
  CHECK(model.config.t_b == 20);
  CHECK(model.config.t_c == 9);
  CHECK(model.subject_labels.size() == 68);
}

TEST_CASE("exit codes separate usage, data, and numerical failures") {
  const Pipeline& p = Pipeline::get();

  RunResult r = run_cli("");  // no subcommand
  CHECK(r.exit_code == 2);
  check_error_shape(r);

  r = run_cli("train --manifest " + p.manifest.string() +
              " --dims 3,4 --sparsity 2,2,2 --out /tmp/x.dadl");
  CHECK(r.exit_code == 2);  // --dims is not a triple
  check_error_shape(r);

  r = run_cli("decompose --model " + p.model_file.string() + " --probe " +
              (p.corpus / "s1_p1_i1.pgm").string() + " --format xml");
  CHECK(r.exit_code == 2);
  check_error_shape(r);

  r = run_cli("decompose --model " + (scratch_root() / "missing.dadl").string() +
              " --probe " + (p.corpus / "s1_p1_i1.pgm").string());
  CHECK(r.exit_code == 3);
  check_error_shape(r);

  r = run_cli("decompose --model " + p.model_file.string() + " --probe " +
              (scratch_root() / "missing.pgm").string());
  CHECK(r.exit_code == 3);
  check_error_shape(r);

  r = run_cli("compose --model " + p.model_file.string() +
              " --subject nobody --pose p1 --illum i1 --out /tmp/x.pgm");
  CHECK(r.exit_code == 3);  // unknown label is a data error
  check_error_shape(r);

  // an all-black corpus defeats dictionary learning numerically
  const fs::path black = scratch_root() / "black";
  dadl::DomainGrid<double> zeros(16, {dadl::ModeKind::Pose, 2}, {dadl::ModeKind::Illum, 2},
                                 {dadl::ModeKind::Subject, 2});
  dadl::save_corpus(black, zeros, {"p1", "p2"}, {"i1", "i2"}, {"s1", "s2"}, 4, 4);
  r = run_cli("train --manifest " + (black / "manifest.tsv").string() + " --root " +
              black.string() + " --dims 2,2,2 --sparsity 1,1,1 --out " +
              (scratch_root() / "black.dadl").string());
  CHECK(r.exit_code == 4);
  check_error_shape(r);

  CHECK(run_cli("--help").exit_code == 0);
}
