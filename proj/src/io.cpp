#include "dadl/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <tuple>

#include "dadl/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are not supported");

namespace dadl {

namespace {

/// Reads one PGM header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in, const std::filesystem::path& path) {
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#')
      while (c != EOF && c != '\n') c = in.get();
    c = in.get();
  }
  std::string token;
  while (c != EOF && !std::isspace(c)) {
    token.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (token.empty()) throw CorruptImage(path.string() + ": truncated header");
  return token;
}

Index pgm_number(std::istream& in, const std::filesystem::path& path, const char* field) {
  const std::string token = pgm_token(in, path);
  Index value = 0;
  for (const char ch : token) {
    if (ch < '0' || ch > '9')
      throw CorruptImage(path.string() + ": non-numeric " + field + " '" + token + "'");
    value = value * 10 + (ch - '0');
    if (value > (Index(1) << 30)) throw CorruptImage(path.string() + ": oversized " + field);
  }
  return value;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

constexpr const char* kManifestHeader = "path\tsubject\tpose\tillum";

/// Label interning in first-appearance order.
Index intern(std::vector<std::string>& labels, const std::string& label) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<Index>(i);
  labels.push_back(label);
  return static_cast<Index>(labels.size()) - 1;
}

struct LoadedRows {
  std::vector<ManifestRow> rows;
  std::vector<VectorX<double>> images;  // parallel to rows
  Index width = 0;
  Index height = 0;
};

/// Shared manifest walk: reads every image, enforcing unique label triples
/// and a common image shape.
LoadedRows load_rows(const std::filesystem::path& manifest_path,
                     const std::filesystem::path& root) {
  LoadedRows out;
  out.rows = read_manifest(manifest_path);
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> seen;
  for (std::size_t r = 0; r < out.rows.size(); ++r) {
    const ManifestRow& row = out.rows[r];
    const auto key = std::make_tuple(row.subject, row.pose, row.illum);
    const auto [it, fresh] = seen.emplace(key, r);
    if (!fresh)
      throw DuplicateCell("manifest row " + std::to_string(r + 2) + " repeats (" + row.subject +
                          ", " + row.pose + ", " + row.illum + ") from row " +
                          std::to_string(it->second + 2));
    const PgmImage image = read_pgm(root / row.path);
    if (out.images.empty()) {
      out.width = image.width;
      out.height = image.height;
    } else if (image.width != out.width || image.height != out.height) {
      throw InconsistentDimensions(row.path + ": " + std::to_string(image.width) + "x" +
                                   std::to_string(image.height) + " differs from " +
                                   std::to_string(out.width) + "x" + std::to_string(out.height));
    }
    out.images.push_back(pgm_to_vector(image));
  }
  return out;
}

void write_exact(std::ofstream& out, const double* data, std::streamsize count,
                 const std::filesystem::path& path) {
  out.write(reinterpret_cast<const char*>(data),
            count * static_cast<std::streamsize>(sizeof(double)));
  if (!out) throw DataError(path.string() + ": short write");
}

void read_exact(std::ifstream& in, double* data, std::streamsize count,
                const std::filesystem::path& path) {
  in.read(reinterpret_cast<char*>(data), count * static_cast<std::streamsize>(sizeof(double)));
  if (in.gcount() != count * static_cast<std::streamsize>(sizeof(double)))
    throw CorruptModel(path.string() + ": truncated payload");
}

}  // namespace

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptImage(path.string() + ": cannot open");
  if (pgm_token(in, path) != "P5") throw CorruptImage(path.string() + ": not a binary PGM (P5)");
  PgmImage image;
  image.width = pgm_number(in, path, "width");
  image.height = pgm_number(in, path, "height");
  const Index maxval = pgm_number(in, path, "maxval");
  if (image.width <= 0 || image.height <= 0)
    throw CorruptImage(path.string() + ": empty image");
  if (maxval != 255)
    throw CorruptImage(path.string() + ": maxval " + std::to_string(maxval) + ", expected 255");
  // exactly one whitespace byte separates the header from the payload; the
  // token reader already consumed it
  const std::size_t count = static_cast<std::size_t>(image.width * image.height);
  image.pixels.resize(count);
  in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(count));
  if (in.gcount() != static_cast<std::streamsize>(count))
    throw CorruptImage(path.string() + ": truncated pixel data");
  return image;
}

void write_pgm(const std::filesystem::path& path, const PgmImage& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.width * image.height))
    throw DimensionMismatch("write_pgm: pixel count does not match the declared shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw DataError(path.string() + ": short write");
}

VectorX<double> pgm_to_vector(const PgmImage& image) {
  VectorX<double> v(static_cast<Index>(image.pixels.size()));
  for (Index i = 0; i < v.size(); ++i)
    v[i] = static_cast<double>(image.pixels[static_cast<std::size_t>(i)]) / 255.0;
  return v;
}

PgmImage vector_to_pgm(const VectorX<double>& pixels, Index width, Index height) {
  if (width <= 0 || height <= 0 || pixels.size() != width * height)
    throw DimensionMismatch("vector_to_pgm: vector length " + std::to_string(pixels.size()) +
                            " does not fill " + std::to_string(width) + "x" +
                            std::to_string(height));
  PgmImage image;
  image.width = width;
  image.height = height;
  image.pixels.resize(static_cast<std::size_t>(pixels.size()));
  for (Index i = 0; i < pixels.size(); ++i) {
    const double clamped = std::min(1.0, std::max(0.0, pixels[i]));
    image.pixels[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(std::lround(clamped * 255.0));
  }
  return image;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open manifest");
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kManifestHeader)
    throw DataError(path.string() + ": manifest must start with '" +
                    std::string(kManifestHeader) + "'");
  std::vector<ManifestRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 4)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 4 columns, got " +
                      std::to_string(fields.size()));
    for (const auto& f : fields)
      if (f.empty())
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": empty field");
    rows.push_back({fields[0], fields[1], fields[2], fields[3]});
  }
  return rows;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << kManifestHeader << "\n";
  for (const ManifestRow& row : rows)
    out << row.path << "\t" << row.subject << "\t" << row.pose << "\t" << row.illum << "\n";
  if (!out) throw DataError(path.string() + ": short write");
}

Corpus load_corpus(const std::filesystem::path& manifest_path,
                   const std::filesystem::path& root) {
  const LoadedRows loaded = load_rows(manifest_path, root);
  Corpus corpus;
  corpus.width = loaded.width;
  corpus.height = loaded.height;

  std::vector<Index> pose_of(loaded.rows.size()), illum_of(loaded.rows.size()),
      subject_of(loaded.rows.size());
  for (std::size_t r = 0; r < loaded.rows.size(); ++r) {
    subject_of[r] = intern(corpus.subject_labels, loaded.rows[r].subject);
    pose_of[r] = intern(corpus.pose_labels, loaded.rows[r].pose);
    illum_of[r] = intern(corpus.illum_labels, loaded.rows[r].illum);
  }
  const Index J = static_cast<Index>(corpus.pose_labels.size());
  const Index L = static_cast<Index>(corpus.illum_labels.size());
  const Index K = static_cast<Index>(corpus.subject_labels.size());
  if (loaded.rows.empty()) throw MissingCell(manifest_path.string() + ": manifest has no rows");

  corpus.grid = DomainGrid<double>(loaded.width * loaded.height, ModeLabel{ModeKind::Pose, J},
                                   ModeLabel{ModeKind::Illum, L}, ModeLabel{ModeKind::Subject, K});
  std::vector<char> filled(static_cast<std::size_t>(J * L * K), 0);
  for (std::size_t r = 0; r < loaded.rows.size(); ++r) {
    corpus.grid.cell(pose_of[r], illum_of[r], subject_of[r]) = loaded.images[r];
    filled[static_cast<std::size_t>((pose_of[r] * L + illum_of[r]) * K + subject_of[r])] = 1;
  }
  for (Index j = 0; j < J; ++j)
    for (Index l = 0; l < L; ++l)
      for (Index k = 0; k < K; ++k)
        if (!filled[static_cast<std::size_t>((j * L + l) * K + k)])
          throw MissingCell("no image for (" + corpus.subject_labels[static_cast<std::size_t>(k)] +
                            ", " + corpus.pose_labels[static_cast<std::size_t>(j)] + ", " +
                            corpus.illum_labels[static_cast<std::size_t>(l)] + ")");
  return corpus;
}

LabeledSet load_labeled_set(const std::filesystem::path& manifest_path,
                            const std::filesystem::path& root) {
  const LoadedRows loaded = load_rows(manifest_path, root);
  LabeledSet set;
  set.width = loaded.width;
  set.height = loaded.height;
  for (std::size_t r = 0; r < loaded.rows.size(); ++r)
    set.cells.push_back({loaded.images[r], loaded.rows[r].subject, loaded.rows[r].pose,
                         loaded.rows[r].illum});
  return set;
}

void save_corpus(const std::filesystem::path& directory, const DomainGrid<double>& grid,
                 const std::vector<std::string>& pose_labels,
                 const std::vector<std::string>& illum_labels,
                 const std::vector<std::string>& subject_labels, Index width, Index height) {
  const Index J = grid.outer().size, L = grid.inner().size, K = grid.col().size;
  if (static_cast<Index>(pose_labels.size()) != J ||
      static_cast<Index>(illum_labels.size()) != L ||
      static_cast<Index>(subject_labels.size()) != K)
    throw DimensionMismatch("save_corpus: label lists do not match the grid modes");
  if (width * height != grid.cell_dim())
    throw DimensionMismatch("save_corpus: width*height does not match the cell size");

  std::filesystem::create_directories(directory);
  std::vector<ManifestRow> rows;
  for (Index k = 0; k < K; ++k)
    for (Index j = 0; j < J; ++j)
      for (Index l = 0; l < L; ++l) {
        const std::string name = subject_labels[static_cast<std::size_t>(k)] + "_" +
                                 pose_labels[static_cast<std::size_t>(j)] + "_" +
                                 illum_labels[static_cast<std::size_t>(l)] + ".pgm";
        write_pgm(directory / name, vector_to_pgm(grid.cell(j, l, k), width, height));
        rows.push_back({name, subject_labels[static_cast<std::size_t>(k)],
                        pose_labels[static_cast<std::size_t>(j)],
                        illum_labels[static_cast<std::size_t>(l)]});
      }
  write_manifest(directory / "manifest.tsv", rows);
}

void save_model(const std::filesystem::path& path, const DadlModel<double>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");

  const DadlConfig& cfg = model.config;
  std::ostringstream header;
  header << "DADL1\n";
  header << "n " << model.n() << "\n";
  header << "dims " << cfg.d_a << " " << cfg.d_b << " " << cfg.d_c << "\n";
  header << "counts " << model.poses() << " " << model.subjects() << " " << model.illums()
         << "\n";
  header << "sparsity " << cfg.t_a << " " << cfg.t_b << " " << cfg.t_c << "\n";
  auto label_line = [&header](const char* key, const std::vector<std::string>& labels) {
    header << key;
    for (std::size_t i = 0; i < labels.size(); ++i)
      header << (i == 0 ? " " : "\t") << labels[i];
    header << "\n";
  };
  label_line("poses", model.pose_labels);
  label_line("subjects", model.subject_labels);
  label_line("illums", model.illum_labels);
  header << std::setprecision(17);
  header << "solver " << cfg.outer_iters << " " << cfg.ksvd_iters << " " << cfg.coding_iters
         << " " << cfg.code_tol << " " << cfg.ridge << " " << cfg.seed << "\n";
  header << "history";
  for (const double e : model.training_errors) header << " " << e;
  header << "\n\n";
  out << header.str();

  write_exact(out, model.base.data.vec().data(), model.base.data.size(), path);
  write_exact(out, model.pose_codes.data(), model.pose_codes.size(), path);
  write_exact(out, model.subject_codes.data(), model.subject_codes.size(), path);
  write_exact(out, model.illum_codes.data(), model.illum_codes.size(), path);
}

DadlModel<double> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptModel(path.string() + ": cannot open");

  auto next_line = [&in, &path]() {
    std::string line;
    if (!std::getline(in, line)) throw CorruptModel(path.string() + ": truncated header");
    return strip_cr(line);
  };
  if (next_line() != "DADL1") throw CorruptModel(path.string() + ": bad magic, expected DADL1");

  DadlModel<double> model;
  DadlConfig& cfg = model.config;
  Index n = 0, J = 0, K = 0, L = 0;
  auto parse = [&path](const std::string& line, const std::string& key) {
    if (line.rfind(key + " ", 0) != 0)
      throw CorruptModel(path.string() + ": expected '" + key + "' line, got '" + line + "'");
    return std::istringstream(line.substr(key.size() + 1));
  };
  auto require = [&path](std::istringstream& s, const char* what) {
    if (s.fail()) throw CorruptModel(path.string() + ": malformed " + what + " line");
  };

  {
    auto s = parse(next_line(), "n");
    s >> n;
    require(s, "n");
  }
  {
    auto s = parse(next_line(), "dims");
    s >> cfg.d_a >> cfg.d_b >> cfg.d_c;
    require(s, "dims");
  }
  {
    auto s = parse(next_line(), "counts");
    s >> J >> K >> L;
    require(s, "counts");
  }
  {
    auto s = parse(next_line(), "sparsity");
    s >> cfg.t_a >> cfg.t_b >> cfg.t_c;
    require(s, "sparsity");
  }
  auto labels = [&](const std::string& key, Index expected) {
    const std::string line = next_line();
    if (line.rfind(key + " ", 0) != 0)
      throw CorruptModel(path.string() + ": expected '" + key + "' line");
    const std::vector<std::string> fields = split_tabs(line.substr(key.size() + 1));
    if (static_cast<Index>(fields.size()) != expected)
      throw CorruptModel(path.string() + ": " + key + " lists " +
                         std::to_string(fields.size()) + " labels, counts say " +
                         std::to_string(expected));
    return fields;
  };
  model.pose_labels = labels("poses", J);
  model.subject_labels = labels("subjects", K);
  model.illum_labels = labels("illums", L);
  {
    auto s = parse(next_line(), "solver");
    s >> cfg.outer_iters >> cfg.ksvd_iters >> cfg.coding_iters >> cfg.code_tol >> cfg.ridge >>
        cfg.seed;
    require(s, "solver");
  }
  {
    const std::string line = next_line();
    if (line != "history" && line.rfind("history ", 0) != 0)
      throw CorruptModel(path.string() + ": expected 'history' line");
    std::istringstream s(line.size() > 7 ? line.substr(8) : "");
    double e;
    while (s >> e) model.training_errors.push_back(e);
  }
  if (!next_line().empty())
    throw CorruptModel(path.string() + ": expected blank line before payload");

  if (n <= 0 || cfg.d_a <= 0 || cfg.d_b <= 0 || cfg.d_c <= 0 || J <= 0 || K <= 0 || L <= 0)
    throw CorruptModel(path.string() + ": non-positive dimensions");
  if (cfg.t_a < 1 || cfg.t_a > cfg.d_a || cfg.t_b < 1 || cfg.t_b > cfg.d_b || cfg.t_c < 1 ||
      cfg.t_c > cfg.d_c)
    throw CorruptModel(path.string() + ": sparsity outside [1, dims]");

  model.base = BaseDictionary<double>(n, cfg.d_a, cfg.d_b, cfg.d_c);
  model.pose_codes.resize(cfg.d_a, J);
  model.subject_codes.resize(cfg.d_b, K);
  model.illum_codes.resize(cfg.d_c, L);
  read_exact(in, model.base.data.vec().data(), model.base.data.size(), path);
  read_exact(in, model.pose_codes.data(), model.pose_codes.size(), path);
  read_exact(in, model.subject_codes.data(), model.subject_codes.size(), path);
  read_exact(in, model.illum_codes.data(), model.illum_codes.size(), path);
  if (in.get() != EOF) throw CorruptModel(path.string() + ": trailing bytes after payload");
  return model;
}

}  // namespace dadl
