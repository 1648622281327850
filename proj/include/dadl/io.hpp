#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dadl/model.hpp"
#include "dadl/multiarray.hpp"

namespace dadl {

/// Grayscale image as stored in a binary PGM (P5, maxval 255) file.
struct PgmImage {
  Index width = 0;
  Index height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, width * height bytes
};

/// Reads a binary PGM.  Throws CorruptImage on anything that is not a
/// well-formed P5 file with maxval 255 and a complete pixel payload.
PgmImage read_pgm(const std::filesystem::path& path);

/// Writes a binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, const PgmImage& image);

/// Flattens an image row-major into a pixel vector scaled to [0,1] by /255.
VectorX<double> pgm_to_vector(const PgmImage& image);

/// Quantizes a [0,1] pixel vector of length width*height into PGM bytes;
/// values are clamped to [0,1] and rounded to the nearest of 256 levels.
PgmImage vector_to_pgm(const VectorX<double>& pixels, Index width, Index height);

/// One manifest line: an image file (relative to the corpus root) and the
/// labels naming its cell.
struct ManifestRow {
  std::string path;
  std::string subject;
  std::string pose;
  std::string illum;
};

/// Reads a tab-separated manifest with the fixed header
/// "path<TAB>subject<TAB>pose<TAB>illum".  Labels are opaque strings.
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// Writes the manifest format read_manifest accepts.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

/// A complete training corpus: the label-indexed image grid plus the label
/// order (first manifest appearance) and the common image shape.
struct Corpus {
  DomainGrid<double> grid;  // columns: subject; rows: pose-major, illum-minor
  std::vector<std::string> pose_labels;
  std::vector<std::string> illum_labels;
  std::vector<std::string> subject_labels;
  Index width = 0;
  Index height = 0;
};

/// Loads a complete subjects x poses x illuminations corpus.  Every
/// (subject, pose, illum) combination named by the manifest labels must be
/// present exactly once.  Throws DuplicateCell (naming the manifest row),
/// MissingCell, CorruptImage, or InconsistentDimensions.
Corpus load_corpus(const std::filesystem::path& manifest_path,
                   const std::filesystem::path& root);

/// One labeled image of a partial (evaluation) set.
struct LabeledCell {
  VectorX<double> image;
  std::string subject;
  std::string pose;
  std::string illum;
};

/// A partial image set: gallery/probe lists need labels but no complete grid.
struct LabeledSet {
  std::vector<LabeledCell> cells;
  Index width = 0;
  Index height = 0;
};

/// Loads manifest images without requiring grid completeness.  Duplicate
/// triples and inconsistent image dimensions are still rejected.
LabeledSet load_labeled_set(const std::filesystem::path& manifest_path,
                            const std::filesystem::path& root);

/// Writes a grid as a PGM-per-cell corpus with a manifest.tsv next to the
/// images.  Cell values must already lie in [0,1]; each cell of the grid maps
/// to "<subject>_<pose>_<illum>.pgm".  width*height must equal the cell size.
void save_corpus(const std::filesystem::path& directory, const DomainGrid<double>& grid,
                 const std::vector<std::string>& pose_labels,
                 const std::vector<std::string>& illum_labels,
                 const std::vector<std::string>& subject_labels, Index width, Index height);

/// Persists a learned model: a text header (magic "DADL1", shape, label maps,
/// solver configuration, training-error history), a blank line, then the
/// base dictionary (pixel index fastest, then pose-, subject-, illum-atom)
/// and the three code matrices column-major as little-endian 64-bit floats.
void save_model(const std::filesystem::path& path, const DadlModel<double>& model);

/// Loads a model saved by save_model; arrays round-trip bit-exactly.
/// Throws CorruptModel on a malformed or truncated file.
DadlModel<double> load_model(const std::filesystem::path& path);

}  // namespace dadl
