#pragma once

#include <stdexcept>
#include <string>

namespace dadl {

/// Root of the library error hierarchy.  `code()` is a stable machine-parseable
/// identifier; `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Bad configuration or arguments (CLI exit code 2).
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg, const std::string& code = "ConfigError")
      : Error(code, msg) {}
};

/// Malformed or inconsistent input data (CLI exit code 3).
struct DataError : Error {
  explicit DataError(const std::string& msg, const std::string& code = "DataError")
      : Error(code, msg) {}
};

/// Numerical failure (CLI exit code 4).
struct NumericError : Error {
  explicit NumericError(const std::string& msg, const std::string& code = "NumericError")
      : Error(code, msg) {}
};

// -- shape / labeling ---------------------------------------------------------

struct ModeMismatch : DataError {
  explicit ModeMismatch(const std::string& msg) : DataError(msg, "ModeMismatch") {}
};

struct DimensionMismatch : DataError {
  explicit DimensionMismatch(const std::string& msg) : DataError(msg, "DimensionMismatch") {}
};

struct IncompleteGrid : DataError {
  explicit IncompleteGrid(const std::string& msg) : DataError(msg, "IncompleteGrid") {}
};

struct MissingCell : DataError {
  explicit MissingCell(const std::string& msg) : DataError(msg, "MissingCell") {}
};

struct DuplicateCell : DataError {
  explicit DuplicateCell(const std::string& msg) : DataError(msg, "DuplicateCell") {}
};

struct UnknownLabel : DataError {
  explicit UnknownLabel(const std::string& msg) : DataError(msg, "UnknownLabel") {}
};

struct CorruptImage : DataError {
  explicit CorruptImage(const std::string& msg) : DataError(msg, "CorruptImage") {}
};

struct CorruptModel : DataError {
  explicit CorruptModel(const std::string& msg) : DataError(msg, "CorruptModel") {}
};

struct InconsistentDimensions : DataError {
  explicit InconsistentDimensions(const std::string& msg)
      : DataError(msg, "InconsistentDimensions") {}
};

struct EmptyGallery : DataError {
  explicit EmptyGallery(const std::string& msg) : DataError(msg, "EmptyGallery") {}
};

struct EmptyProtocol : DataError {
  explicit EmptyProtocol(const std::string& msg) : DataError(msg, "EmptyProtocol") {}
};

struct InsufficientSamples : DataError {
  explicit InsufficientSamples(const std::string& msg)
      : DataError(msg, "InsufficientSamples") {}
};

struct TooLarge : DataError {
  explicit TooLarge(const std::string& msg) : DataError(msg, "TooLarge") {}
};

// -- numerics -----------------------------------------------------------------

struct SingularMatrix : NumericError {
  explicit SingularMatrix(const std::string& msg) : NumericError(msg, "SingularMatrix") {}
};

struct NonNormalizedDictionary : NumericError {
  explicit NonNormalizedDictionary(const std::string& msg)
      : NumericError(msg, "NonNormalizedDictionary") {}
};

struct DegenerateDictionary : NumericError {
  explicit DegenerateDictionary(const std::string& msg)
      : NumericError(msg, "DegenerateDictionary") {}
};

}  // namespace dadl
