#pragma once

#include <stdexcept>
#include <string>

namespace nci {

// One subclass per failure family so callers (and the CLI) can react by type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };   // shape/extent mismatch
struct ParameterError : Error { using Error::Error; };   // invalid argument value
struct ParseError : Error { using Error::Error; };       // malformed input text
struct IngestionError : Error { using Error::Error; };   // corpus-level violation
struct EmbeddingError : Error { using Error::Error; };   // embedding construction
struct ConfigError : Error { using Error::Error; };      // pipeline configuration
struct DependencyError : Error { using Error::Error; };  // missing stage artifact
struct IoError : Error { using Error::Error; };          // file system

}  // namespace nci
