#include "expgen/error.hpp"

namespace expgen {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidDimension: return "invalid-dimension";
    case ErrorKind::EpisodeFinished: return "episode-finished";
    case ErrorKind::InvalidKernel: return "invalid-kernel";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::InsufficientSamples: return "insufficient-samples";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::UnsupportedLevel: return "unsupported-level";
    case ErrorKind::UndefinedGap: return "undefined-gap";
    case ErrorKind::Config: return "config";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace expgen
