#pragma once

#include <stdexcept>
#include <string>

namespace expgen {

enum class ErrorKind {
  InvalidDimension,
  EpisodeFinished,
  InvalidKernel,
  Shape,
  InsufficientSamples,
  Numeric,
  UnsupportedLevel,
  UndefinedGap,
  Config,
  EmptyInput,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace expgen
