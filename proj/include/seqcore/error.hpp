#pragma once

#include <stdexcept>
#include <string>

namespace seqcore {

/// Broad failure families; the CLI maps each one to an exit code.
enum class ErrorKind { config, io, data };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define SEQCORE_DEFINE_ERROR(Name, Kind)                                          \
  class Name : public Error {                                                     \
   public:                                                                        \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}      \
  };

SEQCORE_DEFINE_ERROR(ConfigError, config)
SEQCORE_DEFINE_ERROR(MixedExtractorError, config)
SEQCORE_DEFINE_ERROR(IoError, io)
SEQCORE_DEFINE_ERROR(FormatError, io)
SEQCORE_DEFINE_ERROR(VersionError, io)
SEQCORE_DEFINE_ERROR(DimensionError, data)
SEQCORE_DEFINE_ERROR(NonFiniteError, data)
SEQCORE_DEFINE_ERROR(NotFullError, data)
SEQCORE_DEFINE_ERROR(SizeError, data)
SEQCORE_DEFINE_ERROR(GeometryError, data)
SEQCORE_DEFINE_ERROR(EmptyValidationError, data)

#undef SEQCORE_DEFINE_ERROR

}  // namespace seqcore
