#pragma once

#include <stdexcept>
#include <string>

namespace texunwarp {

enum class ErrorCode {
  Parameter = 1,
  Size,
  Shape,
  Io,
  Manifest,
  Numeric,
  Freeze,
  Cache,
  State,
};

/// Base of every exception the core throws; the C API maps `code()` onto
/// its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define TEXUNWARP_DEFINE_ERROR(Name, Code)                           \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(Code, what) {}    \
  };

TEXUNWARP_DEFINE_ERROR(ParameterError, ErrorCode::Parameter)
TEXUNWARP_DEFINE_ERROR(SizeError, ErrorCode::Size)
TEXUNWARP_DEFINE_ERROR(ShapeError, ErrorCode::Shape)
TEXUNWARP_DEFINE_ERROR(IoError, ErrorCode::Io)
TEXUNWARP_DEFINE_ERROR(ManifestError, ErrorCode::Manifest)
TEXUNWARP_DEFINE_ERROR(NumericError, ErrorCode::Numeric)
TEXUNWARP_DEFINE_ERROR(FreezeViolation, ErrorCode::Freeze)
TEXUNWARP_DEFINE_ERROR(CacheError, ErrorCode::Cache)
TEXUNWARP_DEFINE_ERROR(StateError, ErrorCode::State)

#undef TEXUNWARP_DEFINE_ERROR

}  // namespace texunwarp
