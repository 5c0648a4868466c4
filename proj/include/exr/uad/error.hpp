#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace exr {

enum class ErrorCode {
  MalformedTimestamp,
  InvalidCalendar,
  MalformedTimedelta,
  MalformedTransform,
  StorageFull,
  SerializationFailure,
  UninitializedLogger,
  CorruptAsset,
  SchemaVersionUnsupported,
  MalformedRecord,
  IoFailure,
  TranscriberUnavailable,
  VersionMismatch,
  DegenerateSize,
  DimensionMismatch,
  InvalidCamera,
  MalformedGlb,
  UnsupportedPrimitive,
  MalformedPng,
  ClientFailure,
  UnparseableResponse,
  AllAgentsFailed,
  AllRunsFailed,
  InvalidArgument,
  NotFound,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI and the HTTP layer in particular) can map it without
/// parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace exr
