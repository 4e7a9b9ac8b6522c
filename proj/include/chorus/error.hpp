#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chorus {

enum class ErrorKind {
  UnsupportedFormat,
  MalformedHeader,
  ClipTooShort,
  EmptyInput,
  NoDeltas,
  InsufficientFrames,
  TargetTooLarge,
  BadMagic,
  VersionMismatch,
  ChecksumMismatch,
  SpecMismatch,
  KTooLarge,
  EmptyCandidates,
  DegenerateClass,
  InvalidArgument,
  NetworkError,
  ArchiveSchemaChanged,
  DownloadFailed,
  Io,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries one of the kinds above so that
// callers (CLI, Python) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace chorus
