#include "chorus/error.hpp"

namespace chorus {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::ClipTooShort: return "ClipTooShort";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NoDeltas: return "NoDeltas";
    case ErrorKind::InsufficientFrames: return "InsufficientFrames";
    case ErrorKind::TargetTooLarge: return "TargetTooLarge";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::SpecMismatch: return "SpecMismatch";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::EmptyCandidates: return "EmptyCandidates";
    case ErrorKind::DegenerateClass: return "DegenerateClass";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NetworkError: return "NetworkError";
    case ErrorKind::ArchiveSchemaChanged: return "ArchiveSchemaChanged";
    case ErrorKind::DownloadFailed: return "DownloadFailed";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace chorus
