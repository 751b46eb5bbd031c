#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace beads {

enum class ErrorKind {
  MalformedConfig,
  DuplicateCode,
  UnknownTag,
  UnknownLayer,
  OrphanLine,
  IoFailure,
  MalformedCorpusFile,
  UnknownUnit,
  ProvenanceMismatch,
  CrossDebate,
  MalformedRecord,
  NoTagLine,
  EndpointUnreachable,
  InvalidResponse,
  DebateMismatch,
  EmptyIntersection,
  EmptyMatrix,
  UnknownFormat,
  SameDebate,
  UnknownSpeaker,
  NotFound,
  SetBusy,
  InvalidArgument,
  PortInUse,
  StoreUnreadable,
};

inline constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedConfig: return "MalformedConfig";
    case ErrorKind::DuplicateCode: return "DuplicateCode";
    case ErrorKind::UnknownTag: return "UnknownTag";
    case ErrorKind::UnknownLayer: return "UnknownLayer";
    case ErrorKind::OrphanLine: return "OrphanLine";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::MalformedCorpusFile: return "MalformedCorpusFile";
    case ErrorKind::UnknownUnit: return "UnknownUnit";
    case ErrorKind::ProvenanceMismatch: return "ProvenanceMismatch";
    case ErrorKind::CrossDebate: return "CrossDebate";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::NoTagLine: return "NoTagLine";
    case ErrorKind::EndpointUnreachable: return "EndpointUnreachable";
    case ErrorKind::InvalidResponse: return "InvalidResponse";
    case ErrorKind::DebateMismatch: return "DebateMismatch";
    case ErrorKind::EmptyIntersection: return "EmptyIntersection";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::UnknownFormat: return "UnknownFormat";
    case ErrorKind::SameDebate: return "SameDebate";
    case ErrorKind::UnknownSpeaker: return "UnknownSpeaker";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::SetBusy: return "SetBusy";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::PortInUse: return "PortInUse";
    case ErrorKind::StoreUnreadable: return "StoreUnreadable";
  }
  return "Unknown";
}

/// Domain error raised by every beads operation. `line()` is set for errors
/// tied to a position in an input file (1-based).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string detail, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(format(kind, detail, line)),
        kind_(kind),
        detail_(std::move(detail)),
        line_(line) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  static std::string format(ErrorKind kind, const std::string& detail,
                            std::optional<std::size_t> line) {
    std::string msg(to_string(kind));
    if (line) msg += " (line " + std::to_string(*line) + ")";
    msg += ": ";
    msg += detail;
    return msg;
  }

  ErrorKind kind_;
  std::string detail_;
  std::optional<std::size_t> line_;
};

}  // namespace beads
