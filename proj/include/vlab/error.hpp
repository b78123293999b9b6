#pragma once

#include <stdexcept>
#include <string>

namespace vlab {

enum class ErrorKind {
  Shape,
  Broadcast,
  Axis,
  Rank,
  NoTape,
  Geometry,
  Label,
  Config,
  Checkpoint,
  Container,
  Io,
  Numeric,
  Oracle,
  Report,
  Image,
  Data,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Broadcast: return "broadcast";
    case ErrorKind::Axis: return "axis";
    case ErrorKind::Rank: return "rank";
    case ErrorKind::NoTape: return "no-tape";
    case ErrorKind::Geometry: return "geometry";
    case ErrorKind::Label: return "label";
    case ErrorKind::Config: return "config";
    case ErrorKind::Checkpoint: return "checkpoint";
    case ErrorKind::Container: return "container";
    case ErrorKind::Io: return "io";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Oracle: return "oracle";
    case ErrorKind::Report: return "report";
    case ErrorKind::Image: return "image";
    case ErrorKind::Data: return "data";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + msg), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

}  // namespace vlab
