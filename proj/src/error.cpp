#include "pbshm/error.hpp"

namespace pbshm {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::not_found: return "not-found";
    case ErrorKind::record_shape: return "record-shape";
    case ErrorKind::synchronisation: return "synchronisation";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::operator_contract: return "operator-contract";
    case ErrorKind::domain: return "domain";
    case ErrorKind::connectivity: return "connectivity";
    case ErrorKind::no_path: return "no-path";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::unsupported_model: return "unsupported-model";
    case ErrorKind::model: return "model";
    case ErrorKind::sampling: return "sampling";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::compatibility: return "compatibility";
    case ErrorKind::path: return "path";
    case ErrorKind::training: return "training";
    case ErrorKind::calibration: return "calibration";
    case ErrorKind::invalid_target: return "invalid-target";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace pbshm
