#include "hbo/error.hpp"

namespace hbo {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::InvalidExample: return "invalid-example";
    case ErrorKind::InvalidBatch: return "invalid-batch";
    case ErrorKind::InvalidIndex: return "invalid-index";
    case ErrorKind::InvalidReward: return "invalid-reward";
    case ErrorKind::InvalidState: return "invalid-state";
    case ErrorKind::DegenerateState: return "degenerate-state";
    case ErrorKind::InternalContract: return "internal-contract";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace hbo
