#include "t2p/error.hpp"

namespace t2p {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kDuplicateTrackId: return "DuplicateTrackId";
    case ErrorCode::kUnknownTag: return "UnknownTag";
    case ErrorCode::kInvalidQuery: return "InvalidQuery";
    case ErrorCode::kNoTagsExtracted: return "NoTagsExtracted";
    case ErrorCode::kUnparseableResponse: return "UnparseableResponse";
    case ErrorCode::kEmptyCandidateSet: return "EmptyCandidateSet";
    case ErrorCode::kUnknownTrackId: return "UnknownTrackId";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kFallbackRequired: return "FallbackRequired";
    case ErrorCode::kEmptyPlaylist: return "EmptyPlaylist";
    case ErrorCode::kTimeoutExhausted: return "TimeoutExhausted";
    case ErrorCode::kFixtureMiss: return "FixtureMiss";
    case ErrorCode::kRemoteRejected: return "RemoteRejected";
    case ErrorCode::kUnknownPlaylist: return "UnknownPlaylist";
    case ErrorCode::kInvalidEvent: return "InvalidEvent";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

namespace {

std::string decorate(ErrorCode code, const std::string& message,
                     std::optional<std::size_t> line) {
  std::string out(to_string(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> line)
    : std::runtime_error(decorate(code, message, line)), code_(code), detail_(message), line_(line) {}

}  // namespace t2p
