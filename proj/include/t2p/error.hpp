#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace t2p {

enum class ErrorCode {
  kMalformedRecord,
  kDuplicateTrackId,
  kUnknownTag,
  kInvalidQuery,
  kNoTagsExtracted,
  kUnparseableResponse,
  kEmptyCandidateSet,
  kUnknownTrackId,
  kDimensionMismatch,
  kZeroVector,
  kMalformedRow,
  kFallbackRequired,
  kEmptyPlaylist,
  kTimeoutExhausted,
  kFixtureMiss,
  kRemoteRejected,
  kUnknownPlaylist,
  kInvalidEvent,
  kInvalidArgument,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library. `line()` is set for errors tied to a
/// 1-based input line (catalog records, embedding rows, lexicon entries).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  /// The message without the code and line decoration.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
  std::optional<std::size_t> line_;
};

}  // namespace t2p
