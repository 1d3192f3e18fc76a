#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "t2p/catalog.hpp"

namespace t2p {

inline constexpr std::size_t kDefaultPlaylistLength = 30;
inline constexpr std::size_t kDefaultArtistCap = 3;
/// The LLM answer is rejected when fewer than min(this, L) ids survive.
inline constexpr std::size_t kMinLlmTracks = 5;

struct RefinementCandidate {
  std::string track_id;
  std::string title;
  std::string artist_id;
  std::string artist_name;
  std::vector<Tag> tags;
  std::optional<double> score;
};

struct RefinementRequest {
  std::string query_text;
  std::vector<Tag> query_tags;  // extracted tags, in extraction order; used for titling
  std::vector<RefinementCandidate> ranked;
  std::size_t target_length = kDefaultPlaylistLength;
  std::size_t artist_cap = kDefaultArtistCap;
};

/// Throws kInvalidArgument on L == 0, D == 0 or duplicate candidates.
void validate(const RefinementRequest& request);

enum class RefinementBackend { kDeterministic, kLlm, kReplay };
std::string_view to_string(RefinementBackend b);
std::optional<RefinementBackend> parse_refinement_backend(std::string_view s);

struct Provenance {
  std::string extraction_backend = "rule";
  std::string refinement_backend = "deterministic";
  int relaxation_level = 0;
  bool personalized = false;
  bool degraded = false;
  std::uint64_t snapshot_id = 0;

  bool operator==(const Provenance&) const = default;
};

struct Playlist {
  std::string playlist_id;
  std::string title;
  std::vector<std::string> track_ids;
  Provenance provenance;
  std::int64_t created_at_ms = 0;

  bool operator==(const Playlist&) const = default;
};

/// "1990s · Focus mix" from the first two query tags.
std::string playlist_title(const std::vector<Tag>& query_tags);

/// Query line followed by one numbered line per candidate.
std::string candidates_to_text(const RefinementRequest& request);

std::string build_refinement_prompt(const RefinementRequest& request);

struct ParsedTracklist {
  std::vector<std::string> track_ids;
  std::string title;
  std::size_t hallucinated = 0;
  std::size_t duplicates = 0;
  std::size_t over_cap = 0;
};

/// Validates an LLM answer against the request. Throws kUnparseableResponse,
/// or kFallbackRequired when fewer than min(5, L) ids survive.
ParsedTracklist parse_llm_tracklist(std::string_view response_text,
                                    const RefinementRequest& request);

/// Greedy walk of the ranked order under the artist cap. Throws kEmptyPlaylist.
Playlist refine_deterministic(const RefinementRequest& request);

}  // namespace t2p
