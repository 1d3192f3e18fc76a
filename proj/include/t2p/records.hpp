#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "t2p/refinement.hpp"
#include "t2p/tag_extraction.hpp"

namespace t2p {

inline constexpr std::int64_t kMillisPerDay = 86'400'000;

/// What was generated for whom and how; one per persisted playlist.
struct GenerationRecord {
  std::string playlist_id;
  std::string user_id;
  std::string query;
  std::vector<TagPrediction> tags;
  int relaxation_level = 0;
  bool personalized = false;
  bool degraded = false;
  std::string extraction_backend;
  std::string refinement_backend;
  std::uint64_t snapshot_id = 0;
  std::int64_t created_at_ms = 0;
  std::int64_t completed_at_ms = 0;
};

inline constexpr std::string_view kListenedEvent = "listened";

struct PlaylistEvent {
  std::string playlist_id;
  std::string type{kListenedEvent};
  std::int64_t occurred_at_ms = 0;

  bool operator==(const PlaylistEvent&) const = default;
};

/// "2024-07-01T12:00:00.000Z"
std::string format_timestamp(std::int64_t epoch_ms);
/// Accepts ISO-8601 UTC ("YYYY-MM-DDTHH:MM:SS[.fff]Z") or integer epoch ms.
/// Throws kInvalidArgument.
std::int64_t parse_timestamp(const nlohmann::json& value);
std::int64_t now_ms();

nlohmann::ordered_json to_json(const Playlist& playlist);
Playlist playlist_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const GenerationRecord& record);
GenerationRecord record_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const PlaylistEvent& event);
PlaylistEvent event_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const TagPrediction& prediction);

}  // namespace t2p
