#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "t2p/records.hpp"
#include "t2p/refinement.hpp"

namespace t2p {

/// Append-only JSON-lines log of generated playlists and their events.
/// One line per write, so a playlist and its generation record land together.
/// Writes are serialized; reads run concurrently against in-memory state.
class PlaylistStore {
 public:
  struct Options {
    bool fsync = false;
    // Rewrite the log after this many appends; 0 disables.
    std::size_t compact_every = 10'000;
  };

  explicit PlaylistStore(std::filesystem::path dir);
  PlaylistStore(std::filesystem::path dir, Options options);
  ~PlaylistStore();

  PlaylistStore(const PlaylistStore&) = delete;
  PlaylistStore& operator=(const PlaylistStore&) = delete;

  void append_generation(const Playlist& playlist, const GenerationRecord& record);

  /// Returns false when the identical event was already stored. Throws
  /// kUnknownPlaylist or kInvalidEvent (unknown type, or earlier than the
  /// playlist's creation).
  bool record_event(const PlaylistEvent& event);

  bool contains(const std::string& playlist_id) const;
  std::optional<Playlist> playlist(const std::string& playlist_id) const;
  std::optional<GenerationRecord> record(const std::string& playlist_id) const;
  std::vector<GenerationRecord> records() const;
  std::vector<PlaylistEvent> events() const;
  std::size_t playlist_count() const;

  /// Rewrites the log from in-memory state and swaps it in atomically.
  void compact();
  /// Lines skipped as unreadable when the log was opened.
  std::size_t skipped_lines() const { return skipped_lines_; }
  const std::filesystem::path& log_path() const { return log_path_; }

 private:
  void replay();
  void write_line(const std::string& line);
  void compact_locked();
  void open_for_append();

  std::filesystem::path dir_;
  std::filesystem::path log_path_;
  Options options_;
  int fd_ = -1;
  std::size_t appends_since_compact_ = 0;
  std::size_t skipped_lines_ = 0;

  mutable std::shared_mutex mutex_;
  std::map<std::string, std::size_t> index_;  // playlist_id -> position
  std::vector<Playlist> playlists_;
  std::vector<GenerationRecord> records_;
  std::vector<PlaylistEvent> events_;
  std::set<std::tuple<std::string, std::string, std::int64_t>> event_keys_;
};

}  // namespace t2p
