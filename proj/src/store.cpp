#include "t2p/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>

#include "t2p/error.hpp"

namespace t2p {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kLogName = "playlists.log";

[[noreturn]] void io_error(const std::string& what) {
  throw Error(ErrorCode::kIo, what + ": " + std::strerror(errno));
}

std::string generation_line(const Playlist& p, const GenerationRecord& r) {
  ordered_json j;
  j["kind"] = "generation";
  j["playlist"] = to_json(p);
  j["record"] = to_json(r);
  return j.dump() + "\n";
}

std::string event_line(const PlaylistEvent& e) {
  ordered_json j;
  j["kind"] = "event";
  j["event"] = to_json(e);
  return j.dump() + "\n";
}

}  // namespace

PlaylistStore::PlaylistStore(std::filesystem::path dir) : PlaylistStore(std::move(dir), Options{}) {}

PlaylistStore::PlaylistStore(std::filesystem::path dir, Options options)
    : dir_(std::move(dir)), log_path_(dir_ / kLogName), options_(options) {
  std::filesystem::create_directories(dir_);
  replay();
  if (skipped_lines_ > 0) {
    compact_locked();
  } else {
    open_for_append();
  }
}

PlaylistStore::~PlaylistStore() {
  if (fd_ >= 0) ::close(fd_);
}

void PlaylistStore::open_for_append() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = ::open(log_path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) io_error("open " + log_path_.string());
}

void PlaylistStore::replay() {
  std::ifstream in(log_path_, std::ios::binary);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw Error(ErrorCode::kMalformedRecord, "torn line");
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "generation") {
        Playlist p = playlist_from_json(j.at("playlist"));
        GenerationRecord r = record_from_json(j.at("record"));
        if (index_.count(p.playlist_id) != 0) continue;
        index_[p.playlist_id] = playlists_.size();
        playlists_.push_back(std::move(p));
        records_.push_back(std::move(r));
      } else if (kind == "event") {
        PlaylistEvent e = event_from_json(j.at("event"));
        if (index_.count(e.playlist_id) == 0) throw Error(ErrorCode::kUnknownPlaylist, "");
        if (event_keys_.emplace(e.playlist_id, e.type, e.occurred_at_ms).second) {
          events_.push_back(std::move(e));
        }
      } else {
        throw Error(ErrorCode::kMalformedRecord, "unknown kind");
      }
    } catch (const std::exception&) {
      ++skipped_lines_;
    }
  }
}

void PlaylistStore::write_line(const std::string& line) {
  const char* data = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    ssize_t n = ::write(fd_, data, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_error("write " + log_path_.string());
    }
    data += n;
    left -= static_cast<std::size_t>(n);
  }
  if (options_.fsync && ::fdatasync(fd_) != 0) io_error("fdatasync");
  if (options_.compact_every != 0 && ++appends_since_compact_ >= options_.compact_every) {
    compact_locked();
  }
}

void PlaylistStore::append_generation(const Playlist& playlist, const GenerationRecord& record) {
  std::unique_lock lock(mutex_);
  if (index_.count(playlist.playlist_id) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate playlist id " + playlist.playlist_id);
  }
  write_line(generation_line(playlist, record));
  index_[playlist.playlist_id] = playlists_.size();
  playlists_.push_back(playlist);
  records_.push_back(record);
}

bool PlaylistStore::record_event(const PlaylistEvent& event) {
  std::unique_lock lock(mutex_);
  auto it = index_.find(event.playlist_id);
  if (it == index_.end()) throw Error(ErrorCode::kUnknownPlaylist, event.playlist_id);
  if (event.type != kListenedEvent) {
    throw Error(ErrorCode::kInvalidEvent, "unsupported event type '" + event.type + "'");
  }
  if (event.occurred_at_ms < playlists_[it->second].created_at_ms) {
    throw Error(ErrorCode::kInvalidEvent, "event predates the playlist");
  }
  if (event_keys_.count({event.playlist_id, event.type, event.occurred_at_ms}) != 0) {
    return false;
  }
  write_line(event_line(event));
  event_keys_.emplace(event.playlist_id, event.type, event.occurred_at_ms);
  events_.push_back(event);
  return true;
}

bool PlaylistStore::contains(const std::string& playlist_id) const {
  std::shared_lock lock(mutex_);
  return index_.count(playlist_id) != 0;
}

std::optional<Playlist> PlaylistStore::playlist(const std::string& playlist_id) const {
  std::shared_lock lock(mutex_);
  auto it = index_.find(playlist_id);
  if (it == index_.end()) return std::nullopt;
  return playlists_[it->second];
}

std::optional<GenerationRecord> PlaylistStore::record(const std::string& playlist_id) const {
  std::shared_lock lock(mutex_);
  auto it = index_.find(playlist_id);
  if (it == index_.end()) return std::nullopt;
  return records_[it->second];
}

std::vector<GenerationRecord> PlaylistStore::records() const {
  std::shared_lock lock(mutex_);
  return records_;
}

std::vector<PlaylistEvent> PlaylistStore::events() const {
  std::shared_lock lock(mutex_);
  return events_;
}

std::size_t PlaylistStore::playlist_count() const {
  std::shared_lock lock(mutex_);
  return playlists_.size();
}

void PlaylistStore::compact() {
  std::unique_lock lock(mutex_);
  compact_locked();
}

void PlaylistStore::compact_locked() {
  auto tmp = log_path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    for (std::size_t i = 0; i < playlists_.size(); ++i) {
      out << generation_line(playlists_[i], records_[i]);
    }
    for (const auto& e : events_) out << event_line(e);
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, log_path_);
  appends_since_compact_ = 0;
  open_for_append();
}

}  // namespace t2p
