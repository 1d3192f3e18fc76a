#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace t2p {

inline constexpr std::size_t kDefaultEmbeddingDimension = 128;

/// One stored vector. Components are kept in single precision as ingested; the
/// double-precision inverse norm is computed once so scoring is a dot product.
struct StoredEmbedding {
  std::vector<float> components;
  double inverse_norm = 0.0;
};

/// Immutable user and track CF vectors sharing one dimension.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dimension, std::uint64_t snapshot_id = 1);

  /// Throws kDimensionMismatch, kZeroVector (non-finite components too).
  void add_user(std::string id, std::vector<float> components);
  void add_track(std::string id, std::vector<float> components);

  /// Used when assembling a snapshot, before the store is shared.
  void set_snapshot_id(std::uint64_t id) { snapshot_id_ = id; }

  std::size_t dimension() const { return dimension_; }
  std::uint64_t snapshot_id() const { return snapshot_id_; }
  const StoredEmbedding* user(const std::string& id) const;
  const StoredEmbedding* track(const std::string& id) const;
  std::size_t user_count() const { return users_.size(); }
  std::size_t track_count() const { return tracks_.size(); }

 private:
  StoredEmbedding make(std::vector<float> components) const;

  std::size_t dimension_;
  std::uint64_t snapshot_id_;
  std::unordered_map<std::string, StoredEmbedding> users_;
  std::unordered_map<std::string, StoredEmbedding> tracks_;
};

EmbeddingStore load_embeddings(std::istream& in, std::uint64_t snapshot_id = 1);
EmbeddingStore load_embeddings(const std::filesystem::path& path, std::uint64_t snapshot_id = 1);

/// Writes the `t2p-embeddings v1` text format.
void write_embedding_header(std::ostream& out, std::size_t dimension);
void write_embedding_row(std::ostream& out, bool is_user, const std::string& id,
                         std::span<const float> components);

/// dot(u, v) / (|u| |v|) accumulated in double, clamped to [-1, 1].
/// Throws kDimensionMismatch or kZeroVector.
double cosine(std::span<const float> u, std::span<const float> v);

struct ScoredTrack {
  std::string track_id;
  std::optional<double> score;  // nullopt renders as unscored

  bool operator==(const ScoredTrack&) const = default;
};

struct RankedList {
  std::vector<ScoredTrack> tracks;
  bool personalized = false;
};

/// Orders candidates by descending cosine to the user (ties by ascending
/// track_id). Tracks without a vector follow in their input order; a user
/// without a vector gets the input order back with personalized=false.
RankedList rank_for_user(const std::string& user_id, std::span<const std::string> candidates,
                         const EmbeddingStore& store);

/// Same ranking for an ad-hoc user vector.
RankedList rank_for_vector(std::span<const float> user_vector,
                           std::span<const std::string> candidates,
                           const EmbeddingStore& store);

}  // namespace t2p
