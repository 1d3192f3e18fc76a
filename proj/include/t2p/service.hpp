#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "t2p/catalog.hpp"
#include "t2p/config.hpp"
#include "t2p/llm_gateway.hpp"
#include "t2p/personalization.hpp"
#include "t2p/records.hpp"
#include "t2p/refinement.hpp"
#include "t2p/retrieval.hpp"
#include "t2p/store.hpp"
#include "t2p/tag_extraction.hpp"

namespace t2p {

/// Catalog, index and embeddings built together and served as one unit.
struct Snapshot {
  std::uint64_t id = 0;
  std::shared_ptr<const Catalog> catalog;
  std::shared_ptr<const InvertedIndex> index;
  std::shared_ptr<const EmbeddingStore> embeddings;
};

std::shared_ptr<const Snapshot> make_snapshot(Catalog catalog, EmbeddingStore embeddings);

/// Injection points; anything left empty is built from the config.
struct ServiceDeps {
  std::shared_ptr<LlmGateway> llm;
  std::shared_ptr<LlmGateway> replay;
  std::function<std::int64_t()> clock;  // epoch milliseconds
  std::shared_ptr<const TagTaxonomy> taxonomy;
  std::shared_ptr<const Lexicon> lexicon;
  std::shared_ptr<const Snapshot> snapshot;
};

struct GenerateOptions {
  std::optional<std::size_t> length;
  std::optional<ExtractionBackend> extraction;
  std::optional<RefinementBackend> refinement;
  bool persist = true;
};

struct StageTimings {
  std::chrono::microseconds extraction{0};
  std::chrono::microseconds retrieval{0};
  std::chrono::microseconds personalization{0};
  std::chrono::microseconds refinement{0};
  std::chrono::microseconds persistence{0};
  // Total minus time spent inside LLM calls.
  std::chrono::microseconds orchestration{0};
};

struct GenerationOutcome {
  Playlist playlist;
  GenerationRecord record;
  ExtractionResult extraction;
  MatchSpec match_spec;
  CandidateSet candidates;
  RankedList ranked;
  std::size_t hallucinated = 0;
  StageTimings timings;
  std::shared_ptr<const Snapshot> snapshot;
};

struct ServiceMetrics {
  std::uint64_t requests = 0;
  std::uint64_t generated = 0;
  std::uint64_t degraded = 0;
  std::uint64_t reformulate = 0;
  std::uint64_t hallucinations_dropped = 0;
  std::uint64_t events = 0;
  std::uint64_t reloads = 0;
  std::uint64_t reload_failures = 0;
  UsageReport usage;
  std::uint64_t snapshot_id = 0;
};

/// User-facing advice attached to 422 answers.
inline constexpr std::string_view kReformulateHint =
    "Try rephrasing with a genre, mood, decade or language, for example "
    "\"chill 90s rock for studying\".";

/// The end-to-end pipeline: extract, retrieve, personalize, refine, persist.
/// Thread-safe. Requests pin one snapshot for their whole duration.
class PlaylistService {
 public:
  explicit PlaylistService(ServiceConfig config, ServiceDeps deps = {});

  GenerationOutcome generate_playlist(const std::string& user_id, const std::string& query_text,
                                      const GenerateOptions& options = {});

  /// Stage-by-stage trace without persisting anything.
  nlohmann::ordered_json debug_pipeline(const std::string& user_id, const std::string& query_text);

  /// Returns false when the identical event was already stored.
  bool record_event(const PlaylistEvent& event);
  std::optional<Playlist> get_playlist(const std::string& playlist_id) const;

  /// Builds a fresh snapshot off to the side and swaps it in. On any load
  /// error the current snapshot keeps serving and the error is rethrown.
  std::uint64_t reload_snapshots(const std::filesystem::path& catalog_path,
                                 const std::filesystem::path& embeddings_path);
  std::uint64_t reload_snapshots();
  /// Swaps in an already-built snapshot; its id is restamped to current + 1.
  std::uint64_t install_snapshot(Catalog catalog, EmbeddingStore embeddings);

  std::shared_ptr<const Snapshot> snapshot() const;
  ServiceMetrics metrics() const;
  UsageReport usage() const;

  const ServiceConfig& config() const { return config_; }
  const TagTaxonomy& taxonomy() const { return *taxonomy_; }
  PlaylistStore& store() { return *store_; }
  const PlaylistStore& store() const { return *store_; }

 private:
  std::string new_playlist_id();
  RefinementRequest refinement_request(const Snapshot& snapshot, const std::string& query_text,
                                       const ExtractionResult& extraction,
                                       const RankedList& ranked, std::size_t length) const;

  ServiceConfig config_;
  std::function<std::int64_t()> clock_;
  std::shared_ptr<const TagTaxonomy> taxonomy_;
  std::shared_ptr<const Lexicon> lexicon_;
  std::shared_ptr<LlmGateway> llm_;
  std::shared_ptr<LlmGateway> replay_;
  std::unique_ptr<PlaylistStore> store_;

  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::mutex reload_mutex_;

  std::mutex id_mutex_;
  std::mt19937_64 id_rng_;

  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> generated_{0};
  std::atomic<std::uint64_t> degraded_{0};
  std::atomic<std::uint64_t> reformulate_{0};
  std::atomic<std::uint64_t> hallucinations_{0};
  std::atomic<std::uint64_t> events_{0};
  std::atomic<std::uint64_t> reloads_{0};
  std::atomic<std::uint64_t> reload_failures_{0};
};

}  // namespace t2p
