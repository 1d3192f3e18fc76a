#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "t2p/catalog.hpp"
#include "t2p/config.hpp"
#include "t2p/personalization.hpp"
#include "t2p/tag_extraction.hpp"

namespace t2p::testing {

inline std::filesystem::path data_dir() { return T2P_DATA_DIR; }

inline std::shared_ptr<const TagTaxonomy> desk_taxonomy() {
  static auto taxonomy =
      std::make_shared<const TagTaxonomy>(TagTaxonomy::load(data_dir() / "taxonomy.json"));
  return taxonomy;
}

inline const Lexicon& desk_lexicon() {
  static Lexicon lexicon = Lexicon::load(data_dir() / "lexicon.tsv", *desk_taxonomy());
  return lexicon;
}

inline Catalog desk_catalog(std::uint64_t snapshot_id = 1) {
  return load_catalog(data_dir() / "desk" / "catalog.jsonl", desk_taxonomy(), snapshot_id);
}

inline EmbeddingStore desk_embeddings(std::uint64_t snapshot_id = 1) {
  return load_embeddings(data_dir() / "desk" / "embeddings.txt", snapshot_id);
}

/// Config pointing at the shipped desk data and a private store directory.
inline ServiceConfig desk_config(const std::filesystem::path& store_dir) {
  ServiceConfig config = ServiceConfig::load(data_dir() / "config.json");
  config.paths.store_dir = store_dir;
  config.paths.fixtures_dir = store_dir / "fixtures";
  config.remote.endpoint.clear();
  return config;
}

/// Directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("t2p-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Random tracks over the desk taxonomy: at most one decade, at most
/// `max_tags` tags, `artists` distinct artists. Ids are "R000123"-style.
inline std::vector<Track> random_tracks(std::mt19937_64& rng, std::size_t count,
                                        std::size_t max_tags, std::size_t artists,
                                        std::size_t values_per_facet = 4) {
  const TagTaxonomy& taxonomy = *desk_taxonomy();
  std::vector<std::vector<std::string>> vocab;
  for (Facet f : kAllFacets) {
    const auto& values = taxonomy.values(f);
    std::vector<std::string> some(values.begin(), values.end());
    if (some.size() > values_per_facet) some.resize(values_per_facet);
    vocab.push_back(some);
  }
  std::uniform_int_distribution<std::size_t> n_tags(1, max_tags);
  std::uniform_int_distribution<std::size_t> facet_pick(0, kAllFacets.size() - 1);
  std::uniform_int_distribution<std::size_t> artist_pick(0, artists - 1);
  std::uniform_int_distribution<std::size_t> dur(60, 600);

  std::vector<Track> tracks;
  tracks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Track t;
    char id[24];
    std::snprintf(id, sizeof id, "R%06zu", i);
    t.track_id = id;
    t.title = "Track " + std::to_string(i);
    std::size_t a = artist_pick(rng);
    t.artist_id = "A" + std::to_string(a);
    t.artist_name = "Artist " + std::to_string(a);
    t.duration_sec = static_cast<std::int64_t>(dur(rng));
    std::size_t want = n_tags(rng);
    bool decade = false;
    for (std::size_t k = 0; k < want; ++k) {
      std::size_t fi = facet_pick(rng);
      Facet f = kAllFacets[fi];
      if (f == Facet::kDecade) {
        if (decade) continue;
        decade = true;
      }
      std::uniform_int_distribution<std::size_t> v(0, vocab[fi].size() - 1);
      t.tags.insert(Tag{f, vocab[fi][v(rng)]});
    }
    tracks.push_back(std::move(t));
  }
  return tracks;
}

}  // namespace t2p::testing
