#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace t2p {

enum class Facet { kGenre, kMood, kDecade, kLanguage, kArtistGender };

inline constexpr std::array<Facet, 5> kAllFacets = {
    Facet::kGenre, Facet::kMood, Facet::kDecade, Facet::kLanguage,
    Facet::kArtistGender};

std::string_view to_string(Facet facet);
std::optional<Facet> parse_facet(std::string_view name);

struct Tag {
  Facet facet{};
  std::string value;

  auto operator<=>(const Tag&) const = default;
  bool operator==(const Tag&) const = default;
};

/// "facet:value", the form used in catalog files, lexicons and documents.
std::string to_string(const Tag& tag);

/// Lookup key shared by taxonomy, lexicon and span matching: ASCII-lowercased,
/// every run of separator bytes (anything but alphanumerics, '&' and non-ASCII
/// bytes) collapsed to one space, then trimmed.
std::string lookup_key(std::string_view raw);

/// Controlled vocabulary per facet plus a raw-string to canonical synonym map.
class TagTaxonomy {
 public:
  TagTaxonomy() = default;

  static TagTaxonomy from_json_text(std::string_view text);
  static TagTaxonomy load(const std::filesystem::path& path);

  /// Adds a canonical value. Values must already be lowercase and trimmed.
  void add_value(Facet facet, std::string value);
  /// Adds raw -> canonical. Throws kInvalidArgument when the target is not
  /// canonical or the raw key already maps elsewhere.
  void add_synonym(Facet facet, std::string_view raw, const std::string& canonical);

  const std::set<std::string>& values(Facet facet) const;
  bool contains(const Tag& tag) const;
  int version() const { return version_; }

  /// Canonical tag for `raw` via exact match or synonym after key folding.
  /// Throws Error(kUnknownTag).
  Tag normalize(Facet facet, std::string_view raw) const;
  std::optional<Tag> try_normalize(Facet facet, std::string_view raw) const;

 private:
  static std::size_t slot(Facet f) { return static_cast<std::size_t>(f); }

  int version_ = 1;
  std::array<std::set<std::string>, kAllFacets.size()> values_;
  // key -> canonical value, including canonical values mapped to themselves.
  std::array<std::map<std::string, std::string, std::less<>>, kAllFacets.size()> keys_;
};

Tag normalize_tag(const TagTaxonomy& taxonomy, Facet facet, std::string_view raw);

struct Track {
  std::string track_id;
  std::string title;
  std::string artist_id;
  std::string artist_name;
  std::int64_t duration_sec = 0;
  std::set<Tag> tags;

  bool has_tag(const Tag& tag) const { return tags.count(tag) != 0; }
};

/// Immutable snapshot of the catalog. Tracks are keyed and iterated in
/// ascending track_id order.
class Catalog {
 public:
  Catalog(std::shared_ptr<const TagTaxonomy> taxonomy, std::vector<Track> tracks,
          std::uint64_t snapshot_id);

  const std::map<std::string, Track, std::less<>>& tracks() const { return tracks_; }
  const Track* find(std::string_view track_id) const;
  const TagTaxonomy& taxonomy() const { return *taxonomy_; }
  std::shared_ptr<const TagTaxonomy> taxonomy_ptr() const { return taxonomy_; }
  std::uint64_t snapshot_id() const { return snapshot_id_; }
  std::size_t size() const { return tracks_.size(); }

 private:
  std::shared_ptr<const TagTaxonomy> taxonomy_;
  std::map<std::string, Track, std::less<>> tracks_;
  std::uint64_t snapshot_id_;
};

/// Mood and other scored tags are kept iff score >= this threshold.
inline constexpr double kTagScoreThreshold = 0.5;

/// Parses one catalog line. Throws kMalformedRecord / kUnknownTag.
Track parse_catalog_record(std::string_view line, const TagTaxonomy& taxonomy,
                           std::size_t line_number);

Catalog load_catalog(std::istream& in, std::shared_ptr<const TagTaxonomy> taxonomy,
                     std::uint64_t snapshot_id = 1);
Catalog load_catalog(const std::filesystem::path& path,
                     std::shared_ptr<const TagTaxonomy> taxonomy,
                     std::uint64_t snapshot_id = 1);

/// Catalog line for `track`, the inverse of parse_catalog_record.
std::string to_catalog_record(const Track& track);

/// Linear scan. Returned set is ascending by track_id.
std::set<std::string> tracks_with_tag(const Catalog& catalog, const Tag& tag);

}  // namespace t2p
