#include "t2p/catalog.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "t2p/error.hpp"

namespace t2p {

using nlohmann::json;

std::string_view to_string(Facet facet) {
  switch (facet) {
    case Facet::kGenre: return "genre";
    case Facet::kMood: return "mood";
    case Facet::kDecade: return "decade";
    case Facet::kLanguage: return "language";
    case Facet::kArtistGender: return "artist_gender";
  }
  return "?";
}

std::optional<Facet> parse_facet(std::string_view name) {
  for (Facet f : kAllFacets) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

std::string to_string(const Tag& tag) {
  std::string out(to_string(tag.facet));
  out += ':';
  out += tag.value;
  return out;
}

namespace {

bool is_key_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '&' || c >= 0x80;
}

}  // namespace

std::string lookup_key(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (!is_key_byte(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// TagTaxonomy

void TagTaxonomy::add_value(Facet facet, std::string value) {
  std::string key = lookup_key(value);
  if (value.empty() || key.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty taxonomy value");
  }
  for (char c : value) {
    if (c >= 'A' && c <= 'Z') {
      throw Error(ErrorCode::kInvalidArgument, "taxonomy value not lowercase: " + value);
    }
  }
  if (value.front() == ' ' || value.back() == ' ') {
    throw Error(ErrorCode::kInvalidArgument, "taxonomy value not trimmed: " + value);
  }
  auto& keys = keys_[slot(facet)];
  if (auto it = keys.find(key); it != keys.end() && it->second != value) {
    throw Error(ErrorCode::kInvalidArgument,
                "taxonomy values '" + it->second + "' and '" + value + "' collide");
  }
  keys[key] = value;
  values_[slot(facet)].insert(std::move(value));
}

void TagTaxonomy::add_synonym(Facet facet, std::string_view raw, const std::string& canonical) {
  if (values_[slot(facet)].count(canonical) == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "synonym target '" + canonical + "' is not canonical for " +
                    std::string(to_string(facet)));
  }
  std::string key = lookup_key(raw);
  if (key.empty()) throw Error(ErrorCode::kInvalidArgument, "empty synonym");
  auto& keys = keys_[slot(facet)];
  auto [it, inserted] = keys.emplace(key, canonical);
  if (!inserted && it->second != canonical) {
    throw Error(ErrorCode::kInvalidArgument, "synonym '" + std::string(raw) +
                                                 "' maps to both '" + it->second +
                                                 "' and '" + canonical + "'");
  }
}

const std::set<std::string>& TagTaxonomy::values(Facet facet) const {
  return values_[slot(facet)];
}

bool TagTaxonomy::contains(const Tag& tag) const {
  return values_[slot(tag.facet)].count(tag.value) != 0;
}

std::optional<Tag> TagTaxonomy::try_normalize(Facet facet, std::string_view raw) const {
  const auto& keys = keys_[slot(facet)];
  auto it = keys.find(lookup_key(raw));
  if (it == keys.end()) return std::nullopt;
  return Tag{facet, it->second};
}

Tag TagTaxonomy::normalize(Facet facet, std::string_view raw) const {
  if (auto tag = try_normalize(facet, raw)) return *tag;
  throw Error(ErrorCode::kUnknownTag,
              std::string(to_string(facet)) + ":\"" + std::string(raw) + "\"");
}

TagTaxonomy TagTaxonomy::from_json_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("taxonomy: ") + e.what());
  }
  TagTaxonomy taxonomy;
  try {
    taxonomy.version_ = doc.value("version", 1);
    for (const auto& [name, list] : doc.at("facets").items()) {
      auto facet = parse_facet(name);
      if (!facet) throw Error(ErrorCode::kInvalidArgument, "unknown facet " + name);
      for (const auto& v : list) taxonomy.add_value(*facet, v.get<std::string>());
    }
    if (doc.contains("synonyms")) {
      for (const auto& [name, map] : doc.at("synonyms").items()) {
        auto facet = parse_facet(name);
        if (!facet) throw Error(ErrorCode::kInvalidArgument, "unknown facet " + name);
        for (const auto& [raw, canonical] : map.items()) {
          taxonomy.add_synonym(*facet, raw, canonical.get<std::string>());
        }
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("taxonomy: ") + e.what());
  }
  return taxonomy;
}

TagTaxonomy TagTaxonomy::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

Tag normalize_tag(const TagTaxonomy& taxonomy, Facet facet, std::string_view raw) {
  return taxonomy.normalize(facet, raw);
}

// ---------------------------------------------------------------------------
// Catalog

Catalog::Catalog(std::shared_ptr<const TagTaxonomy> taxonomy, std::vector<Track> tracks,
                 std::uint64_t snapshot_id)
    : taxonomy_(std::move(taxonomy)), snapshot_id_(snapshot_id) {
  for (auto& track : tracks) {
    if (tracks_.find(track.track_id) != tracks_.end()) {
      throw Error(ErrorCode::kDuplicateTrackId, track.track_id);
    }
    std::string id = track.track_id;
    tracks_.emplace(std::move(id), std::move(track));
  }
}

const Track* Catalog::find(std::string_view track_id) const {
  auto it = tracks_.find(track_id);
  return it == tracks_.end() ? nullptr : &it->second;
}

namespace {

[[noreturn]] void malformed(std::size_t line, const std::string& why) {
  throw Error(ErrorCode::kMalformedRecord, why, line);
}

std::string required_string(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_string()) {
    malformed(line, std::string("field '") + field + "' missing or not a string");
  }
  auto value = it->get<std::string>();
  if (value.empty()) malformed(line, std::string("field '") + field + "' is empty");
  return value;
}

}  // namespace

Track parse_catalog_record(std::string_view line, const TagTaxonomy& taxonomy,
                           std::size_t line_number) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::exception&) {
    malformed(line_number, "not a JSON object");
  }
  if (!obj.is_object()) malformed(line_number, "not a JSON object");

  Track track;
  track.track_id = required_string(obj, "track_id", line_number);
  track.title = required_string(obj, "title", line_number);
  track.artist_id = required_string(obj, "artist_id", line_number);
  track.artist_name = required_string(obj, "artist_name", line_number);

  auto dur = obj.find("duration_sec");
  if (dur == obj.end() || !dur->is_number_integer() || dur->get<std::int64_t>() <= 0) {
    malformed(line_number, "duration_sec must be a positive integer");
  }
  track.duration_sec = dur->get<std::int64_t>();

  auto tags = obj.find("tags");
  if (tags == obj.end() || !tags->is_array()) malformed(line_number, "tags must be a list");
  bool has_decade = false;
  for (const auto& entry : *tags) {
    if (!entry.is_string()) malformed(line_number, "tag entries must be strings");
    std::string_view text = entry.get_ref<const std::string&>();
    auto colon = text.find(':');
    if (colon == std::string_view::npos) malformed(line_number, "tag without facet");
    auto facet = parse_facet(text.substr(0, colon));
    if (!facet) malformed(line_number, "unknown facet in '" + std::string(text) + "'");
    std::string_view rest = text.substr(colon + 1);

    double score = 1.0;
    if (auto last = rest.rfind(':'); last != std::string_view::npos) {
      std::string_view num = rest.substr(last + 1);
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), score);
      if (ec != std::errc() || ptr != num.data() + num.size()) {
        malformed(line_number, "bad tag score in '" + std::string(text) + "'");
      }
      rest = rest.substr(0, last);
    }
    auto tag = taxonomy.try_normalize(*facet, rest);
    if (!tag) {
      throw Error(ErrorCode::kUnknownTag,
                  std::string(to_string(*facet)) + ":\"" + std::string(rest) + "\"",
                  line_number);
    }
    if (score < kTagScoreThreshold) continue;
    if (tag->facet == Facet::kDecade && !track.has_tag(*tag)) {
      if (has_decade) malformed(line_number, "more than one decade tag");
      has_decade = true;
    }
    track.tags.insert(std::move(*tag));
  }
  return track;
}

Catalog load_catalog(std::istream& in, std::shared_ptr<const TagTaxonomy> taxonomy,
                     std::uint64_t snapshot_id) {
  std::vector<Track> tracks;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Track track = parse_catalog_record(line, *taxonomy, line_number);
    if (!seen.insert(track.track_id).second) {
      throw Error(ErrorCode::kDuplicateTrackId, track.track_id, line_number);
    }
    tracks.push_back(std::move(track));
  }
  return Catalog(std::move(taxonomy), std::move(tracks), snapshot_id);
}

Catalog load_catalog(const std::filesystem::path& path,
                     std::shared_ptr<const TagTaxonomy> taxonomy, std::uint64_t snapshot_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return load_catalog(in, std::move(taxonomy), snapshot_id);
}

std::string to_catalog_record(const Track& track) {
  nlohmann::ordered_json obj;
  obj["track_id"] = track.track_id;
  obj["title"] = track.title;
  obj["artist_id"] = track.artist_id;
  obj["artist_name"] = track.artist_name;
  obj["duration_sec"] = track.duration_sec;
  auto& tags = obj["tags"] = nlohmann::ordered_json::array();
  for (const auto& tag : track.tags) tags.push_back(to_string(tag));
  return obj.dump();
}

std::set<std::string> tracks_with_tag(const Catalog& catalog, const Tag& tag) {
  std::set<std::string> out;
  for (const auto& [id, track] : catalog.tracks()) {
    if (track.has_tag(tag)) out.insert(id);
  }
  return out;
}

}  // namespace t2p
