#include "t2p/retrieval.hpp"

#include <algorithm>
#include <iterator>

#include <nlohmann/json.hpp>

#include "t2p/error.hpp"
#include "t2p/tag_extraction.hpp"

namespace t2p {

using Ordinal = InvertedIndex::Ordinal;

std::span<const Ordinal> InvertedIndex::posting(const Tag& tag) const {
  auto it = postings_.find(tag);
  if (it == postings_.end()) return {};
  return it->second;
}

std::vector<std::string> InvertedIndex::posting_ids(const Tag& tag) const {
  std::vector<std::string> out;
  for (Ordinal o : posting(tag)) out.push_back(ids_[o]);
  return out;
}

InvertedIndex build_index(const Catalog& catalog) {
  InvertedIndex index;
  index.snapshot_id_ = catalog.snapshot_id();
  index.ids_.reserve(catalog.size());
  for (const auto& [id, track] : catalog.tracks()) {
    auto ordinal = static_cast<Ordinal>(index.ids_.size());
    index.ids_.push_back(id);
    for (const auto& tag : track.tags) index.postings_[tag].push_back(ordinal);
  }
  return index;
}

void validate(const MatchSpec& spec) {
  if (spec.limit < 1) throw Error(ErrorCode::kInvalidArgument, "limit must be >= 1");
  for (const auto& tag : spec.required) {
    if (spec.preferred.count(tag) != 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "tag " + to_string(tag) + " is both required and preferred");
    }
  }
}

MatchSpec match_spec_from(const ExtractionResult& extraction, std::size_t limit) {
  MatchSpec spec;
  spec.limit = limit;
  for (const auto& tag : extraction.explicit_tags()) spec.required.insert(tag);
  for (const auto& tag : extraction.implicit_tags()) {
    if (spec.required.count(tag) == 0) spec.preferred.insert(tag);
  }
  return spec;
}

namespace {

std::vector<Ordinal> unite(const std::vector<std::span<const Ordinal>>& lists) {
  std::vector<Ordinal> out;
  for (auto list : lists) {
    std::vector<Ordinal> merged;
    merged.reserve(out.size() + list.size());
    std::set_union(out.begin(), out.end(), list.begin(), list.end(),
                   std::back_inserter(merged));
    out.swap(merged);
  }
  return out;
}

std::vector<Ordinal> match(const InvertedIndex& index, const std::set<Tag>& tags) {
  if (tags.empty()) {
    std::vector<Ordinal> all(index.track_count());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Ordinal>(i);
    return all;
  }
  std::map<Facet, std::vector<std::span<const Ordinal>>> by_facet;
  for (const auto& tag : tags) by_facet[tag.facet].push_back(index.posting(tag));

  std::vector<std::vector<Ordinal>> per_facet;
  for (const auto& [facet, lists] : by_facet) per_facet.push_back(unite(lists));
  std::sort(per_facet.begin(), per_facet.end(),
            [](const auto& a, const auto& b) { return a.size() < b.size(); });

  std::vector<Ordinal> out = std::move(per_facet.front());
  for (std::size_t i = 1; i < per_facet.size() && !out.empty(); ++i) {
    std::vector<Ordinal> next;
    std::set_intersection(out.begin(), out.end(), per_facet[i].begin(), per_facet[i].end(),
                          std::back_inserter(next));
    out.swap(next);
  }
  return out;
}

int relaxation_rank(Facet facet) {
  auto it = std::find(kRelaxationOrder.begin(), kRelaxationOrder.end(), facet);
  return static_cast<int>(it - kRelaxationOrder.begin());
}

// Next preferred tag to drop: lowest-priority facet, then the largest value.
Tag next_to_drop(const std::set<Tag>& preferred) {
  const Tag* pick = nullptr;
  for (const auto& tag : preferred) {
    if (pick == nullptr || relaxation_rank(tag.facet) < relaxation_rank(pick->facet) ||
        (tag.facet == pick->facet && tag.value > pick->value)) {
      pick = &tag;
    }
  }
  return *pick;
}

}  // namespace

CandidateSet retrieve(const InvertedIndex& index, const MatchSpec& spec,
                      const RetrievalOptions& options) {
  validate(spec);
  CandidateSet result;
  result.snapshot_id = index.built_from_snapshot();

  std::set<Tag> preferred = spec.preferred;
  auto active = [&] {
    std::set<Tag> tags = spec.required;
    tags.insert(preferred.begin(), preferred.end());
    return tags;
  };

  std::vector<Ordinal> hits = match(index, active());
  while (hits.size() < options.min_candidates && !preferred.empty() &&
         !(spec.required.empty() && preferred.size() == 1)) {
    Tag drop = next_to_drop(preferred);
    preferred.erase(drop);
    result.dropped.push_back(std::move(drop));
    ++result.relaxation_level;
    hits = match(index, active());
  }
  if (hits.empty()) {
    throw Error(ErrorCode::kEmptyCandidateSet, "no track matches the extracted tags");
  }
  if (hits.size() > spec.limit) hits.resize(spec.limit);

  std::set<Tag> evidence = spec.required;
  evidence.insert(spec.preferred.begin(), spec.preferred.end());
  result.track_ids.reserve(hits.size());
  for (Ordinal o : hits) {
    const std::string& id = index.track_id(o);
    result.track_ids.push_back(id);
    auto& matched = result.matched_tags[id];
    for (const auto& tag : evidence) {
      auto list = index.posting(tag);
      if (std::binary_search(list.begin(), list.end(), o)) matched.insert(tag);
    }
  }
  return result;
}

std::string to_candidate_document(const CandidateSet& candidates, const Catalog& catalog) {
  using ojson = nlohmann::ordered_json;
  ojson doc;
  doc["snapshot_id"] = catalog.snapshot_id();
  doc["relaxation_level"] = candidates.relaxation_level;
  auto& tracks = doc["tracks"] = ojson::array();
  for (const auto& id : candidates.track_ids) {
    const Track* track = catalog.find(id);
    if (track == nullptr) throw Error(ErrorCode::kUnknownTrackId, id);
    ojson rec;
    rec["track_id"] = track->track_id;
    rec["title"] = track->title;
    rec["artist_name"] = track->artist_name;
    auto& tags = rec["tags"] = ojson::array();
    for (const auto& tag : track->tags) tags.push_back(to_string(tag));
    auto& matched = rec["matched_tags"] = ojson::array();
    if (auto it = candidates.matched_tags.find(id); it != candidates.matched_tags.end()) {
      for (const auto& tag : it->second) matched.push_back(to_string(tag));
    }
    tracks.push_back(std::move(rec));
  }
  return doc.dump();
}

}  // namespace t2p
