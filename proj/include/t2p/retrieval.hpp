#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "t2p/catalog.hpp"

namespace t2p {

struct ExtractionResult;

/// Tag -> ascending track list. Tracks are addressed internally by their rank
/// in ascending track_id order, so ordinal order and track_id order coincide.
class InvertedIndex {
 public:
  using Ordinal = std::uint32_t;

  InvertedIndex() = default;

  const std::map<Tag, std::vector<Ordinal>>& postings() const { return postings_; }
  std::span<const Ordinal> posting(const Tag& tag) const;
  std::vector<std::string> posting_ids(const Tag& tag) const;

  const std::string& track_id(Ordinal ordinal) const { return ids_[ordinal]; }
  std::size_t track_count() const { return ids_.size(); }
  std::uint64_t built_from_snapshot() const { return snapshot_id_; }

  bool operator==(const InvertedIndex&) const = default;

 private:
  friend InvertedIndex build_index(const Catalog& catalog);

  std::vector<std::string> ids_;
  std::map<Tag, std::vector<Ordinal>> postings_;
  std::uint64_t snapshot_id_ = 0;
};

InvertedIndex build_index(const Catalog& catalog);

inline constexpr std::size_t kDefaultMinCandidates = 20;
inline constexpr std::size_t kDefaultCandidateLimit = 200;

struct MatchSpec {
  std::set<Tag> required;   // explicit predictions
  std::set<Tag> preferred;  // implicit predictions
  std::size_t limit = kDefaultCandidateLimit;
};

/// Throws kInvalidArgument when required and preferred overlap or limit is 0.
void validate(const MatchSpec& spec);

/// Explicit tags become required, implicit ones preferred.
MatchSpec match_spec_from(const ExtractionResult& extraction,
                          std::size_t limit = kDefaultCandidateLimit);

struct RetrievalOptions {
  std::size_t min_candidates = kDefaultMinCandidates;
};

struct CandidateSet {
  std::vector<std::string> track_ids;
  std::map<std::string, std::set<Tag>> matched_tags;
  int relaxation_level = 0;
  std::vector<Tag> dropped;  // preferred tags removed by relaxation, in order
  std::uint64_t snapshot_id = 0;
};

/// Facet order in which preferred tags are relaxed, first dropped first.
inline constexpr std::array<Facet, 5> kRelaxationOrder = {
    Facet::kLanguage, Facet::kArtistGender, Facet::kGenre, Facet::kDecade, Facet::kMood};

/// AND across facets, OR within a facet. Relaxes preferred tags one at a time
/// while fewer than min_candidates match; required tags are never dropped and,
/// when there are none, the last preferred tag is kept. Results are truncated
/// to spec.limit in ascending track_id order. Throws kEmptyCandidateSet.
CandidateSet retrieve(const InvertedIndex& index, const MatchSpec& spec,
                      const RetrievalOptions& options = {});

/// Candidate document: compact JSON, fixed field order.
std::string to_candidate_document(const CandidateSet& candidates, const Catalog& catalog);

}  // namespace t2p
