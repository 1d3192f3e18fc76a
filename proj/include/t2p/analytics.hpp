#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "t2p/catalog.hpp"
#include "t2p/records.hpp"

namespace t2p {

inline constexpr int kDefaultWindowDays = 7;

struct EngagementReport {
  int window_days = kDefaultWindowDays;
  std::size_t generated_count = 0;
  std::size_t listened_count = 0;
  double listen_through_rate = 0.0;
};

/// A playlist counts as listened iff some `listened` event falls in
/// [created_at, created_at + window_days). Throws kInvalidArgument when
/// window_days < 1.
EngagementReport listen_through(std::span<const GenerationRecord> records,
                                std::span<const PlaylistEvent> events, int window_days);

struct TagFrequencyRow {
  Tag tag;
  std::size_t count = 0;
  double share = 0.0;  // count / total count of the tag's facet
};

struct TagFrequencyReport {
  // Facet order, then count descending, then value ascending.
  std::vector<TagFrequencyRow> rows;

  std::vector<TagFrequencyRow> for_facet(Facet facet) const;
};

TagFrequencyReport tag_frequencies(std::span<const GenerationRecord> records);

enum class ReportFormat { kTable, kCsv };

std::string format_report(const EngagementReport& report, ReportFormat format);
std::string format_report(const TagFrequencyReport& report, std::optional<Facet> facet,
                          ReportFormat format);

}  // namespace t2p
