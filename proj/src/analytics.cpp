#include "t2p/analytics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_map>

#include "t2p/error.hpp"

namespace t2p {

EngagementReport listen_through(std::span<const GenerationRecord> records,
                                std::span<const PlaylistEvent> events, int window_days) {
  if (window_days < 1) throw Error(ErrorCode::kInvalidArgument, "window_days must be >= 1");
  const std::int64_t window = static_cast<std::int64_t>(window_days) * kMillisPerDay;

  std::unordered_map<std::string_view, std::vector<std::int64_t>> listens;
  for (const auto& e : events) {
    if (e.type == kListenedEvent) listens[e.playlist_id].push_back(e.occurred_at_ms);
  }

  EngagementReport report;
  report.window_days = window_days;
  for (const auto& r : records) {
    ++report.generated_count;
    auto it = listens.find(r.playlist_id);
    if (it == listens.end()) continue;
    bool hit = std::any_of(it->second.begin(), it->second.end(), [&](std::int64_t t) {
      return t >= r.created_at_ms && t < r.created_at_ms + window;
    });
    if (hit) ++report.listened_count;
  }
  report.listen_through_rate =
      report.generated_count == 0
          ? 0.0
          : static_cast<double>(report.listened_count) / static_cast<double>(report.generated_count);
  return report;
}

std::vector<TagFrequencyRow> TagFrequencyReport::for_facet(Facet facet) const {
  std::vector<TagFrequencyRow> out;
  for (const auto& row : rows) {
    if (row.tag.facet == facet) out.push_back(row);
  }
  return out;
}

TagFrequencyReport tag_frequencies(std::span<const GenerationRecord> records) {
  std::map<Tag, std::size_t> counts;
  std::map<Facet, std::size_t> facet_totals;
  for (const auto& r : records) {
    for (const auto& p : r.tags) {
      ++counts[p.tag];
      ++facet_totals[p.tag.facet];
    }
  }
  TagFrequencyReport report;
  for (const auto& [tag, count] : counts) {
    report.rows.push_back({tag, count,
                           static_cast<double>(count) /
                               static_cast<double>(facet_totals[tag.facet])});
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const TagFrequencyRow& a, const TagFrequencyRow& b) {
              if (a.tag.facet != b.tag.facet) return a.tag.facet < b.tag.facet;
              if (a.count != b.count) return a.count > b.count;
              return a.tag.value < b.tag.value;
            });
  return report;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    widths.resize(std::max(widths.size(), row.size()));
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << "  ";
      out << row[i];
      if (i + 1 < row.size()) out << std::string(widths[i] - row[i].size(), ' ');
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

std::string format_report(const EngagementReport& r, ReportFormat format) {
  std::vector<std::vector<std::string>> rows = {
      {"window_days", "generated", "listened", "listen_through_rate"},
      {std::to_string(r.window_days), std::to_string(r.generated_count),
       std::to_string(r.listened_count), fixed(r.listen_through_rate, 4)}};
  if (format == ReportFormat::kTable) return table(rows);
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += '\n';
  }
  return out;
}

std::string format_report(const TagFrequencyReport& report, std::optional<Facet> facet,
                          ReportFormat format) {
  std::vector<std::vector<std::string>> rows = {{"facet", "value", "count", "share"}};
  for (const auto& row : report.rows) {
    if (facet && row.tag.facet != *facet) continue;
    rows.push_back({std::string(to_string(row.tag.facet)), row.tag.value,
                    std::to_string(row.count), fixed(row.share, 4)});
  }
  if (format == ReportFormat::kTable) return table(rows);
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(row[i]);
    out += '\n';
  }
  return out;
}

}  // namespace t2p
