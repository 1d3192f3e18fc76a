#include "t2p/records.hpp"

#include <chrono>
#include <cstdio>

#include "t2p/error.hpp"

namespace t2p {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Howard Hinnant's days_from_civil / civil_from_days.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

}  // namespace

std::string format_timestamp(std::int64_t epoch_ms) {
  std::int64_t days = floor_div(epoch_ms, kMillisPerDay);
  std::int64_t rem = epoch_ms - days * kMillisPerDay;
  std::int64_t y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(days, y, m, d);
  char buf[80];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ",
                static_cast<long long>(y), m, d, static_cast<long long>(rem / 3'600'000),
                static_cast<long long>(rem / 60'000 % 60), static_cast<long long>(rem / 1000 % 60),
                static_cast<long long>(rem % 1000));
  return buf;
}

std::int64_t parse_timestamp(const json& value) {
  if (value.is_number_integer()) return value.get<std::int64_t>();
  if (!value.is_string()) throw Error(ErrorCode::kInvalidArgument, "timestamp must be a string");
  const std::string& s = value.get_ref<const std::string&>();
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0, consumed = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec,
                  &consumed) != 6 ||
      mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60) {
    throw Error(ErrorCode::kInvalidArgument, "bad timestamp '" + s + "'");
  }
  std::string_view rest = std::string_view(s).substr(static_cast<std::size_t>(consumed));
  std::int64_t millis = 0;
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    int digits = 0;
    while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') {
      if (digits < 3) millis = millis * 10 + (rest.front() - '0');
      ++digits;
      rest.remove_prefix(1);
    }
    if (digits == 0) throw Error(ErrorCode::kInvalidArgument, "bad timestamp '" + s + "'");
    for (; digits < 3; ++digits) millis *= 10;
  }
  if (rest != "Z" && rest != "+00:00") {
    throw Error(ErrorCode::kInvalidArgument, "timestamp must be UTC: '" + s + "'");
  }
  std::int64_t days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  return days * kMillisPerDay + (h * 3600LL + mi * 60LL + sec) * 1000 + millis;
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

ordered_json to_json(const Playlist& p) {
  ordered_json j;
  j["playlist_id"] = p.playlist_id;
  j["title"] = p.title;
  j["track_ids"] = p.track_ids;
  j["provenance"] = ordered_json{
      {"extraction_backend", p.provenance.extraction_backend},
      {"refinement_backend", p.provenance.refinement_backend},
      {"relaxation_level", p.provenance.relaxation_level},
      {"personalized", p.provenance.personalized},
      {"degraded", p.provenance.degraded},
      {"snapshot_id", p.provenance.snapshot_id}};
  j["created_at"] = format_timestamp(p.created_at_ms);
  return j;
}

Playlist playlist_from_json(const json& j) {
  Playlist p;
  p.playlist_id = j.at("playlist_id").get<std::string>();
  p.title = j.at("title").get<std::string>();
  p.track_ids = j.at("track_ids").get<std::vector<std::string>>();
  const auto& prov = j.at("provenance");
  p.provenance.extraction_backend = prov.at("extraction_backend").get<std::string>();
  p.provenance.refinement_backend = prov.at("refinement_backend").get<std::string>();
  p.provenance.relaxation_level = prov.at("relaxation_level").get<int>();
  p.provenance.personalized = prov.at("personalized").get<bool>();
  p.provenance.degraded = prov.at("degraded").get<bool>();
  p.provenance.snapshot_id = prov.at("snapshot_id").get<std::uint64_t>();
  p.created_at_ms = parse_timestamp(j.at("created_at"));
  return p;
}

ordered_json to_json(const TagPrediction& p) {
  ordered_json j;
  j["facet"] = to_string(p.tag.facet);
  j["value"] = p.tag.value;
  j["explicitness"] = to_string(p.explicitness);
  if (p.source_span) j["span"] = {p.source_span->begin, p.source_span->end};
  return j;
}

namespace {

TagPrediction prediction_from_json(const json& j) {
  TagPrediction p;
  auto facet = parse_facet(j.at("facet").get<std::string>());
  if (!facet) throw Error(ErrorCode::kInvalidArgument, "unknown facet in record");
  p.tag = Tag{*facet, j.at("value").get<std::string>()};
  p.explicitness = parse_explicitness(j.at("explicitness").get<std::string>())
                       .value_or(Explicitness::kImplicit);
  if (auto s = j.find("span"); s != j.end() && s->is_array() && s->size() == 2) {
    p.source_span = Span{(*s)[0].get<std::size_t>(), (*s)[1].get<std::size_t>()};
  }
  return p;
}

}  // namespace

ordered_json to_json(const GenerationRecord& r) {
  ordered_json j;
  j["playlist_id"] = r.playlist_id;
  j["user_id"] = r.user_id;
  j["query"] = r.query;
  auto& tags = j["tags"] = ordered_json::array();
  for (const auto& p : r.tags) tags.push_back(to_json(p));
  j["relaxation_level"] = r.relaxation_level;
  j["personalized"] = r.personalized;
  j["degraded"] = r.degraded;
  j["extraction_backend"] = r.extraction_backend;
  j["refinement_backend"] = r.refinement_backend;
  j["snapshot_id"] = r.snapshot_id;
  j["created_at"] = format_timestamp(r.created_at_ms);
  j["completed_at"] = format_timestamp(r.completed_at_ms);
  return j;
}

GenerationRecord record_from_json(const json& j) {
  GenerationRecord r;
  r.playlist_id = j.at("playlist_id").get<std::string>();
  r.user_id = j.at("user_id").get<std::string>();
  r.query = j.at("query").get<std::string>();
  for (const auto& t : j.at("tags")) r.tags.push_back(prediction_from_json(t));
  r.relaxation_level = j.at("relaxation_level").get<int>();
  r.personalized = j.at("personalized").get<bool>();
  r.degraded = j.at("degraded").get<bool>();
  r.extraction_backend = j.at("extraction_backend").get<std::string>();
  r.refinement_backend = j.at("refinement_backend").get<std::string>();
  r.snapshot_id = j.at("snapshot_id").get<std::uint64_t>();
  r.created_at_ms = parse_timestamp(j.at("created_at"));
  r.completed_at_ms = parse_timestamp(j.at("completed_at"));
  return r;
}

ordered_json to_json(const PlaylistEvent& e) {
  ordered_json j;
  j["playlist_id"] = e.playlist_id;
  j["type"] = e.type;
  j["occurred_at"] = format_timestamp(e.occurred_at_ms);
  return j;
}

PlaylistEvent event_from_json(const json& j) {
  PlaylistEvent e;
  e.playlist_id = j.at("playlist_id").get<std::string>();
  e.type = j.at("type").get<std::string>();
  e.occurred_at_ms = parse_timestamp(j.at("occurred_at"));
  return e;
}

}  // namespace t2p
