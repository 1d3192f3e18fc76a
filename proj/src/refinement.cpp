#include "t2p/refinement.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "t2p/error.hpp"

namespace t2p {

using nlohmann::json;

void validate(const RefinementRequest& request) {
  if (request.target_length < 1) {
    throw Error(ErrorCode::kInvalidArgument, "target length must be >= 1");
  }
  if (request.artist_cap < 1) throw Error(ErrorCode::kInvalidArgument, "artist cap must be >= 1");
  std::unordered_set<std::string_view> seen;
  for (const auto& c : request.ranked) {
    if (!seen.insert(c.track_id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate candidate " + c.track_id);
    }
  }
}

std::string_view to_string(RefinementBackend b) {
  switch (b) {
    case RefinementBackend::kDeterministic: return "deterministic";
    case RefinementBackend::kLlm: return "llm";
    case RefinementBackend::kReplay: return "replay";
  }
  return "?";
}

std::optional<RefinementBackend> parse_refinement_backend(std::string_view s) {
  if (s == "deterministic") return RefinementBackend::kDeterministic;
  if (s == "llm") return RefinementBackend::kLlm;
  if (s == "replay") return RefinementBackend::kReplay;
  return std::nullopt;
}

std::string playlist_title(const std::vector<Tag>& query_tags) {
  if (query_tags.empty()) return "Your mix";
  std::string title;
  for (std::size_t i = 0; i < query_tags.size() && i < 2; ++i) {
    std::string word = query_tags[i].value;
    if (!word.empty() && word[0] >= 'a' && word[0] <= 'z') word[0] = static_cast<char>(word[0] - 32);
    if (i > 0) title += " · ";
    title += word;
  }
  return title + " mix";
}

namespace {

std::string format_score(const std::optional<double>& score) {
  if (!score) return "score=–";
  char buf[32];
  std::snprintf(buf, sizeof buf, "score=%.4f", *score);
  return buf;
}

}  // namespace

std::string candidates_to_text(const RefinementRequest& request) {
  std::ostringstream out;
  out << "Query: " << request.query_text << "\n";
  std::size_t rank = 1;
  for (const auto& c : request.ranked) {
    out << rank++ << ". " << c.track_id << " | " << c.title << " | " << c.artist_name
        << " | tags: ";
    for (std::size_t i = 0; i < c.tags.size(); ++i) {
      out << (i ? ", " : "") << to_string(c.tags[i]);
    }
    out << " | " << format_score(c.score) << "\n";
  }
  return out.str();
}

std::string build_refinement_prompt(const RefinementRequest& request) {
  std::ostringstream out;
  out << "You are finalizing a playlist for a listener's request. Candidate tracks are "
         "listed below, already ordered by how close each one is to the listener's taste "
         "(score is a similarity, higher is closer).\n\n"
         "Rules:\n"
         "- Pick at most "
      << request.target_length
      << " tracks that best match the request, best first.\n"
         "- Use at most "
      << request.artist_cap
      << " tracks by the same artist; keep the artists diverse.\n"
         "- Only use track ids from the list. Never repeat a track.\n"
         "- Favor a coherent, high-quality playlist over filling every slot.\n"
         "- Give the playlist a short title.\n\n"
      << candidates_to_text(request)
      << "\nAnswer with a single JSON object and nothing else, shaped as\n"
         "{\"title\": \"...\", \"track_ids\": [\"...\"]}\n";
  return out.str();
}

ParsedTracklist parse_llm_tracklist(std::string_view response_text,
                                    const RefinementRequest& request) {
  json doc = json::parse(response_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    auto open = response_text.find('{');
    auto close = response_text.rfind('}');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
      doc = json::parse(response_text.substr(open, close - open + 1), nullptr, false);
    }
  }
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::kUnparseableResponse, "no JSON object in response");
  }
  auto ids = doc.find("track_ids");
  if (ids == doc.end() || !ids->is_array()) {
    throw Error(ErrorCode::kUnparseableResponse, "response has no 'track_ids' list");
  }

  std::unordered_map<std::string_view, const RefinementCandidate*> by_id;
  for (const auto& c : request.ranked) by_id.emplace(c.track_id, &c);

  ParsedTracklist out;
  std::unordered_set<std::string> taken;
  std::map<std::string, std::size_t> per_artist;
  for (const auto& item : *ids) {
    if (!item.is_string()) {
      ++out.hallucinated;
      continue;
    }
    const std::string& id = item.get_ref<const std::string&>();
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      ++out.hallucinated;
      continue;
    }
    if (!taken.insert(id).second) {
      ++out.duplicates;
      continue;
    }
    if (out.track_ids.size() >= request.target_length) continue;
    auto& count = per_artist[it->second->artist_id];
    if (count >= request.artist_cap) {
      ++out.over_cap;
      continue;
    }
    ++count;
    out.track_ids.push_back(id);
  }

  if (auto t = doc.find("title"); t != doc.end() && t->is_string()) out.title = t->get<std::string>();
  if (out.title.empty()) out.title = playlist_title(request.query_tags);

  std::size_t needed = std::min(kMinLlmTracks, request.target_length);
  if (out.track_ids.size() < needed) {
    throw Error(ErrorCode::kFallbackRequired,
                std::to_string(out.track_ids.size()) + " valid ids, need " +
                    std::to_string(needed));
  }
  return out;
}

Playlist refine_deterministic(const RefinementRequest& request) {
  validate(request);
  if (request.ranked.empty()) throw Error(ErrorCode::kEmptyPlaylist, "no candidates");
  Playlist playlist;
  playlist.title = playlist_title(request.query_tags);
  playlist.provenance.refinement_backend = "deterministic";
  std::map<std::string, std::size_t, std::less<>> per_artist;
  for (const auto& c : request.ranked) {
    if (playlist.track_ids.size() == request.target_length) break;
    auto& count = per_artist[c.artist_id];
    if (count >= request.artist_cap) continue;
    ++count;
    playlist.track_ids.push_back(c.track_id);
  }
  return playlist;
}

}  // namespace t2p
