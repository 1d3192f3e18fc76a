#include "t2p/personalization.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "t2p/error.hpp"

namespace t2p {

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

EmbeddingStore::EmbeddingStore(std::size_t dimension, std::uint64_t snapshot_id)
    : dimension_(dimension), snapshot_id_(snapshot_id) {
  if (dimension == 0) throw Error(ErrorCode::kInvalidArgument, "dimension must be positive");
}

StoredEmbedding EmbeddingStore::make(std::vector<float> components) const {
  if (components.size() != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(dimension_) + " components, got " +
                    std::to_string(components.size()));
  }
  for (float c : components) {
    if (!std::isfinite(c)) throw Error(ErrorCode::kMalformedRow, "non-finite component");
  }
  double sq = dot(components, components);
  if (sq == 0.0) throw Error(ErrorCode::kZeroVector, "vector has zero norm");
  return StoredEmbedding{std::move(components), 1.0 / std::sqrt(sq)};
}

void EmbeddingStore::add_user(std::string id, std::vector<float> components) {
  users_.insert_or_assign(std::move(id), make(std::move(components)));
}

void EmbeddingStore::add_track(std::string id, std::vector<float> components) {
  tracks_.insert_or_assign(std::move(id), make(std::move(components)));
}

const StoredEmbedding* EmbeddingStore::user(const std::string& id) const {
  auto it = users_.find(id);
  return it == users_.end() ? nullptr : &it->second;
}

const StoredEmbedding* EmbeddingStore::track(const std::string& id) const {
  auto it = tracks_.find(id);
  return it == tracks_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// File format

namespace {

constexpr std::string_view kHeaderPrefix = "t2p-embeddings v1 dim=";

std::size_t parse_header(const std::string& line) {
  if (line.rfind(kHeaderPrefix, 0) != 0) {
    throw Error(ErrorCode::kMalformedRow, "missing 't2p-embeddings v1 dim=<d>' header", 1);
  }
  std::string_view num = std::string_view(line).substr(kHeaderPrefix.size());
  std::size_t dim = 0;
  auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), dim);
  if (ec != std::errc() || ptr != num.data() + num.size() || dim == 0) {
    throw Error(ErrorCode::kMalformedRow, "bad dimension in header", 1);
  }
  return dim;
}

}  // namespace

EmbeddingStore load_embeddings(std::istream& in, std::uint64_t snapshot_id) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kMalformedRow, "empty file", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  EmbeddingStore store(parse_header(line), snapshot_id);

  std::size_t row = 1;
  std::vector<float> components;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::string_view rest(line);
    auto next_field = [&](std::string_view& field) {
      auto comma = rest.find(',');
      field = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      return comma != std::string_view::npos;
    };
    std::string_view kind, id;
    if (!next_field(kind) || (kind != "user" && kind != "track")) {
      throw Error(ErrorCode::kMalformedRow, "row must start with user or track", row);
    }
    bool more = next_field(id);
    if (id.empty() || !more) throw Error(ErrorCode::kMalformedRow, "missing id or vector", row);

    components.clear();
    while (true) {
      std::string_view field;
      bool has_more = next_field(field);
      float value = 0.0f;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
        throw Error(ErrorCode::kMalformedRow, "bad component '" + std::string(field) + "'", row);
      }
      components.push_back(value);
      if (!has_more) break;
    }
    try {
      if (kind == "user") {
        store.add_user(std::string(id), components);
      } else {
        store.add_track(std::string(id), components);
      }
    } catch (const Error& e) {
      throw Error(e.code(), std::string(id) + ": " + e.detail(), row);
    }
  }
  return store;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path, std::uint64_t snapshot_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return load_embeddings(in, snapshot_id);
}

void write_embedding_header(std::ostream& out, std::size_t dimension) {
  out << kHeaderPrefix << dimension << '\n';
}

void write_embedding_row(std::ostream& out, bool is_user, const std::string& id,
                         std::span<const float> components) {
  out << (is_user ? "user," : "track,") << id;
  char buf[32];
  for (float c : components) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, c);
    out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
  }
  out << '\n';
}

// ---------------------------------------------------------------------------
// Scoring

double cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  double uu = dot(u, u);
  double vv = dot(v, v);
  if (uu == 0.0 || vv == 0.0) throw Error(ErrorCode::kZeroVector, "cosine of a zero vector");
  return clamp_unit(dot(u, v) / (std::sqrt(uu) * std::sqrt(vv)));
}

namespace {

RankedList rank(const StoredEmbedding& user, std::span<const std::string> candidates,
                const EmbeddingStore& store) {
  std::vector<ScoredTrack> scored;
  std::vector<ScoredTrack> unscored;
  scored.reserve(candidates.size());
  for (const auto& id : candidates) {
    const StoredEmbedding* t = store.track(id);
    if (t == nullptr) {
      unscored.push_back({id, std::nullopt});
      continue;
    }
    double s = dot(user.components, t->components) * user.inverse_norm * t->inverse_norm;
    scored.push_back({id, clamp_unit(s)});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredTrack& a, const ScoredTrack& b) {
    if (*a.score != *b.score) return *a.score > *b.score;
    return a.track_id < b.track_id;
  });
  RankedList out;
  out.personalized = true;
  out.tracks = std::move(scored);
  out.tracks.insert(out.tracks.end(), std::make_move_iterator(unscored.begin()),
                    std::make_move_iterator(unscored.end()));
  return out;
}

}  // namespace

RankedList rank_for_user(const std::string& user_id, std::span<const std::string> candidates,
                         const EmbeddingStore& store) {
  if (const StoredEmbedding* user = store.user(user_id)) {
    return rank(*user, candidates, store);
  }
  RankedList out;
  out.personalized = false;
  out.tracks.reserve(candidates.size());
  for (const auto& id : candidates) out.tracks.push_back({id, std::nullopt});
  return out;
}

RankedList rank_for_vector(std::span<const float> user_vector,
                           std::span<const std::string> candidates,
                           const EmbeddingStore& store) {
  if (user_vector.size() != store.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch, "user vector");
  }
  double sq = dot(user_vector, user_vector);
  if (sq == 0.0) throw Error(ErrorCode::kZeroVector, "user vector");
  StoredEmbedding user{std::vector<float>(user_vector.begin(), user_vector.end()),
                       1.0 / std::sqrt(sq)};
  return rank(user, candidates, store);
}

}  // namespace t2p
