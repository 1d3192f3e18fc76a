#include "t2p/service.hpp"

#include <cstdio>

#include "t2p/error.hpp"

namespace t2p {

using nlohmann::ordered_json;
using std::chrono::microseconds;
using std::chrono::steady_clock;

std::shared_ptr<const Snapshot> make_snapshot(Catalog catalog, EmbeddingStore embeddings) {
  auto snap = std::make_shared<Snapshot>();
  snap->id = catalog.snapshot_id();
  snap->index = std::make_shared<const InvertedIndex>(build_index(catalog));
  snap->catalog = std::make_shared<const Catalog>(std::move(catalog));
  snap->embeddings = std::make_shared<const EmbeddingStore>(std::move(embeddings));
  return snap;
}

PlaylistService::PlaylistService(ServiceConfig config, ServiceDeps deps)
    : config_(std::move(config)),
      clock_(std::move(deps.clock)),
      taxonomy_(std::move(deps.taxonomy)),
      lexicon_(std::move(deps.lexicon)),
      llm_(std::move(deps.llm)),
      replay_(std::move(deps.replay)),
      snapshot_(std::move(deps.snapshot)),
      id_rng_(std::random_device{}()) {
  if (!clock_) clock_ = now_ms;
  if (!taxonomy_) {
    taxonomy_ = std::make_shared<const TagTaxonomy>(TagTaxonomy::load(config_.paths.taxonomy));
  }
  if (!lexicon_) {
    lexicon_ = std::make_shared<const Lexicon>(Lexicon::load(config_.paths.lexicon, *taxonomy_));
  }
  if (!snapshot_) {
    snapshot_ = make_snapshot(load_catalog(config_.paths.catalog, taxonomy_, 1),
                              load_embeddings(config_.paths.embeddings, 1));
  }
  if (!llm_) {
    GatewayConfig gc;
    gc.backend = config_.llm_backend;
    gc.remote = config_.remote;
    if (gc.backend != LlmBackendKind::kRemote || !gc.remote.endpoint.empty()) {
      llm_ = std::make_shared<LlmGateway>(std::move(gc));
    }
  }
  if (!replay_) {
    GatewayConfig gc;
    gc.backend = LlmBackendKind::kReplay;
    gc.fixture_dir = config_.paths.fixtures_dir;
    replay_ = std::make_shared<LlmGateway>(std::move(gc));
  }
  store_ = std::make_unique<PlaylistStore>(config_.paths.store_dir,
                                           PlaylistStore::Options{config_.store_fsync});
}

std::shared_ptr<const Snapshot> PlaylistService::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

std::string PlaylistService::new_playlist_id() {
  std::lock_guard lock(id_mutex_);
  while (true) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "pl_%016llx", static_cast<unsigned long long>(id_rng_()));
    if (!store_->contains(buf)) return buf;
  }
}

RefinementRequest PlaylistService::refinement_request(const Snapshot& snapshot,
                                                      const std::string& query_text,
                                                      const ExtractionResult& extraction,
                                                      const RankedList& ranked,
                                                      std::size_t length) const {
  RefinementRequest request;
  request.query_text = query_text;
  for (const auto& p : extraction.predictions) request.query_tags.push_back(p.tag);
  request.target_length = length;
  request.artist_cap = config_.limits.artist_cap;
  request.ranked.reserve(ranked.tracks.size());
  for (const auto& scored : ranked.tracks) {
    const Track* track = snapshot.catalog->find(scored.track_id);
    if (track == nullptr) throw Error(ErrorCode::kUnknownTrackId, scored.track_id);
    request.ranked.push_back({track->track_id, track->title, track->artist_id,
                              track->artist_name,
                              std::vector<Tag>(track->tags.begin(), track->tags.end()),
                              scored.score});
  }
  return request;
}

GenerationOutcome PlaylistService::generate_playlist(const std::string& user_id,
                                                     const std::string& query_text,
                                                     const GenerateOptions& options) {
  if (options.persist) ++requests_;
  const auto started = steady_clock::now();
  microseconds llm_time{0};
  auto since = [](steady_clock::time_point t) {
    return std::chrono::duration_cast<microseconds>(steady_clock::now() - t);
  };

  GenerationOutcome out;
  out.snapshot = snapshot();
  const Snapshot& snap = *out.snapshot;
  const std::int64_t created_at = clock_();

  Query query{query_text, user_id};
  validate_query(query);

  // Tag extraction
  auto t = steady_clock::now();
  ExtractionBackend ex_backend = options.extraction.value_or(config_.extraction_backend);
  ExtractionContext ctx;
  ctx.taxonomy = taxonomy_.get();
  ctx.lexicon = lexicon_.get();
  ctx.llm = llm_.get();
  ctx.replay = replay_.get();
  ctx.deadline = steady_clock::now() + config_.timeouts.extraction;
  try {
    out.extraction = extract(query, ex_backend, ctx);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNoTagsExtracted && options.persist) ++reformulate_;
    throw;
  }
  out.timings.extraction = since(t);
  if (ex_backend != ExtractionBackend::kRule) llm_time += out.timings.extraction;

  // Retrieval
  t = steady_clock::now();
  out.match_spec = match_spec_from(out.extraction, config_.limits.candidate_limit);
  try {
    out.candidates = retrieve(*snap.index, out.match_spec,
                              RetrievalOptions{config_.limits.min_candidates});
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kEmptyCandidateSet && options.persist) ++reformulate_;
    throw;
  }
  out.timings.retrieval = since(t);

  // Personalization
  t = steady_clock::now();
  out.ranked = rank_for_user(user_id, out.candidates.track_ids, *snap.embeddings);
  out.timings.personalization = since(t);

  // Refinement
  t = steady_clock::now();
  const std::size_t length = options.length.value_or(config_.limits.length);
  RefinementRequest request =
      refinement_request(snap, query_text, out.extraction, out.ranked, length);
  RefinementBackend re_backend = options.refinement.value_or(config_.refinement_backend);
  bool refinement_fell_back = false;
  std::optional<Playlist> refined;
  if (re_backend != RefinementBackend::kDeterministic) {
    LlmGateway* gateway = re_backend == RefinementBackend::kLlm ? llm_.get() : replay_.get();
    try {
      if (gateway == nullptr) throw Error(ErrorCode::kInvalidArgument, "no LLM configured");
      CompletionRequest call{build_refinement_prompt(request),
                             static_cast<int>(64 + 16 * length), Purpose::kRefinement};
      auto response = gateway->complete(call, steady_clock::now() + config_.timeouts.refinement);
      ParsedTracklist parsed = parse_llm_tracklist(response.text, request);
      out.hallucinated = parsed.hallucinated;
      refined = Playlist{};
      refined->title = parsed.title;
      refined->track_ids = std::move(parsed.track_ids);
      refined->provenance.refinement_backend = std::string(to_string(re_backend));
    } catch (const Error&) {
      refinement_fell_back = true;
    }
  }
  if (!refined) refined = refine_deterministic(request);
  out.timings.refinement = since(t);
  if (re_backend != RefinementBackend::kDeterministic) llm_time += out.timings.refinement;

  Playlist& playlist = out.playlist;
  playlist = std::move(*refined);
  playlist.created_at_ms = created_at;
  playlist.provenance.extraction_backend = std::string(to_string(out.extraction.backend_used));
  playlist.provenance.relaxation_level = out.candidates.relaxation_level;
  playlist.provenance.personalized = out.ranked.personalized;
  playlist.provenance.degraded = out.extraction.fell_back || refinement_fell_back;
  playlist.provenance.snapshot_id = snap.id;

  GenerationRecord& record = out.record;
  record.user_id = user_id;
  record.query = query_text;
  record.tags = out.extraction.predictions;
  record.relaxation_level = playlist.provenance.relaxation_level;
  record.personalized = playlist.provenance.personalized;
  record.degraded = playlist.provenance.degraded;
  record.extraction_backend = playlist.provenance.extraction_backend;
  record.refinement_backend = playlist.provenance.refinement_backend;
  record.snapshot_id = snap.id;
  record.created_at_ms = created_at;

  if (options.persist) {
    t = steady_clock::now();
    playlist.playlist_id = new_playlist_id();
    record.playlist_id = playlist.playlist_id;
    record.completed_at_ms = clock_();
    store_->append_generation(playlist, record);
    out.timings.persistence = since(t);
    ++generated_;
    if (playlist.provenance.degraded) ++degraded_;
    hallucinations_ += out.hallucinated;
  } else {
    record.completed_at_ms = clock_();
  }
  out.timings.orchestration = since(started) - llm_time;
  return out;
}

namespace {

ordered_json tags_json(const std::set<Tag>& tags) {
  ordered_json arr = ordered_json::array();
  for (const auto& tag : tags) arr.push_back(to_string(tag));
  return arr;
}

}  // namespace

ordered_json PlaylistService::debug_pipeline(const std::string& user_id,
                                             const std::string& query_text) {
  GenerateOptions options;
  options.persist = false;
  GenerationOutcome out = generate_playlist(user_id, query_text, options);
  const Snapshot& snap = *out.snapshot;

  ordered_json j;
  j["snapshot_id"] = snap.id;
  j["user_id"] = user_id;
  j["query"] = query_text;

  ordered_json& ex = j["extraction"];
  ex["backend_used"] = to_string(out.extraction.backend_used);
  ex["fell_back"] = out.extraction.fell_back;
  ex["dropped"] = out.extraction.dropped;
  ex["predictions"] = ordered_json::array();
  for (const auto& p : out.extraction.predictions) ex["predictions"].push_back(to_json(p));

  ordered_json& re = j["retrieval"];
  re["snapshot_id"] = out.candidates.snapshot_id;
  re["required"] = tags_json(out.match_spec.required);
  re["preferred"] = tags_json(out.match_spec.preferred);
  re["limit"] = out.match_spec.limit;
  re["relaxation_level"] = out.candidates.relaxation_level;
  re["dropped"] = ordered_json::array();
  for (const auto& tag : out.candidates.dropped) re["dropped"].push_back(to_string(tag));
  re["count"] = out.candidates.track_ids.size();
  re["candidate_document"] = to_candidate_document(out.candidates, *snap.catalog);

  ordered_json& pe = j["personalization"];
  pe["personalized"] = out.ranked.personalized;
  pe["ranked"] = ordered_json::array();
  for (const auto& s : out.ranked.tracks) {
    ordered_json row;
    row["track_id"] = s.track_id;
    row["score"] = s.score ? ordered_json(*s.score) : ordered_json(nullptr);
    pe["ranked"].push_back(std::move(row));
  }

  j["playlist"] = to_json(out.playlist);
  j["hallucinated"] = out.hallucinated;
  ordered_json& tm = j["timings_us"];
  tm["extraction"] = out.timings.extraction.count();
  tm["retrieval"] = out.timings.retrieval.count();
  tm["personalization"] = out.timings.personalization.count();
  tm["refinement"] = out.timings.refinement.count();
  tm["orchestration"] = out.timings.orchestration.count();
  return j;
}

bool PlaylistService::record_event(const PlaylistEvent& event) {
  bool stored = store_->record_event(event);
  if (stored) ++events_;
  return stored;
}

std::optional<Playlist> PlaylistService::get_playlist(const std::string& playlist_id) const {
  return store_->playlist(playlist_id);
}

std::uint64_t PlaylistService::reload_snapshots(const std::filesystem::path& catalog_path,
                                                const std::filesystem::path& embeddings_path) {
  std::lock_guard reload(reload_mutex_);
  const std::uint64_t next = snapshot()->id + 1;
  std::shared_ptr<const Snapshot> fresh;
  try {
    fresh = make_snapshot(load_catalog(catalog_path, taxonomy_, next),
                          load_embeddings(embeddings_path, next));
  } catch (...) {
    ++reload_failures_;
    throw;
  }
  {
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = fresh;
  }
  ++reloads_;
  return next;
}

std::uint64_t PlaylistService::reload_snapshots() {
  return reload_snapshots(config_.paths.catalog, config_.paths.embeddings);
}

std::uint64_t PlaylistService::install_snapshot(Catalog catalog, EmbeddingStore embeddings) {
  std::lock_guard reload(reload_mutex_);
  const std::uint64_t next = snapshot()->id + 1;
  std::vector<Track> tracks;
  tracks.reserve(catalog.size());
  for (const auto& [id, track] : catalog.tracks()) tracks.push_back(track);
  Catalog restamped(catalog.taxonomy_ptr(), std::move(tracks), next);

  embeddings.set_snapshot_id(next);
  auto fresh = std::make_shared<Snapshot>();
  fresh->id = next;
  fresh->index = std::make_shared<const InvertedIndex>(build_index(restamped));
  fresh->catalog = std::make_shared<const Catalog>(std::move(restamped));
  fresh->embeddings = std::make_shared<const EmbeddingStore>(std::move(embeddings));
  {
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(fresh);
  }
  ++reloads_;
  return next;
}

UsageReport PlaylistService::usage() const {
  UsageReport report;
  for (Purpose p : kAllPurposes) report.per_purpose[p] = PurposeUsage{};
  for (const auto* gw : {llm_.get(), replay_.get()}) {
    if (gw == nullptr) continue;
    for (const auto& [p, u] : gw->ledger().report().per_purpose) {
      auto& acc = report.per_purpose[p];
      acc.calls += u.calls;
      acc.input_tokens += u.input_tokens;
      acc.output_tokens += u.output_tokens;
    }
  }
  return report;
}

ServiceMetrics PlaylistService::metrics() const {
  ServiceMetrics m;
  m.requests = requests_;
  m.generated = generated_;
  m.degraded = degraded_;
  m.reformulate = reformulate_;
  m.hallucinations_dropped = hallucinations_;
  m.events = events_;
  m.reloads = reloads_;
  m.reload_failures = reload_failures_;
  m.usage = usage();
  m.snapshot_id = snapshot()->id;
  return m;
}

}  // namespace t2p
