#include "t2p/http_server.hpp"

#include <sstream>

#include <httplib.h>

#include "t2p/error.hpp"

namespace t2p {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json playlist_response(const Playlist& playlist, const Catalog& catalog,
                               const std::vector<TagPrediction>& tags) {
  ordered_json j;
  j["playlist_id"] = playlist.playlist_id;
  j["title"] = playlist.title;
  auto& tracks = j["tracks"] = ordered_json::array();
  for (const auto& id : playlist.track_ids) {
    ordered_json t;
    t["track_id"] = id;
    const Track* track = catalog.find(id);
    t["title"] = track ? track->title : "";
    t["artist_name"] = track ? track->artist_name : "";
    auto& tt = t["tags"] = ordered_json::array();
    if (track) {
      for (const auto& tag : track->tags) tt.push_back(to_string(tag));
    }
    tracks.push_back(std::move(t));
  }
  j["provenance"] = to_json(playlist)["provenance"];
  auto& qt = j["query_tags"] = ordered_json::array();
  for (const auto& p : tags) qt.push_back(to_json(p));
  j["created_at"] = format_timestamp(playlist.created_at_ms);
  return j;
}

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidQuery:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidEvent:
      return 400;
    case ErrorCode::kUnknownPlaylist:
      return 404;
    case ErrorCode::kNoTagsExtracted:
    case ErrorCode::kEmptyCandidateSet:
      return 422;
    default:
      return 500;
  }
}

std::string render_metrics(const ServiceMetrics& m) {
  std::ostringstream out;
  auto counter = [&](const char* name, std::uint64_t v) {
    out << "# TYPE " << name << " counter\n" << name << ' ' << v << '\n';
  };
  counter("t2p_requests_total", m.requests);
  counter("t2p_playlists_generated_total", m.generated);
  counter("t2p_degraded_total", m.degraded);
  counter("t2p_reformulate_total", m.reformulate);
  counter("t2p_hallucinations_dropped_total", m.hallucinations_dropped);
  counter("t2p_events_total", m.events);
  counter("t2p_snapshot_reloads_total", m.reloads);
  counter("t2p_snapshot_reload_failures_total", m.reload_failures);
  out << "# TYPE t2p_llm_calls_total counter\n";
  for (const auto& [p, u] : m.usage.per_purpose) {
    out << "t2p_llm_calls_total{purpose=\"" << to_string(p) << "\"} " << u.calls << '\n';
  }
  out << "# TYPE t2p_llm_tokens_total counter\n";
  for (const auto& [p, u] : m.usage.per_purpose) {
    out << "t2p_llm_tokens_total{purpose=\"" << to_string(p) << "\",direction=\"input\"} "
        << u.input_tokens << '\n';
    out << "t2p_llm_tokens_total{purpose=\"" << to_string(p) << "\",direction=\"output\"} "
        << u.output_tokens << '\n';
  }
  out << "# TYPE t2p_snapshot_id gauge\nt2p_snapshot_id " << m.snapshot_id << '\n';
  return out.str();
}

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  ordered_json body;
  body["error"] = to_string(e.code());
  body["message"] = e.what();
  int status = http_status_for(e.code());
  if (status == 422) body["hint"] = kReformulateHint;
  send_json(res, status, body);
}

json parse_body(const httplib::Request& req) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "request body must be a JSON object");
  }
  return body;
}

std::string string_field(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    throw Error(ErrorCode::kInvalidArgument, std::string("'") + key + "' must be a string");
  }
  return it->get<std::string>();
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_error(res, Error(ErrorCode::kInvalidArgument, e.what()));
    } catch (const std::exception& e) {
      ordered_json body;
      body["error"] = "Internal";
      body["message"] = e.what();
      send_json(res, 500, body);
    }
  };
}

}  // namespace

HttpServer::HttpServer(PlaylistService& service, ServiceConfig::Server options,
                       std::filesystem::path ui_dir)
    : service_(service),
      options_(std::move(options)),
      ui_dir_(std::move(ui_dir)),
      server_(std::make_unique<httplib::Server>()) {
  // Small JSON replies otherwise stall on delayed ACKs.
  server_->set_tcp_nodelay(true);
  install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
  httplib::Server& s = *server_;
  const std::string origin = options_.cors_origin;

  s.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
    if (!origin.empty()) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    }
  });
  s.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  s.Post("/v1/playlists", guarded([this](const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    GenerateOptions options;
    if (auto it = body.find("length"); it != body.end() && !it->is_null()) {
      if (!it->is_number_integer() || it->get<std::int64_t>() < 1) {
        throw Error(ErrorCode::kInvalidArgument, "'length' must be a positive integer");
      }
      options.length = it->get<std::size_t>();
    }
    if (auto it = body.find("backends"); it != body.end() && it->is_object()) {
      if (it->contains("extraction")) {
        options.extraction = parse_extraction_backend(it->at("extraction").get<std::string>());
        if (!options.extraction) throw Error(ErrorCode::kInvalidArgument, "unknown extraction backend");
      }
      if (it->contains("refinement")) {
        options.refinement = parse_refinement_backend(it->at("refinement").get<std::string>());
        if (!options.refinement) throw Error(ErrorCode::kInvalidArgument, "unknown refinement backend");
      }
    }
    auto out = service_.generate_playlist(string_field(body, "user_id"),
                                          string_field(body, "query"), options);
    send_json(res, 201,
              playlist_response(out.playlist, *out.snapshot->catalog, out.extraction.predictions));
  }));

  s.Get(R"(/v1/playlists/([A-Za-z0-9_\-]+))",
        guarded([this](const httplib::Request& req, httplib::Response& res) {
          std::string id = req.matches[1];
          auto playlist = service_.get_playlist(id);
          if (!playlist) throw Error(ErrorCode::kUnknownPlaylist, id);
          std::vector<TagPrediction> tags;
          if (auto record = service_.store().record(id)) tags = record->tags;
          send_json(res, 200, playlist_response(*playlist, *service_.snapshot()->catalog, tags));
        }));

  s.Post(R"(/v1/playlists/([A-Za-z0-9_\-]+)/events)",
         guarded([this](const httplib::Request& req, httplib::Response& res) {
           json body = parse_body(req);
           PlaylistEvent event;
           event.playlist_id = req.matches[1];
           event.type = body.contains("type") ? string_field(body, "type")
                                              : std::string(kListenedEvent);
           event.occurred_at_ms = body.contains("occurred_at")
                                      ? parse_timestamp(body.at("occurred_at"))
                                      : now_ms();
           bool stored = service_.record_event(event);
           ordered_json out;
           out["status"] = stored ? "recorded" : "duplicate";
           out["event"] = to_json(event);
           send_json(res, stored ? 201 : 200, out);
         }));

  s.Get("/v1/debug/pipeline", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::string user = req.has_param("user_id") ? req.get_param_value("user_id") : "";
    std::string q = req.has_param("q") ? req.get_param_value("q") : "";
    send_json(res, 200, service_.debug_pipeline(user, q));
  }));

  s.Post("/v1/admin/reload", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto catalog = service_.config().paths.catalog;
    auto embeddings = service_.config().paths.embeddings;
    if (!req.body.empty()) {
      json body = parse_body(req);
      if (body.contains("catalog")) catalog = string_field(body, "catalog");
      if (body.contains("embeddings")) embeddings = string_field(body, "embeddings");
    }
    ordered_json out;
    out["snapshot_id"] = service_.reload_snapshots(catalog, embeddings);
    send_json(res, 200, out);
  }));

  s.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    ordered_json out;
    out["status"] = "ok";
    out["snapshot_id"] = service_.snapshot()->id;
    send_json(res, 200, out);
  });

  s.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(render_metrics(service_.metrics()), "text/plain; version=0.0.4");
  });

  if (!ui_dir_.empty() && std::filesystem::is_directory(ui_dir_)) {
    s.set_mount_point("/ui", ui_dir_.string());
  }
}

int HttpServer::bind() {
  if (options_.port == 0) {
    return server_->bind_to_any_port(options_.host);
  }
  if (!server_->bind_to_port(options_.host, options_.port)) {
    throw Error(ErrorCode::kIo, "cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  return options_.port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

}  // namespace t2p
