#pragma once

#include <memory>
#include <string>

#include "t2p/error.hpp"
#include "t2p/service.hpp"

namespace httplib {
class Server;
}

namespace t2p {

/// JSON body for a playlist as returned by the API.
nlohmann::ordered_json playlist_response(const Playlist& playlist, const Catalog& catalog,
                                         const std::vector<TagPrediction>& tags);

/// Maps a library error to an HTTP status: 400 for bad input, 404 for unknown
/// playlists, 422 with a reformulation hint when the query finds nothing.
int http_status_for(ErrorCode code);

/// Prometheus-style text exposition of ServiceMetrics.
std::string render_metrics(const ServiceMetrics& metrics);

/// HTTP front end over a PlaylistService (cpp-httplib, thread pool per request).
class HttpServer {
 public:
  HttpServer(PlaylistService& service, ServiceConfig::Server options,
             std::filesystem::path ui_dir = {});
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind();
  /// Serves until stop(). Call after bind().
  void listen();
  void stop();

 private:
  void install_routes();

  PlaylistService& service_;
  ServiceConfig::Server options_;
  std::filesystem::path ui_dir_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace t2p
