#include "t2p/config.hpp"

#include <fstream>

#include "t2p/error.hpp"

namespace t2p {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const json& section,
                              const char* key, const std::filesystem::path& fallback) {
  if (!section.contains(key)) return fallback;
  std::filesystem::path p = section.at(key).get<std::string>();
  if (p.empty()) return p;
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const json& doc, const std::filesystem::path& base) {
  ServiceConfig c;
  try {
    const json empty = json::object();
    const json& paths = doc.contains("paths") ? doc.at("paths") : empty;
    c.paths.taxonomy = resolve(base, paths, "taxonomy", base / "taxonomy.json");
    c.paths.lexicon = resolve(base, paths, "lexicon", base / "lexicon.tsv");
    c.paths.catalog = resolve(base, paths, "catalog", base / "catalog.jsonl");
    c.paths.embeddings = resolve(base, paths, "embeddings", base / "embeddings.txt");
    c.paths.store_dir = resolve(base, paths, "store_dir", base / "store");
    c.paths.fixtures_dir = resolve(base, paths, "fixtures_dir", base / "fixtures");
    c.paths.ui_dir = resolve(base, paths, "ui_dir", {});

    if (auto it = doc.find("limits"); it != doc.end()) {
      c.limits.length = it->value("length", c.limits.length);
      c.limits.artist_cap = it->value("artist_cap", c.limits.artist_cap);
      c.limits.min_candidates = it->value("min_candidates", c.limits.min_candidates);
      c.limits.candidate_limit = it->value("candidate_limit", c.limits.candidate_limit);
    }
    if (c.limits.length < 1 || c.limits.artist_cap < 1 || c.limits.candidate_limit < 1) {
      throw Error(ErrorCode::kInvalidArgument, "limits must be positive");
    }
    if (auto it = doc.find("timeouts"); it != doc.end()) {
      c.timeouts.extraction =
          std::chrono::milliseconds(it->value("extraction_ms", c.timeouts.extraction.count()));
      c.timeouts.refinement =
          std::chrono::milliseconds(it->value("refinement_ms", c.timeouts.refinement.count()));
    }
    if (auto it = doc.find("backends"); it != doc.end()) {
      auto ex = parse_extraction_backend(it->value("extraction", std::string("rule")));
      auto re = parse_refinement_backend(it->value("refinement", std::string("deterministic")));
      if (!ex || !re) throw Error(ErrorCode::kInvalidArgument, "unknown backend selector");
      c.extraction_backend = *ex;
      c.refinement_backend = *re;
    }
    if (auto it = doc.find("llm"); it != doc.end()) {
      std::string kind = it->value("backend", std::string("remote"));
      if (kind == "remote") {
        c.llm_backend = LlmBackendKind::kRemote;
      } else if (kind == "mock") {
        c.llm_backend = LlmBackendKind::kMock;
      } else {
        throw Error(ErrorCode::kInvalidArgument, "llm.backend must be remote or mock");
      }
      c.remote.endpoint = it->value("endpoint", c.remote.endpoint);
      c.remote.model = it->value("model", c.remote.model);
      c.remote.max_retries = it->value("max_retries", c.remote.max_retries);
      c.remote.backoff_base =
          std::chrono::milliseconds(it->value("backoff_base_ms", c.remote.backoff_base.count()));
      c.remote.call_timeout =
          std::chrono::milliseconds(it->value("call_timeout_ms", c.remote.call_timeout.count()));
      c.remote.max_in_flight = it->value("max_in_flight", c.remote.max_in_flight);
    }
    if (auto it = doc.find("server"); it != doc.end()) {
      c.server.host = it->value("host", c.server.host);
      c.server.port = it->value("port", c.server.port);
      c.server.cors_origin = it->value("cors_origin", c.server.cors_origin);
    }
    if (auto it = doc.find("analytics"); it != doc.end()) {
      c.window_days = it->value("window_days", c.window_days);
    }
    if (auto it = doc.find("store"); it != doc.end()) {
      c.store_fsync = it->value("fsync", c.store_fsync);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
  return c;
}

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "config is not a JSON object: " + path.string());
  }
  auto base = std::filesystem::absolute(path).parent_path();
  ServiceConfig config = from_json(doc, base);
  config.remote.apply_environment();
  return config;
}

}  // namespace t2p
