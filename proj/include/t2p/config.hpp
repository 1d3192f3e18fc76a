#pragma once

#include <chrono>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "t2p/llm_gateway.hpp"
#include "t2p/refinement.hpp"
#include "t2p/retrieval.hpp"
#include "t2p/tag_extraction.hpp"

namespace t2p {

struct ServiceConfig {
  struct Paths {
    std::filesystem::path taxonomy;
    std::filesystem::path lexicon;
    std::filesystem::path catalog;
    std::filesystem::path embeddings;
    std::filesystem::path store_dir;
    std::filesystem::path fixtures_dir;
    std::filesystem::path ui_dir;
  } paths;

  struct Limits {
    std::size_t length = kDefaultPlaylistLength;
    std::size_t artist_cap = kDefaultArtistCap;
    std::size_t min_candidates = kDefaultMinCandidates;
    std::size_t candidate_limit = kDefaultCandidateLimit;
  } limits;

  struct Timeouts {
    std::chrono::milliseconds extraction{12'000};
    std::chrono::milliseconds refinement{12'000};
  } timeouts;

  ExtractionBackend extraction_backend = ExtractionBackend::kRule;
  RefinementBackend refinement_backend = RefinementBackend::kDeterministic;

  // Backend behind the "llm" selector: remote in production, mock for demos.
  LlmBackendKind llm_backend = LlmBackendKind::kRemote;
  RemoteConfig remote;

  struct Server {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string cors_origin = "*";
  } server;

  int window_days = 7;
  bool store_fsync = false;

  /// Relative paths resolve against `base_dir`. Unknown keys are ignored;
  /// malformed values throw kInvalidArgument.
  static ServiceConfig from_json(const nlohmann::json& doc,
                                 const std::filesystem::path& base_dir);
  /// Loads a config file; relative paths resolve against its directory.
  /// Environment overrides for the LLM endpoint are applied.
  static ServiceConfig load(const std::filesystem::path& path);
};

}  // namespace t2p
