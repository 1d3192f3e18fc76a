// t2p: serve the playlist API, build the index, run one query, print reports.

#include <csignal>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "t2p/analytics.hpp"
#include "t2p/error.hpp"
#include "t2p/http_server.hpp"
#include "t2p/service.hpp"

namespace {

t2p::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int serve(const std::string& config_path, int port_override) {
  auto config = t2p::ServiceConfig::load(config_path);
  if (port_override >= 0) config.server.port = port_override;
  t2p::PlaylistService service(config);
  t2p::HttpServer server(service, config.server, config.paths.ui_dir);
  int port = server.bind();
  std::cerr << "t2p: serving snapshot " << service.snapshot()->id << " ("
            << service.snapshot()->catalog->size() << " tracks) on http://" << config.server.host
            << ":" << port << "\n";
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return 0;
}

int index_build(const std::string& config_path, const std::string& out_path) {
  auto config = t2p::ServiceConfig::load(config_path);
  auto taxonomy = std::make_shared<const t2p::TagTaxonomy>(t2p::TagTaxonomy::load(config.paths.taxonomy));
  auto catalog = t2p::load_catalog(config.paths.catalog, taxonomy);
  auto index = t2p::build_index(catalog);

  std::map<t2p::Facet, std::pair<std::size_t, std::size_t>> per_facet;  // tags, postings
  nlohmann::ordered_json dump;
  dump["snapshot_id"] = index.built_from_snapshot();
  auto& postings = dump["postings"] = nlohmann::ordered_json::object();
  for (const auto& [tag, list] : index.postings()) {
    auto& [tags, entries] = per_facet[tag.facet];
    ++tags;
    entries += list.size();
    postings[t2p::to_string(tag)] = index.posting_ids(tag);
  }
  std::cout << "tracks  " << index.track_count() << "\n";
  for (const auto& [facet, counts] : per_facet) {
    std::cout << t2p::to_string(facet) << "  tags=" << counts.first
              << " postings=" << counts.second << "\n";
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw t2p::Error(t2p::ErrorCode::kIo, "cannot write " + out_path);
    out << dump.dump(2) << "\n";
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int query(const std::string& config_path, const std::string& user, const std::string& text,
          const std::string& backend, const std::string& refine, std::size_t length, bool save,
          bool as_json) {
  auto config = t2p::ServiceConfig::load(config_path);
  t2p::PlaylistService service(config);
  t2p::GenerateOptions options;
  options.persist = save;
  if (length > 0) options.length = length;
  options.extraction = t2p::parse_extraction_backend(backend);
  if (!options.extraction) throw t2p::Error(t2p::ErrorCode::kInvalidArgument, "backend " + backend);
  if (!refine.empty()) {
    options.refinement = t2p::parse_refinement_backend(refine);
    if (!options.refinement) throw t2p::Error(t2p::ErrorCode::kInvalidArgument, "refine " + refine);
  }
  auto out = service.generate_playlist(user, text, options);
  const auto& catalog = *out.snapshot->catalog;
  if (as_json) {
    std::cout << t2p::playlist_response(out.playlist, catalog, out.extraction.predictions).dump(2)
              << "\n";
    return 0;
  }
  std::cout << "tags:";
  for (const auto& p : out.extraction.predictions) {
    std::cout << " " << t2p::to_string(p.tag) << "(" << t2p::to_string(p.explicitness) << ")";
  }
  const auto& prov = out.playlist.provenance;
  std::cout << "\n" << out.playlist.title << "  [extraction=" << prov.extraction_backend
            << " refinement=" << prov.refinement_backend << " relaxation=" << prov.relaxation_level
            << " personalized=" << (prov.personalized ? "yes" : "no")
            << " degraded=" << (prov.degraded ? "yes" : "no") << " snapshot=" << prov.snapshot_id
            << "]\n";
  std::size_t n = 1;
  for (const auto& id : out.playlist.track_ids) {
    const t2p::Track* t = catalog.find(id);
    std::cout << "  " << n++ << ". " << id << "  " << (t ? t->title : "?") << " - "
              << (t ? t->artist_name : "?") << "\n";
  }
  if (save) std::cout << "saved as " << out.playlist.playlist_id << "\n";
  return 0;
}

t2p::ReportFormat report_format(const std::string& name) {
  if (name == "csv") return t2p::ReportFormat::kCsv;
  if (name == "table") return t2p::ReportFormat::kTable;
  throw t2p::Error(t2p::ErrorCode::kInvalidArgument, "format must be table or csv");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-to-playlist service and tools"};
  // --config may also follow the subcommand.
  app.fallthrough();
  app.require_subcommand(1);
  std::string config_path = "data/config.json";
  app.add_option("-c,--config", config_path, "Service config file")->capture_default_str();

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  int port = -1;
  serve_cmd->add_option("--port", port, "Override the configured port (0 = any free port)");

  auto* index_cmd = app.add_subcommand("index", "Inverted index tools");
  index_cmd->require_subcommand(1);
  auto* build_cmd = index_cmd->add_subcommand("build", "Build the tag index and print its shape");
  std::string index_out;
  build_cmd->add_option("-o,--out", index_out, "Write the postings as JSON");

  auto* query_cmd = app.add_subcommand("query", "Generate one playlist");
  std::string user, text, backend = "rule", refine;
  std::size_t length = 0;
  bool save = false, as_json = false;
  query_cmd->add_option("-u,--user", user, "User id")->required();
  query_cmd->add_option("text", text, "Query text")->required();
  query_cmd->add_option("-b,--backend", backend, "Extraction backend")
      ->check(CLI::IsMember({"rule", "llm", "replay"}))
      ->capture_default_str();
  query_cmd->add_option("-r,--refine", refine, "Refinement backend (default from config)")
      ->check(CLI::IsMember({"deterministic", "llm", "replay"}));
  query_cmd->add_option("-n,--length", length, "Playlist length");
  query_cmd->add_flag("--save", save, "Persist the playlist to the store");
  query_cmd->add_flag("--json", as_json, "Print the API response body");

  auto* prompt_cmd = app.add_subcommand("prompt", "Print the tag extraction prompt for a query");
  std::string prompt_text;
  bool hash_only = false;
  prompt_cmd->add_option("text", prompt_text, "Query text")->required();
  prompt_cmd->add_flag("--hash", hash_only, "Print only the fixture hash");

  auto* report_cmd = app.add_subcommand("report", "Engagement and tag reports from the store");
  report_cmd->require_subcommand(1);
  std::string format = "table";
  report_cmd->add_option("--format", format, "table or csv")->capture_default_str();
  auto* engagement_cmd = report_cmd->add_subcommand("engagement", "Listen-through rate");
  int window = t2p::kDefaultWindowDays;
  engagement_cmd->add_option("-w,--window", window, "Window in days")->capture_default_str();
  engagement_cmd->add_option("--format", format, "table or csv");
  auto* tags_cmd = report_cmd->add_subcommand("tags", "Requested tag frequencies");
  std::string facet_name;
  tags_cmd->add_option("-f,--facet", facet_name, "Restrict to one facet");
  tags_cmd->add_option("--format", format, "table or csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(config_path, port);
    if (*build_cmd) return index_build(config_path, index_out);
    if (*query_cmd) {
      return query(config_path, user, text, backend, refine, length, save, as_json);
    }
    if (*prompt_cmd) {
      auto config = t2p::ServiceConfig::load(config_path);
      auto taxonomy = t2p::TagTaxonomy::load(config.paths.taxonomy);
      std::string prompt = t2p::build_extraction_prompt({prompt_text, ""}, taxonomy);
      if (hash_only) {
        std::cout << t2p::prompt_hash_hex(prompt) << "\n";
      } else {
        std::cout << prompt;
      }
      return 0;
    }
    if (*engagement_cmd || *tags_cmd) {
      auto config = t2p::ServiceConfig::load(config_path);
      t2p::PlaylistStore store(config.paths.store_dir);
      auto records = store.records();
      if (*engagement_cmd) {
        auto events = store.events();
        std::cout << t2p::format_report(t2p::listen_through(records, events, window),
                                        report_format(format));
      } else {
        std::optional<t2p::Facet> facet;
        if (!facet_name.empty()) {
          facet = t2p::parse_facet(facet_name);
          if (!facet) throw t2p::Error(t2p::ErrorCode::kInvalidArgument, "facet " + facet_name);
        }
        std::cout << t2p::format_report(t2p::tag_frequencies(records), facet,
                                        report_format(format));
      }
      return 0;
    }
  } catch (const t2p::Error& e) {
    std::cerr << "t2p: " << e.what() << "\n";
    if (e.code() == t2p::ErrorCode::kNoTagsExtracted ||
        e.code() == t2p::ErrorCode::kEmptyCandidateSet) {
      std::cerr << t2p::kReformulateHint << "\n";
      return 3;
    }
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "t2p: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
