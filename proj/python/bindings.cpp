#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <thread>

#include <nlohmann/json.hpp>

#include "t2p/analytics.hpp"
#include "t2p/catalog.hpp"
#include "t2p/config.hpp"
#include "t2p/error.hpp"
#include "t2p/http_server.hpp"
#include "t2p/llm_gateway.hpp"
#include "t2p/personalization.hpp"
#include "t2p/refinement.hpp"
#include "t2p/retrieval.hpp"
#include "t2p/service.hpp"
#include "t2p/tag_extraction.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

template <typename Json>
py::object to_py(const Json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null: return py::none();
    case nlohmann::json::value_t::boolean: return py::bool_(j.template get<bool>());
    case nlohmann::json::value_t::number_integer: return py::int_(j.template get<std::int64_t>());
    case nlohmann::json::value_t::number_unsigned: return py::int_(j.template get<std::uint64_t>());
    case nlohmann::json::value_t::number_float: return py::float_(j.template get<double>());
    case nlohmann::json::value_t::string: return py::str(j.template get_ref<const std::string&>());
    case nlohmann::json::value_t::array: {
      py::list out;
      for (const auto& item : j) out.append(to_py(item));
      return out;
    }
    case nlohmann::json::value_t::object: {
      py::dict out;
      for (auto it = j.begin(); it != j.end(); ++it) out[py::str(it.key())] = to_py(it.value());
      return out;
    }
    default: return py::none();
  }
}

t2p::Tag parse_tag(const std::string& text) {
  auto colon = text.find(':');
  auto facet = t2p::parse_facet(text.substr(0, colon == std::string::npos ? 0 : colon));
  if (!facet || colon == std::string::npos) {
    throw t2p::Error(t2p::ErrorCode::kInvalidArgument, "expected facet:value, got " + text);
  }
  return {*facet, text.substr(colon + 1)};
}

py::list predictions_to_py(const std::vector<t2p::TagPrediction>& predictions) {
  py::list out;
  for (const auto& p : predictions) {
    py::dict d("tag"_a = t2p::to_string(p.tag),
               "explicitness"_a = std::string(t2p::to_string(p.explicitness)));
    if (p.source_span) {
      d["span"] = py::make_tuple(p.source_span->begin, p.source_span->end);
    } else {
      d["span"] = py::none();
    }
    out.append(d);
  }
  return out;
}

// Owns everything a PlaylistService needs; the HTTP server is optional.
class Service {
 public:
  Service(const std::filesystem::path& config_path, std::optional<std::filesystem::path> store_dir,
          std::optional<std::filesystem::path> catalog,
          std::optional<std::filesystem::path> embeddings) {
    t2p::ServiceConfig config = t2p::ServiceConfig::load(config_path);
    if (store_dir) config.paths.store_dir = *store_dir;
    if (catalog) config.paths.catalog = *catalog;
    if (embeddings) config.paths.embeddings = *embeddings;
    service_ = std::make_unique<t2p::PlaylistService>(std::move(config));
  }

  py::dict generate(const std::string& user_id, const std::string& query,
                    std::optional<std::size_t> length, std::optional<std::string> extraction,
                    std::optional<std::string> refinement, bool persist) {
    t2p::GenerateOptions options;
    options.length = length;
    options.persist = persist;
    if (extraction) {
      options.extraction = t2p::parse_extraction_backend(*extraction);
      if (!options.extraction) throw t2p::Error(t2p::ErrorCode::kInvalidArgument, "unknown extraction backend");
    }
    if (refinement) {
      options.refinement = t2p::parse_refinement_backend(*refinement);
      if (!options.refinement) throw t2p::Error(t2p::ErrorCode::kInvalidArgument, "unknown refinement backend");
    }
    t2p::GenerationOutcome out;
    {
      py::gil_scoped_release release;
      out = service_->generate_playlist(user_id, query, options);
    }
    return to_py(t2p::playlist_response(out.playlist, *out.snapshot->catalog,
                                        out.extraction.predictions));
  }

  py::dict debug(const std::string& user_id, const std::string& query) {
    return to_py(service_->debug_pipeline(user_id, query));
  }

  bool record_event(const std::string& playlist_id, std::optional<std::int64_t> occurred_at_ms,
                    const std::string& type) {
    return service_->record_event(
        {playlist_id, type, occurred_at_ms.value_or(t2p::now_ms())});
  }

  std::uint64_t reload(std::optional<std::filesystem::path> catalog,
                       std::optional<std::filesystem::path> embeddings) {
    py::gil_scoped_release release;
    if (!catalog && !embeddings) return service_->reload_snapshots();
    return service_->reload_snapshots(catalog.value_or(service_->config().paths.catalog),
                                      embeddings.value_or(service_->config().paths.embeddings));
  }

  std::uint64_t snapshot_id() const { return service_->snapshot()->id; }

  py::dict usage() const {
    py::dict out;
    for (const auto& [purpose, u] : service_->usage().per_purpose) {
      out[py::str(std::string(t2p::to_string(purpose)))] =
          py::dict("calls"_a = u.calls, "input_tokens"_a = u.input_tokens,
                   "output_tokens"_a = u.output_tokens);
    }
    return out;
  }

  py::dict engagement(int window_days) const {
    auto records = service_->store().records();
    auto events = service_->store().events();
    auto r = t2p::listen_through(records, events, window_days);
    return py::dict("window_days"_a = r.window_days, "generated"_a = r.generated_count,
                    "listened"_a = r.listened_count,
                    "listen_through_rate"_a = r.listen_through_rate);
  }

  py::list tag_report(std::optional<std::string> facet) const {
    std::optional<t2p::Facet> f;
    if (facet) {
      f = t2p::parse_facet(*facet);
      if (!f) throw t2p::Error(t2p::ErrorCode::kInvalidArgument, "unknown facet " + *facet);
    }
    auto records = service_->store().records();
    py::list out;
    for (const auto& row : t2p::tag_frequencies(records).rows) {
      if (f && row.tag.facet != *f) continue;
      out.append(py::dict("facet"_a = std::string(t2p::to_string(row.tag.facet)),
                          "value"_a = row.tag.value, "count"_a = row.count,
                          "share"_a = row.share));
    }
    return out;
  }

  int serve_start(const std::string& host, int port) {
    if (server_) throw t2p::Error(t2p::ErrorCode::kInvalidArgument, "already serving");
    t2p::ServiceConfig::Server opts = service_->config().server;
    opts.host = host;
    opts.port = port;
    server_ = std::make_unique<t2p::HttpServer>(*service_, opts, service_->config().paths.ui_dir);
    int bound = server_->bind();
    thread_ = std::thread([this] { server_->listen(); });
    return bound;
  }

  void serve_stop() {
    if (!server_) return;
    server_->stop();
    if (thread_.joinable()) thread_.join();
    server_.reset();
  }

  ~Service() { serve_stop(); }

 private:
  std::unique_ptr<t2p::PlaylistService> service_;
  std::unique_ptr<t2p::HttpServer> server_;
  std::thread thread_;
};

}  // namespace

PYBIND11_MODULE(_t2p, m) {
  m.doc() = "Text-to-playlist core: tag extraction, retrieval, ranking, refinement.";

  static py::handle error_type = py::exception<t2p::Error>(m, "T2PError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const t2p::Error& e) {
      py::object inst = error_type(e.what());
      inst.attr("code") = std::string(t2p::to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  py::class_<t2p::TagTaxonomy, std::shared_ptr<t2p::TagTaxonomy>>(m, "Taxonomy")
      .def_static("load", [](const std::filesystem::path& p) {
        return std::make_shared<t2p::TagTaxonomy>(t2p::TagTaxonomy::load(p));
      })
      .def("values", [](const t2p::TagTaxonomy& t, const std::string& facet) {
        auto f = t2p::parse_facet(facet);
        if (!f) throw t2p::Error(t2p::ErrorCode::kInvalidArgument, "unknown facet " + facet);
        return std::vector<std::string>(t.values(*f).begin(), t.values(*f).end());
      })
      .def("normalize", [](const t2p::TagTaxonomy& t, const std::string& facet, const std::string& raw) {
        auto f = t2p::parse_facet(facet);
        if (!f) throw t2p::Error(t2p::ErrorCode::kInvalidArgument, "unknown facet " + facet);
        return t2p::to_string(t.normalize(*f, raw));
      }, "facet"_a, "raw"_a);

  py::class_<t2p::Lexicon, std::shared_ptr<t2p::Lexicon>>(m, "Lexicon")
      .def_static("load", [](const std::filesystem::path& p, const t2p::TagTaxonomy& t) {
        return std::make_shared<t2p::Lexicon>(t2p::Lexicon::load(p, t));
      })
      .def("__len__", &t2p::Lexicon::size);

  m.def("extract_rule_based", [](const std::string& text, const t2p::TagTaxonomy& t, const t2p::Lexicon& l) {
    return predictions_to_py(t2p::extract_rule_based({text, ""}, t, l).predictions);
  }, "text"_a, "taxonomy"_a, "lexicon"_a);

  m.def("parse_llm_tags", [](const std::string& response, const t2p::TagTaxonomy& t, const std::string& query) {
    return predictions_to_py(t2p::parse_llm_tags(response, t, query).predictions);
  }, "response"_a, "taxonomy"_a, "query"_a);

  m.def("extraction_prompt", [](const std::string& text, const t2p::TagTaxonomy& t) {
    return t2p::build_extraction_prompt({text, ""}, t);
  }, "text"_a, "taxonomy"_a);

  m.def("prompt_hash", &t2p::prompt_hash_hex, "prompt"_a);

  py::class_<t2p::Catalog, std::shared_ptr<t2p::Catalog>>(m, "Catalog")
      .def_static("load", [](const std::filesystem::path& p, std::shared_ptr<t2p::TagTaxonomy> t) {
        return std::make_shared<t2p::Catalog>(t2p::load_catalog(p, t));
      })
      .def("__len__", &t2p::Catalog::size)
      .def("track", [](const t2p::Catalog& c, const std::string& id) -> py::object {
        const t2p::Track* t = c.find(id);
        if (!t) return py::none();
        return to_py(nlohmann::json::parse(t2p::to_catalog_record(*t)));
      });

  m.def("retrieve", [](const t2p::Catalog& catalog, const std::vector<std::string>& required,
                       const std::vector<std::string>& preferred, std::size_t limit,
                       std::size_t min_candidates) {
    t2p::MatchSpec spec;
    for (const auto& s : required) spec.required.insert(parse_tag(s));
    for (const auto& s : preferred) spec.preferred.insert(parse_tag(s));
    spec.limit = limit;
    auto r = t2p::retrieve(t2p::build_index(catalog), spec, {min_candidates});
    return py::dict("track_ids"_a = r.track_ids, "relaxation_level"_a = r.relaxation_level);
  }, "catalog"_a, "required"_a, "preferred"_a = std::vector<std::string>{},
     "limit"_a = t2p::kDefaultCandidateLimit, "min_candidates"_a = t2p::kDefaultMinCandidates);

  m.def("cosine", [](const std::vector<float>& u, const std::vector<float>& v) {
    return t2p::cosine(u, v);
  }, "u"_a, "v"_a);

  m.def("rank", [](const std::vector<float>& user, const std::map<std::string, std::vector<float>>& tracks,
                   const std::vector<std::string>& candidates) {
    t2p::EmbeddingStore store(user.size());
    for (const auto& [id, v] : tracks) store.add_track(id, v);
    py::list out;
    for (const auto& t : t2p::rank_for_vector(user, candidates, store).tracks) {
      out.append(py::make_tuple(t.track_id, t.score ? py::cast(*t.score) : py::none()));
    }
    return out;
  }, "user"_a, "tracks"_a, "candidates"_a);

  m.def("refine", [](const std::vector<std::pair<std::string, std::string>>& ranked,
                     std::size_t length, std::size_t artist_cap) {
    t2p::RefinementRequest req;
    for (const auto& [id, artist] : ranked) req.ranked.push_back({id, "", artist, artist, {}, {}});
    req.target_length = length;
    req.artist_cap = artist_cap;
    return t2p::refine_deterministic(req).track_ids;
  }, "ranked"_a, "length"_a = t2p::kDefaultPlaylistLength,
     "artist_cap"_a = t2p::kDefaultArtistCap,
     "Greedy selection over (track_id, artist_id) pairs in ranked order.");

  py::class_<Service>(m, "Service")
      .def(py::init<const std::filesystem::path&, std::optional<std::filesystem::path>,
                    std::optional<std::filesystem::path>, std::optional<std::filesystem::path>>(),
           "config"_a, "store_dir"_a = py::none(), "catalog"_a = py::none(),
           "embeddings"_a = py::none())
      .def("generate", &Service::generate, "user_id"_a, "query"_a, "length"_a = py::none(),
           "extraction"_a = py::none(), "refinement"_a = py::none(), "persist"_a = true)
      .def("debug", &Service::debug, "user_id"_a, "query"_a)
      .def("record_event", &Service::record_event, "playlist_id"_a,
           "occurred_at_ms"_a = py::none(), "type"_a = "listened")
      .def("reload", &Service::reload, "catalog"_a = py::none(), "embeddings"_a = py::none())
      .def_property_readonly("snapshot_id", &Service::snapshot_id)
      .def("usage", &Service::usage)
      .def("engagement", &Service::engagement, "window_days"_a = 7)
      .def("tag_report", &Service::tag_report, "facet"_a = py::none())
      .def("serve_start", &Service::serve_start, "host"_a = "127.0.0.1", "port"_a = 0)
      .def("serve_stop", &Service::serve_stop);
}
