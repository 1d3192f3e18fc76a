#include "t2p/tag_extraction.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "t2p/error.hpp"
#include "t2p/llm_gateway.hpp"

namespace t2p {

using nlohmann::json;

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '&' || c >= 0x80;
}

struct Token {
  std::size_t begin;
  std::size_t end;
  std::string key;  // lowercased bytes
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_token_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_token_byte(static_cast<unsigned char>(text[j]))) ++j;
    tokens.push_back({i, j, lookup_key(text.substr(i, j - i))});
    i = j;
  }
  return tokens;
}

std::string join_keys(const std::vector<Token>& tokens, std::size_t first, std::size_t count) {
  std::string out = tokens[first].key;
  for (std::size_t k = 1; k < count; ++k) {
    out += ' ';
    out += tokens[first + k].key;
  }
  return out;
}

std::size_t word_count(std::string_view key) {
  return key.empty() ? 0 : 1 + static_cast<std::size_t>(std::count(key.begin(), key.end(), ' '));
}

// Number of code points, or nullopt when the bytes are not valid UTF-8.
std::optional<std::size_t> utf8_length(std::string_view s) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) return std::nullopt;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return std::nullopt;
    }
    i += len;
    ++count;
  }
  return count;
}

std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void validate_query(const Query& query) {
  std::string_view text = trim(query.text);
  if (text.empty()) throw Error(ErrorCode::kInvalidQuery, "query text is empty");
  auto len = utf8_length(query.text);
  if (!len) throw Error(ErrorCode::kInvalidQuery, "query text is not valid UTF-8");
  if (*len > kMaxQueryChars) {
    throw Error(ErrorCode::kInvalidQuery,
                "query longer than " + std::to_string(kMaxQueryChars) + " characters");
  }
}

std::string_view to_string(Explicitness e) {
  return e == Explicitness::kExplicit ? "explicit" : "implicit";
}

std::optional<Explicitness> parse_explicitness(std::string_view s) {
  if (s == "explicit") return Explicitness::kExplicit;
  if (s == "implicit") return Explicitness::kImplicit;
  return std::nullopt;
}

std::string_view to_string(ExtractionBackend b) {
  switch (b) {
    case ExtractionBackend::kRule: return "rule";
    case ExtractionBackend::kLlm: return "llm";
    case ExtractionBackend::kReplay: return "replay";
  }
  return "?";
}

std::optional<ExtractionBackend> parse_extraction_backend(std::string_view s) {
  if (s == "rule") return ExtractionBackend::kRule;
  if (s == "llm") return ExtractionBackend::kLlm;
  if (s == "replay") return ExtractionBackend::kReplay;
  return std::nullopt;
}

std::vector<Tag> ExtractionResult::explicit_tags() const {
  std::vector<Tag> out;
  for (const auto& p : predictions) {
    if (p.explicitness == Explicitness::kExplicit) out.push_back(p.tag);
  }
  return out;
}

std::vector<Tag> ExtractionResult::implicit_tags() const {
  std::vector<Tag> out;
  for (const auto& p : predictions) {
    if (p.explicitness == Explicitness::kImplicit) out.push_back(p.tag);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lexicon

void Lexicon::add(std::string_view phrase, const Tag& tag, Explicitness explicitness,
                  const TagTaxonomy& taxonomy) {
  if (!taxonomy.contains(tag)) {
    throw Error(ErrorCode::kUnknownTag, to_string(tag));
  }
  std::string key = lookup_key(phrase);
  if (key.empty()) throw Error(ErrorCode::kInvalidArgument, "empty lexicon phrase");
  if (explicitness == Explicitness::kExplicit) {
    auto resolved = taxonomy.try_normalize(tag.facet, phrase);
    if (!resolved || *resolved != tag) {
      throw Error(ErrorCode::kInvalidArgument, "explicit phrase '" + std::string(phrase) +
                                                   "' does not normalize to " + to_string(tag));
    }
  }
  auto [it, inserted] = entries_.emplace(key, LexiconEntry{tag, explicitness});
  if (!inserted) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate lexicon phrase '" + key + "'");
  }
  max_words_ = std::max(max_words_, word_count(key));
}

Lexicon Lexicon::parse(std::istream& in, const TagTaxonomy& taxonomy) {
  Lexicon lexicon;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    auto tab1 = line.find('\t');
    auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      throw Error(ErrorCode::kMalformedRecord, "expected phrase<TAB>facet:value<TAB>kind",
                  line_number);
    }
    std::string_view view(line);
    std::string_view phrase = view.substr(0, tab1);
    std::string_view tag_text = view.substr(tab1 + 1, tab2 - tab1 - 1);
    auto kind = parse_explicitness(trim(view.substr(tab2 + 1)));
    auto colon = tag_text.find(':');
    auto facet = colon == std::string_view::npos ? std::nullopt
                                                  : parse_facet(tag_text.substr(0, colon));
    if (!kind || !facet) {
      throw Error(ErrorCode::kMalformedRecord, "bad tag or kind", line_number);
    }
    try {
      lexicon.add(phrase, Tag{*facet, std::string(tag_text.substr(colon + 1))}, *kind, taxonomy);
    } catch (const Error& e) {
      throw Error(e.code(), e.detail(), line_number);
    }
  }
  return lexicon;
}

Lexicon Lexicon::load(const std::filesystem::path& path, const TagTaxonomy& taxonomy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return parse(in, taxonomy);
}

const LexiconEntry* Lexicon::find(std::string_view key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// Shared post-processing

std::vector<TagPrediction> finalize_predictions(std::vector<TagPrediction> predictions) {
  // Collapse duplicates; the explicit variant wins, keeping its first position.
  std::vector<TagPrediction> unique;
  for (auto& p : predictions) {
    auto it = std::find_if(unique.begin(), unique.end(),
                           [&](const TagPrediction& q) { return q.tag == p.tag; });
    if (it == unique.end()) {
      unique.push_back(std::move(p));
    } else if (it->explicitness == Explicitness::kImplicit &&
               p.explicitness == Explicitness::kExplicit) {
      *it = std::move(p);
    }
  }
  std::stable_partition(unique.begin(), unique.end(), [](const TagPrediction& p) {
    return p.explicitness == Explicitness::kExplicit;
  });

  std::vector<TagPrediction> kept;
  bool have_decade = false;
  for (auto& p : unique) {
    if (kept.size() == kMaxPredictions) break;
    if (p.tag.facet == Facet::kDecade) {
      if (have_decade) continue;
      have_decade = true;
    }
    kept.push_back(std::move(p));
  }

  std::sort(kept.begin(), kept.end(), [](const TagPrediction& a, const TagPrediction& b) {
    bool ae = a.explicitness == Explicitness::kExplicit;
    bool be = b.explicitness == Explicitness::kExplicit;
    if (ae != be) return ae;
    if (ae) {
      std::size_t as = a.source_span ? a.source_span->begin : 0;
      std::size_t bs = b.source_span ? b.source_span->begin : 0;
      if (as != bs) return as < bs;
    }
    return a.tag < b.tag;
  });
  return kept;
}

// ---------------------------------------------------------------------------
// Rule backend

ExtractionResult extract_rule_based(const Query& query, const TagTaxonomy& taxonomy,
                                    const Lexicon& lexicon) {
  validate_query(query);
  std::vector<Token> tokens = tokenize(query.text);
  std::vector<TagPrediction> found;

  for (std::size_t i = 0; i < tokens.size();) {
    std::size_t longest = std::min(lexicon.max_phrase_words(), tokens.size() - i);
    std::size_t matched = 0;
    for (std::size_t n = longest; n >= 1; --n) {
      const LexiconEntry* entry = lexicon.find(join_keys(tokens, i, n));
      if (entry == nullptr || !taxonomy.contains(entry->tag)) continue;
      TagPrediction p{entry->tag, entry->explicitness, std::nullopt};
      if (p.explicitness == Explicitness::kExplicit) {
        p.source_span = Span{tokens[i].begin, tokens[i + n - 1].end};
      }
      found.push_back(std::move(p));
      matched = n;
      break;
    }
    i += matched == 0 ? 1 : matched;
  }

  ExtractionResult result;
  result.backend_used = ExtractionBackend::kRule;
  result.predictions = finalize_predictions(std::move(found));
  if (result.predictions.empty()) {
    throw Error(ErrorCode::kNoTagsExtracted, "no known music tags in \"" + query.text + "\"");
  }
  return result;
}

// ---------------------------------------------------------------------------
// LLM backend

std::string build_extraction_prompt(const Query& query, const TagTaxonomy& taxonomy) {
  std::ostringstream out;
  out << "You turn a music listener's request into catalog tags for a playlist.\n"
         "Give explicit tags for things the request names directly, and implicit tags "
         "for what it suggests without naming (an activity, a place, a time of day).\n"
         "Use only values from the vocabulary below. Return at most "
      << kMaxPredictions << " tags and at most one decade.\n\nVocabulary:\n";
  for (Facet facet : kAllFacets) {
    const auto& values = taxonomy.values(facet);
    if (values.empty()) continue;
    out << "- " << to_string(facet) << ":";
    bool first = true;
    for (const auto& v : values) {
      out << (first ? " " : ", ") << v;
      first = false;
    }
    out << "\n";
  }
  out << "\nRequest:\n" << query.text << "\n\n"
      << "Answer with a single JSON object and nothing else, shaped as\n"
         "{\"tags\": [{\"facet\": \"...\", \"value\": \"...\", \"explicitness\": "
         "\"explicit\" or \"implicit\"}]}\n";
  return out.str();
}

std::optional<Span> find_tag_span(std::string_view text, const Tag& tag,
                                  const TagTaxonomy& taxonomy) {
  constexpr std::size_t kMaxWindow = 4;
  std::vector<Token> tokens = tokenize(text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::size_t longest = std::min(kMaxWindow, tokens.size() - i);
    for (std::size_t n = longest; n >= 1; --n) {
      auto resolved = taxonomy.try_normalize(tag.facet, join_keys(tokens, i, n));
      if (resolved && *resolved == tag) return Span{tokens[i].begin, tokens[i + n - 1].end};
    }
  }
  return std::nullopt;
}

namespace {

json recover_object(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (!doc.is_discarded() && doc.is_object()) return doc;
  auto open = text.find('{');
  auto close = text.rfind('}');
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    doc = json::parse(text.substr(open, close - open + 1), nullptr, false);
    if (!doc.is_discarded() && doc.is_object()) return doc;
  }
  throw Error(ErrorCode::kUnparseableResponse, "no JSON object in response");
}

}  // namespace

ExtractionResult parse_llm_tags(std::string_view response_text, const TagTaxonomy& taxonomy,
                                std::string_view query_text) {
  json doc = recover_object(response_text);
  auto tags = doc.find("tags");
  if (tags == doc.end() || !tags->is_array()) {
    throw Error(ErrorCode::kUnparseableResponse, "response has no 'tags' list");
  }

  ExtractionResult result;
  result.backend_used = ExtractionBackend::kLlm;
  std::vector<TagPrediction> found;
  for (const auto& item : *tags) {
    if (!item.is_object()) {
      ++result.dropped;
      continue;
    }
    auto facet_it = item.find("facet");
    auto value_it = item.find("value");
    if (facet_it == item.end() || !facet_it->is_string() || value_it == item.end() ||
        !value_it->is_string()) {
      ++result.dropped;
      continue;
    }
    std::string facet_name = lookup_key(facet_it->get<std::string>());
    std::replace(facet_name.begin(), facet_name.end(), ' ', '_');
    auto facet = parse_facet(facet_name);
    auto tag = facet ? taxonomy.try_normalize(*facet, value_it->get<std::string>())
                     : std::nullopt;
    if (!tag) {
      ++result.dropped;
      continue;
    }
    auto kind = Explicitness::kImplicit;
    if (auto e = item.find("explicitness"); e != item.end() && e->is_string()) {
      kind = parse_explicitness(lookup_key(e->get<std::string>())).value_or(Explicitness::kImplicit);
    }
    TagPrediction p{*tag, kind, std::nullopt};
    if (kind == Explicitness::kExplicit) {
      p.source_span = find_tag_span(query_text, *tag, taxonomy);
      if (!p.source_span) p.explicitness = Explicitness::kImplicit;
    }
    found.push_back(std::move(p));
  }
  result.predictions = finalize_predictions(std::move(found));
  if (result.predictions.empty()) {
    throw Error(ErrorCode::kNoTagsExtracted,
                "all " + std::to_string(result.dropped) + " tags were outside the taxonomy");
  }
  return result;
}

ExtractionResult extract(const Query& query, ExtractionBackend backend,
                         const ExtractionContext& context) {
  if (context.taxonomy == nullptr || context.lexicon == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "extraction context needs taxonomy and lexicon");
  }
  validate_query(query);
  if (backend == ExtractionBackend::kRule) {
    return extract_rule_based(query, *context.taxonomy, *context.lexicon);
  }

  LlmGateway* gateway = backend == ExtractionBackend::kLlm ? context.llm : context.replay;
  if (gateway != nullptr) {
    try {
      CompletionRequest request{build_extraction_prompt(query, *context.taxonomy),
                                context.max_output_tokens, Purpose::kExtraction};
      CompletionResponse response = gateway->complete(request, context.deadline);
      ExtractionResult result = parse_llm_tags(response.text, *context.taxonomy, query.text);
      result.backend_used = backend;
      return result;
    } catch (const Error&) {
      // falls through to the rule backend
    }
  }
  ExtractionResult result = extract_rule_based(query, *context.taxonomy, *context.lexicon);
  result.fell_back = true;
  return result;
}

}  // namespace t2p
