#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "t2p/catalog.hpp"

namespace t2p {

class LlmGateway;

inline constexpr std::size_t kMaxQueryChars = 500;
inline constexpr std::size_t kMaxPredictions = 6;

struct Query {
  std::string text;
  std::string user_id;
};

/// Throws kInvalidQuery unless the trimmed text is nonempty, valid UTF-8 and at
/// most kMaxQueryChars code points.
void validate_query(const Query& query);

enum class Explicitness { kExplicit, kImplicit };
std::string_view to_string(Explicitness e);
std::optional<Explicitness> parse_explicitness(std::string_view s);

/// Byte range [begin, end) in the query text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
};

struct TagPrediction {
  Tag tag;
  Explicitness explicitness = Explicitness::kImplicit;
  std::optional<Span> source_span;  // present iff explicit

  bool operator==(const TagPrediction&) const = default;
};

enum class ExtractionBackend { kRule, kLlm, kReplay };
std::string_view to_string(ExtractionBackend b);
std::optional<ExtractionBackend> parse_extraction_backend(std::string_view s);

struct ExtractionResult {
  std::vector<TagPrediction> predictions;
  ExtractionBackend backend_used = ExtractionBackend::kRule;
  // Tags the LLM named that fell outside the taxonomy.
  std::size_t dropped = 0;
  // Set when an LLM-backed call failed and the rule backend answered instead.
  bool fell_back = false;

  std::vector<Tag> explicit_tags() const;
  std::vector<Tag> implicit_tags() const;
};

struct LexiconEntry {
  Tag tag;
  Explicitness explicitness = Explicitness::kImplicit;
};

/// Phrase -> tag table for the rule backend. Phrases are stored by lookup_key.
class Lexicon {
 public:
  /// Explicit entries must resolve to their tag through the taxonomy so that a
  /// matched span always normalizes back to the predicted value.
  void add(std::string_view phrase, const Tag& tag, Explicitness explicitness,
           const TagTaxonomy& taxonomy);

  static Lexicon parse(std::istream& in, const TagTaxonomy& taxonomy);
  static Lexicon load(const std::filesystem::path& path, const TagTaxonomy& taxonomy);

  const LexiconEntry* find(std::string_view key) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t max_phrase_words() const { return max_words_; }

 private:
  std::map<std::string, LexiconEntry, std::less<>> entries_;
  std::size_t max_words_ = 0;
};

ExtractionResult extract_rule_based(const Query& query, const TagTaxonomy& taxonomy,
                                    const Lexicon& lexicon);

std::string build_extraction_prompt(const Query& query, const TagTaxonomy& taxonomy);

/// Parses a Tag-response object. `query_text` is used to locate source spans
/// for explicit tags; an explicit tag whose words cannot be found in the query
/// is demoted to implicit.
ExtractionResult parse_llm_tags(std::string_view response_text, const TagTaxonomy& taxonomy,
                                std::string_view query_text);

/// Locates the first token window in `text` that normalizes to `tag`.
std::optional<Span> find_tag_span(std::string_view text, const Tag& tag,
                                  const TagTaxonomy& taxonomy);

/// Dependencies for extract(). Gateways are optional; a missing gateway for the
/// selected backend counts as a failure and triggers the rule fallback.
struct ExtractionContext {
  const TagTaxonomy* taxonomy = nullptr;
  const Lexicon* lexicon = nullptr;
  LlmGateway* llm = nullptr;
  LlmGateway* replay = nullptr;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  int max_output_tokens = 512;
};

ExtractionResult extract(const Query& query, ExtractionBackend backend,
                         const ExtractionContext& context);

/// Sort rule shared by all backends: explicit by span start, then implicit by
/// facet then value. Also enforces dedup, one decade and the prediction cap.
std::vector<TagPrediction> finalize_predictions(std::vector<TagPrediction> predictions);

}  // namespace t2p
