#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>

namespace t2p {

enum class Purpose { kExtraction, kRefinement };
inline constexpr std::array<Purpose, 2> kAllPurposes = {Purpose::kExtraction,
                                                        Purpose::kRefinement};
std::string_view to_string(Purpose purpose);

enum class LlmBackendKind { kMock, kReplay, kRemote };
std::string_view to_string(LlmBackendKind kind);

struct CompletionRequest {
  std::string prompt;
  int max_output_tokens = 1024;
  Purpose purpose = Purpose::kExtraction;
  // Decoding is always greedy; there is no knob.
  static constexpr double kTemperature = 0.0;
};

struct CompletionResponse {
  std::string text;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::chrono::milliseconds latency{0};
  LlmBackendKind backend = LlmBackendKind::kMock;
};

/// Stable 64-bit FNV-1a over the prompt bytes.
std::uint64_t prompt_hash(std::string_view prompt);
/// 16 lowercase hex digits; also the fixture file stem.
std::string prompt_hash_hex(std::string_view prompt);

/// ceil(bytes / 4), the token estimate used when a backend does not report usage.
std::int64_t estimate_tokens(std::string_view text);

struct PurposeUsage {
  std::int64_t calls = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;

  bool operator==(const PurposeUsage&) const = default;
};

struct UsageReport {
  std::map<Purpose, PurposeUsage> per_purpose;

  PurposeUsage total() const;
  bool is_zero() const { return total() == PurposeUsage{}; }
};

/// Lock-free, monotonically non-decreasing counters per purpose.
class UsageLedger {
 public:
  void record(Purpose purpose, std::int64_t input_tokens, std::int64_t output_tokens);
  UsageReport report() const;

 private:
  struct Counters {
    std::atomic<std::int64_t> calls{0};
    std::atomic<std::int64_t> input_tokens{0};
    std::atomic<std::int64_t> output_tokens{0};
  };
  std::array<Counters, kAllPurposes.size()> counters_;
};

UsageReport usage_report(const UsageLedger& ledger);

/// Outcome of one HTTP attempt against the remote endpoint.
struct TransportResult {
  enum class Kind { kOk, kTransportError, kTimeout };
  Kind kind = Kind::kOk;
  int status = 0;
  std::string body;
  std::string error;
};

/// Sends one request body; injectable for tests.
using Transport =
    std::function<TransportResult(const std::string& body, std::chrono::milliseconds timeout)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct RemoteConfig {
  std::string endpoint;  // e.g. http://localhost:8080/v1/chat/completions
  std::string api_key;
  std::string model;
  int max_retries = 2;
  std::chrono::milliseconds backoff_base{250};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds call_timeout{10'000};
  int max_in_flight = 8;

  /// Overlays T2P_LLM_ENDPOINT, T2P_LLM_API_KEY and T2P_LLM_MODEL when set.
  void apply_environment();
};

/// Body sent to the chat-completion endpoint for `request`.
std::string remote_request_body(const CompletionRequest& request, const std::string& model);
/// Extracts text and usage from a chat-completion response body.
/// Throws kRemoteRejected when the body has no message content.
CompletionResponse parse_remote_response(const std::string& body);

/// Default HTTP transport backed by cpp-httplib.
Transport make_http_transport(const RemoteConfig& config);

struct GatewayConfig {
  LlmBackendKind backend = LlmBackendKind::kMock;
  // mock: responses keyed by (purpose, prompt hash), then a per-purpose default.
  std::map<std::pair<Purpose, std::uint64_t>, std::string> mock_table;
  std::map<Purpose, std::string> mock_defaults;
  // replay
  std::filesystem::path fixture_dir;
  // remote
  RemoteConfig remote;
};

/// Provider-agnostic completion client. Thread-safe.
class LlmGateway {
 public:
  explicit LlmGateway(GatewayConfig config, Transport transport = {}, Sleeper sleeper = {});

  /// `deadline`, when set, bounds the whole call including retries.
  CompletionResponse complete(
      const CompletionRequest& request,
      std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt);

  const UsageLedger& ledger() const { return ledger_; }
  LlmBackendKind backend() const { return config_.backend; }

  /// Writes `text` as the replay fixture for `prompt` into `dir`.
  static void record_fixture(const std::filesystem::path& dir, std::string_view prompt,
                             std::string_view text);

 private:
  CompletionResponse complete_mock(const CompletionRequest& request);
  CompletionResponse complete_replay(const CompletionRequest& request);
  CompletionResponse complete_remote(
      const CompletionRequest& request,
      std::optional<std::chrono::steady_clock::time_point> deadline);

  GatewayConfig config_;
  Transport transport_;
  Sleeper sleeper_;
  UsageLedger ledger_;
  std::counting_semaphore<> in_flight_;
  std::mutex replay_mutex_;
  std::unordered_map<std::uint64_t, std::string> replay_cache_;
};

}  // namespace t2p
