#include "t2p/llm_gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "t2p/error.hpp"

namespace t2p {

using nlohmann::json;
using std::chrono::milliseconds;
using std::chrono::steady_clock;

std::string_view to_string(Purpose purpose) {
  return purpose == Purpose::kExtraction ? "extraction" : "refinement";
}

std::string_view to_string(LlmBackendKind kind) {
  switch (kind) {
    case LlmBackendKind::kMock: return "mock";
    case LlmBackendKind::kReplay: return "replay";
    case LlmBackendKind::kRemote: return "remote";
  }
  return "?";
}

std::uint64_t prompt_hash(std::string_view prompt) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : prompt) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string prompt_hash_hex(std::string_view prompt) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::uint64_t h = prompt_hash(prompt);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

// ---------------------------------------------------------------------------
// Usage accounting

PurposeUsage UsageReport::total() const {
  PurposeUsage sum;
  for (const auto& [purpose, usage] : per_purpose) {
    sum.calls += usage.calls;
    sum.input_tokens += usage.input_tokens;
    sum.output_tokens += usage.output_tokens;
  }
  return sum;
}

void UsageLedger::record(Purpose purpose, std::int64_t input_tokens,
                         std::int64_t output_tokens) {
  auto& c = counters_[static_cast<std::size_t>(purpose)];
  c.calls.fetch_add(1, std::memory_order_relaxed);
  c.input_tokens.fetch_add(input_tokens < 0 ? 0 : input_tokens, std::memory_order_relaxed);
  c.output_tokens.fetch_add(output_tokens < 0 ? 0 : output_tokens, std::memory_order_relaxed);
}

UsageReport UsageLedger::report() const {
  UsageReport report;
  for (Purpose p : kAllPurposes) {
    const auto& c = counters_[static_cast<std::size_t>(p)];
    report.per_purpose[p] = PurposeUsage{c.calls.load(), c.input_tokens.load(),
                                         c.output_tokens.load()};
  }
  return report;
}

UsageReport usage_report(const UsageLedger& ledger) { return ledger.report(); }

// ---------------------------------------------------------------------------
// Remote wire format

void RemoteConfig::apply_environment() {
  if (const char* v = std::getenv("T2P_LLM_ENDPOINT"); v && *v) endpoint = v;
  if (const char* v = std::getenv("T2P_LLM_API_KEY"); v && *v) api_key = v;
  if (const char* v = std::getenv("T2P_LLM_MODEL"); v && *v) model = v;
}

std::string remote_request_body(const CompletionRequest& request, const std::string& model) {
  nlohmann::ordered_json body;
  body["model"] = model;
  body["messages"] = nlohmann::ordered_json::array(
      {nlohmann::ordered_json{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = CompletionRequest::kTemperature;
  body["max_tokens"] = request.max_output_tokens;
  return body.dump();
}

CompletionResponse parse_remote_response(const std::string& body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::kRemoteRejected, "response body is not JSON");
  }
  CompletionResponse out;
  out.backend = LlmBackendKind::kRemote;
  try {
    out.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kRemoteRejected, "response has no choices[0].message.content");
  }
  if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
    out.input_tokens = usage->value("prompt_tokens", std::int64_t{0});
    out.output_tokens = usage->value("completion_tokens", std::int64_t{0});
  } else {
    out.output_tokens = estimate_tokens(out.text);
  }
  return out;
}

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "LLM endpoint must be an absolute URL: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

Transport make_http_transport(const RemoteConfig& config) {
  ParsedUrl url = split_url(config.endpoint);
  std::string api_key = config.api_key;
  return [url, api_key](const std::string& body, milliseconds timeout) {
    TransportResult result;
    httplib::Client client(url.origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      auto err = res.error();
      result.kind = err == httplib::Error::Read || err == httplib::Error::Write ||
                            err == httplib::Error::ConnectionTimeout
                        ? TransportResult::Kind::kTimeout
                        : TransportResult::Kind::kTransportError;
      result.error = httplib::to_string(err);
      return result;
    }
    result.status = res->status;
    result.body = res->body;
    return result;
  };
}

// ---------------------------------------------------------------------------
// Gateway

LlmGateway::LlmGateway(GatewayConfig config, Transport transport, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      in_flight_(config_.remote.max_in_flight < 1 ? 1 : config_.remote.max_in_flight) {
  if (!sleeper_) sleeper_ = [](milliseconds d) { std::this_thread::sleep_for(d); };
  if (config_.backend == LlmBackendKind::kRemote && !transport_) {
    transport_ = make_http_transport(config_.remote);
  }
}

CompletionResponse LlmGateway::complete(const CompletionRequest& request,
                                        std::optional<steady_clock::time_point> deadline) {
  if (request.prompt.empty()) throw Error(ErrorCode::kInvalidArgument, "empty prompt");
  if (request.max_output_tokens < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_output_tokens must be >= 1");
  }
  switch (config_.backend) {
    case LlmBackendKind::kMock: return complete_mock(request);
    case LlmBackendKind::kReplay: return complete_replay(request);
    case LlmBackendKind::kRemote: return complete_remote(request, deadline);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown backend");
}

CompletionResponse LlmGateway::complete_mock(const CompletionRequest& request) {
  CompletionResponse out;
  out.backend = LlmBackendKind::kMock;
  auto it = config_.mock_table.find({request.purpose, prompt_hash(request.prompt)});
  if (it != config_.mock_table.end()) {
    out.text = it->second;
  } else if (auto d = config_.mock_defaults.find(request.purpose);
             d != config_.mock_defaults.end()) {
    out.text = d->second;
  } else {
    out.text = request.purpose == Purpose::kExtraction
                   ? R"({"tags":[]})"
                   : R"({"title":"","track_ids":[]})";
  }
  out.input_tokens = estimate_tokens(request.prompt);
  out.output_tokens = estimate_tokens(out.text);
  ledger_.record(request.purpose, out.input_tokens, out.output_tokens);
  return out;
}

CompletionResponse LlmGateway::complete_replay(const CompletionRequest& request) {
  auto start = steady_clock::now();
  std::uint64_t hash = prompt_hash(request.prompt);
  CompletionResponse out;
  out.backend = LlmBackendKind::kReplay;
  {
    std::lock_guard lock(replay_mutex_);
    auto it = replay_cache_.find(hash);
    if (it == replay_cache_.end()) {
      auto path = config_.fixture_dir / (prompt_hash_hex(request.prompt) + ".txt");
      std::ifstream in(path, std::ios::binary);
      if (!in) {
        throw Error(ErrorCode::kFixtureMiss, "no fixture " + path.string());
      }
      std::stringstream buf;
      buf << in.rdbuf();
      it = replay_cache_.emplace(hash, buf.str()).first;
    }
    out.text = it->second;
  }
  out.input_tokens = estimate_tokens(request.prompt);
  out.output_tokens = estimate_tokens(out.text);
  out.latency = std::chrono::duration_cast<milliseconds>(steady_clock::now() - start);
  ledger_.record(request.purpose, out.input_tokens, out.output_tokens);
  return out;
}

CompletionResponse LlmGateway::complete_remote(const CompletionRequest& request,
                                               std::optional<steady_clock::time_point> deadline) {
  const std::string body = remote_request_body(request, config_.remote.model);
  const auto& rc = config_.remote;

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<>& sem;
    ~Release() { sem.release(); }
  } release{in_flight_};

  int last_status = 0;
  std::string last_error;
  milliseconds backoff = rc.backoff_base;
  for (int attempt = 0; attempt <= rc.max_retries; ++attempt) {
    milliseconds timeout = rc.call_timeout;
    if (deadline) {
      auto left = std::chrono::duration_cast<milliseconds>(*deadline - steady_clock::now());
      if (left <= milliseconds{0}) break;
      timeout = std::min(timeout, left);
    }
    auto start = steady_clock::now();
    TransportResult result = transport_(body, timeout);
    auto latency = std::chrono::duration_cast<milliseconds>(steady_clock::now() - start);

    bool retryable = true;
    if (result.kind == TransportResult::Kind::kOk && result.status >= 200 &&
        result.status < 300) {
      CompletionResponse out;
      try {
        out = parse_remote_response(result.body);
      } catch (const Error&) {
        ledger_.record(request.purpose, 0, 0);
        throw;
      }
      if (out.input_tokens == 0) out.input_tokens = estimate_tokens(request.prompt);
      out.latency = latency;
      ledger_.record(request.purpose, out.input_tokens, out.output_tokens);
      return out;
    }
    ledger_.record(request.purpose, 0, 0);
    if (result.kind == TransportResult::Kind::kOk) {
      last_status = result.status;
      last_error = "HTTP " + std::to_string(result.status);
      retryable = result.status == 408 || result.status == 429 || result.status >= 500;
      if (!retryable) {
        throw Error(ErrorCode::kRemoteRejected, last_error + ": " + result.body);
      }
    } else {
      last_status = 0;
      last_error = result.error.empty() ? "transport failure" : result.error;
    }
    if (attempt == rc.max_retries) break;
    milliseconds wait = backoff;
    if (deadline) {
      auto left = std::chrono::duration_cast<milliseconds>(*deadline - steady_clock::now());
      if (left <= wait) break;
    }
    sleeper_(wait);
    backoff = milliseconds{static_cast<std::int64_t>(
        std::llround(static_cast<double>(backoff.count()) * rc.backoff_multiplier))};
  }
  if (last_status != 0) {
    throw Error(ErrorCode::kRemoteRejected, last_error);
  }
  throw Error(ErrorCode::kTimeoutExhausted,
              last_error.empty() ? "stage deadline reached" : last_error);
}

void LlmGateway::record_fixture(const std::filesystem::path& dir, std::string_view prompt,
                                std::string_view text) {
  std::filesystem::create_directories(dir);
  auto path = dir / (prompt_hash_hex(prompt) + ".txt");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace t2p
