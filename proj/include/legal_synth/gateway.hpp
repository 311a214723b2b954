#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "legal_synth/error.hpp"

namespace legal_synth {

inline constexpr std::string_view kApiKeyEnv = "LEGAL_SYNTH_API_KEY";

struct BackendConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string model_name;
  double temperature = 0.0;
  int max_output_tokens = 2048;
  int requests_per_minute = 60;
  int max_retries = 3;
  int timeout_seconds = 120;
  int parallelism = 4;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const BackendConfig& c);
// Missing keys keep the defaults of `base`.
BackendConfig backend_config_from_json(const nlohmann::json& j, BackendConfig base = {});

struct Message {
  std::string role;
  std::string content;
};

std::vector<Message> user_prompt(std::string text);

// Chat-completion request body sent on the wire.
std::string request_body(const BackendConfig& config, std::span<const Message> messages);

// Replay key: model, temperature and messages only.
std::string request_hash(const BackendConfig& config, std::span<const Message> messages);

struct TranscriptEntry {
  std::string request_hash;
  std::string request_body;
  std::string response_body;  // assistant text on 200, raw body otherwise
  int status = 0;             // HTTP status; 0 for timeouts/transport errors
};

nlohmann::json to_json(const TranscriptEntry& e);
TranscriptEntry transcript_entry_from_json(const nlohmann::json& j);

// Ordered request/response log. Lookups use the last entry for a hash.
// Thread-safe; optionally mirrors every append to a JSONL file.
class Transcript {
 public:
  Transcript() = default;

  static Transcript load(const std::filesystem::path& path);
  // Loads path when present and appends every new entry to it.
  static std::shared_ptr<Transcript> open_for_append(const std::filesystem::path& path);

  void append(TranscriptEntry entry);
  std::optional<TranscriptEntry> lookup(std::string_view hash) const;
  std::vector<TranscriptEntry> entries() const;
  std::size_t size() const;
  void save(const std::filesystem::path& path) const;

  Transcript(const Transcript& other);
  Transcript& operator=(const Transcript& other);

 private:
  mutable std::mutex mu_;
  std::vector<TranscriptEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> last_index_;
  std::unique_ptr<std::ofstream> sink_;
};

struct HttpRequest {
  std::string url;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
  int timeout_seconds = 60;
};

struct HttpResponse {
  int status = 0;  // 0 when the transport failed or timed out
  std::string body;
  std::optional<int> retry_after_seconds;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

// cpp-httplib client, https via OpenSSL.
std::unique_ptr<HttpTransport> make_http_transport();

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  using duration = std::chrono::steady_clock::duration;
  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_for(duration d) = 0;
};

class SystemClock final : public Clock {
 public:
  time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_for(duration d) override;
};

// Virtual time: sleeping advances the clock immediately.
class ManualClock final : public Clock {
 public:
  time_point now() override;
  void sleep_for(duration d) override;
  void advance(duration d) { sleep_for(d); }

 private:
  std::mutex mu_;
  time_point now_{};
};

// Sliding 60-second window shared by all requests of one backend.
class RateLimiter {
 public:
  RateLimiter(int requests_per_minute, Clock& clock);
  void acquire();

 private:
  int rpm_;
  Clock& clock_;
  std::mutex mu_;
  std::deque<Clock::time_point> window_;
};

struct BackoffPolicy {
  std::chrono::milliseconds initial{1000};
  double multiplier = 2.0;
  std::chrono::milliseconds max{30000};

  // Delay before retry number `retry` (1-based).
  std::chrono::milliseconds delay(int retry, std::optional<int> retry_after_seconds = {}) const;
};

struct Completion {
  std::string text;
  int attempts = 0;
};

struct CompletionOutcome {
  std::size_t index = 0;
  std::optional<std::string> text;
  ErrorKind error_kind = ErrorKind::BackendExhausted;
  std::string error;
  int attempts = 0;

  bool ok() const { return text.has_value(); }
};

class Gateway {
 public:
  struct LiveOptions {
    HttpTransport* transport = nullptr;
    Clock* clock = nullptr;
    std::string api_key;
    BackoffPolicy backoff;
    // Serve a recorded 200 instead of calling out again.
    bool reuse_recorded = true;
  };

  // Live mode: every attempt is appended to `transcript`.
  Gateway(BackendConfig config, std::shared_ptr<Transcript> transcript, LiveOptions options);

  // Replay mode: never touches a transport; misses raise ReplayMiss.
  static Gateway replay(BackendConfig config, std::shared_ptr<const Transcript> transcript);

  std::string complete(std::span<const Message> messages);
  Completion complete_detailed(std::span<const Message> messages);

  // Fan-out bounded by config().parallelism; results are in input order.
  // Per-request failures are reported in the outcome, except ReplayMiss,
  // which means a stale transcript and is rethrown.
  std::vector<CompletionOutcome> complete_all(const std::vector<std::vector<Message>>& requests);

  const BackendConfig& config() const { return config_; }
  bool is_replay() const { return replay_; }

 private:
  Gateway(BackendConfig config, std::shared_ptr<const Transcript> transcript);

  Completion replay_one(std::span<const Message> messages) const;
  Completion live_one(std::span<const Message> messages);

  BackendConfig config_;
  bool replay_ = false;
  std::shared_ptr<const Transcript> replay_source_;
  std::shared_ptr<Transcript> record_;
  LiveOptions live_;
  std::unique_ptr<RateLimiter> limiter_;
};

// Extracts choices[0].message.content; throws ProtocolError.
std::string extract_assistant_text(std::string_view http_body);

}  // namespace legal_synth
