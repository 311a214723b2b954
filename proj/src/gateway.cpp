#include "legal_synth/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "legal_synth/hashing.hpp"
#include "legal_synth/text.hpp"

namespace legal_synth {

void BackendConfig::validate() const {
  if (model_name.empty()) fail(ErrorKind::Config, "backend model_name is empty");
  if (requests_per_minute < 1) fail(ErrorKind::Config, "requests_per_minute must be >= 1");
  if (max_retries < 0) fail(ErrorKind::Config, "max_retries must be >= 0");
  if (!(temperature >= 0.0)) fail(ErrorKind::Config, "temperature must be >= 0");
  if (max_output_tokens < 1) fail(ErrorKind::Config, "max_output_tokens must be >= 1");
  if (timeout_seconds < 1) fail(ErrorKind::Config, "timeout_seconds must be >= 1");
  if (parallelism < 1) fail(ErrorKind::Config, "parallelism must be >= 1");
}

nlohmann::json to_json(const BackendConfig& c) {
  return {{"endpoint_url", c.endpoint_url},
          {"model_name", c.model_name},
          {"temperature", c.temperature},
          {"max_output_tokens", c.max_output_tokens},
          {"requests_per_minute", c.requests_per_minute},
          {"max_retries", c.max_retries},
          {"timeout_seconds", c.timeout_seconds},
          {"parallelism", c.parallelism}};
}

BackendConfig backend_config_from_json(const nlohmann::json& j, BackendConfig base) {
  if (!j.is_object()) fail(ErrorKind::Config, "backend config must be an object");
  static constexpr std::string_view kKeys[] = {"endpoint_url",   "model_name",  "temperature",     "max_output_tokens",
                                               "requests_per_minute", "max_retries", "timeout_seconds", "parallelism"};
  for (const auto& [k, _] : j.items()) {
    if (k == "api_key" || k == "key" || k == "token") {
      fail(ErrorKind::Config, "credentials are not read from config files; set " + std::string(kApiKeyEnv));
    }
    if (std::find(std::begin(kKeys), std::end(kKeys), k) == std::end(kKeys)) {
      fail(ErrorKind::Config, "unknown backend key " + k);
    }
  }
  try {
    base.endpoint_url = j.value("endpoint_url", base.endpoint_url);
    base.model_name = j.value("model_name", base.model_name);
    base.temperature = j.value("temperature", base.temperature);
    base.max_output_tokens = j.value("max_output_tokens", base.max_output_tokens);
    base.requests_per_minute = j.value("requests_per_minute", base.requests_per_minute);
    base.max_retries = j.value("max_retries", base.max_retries);
    base.timeout_seconds = j.value("timeout_seconds", base.timeout_seconds);
    base.parallelism = j.value("parallelism", base.parallelism);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("bad backend config: ") + e.what());
  }
  return base;
}

std::vector<Message> user_prompt(std::string text) { return {Message{"user", std::move(text)}}; }

namespace {

nlohmann::json messages_json(std::span<const Message> messages) {
  auto arr = nlohmann::json::array();
  for (const auto& m : messages) arr.push_back({{"role", m.role}, {"content", m.content}});
  return arr;
}

void check_messages(std::span<const Message> messages) {
  if (messages.empty()) fail(ErrorKind::Config, "completion request has no messages");
}

}  // namespace

std::string request_body(const BackendConfig& config, std::span<const Message> messages) {
  nlohmann::json body{{"model", config.model_name},
                      {"messages", messages_json(messages)},
                      {"temperature", config.temperature},
                      {"max_tokens", config.max_output_tokens}};
  return body.dump();
}

std::string request_hash(const BackendConfig& config, std::span<const Message> messages) {
  nlohmann::json key{{"model", config.model_name},
                     {"temperature", config.temperature},
                     {"messages", messages_json(messages)}};
  return sha256_hex(key.dump());
}

nlohmann::json to_json(const TranscriptEntry& e) {
  return {{"request_hash", e.request_hash},
          {"request_body", e.request_body},
          {"response_body", e.response_body},
          {"status", e.status}};
}

TranscriptEntry transcript_entry_from_json(const nlohmann::json& j) {
  try {
    return TranscriptEntry{j.at("request_hash").get<std::string>(), j.value("request_body", std::string()),
                           j.at("response_body").get<std::string>(), j.at("status").get<int>()};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, std::string("bad transcript entry: ") + e.what());
  }
}

Transcript::Transcript(const Transcript& other) {
  std::lock_guard lock(other.mu_);
  entries_ = other.entries_;
  last_index_ = other.last_index_;
}

Transcript& Transcript::operator=(const Transcript& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  entries_ = other.entries_;
  last_index_ = other.last_index_;
  return *this;
}

Transcript Transcript::load(const std::filesystem::path& path) {
  Transcript t;
  const auto lines = split_lines(read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    auto j = nlohmann::json::parse(lines[i], nullptr, false);
    if (j.is_discarded()) {
      fail(ErrorKind::Schema, path.string() + ":" + std::to_string(i + 1) + ": invalid transcript JSON");
    }
    t.append(transcript_entry_from_json(j));
  }
  return t;
}

std::shared_ptr<Transcript> Transcript::open_for_append(const std::filesystem::path& path) {
  auto t = std::make_shared<Transcript>();
  if (std::filesystem::exists(path)) *t = load(path);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  t->sink_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::app);
  if (!*t->sink_) fail(ErrorKind::Io, "cannot append to transcript " + path.string());
  return t;
}

void Transcript::append(TranscriptEntry entry) {
  std::lock_guard lock(mu_);
  if (sink_) {
    *sink_ << to_json(entry).dump() << '\n';
    sink_->flush();
  }
  last_index_[entry.request_hash] = entries_.size();
  entries_.push_back(std::move(entry));
}

std::optional<TranscriptEntry> Transcript::lookup(std::string_view hash) const {
  std::lock_guard lock(mu_);
  const auto it = last_index_.find(hash);
  if (it == last_index_.end()) return std::nullopt;
  return entries_[it->second];
}

std::vector<TranscriptEntry> Transcript::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t Transcript::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

void Transcript::save(const std::filesystem::path& path) const {
  std::string out;
  for (const auto& e : entries()) out.append(to_json(e).dump()).push_back('\n');
  write_file(path, out);
}

void SystemClock::sleep_for(duration d) { std::this_thread::sleep_for(d); }

Clock::time_point ManualClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void ManualClock::sleep_for(duration d) {
  std::lock_guard lock(mu_);
  now_ += d;
}

RateLimiter::RateLimiter(int requests_per_minute, Clock& clock) : rpm_(requests_per_minute), clock_(clock) {
  if (rpm_ < 1) fail(ErrorKind::Config, "requests_per_minute must be >= 1");
}

void RateLimiter::acquire() {
  constexpr auto kWindow = std::chrono::seconds(60);
  std::lock_guard lock(mu_);
  for (;;) {
    const auto now = clock_.now();
    while (!window_.empty() && now - window_.front() >= kWindow) window_.pop_front();
    if (static_cast<int>(window_.size()) < rpm_) {
      window_.push_back(now);
      return;
    }
    clock_.sleep_for(window_.front() + kWindow - now);
  }
}

std::chrono::milliseconds BackoffPolicy::delay(int retry, std::optional<int> retry_after_seconds) const {
  const double scaled = static_cast<double>(initial.count()) * std::pow(multiplier, std::max(0, retry - 1));
  auto ms = std::chrono::milliseconds(static_cast<std::int64_t>(std::min(scaled, static_cast<double>(max.count()))));
  if (retry_after_seconds && *retry_after_seconds > 0) {
    ms = std::max<std::chrono::milliseconds>(ms, std::chrono::seconds(*retry_after_seconds));
  }
  return ms;
}

std::string extract_assistant_text(std::string_view http_body) {
  const auto j = nlohmann::json::parse(http_body, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::Protocol, "backend response is not JSON");
  const auto* content = [&]() -> const nlohmann::json* {
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) return nullptr;
    const auto& first = j["choices"][0];
    if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) return nullptr;
    const auto& msg = first["message"];
    if (!msg.contains("content") || !msg["content"].is_string()) return nullptr;
    return &msg["content"];
  }();
  if (!content) fail(ErrorKind::Protocol, "backend response lacks choices[0].message.content");
  return content->get<std::string>();
}

namespace {

SystemClock& default_clock() {
  static SystemClock clock;
  return clock;
}

bool is_transient(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

[[noreturn]] void raise_for_status(int status, std::string_view hash, const std::string& body, int attempts) {
  if (status == 401 || status == 403) {
    fail(ErrorKind::Auth, "backend rejected credentials (HTTP " + std::to_string(status) + ")");
  }
  fail(ErrorKind::BackendExhausted, "request " + std::string(hash.substr(0, 12)) + " failed after " +
                                        std::to_string(attempts) + " attempt(s), last status " +
                                        std::to_string(status) + ": " + body.substr(0, 200));
}

}  // namespace

Gateway::Gateway(BackendConfig config, std::shared_ptr<Transcript> transcript, LiveOptions options)
    : config_(std::move(config)), record_(std::move(transcript)), live_(std::move(options)) {
  config_.validate();
  if (!record_) record_ = std::make_shared<Transcript>();
  if (!live_.clock) live_.clock = &default_clock();
  if (!live_.transport) fail(ErrorKind::Config, "live gateway needs an HTTP transport");
  replay_source_ = record_;
  limiter_ = std::make_unique<RateLimiter>(config_.requests_per_minute, *live_.clock);
}

Gateway::Gateway(BackendConfig config, std::shared_ptr<const Transcript> transcript)
    : config_(std::move(config)), replay_(true), replay_source_(std::move(transcript)) {
  config_.validate();
  if (!replay_source_) fail(ErrorKind::Config, "replay gateway needs a transcript");
}

Gateway Gateway::replay(BackendConfig config, std::shared_ptr<const Transcript> transcript) {
  return Gateway(std::move(config), std::move(transcript));
}

std::string Gateway::complete(std::span<const Message> messages) { return complete_detailed(messages).text; }

Completion Gateway::complete_detailed(std::span<const Message> messages) {
  check_messages(messages);
  return replay_ ? replay_one(messages) : live_one(messages);
}

Completion Gateway::replay_one(std::span<const Message> messages) const {
  const auto hash = request_hash(config_, messages);
  const auto entry = replay_source_->lookup(hash);
  if (!entry) fail(ErrorKind::ReplayMiss, "no recorded response for request " + hash);
  if (entry->status != 200) raise_for_status(entry->status, hash, entry->response_body, 1);
  return Completion{entry->response_body, 0};
}

Completion Gateway::live_one(std::span<const Message> messages) {
  const auto hash = request_hash(config_, messages);
  if (live_.reuse_recorded) {
    if (auto hit = record_->lookup(hash); hit && hit->status == 200) return Completion{hit->response_body, 0};
  }
  HttpRequest req;
  req.url = config_.endpoint_url;
  req.body = request_body(config_, messages);
  req.timeout_seconds = config_.timeout_seconds;
  req.headers.emplace_back("Content-Type", "application/json");
  if (!live_.api_key.empty()) req.headers.emplace_back("Authorization", "Bearer " + live_.api_key);

  int attempts = 0;
  for (;;) {
    limiter_->acquire();
    ++attempts;
    const HttpResponse resp = live_.transport->post(req);
    if (resp.status == 200) {
      std::string text;
      try {
        text = extract_assistant_text(resp.body);
      } catch (const Error&) {
        record_->append({hash, req.body, resp.body, -1});
        throw;
      }
      record_->append({hash, req.body, text, 200});
      return Completion{std::move(text), attempts};
    }
    record_->append({hash, req.body, resp.body, resp.status});
    if (!is_transient(resp.status) || attempts > config_.max_retries) {
      raise_for_status(resp.status, hash, resp.body, attempts);
    }
    live_.clock->sleep_for(live_.backoff.delay(attempts, resp.retry_after_seconds));
  }
}

std::vector<CompletionOutcome> Gateway::complete_all(const std::vector<std::vector<Message>>& requests) {
  std::vector<CompletionOutcome> out(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      auto& o = out[i];
      o.index = i;
      try {
        auto c = complete_detailed(requests[i]);
        o.text = std::move(c.text);
        o.attempts = c.attempts;
      } catch (const Error& e) {
        o.error_kind = e.kind();
        o.error = e.what();
      }
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(replay_ ? 1 : config_.parallelism), requests.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& o : out) {
    if (!o.ok() && o.error_kind == ErrorKind::ReplayMiss) fail(ErrorKind::ReplayMiss, o.error);
  }
  return out;
}

}  // namespace legal_synth
