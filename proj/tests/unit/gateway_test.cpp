#include <gtest/gtest.h>

#include <set>

#include "error_of.hpp"
#include "legal_synth/gateway.hpp"
#include "scripted_transport.hpp"
#include "temp_dir.hpp"

using namespace legal_synth;
namespace lt = legal_synth::testing;
using lt::error_of;
using lt::ScriptedTransport;

namespace {

BackendConfig cfg(int max_retries = 3) {
  BackendConfig c;
  c.endpoint_url = "http://127.0.0.1:9/v1/chat/completions";
  c.model_name = "gpt-4";
  c.max_retries = max_retries;
  c.requests_per_minute = 1000;
  c.parallelism = 1;
  return c;
}

Gateway live(ScriptedTransport& t, ManualClock& clock, std::shared_ptr<Transcript> tr = nullptr,
             BackendConfig c = cfg()) {
  Gateway::LiveOptions o;
  o.transport = &t;
  o.clock = &clock;
  o.api_key = "k";
  return Gateway(std::move(c), tr ? tr : std::make_shared<Transcript>(), o);
}

}  // namespace

TEST(Gateway, RetriesTransientThenSucceeds) {
  ScriptedTransport t(ScriptedTransport::sequence({lt::status(429), lt::status(429), lt::ok("fertig")}));
  ManualClock clock;
  auto gw = live(t, clock);
  const auto msgs = user_prompt("hallo");
  const auto c = gw.complete_detailed(msgs);
  EXPECT_EQ(c.text, "fertig");
  EXPECT_EQ(c.attempts, 3);
  EXPECT_EQ(t.calls(), 3u);
}

TEST(Gateway, AuthFailsWithoutRetry) {
  ScriptedTransport t(ScriptedTransport::sequence({lt::status(401), lt::ok("nie")}));
  ManualClock clock;
  auto gw = live(t, clock);
  const auto msgs = user_prompt("hallo");
  EXPECT_EQ(error_of([&] { gw.complete(msgs); }), ErrorKind::Auth);
  EXPECT_EQ(t.calls(), 1u);
}

TEST(Gateway, ExhaustsRetries) {
  ScriptedTransport t(ScriptedTransport::sequence({lt::status(503)}));
  ManualClock clock;
  auto gw = live(t, clock, nullptr, cfg(2));
  const auto msgs = user_prompt("hallo");
  EXPECT_EQ(error_of([&] { gw.complete(msgs); }), ErrorKind::BackendExhausted);
  EXPECT_EQ(t.calls(), 3u);
}

TEST(Gateway, NonTransientClientErrorIsNotRetried) {
  ScriptedTransport t(ScriptedTransport::sequence({lt::status(400), lt::ok("nie")}));
  ManualClock clock;
  auto gw = live(t, clock);
  const auto msgs = user_prompt("hallo");
  EXPECT_EQ(error_of([&] { gw.complete(msgs); }), ErrorKind::BackendExhausted);
  EXPECT_EQ(t.calls(), 1u);
}

TEST(Gateway, MalformedBodyIsProtocolError) {
  ScriptedTransport t([](const HttpRequest&, const std::string&, std::size_t) { return HttpResponse{200, "<html>", {}}; });
  ManualClock clock;
  auto gw = live(t, clock);
  const auto msgs = user_prompt("hallo");
  EXPECT_EQ(error_of([&] { gw.complete(msgs); }), ErrorKind::Protocol);
}

TEST(Gateway, BackoffHonoursRetryAfter) {
  ScriptedTransport t(ScriptedTransport::sequence({lt::status(429, 7), lt::status(500), lt::ok("ok")}));
  ManualClock clock;
  auto gw = live(t, clock);
  const auto start = clock.now();
  const auto msgs = user_prompt("hallo");
  gw.complete(msgs);
  // 7 s from Retry-After, then 2 s for the second retry.
  EXPECT_EQ(clock.now() - start, std::chrono::seconds(9));
}

TEST(Backoff, Schedule) {
  BackoffPolicy b;
  EXPECT_EQ(b.delay(1), std::chrono::milliseconds(1000));
  EXPECT_EQ(b.delay(2), std::chrono::milliseconds(2000));
  EXPECT_EQ(b.delay(4), std::chrono::milliseconds(8000));
  EXPECT_EQ(b.delay(10), std::chrono::milliseconds(30000));
  EXPECT_EQ(b.delay(1, 5), std::chrono::milliseconds(5000));
  EXPECT_EQ(b.delay(3, 1), std::chrono::milliseconds(4000));
}

TEST(RateLimiter, SlidingWindow) {
  ManualClock clock;
  RateLimiter rl(3, clock);
  const auto t0 = clock.now();
  for (int i = 0; i < 3; ++i) rl.acquire();
  EXPECT_EQ(clock.now(), t0);
  clock.advance(std::chrono::seconds(10));
  rl.acquire();
  EXPECT_EQ(clock.now() - t0, std::chrono::seconds(60));
  // All t0 entries expired; two more fit before the window is full again.
  rl.acquire();
  rl.acquire();
  EXPECT_EQ(clock.now() - t0, std::chrono::seconds(60));
  rl.acquire();
  EXPECT_EQ(clock.now() - t0, std::chrono::seconds(120));
}

TEST(RateLimiter, ManyRequestsRespectLimit) {
  ManualClock clock;
  RateLimiter rl(10, clock);
  std::vector<Clock::time_point> stamps;
  for (int i = 0; i < 95; ++i) {
    rl.acquire();
    stamps.push_back(clock.now());
  }
  for (std::size_t i = 10; i < stamps.size(); ++i) {
    ASSERT_GE(stamps[i] - stamps[i - 10], std::chrono::seconds(60));
  }
}

TEST(Gateway, ReplayServesRecordedBytesAndMissesLoudly) {
  ScriptedTransport t([](const HttpRequest&, const std::string& prompt, std::size_t) {
    return lt::ok("Antwort auf: " + prompt + " ü€");
  });
  ManualClock clock;
  auto tr = std::make_shared<Transcript>();
  auto gw = live(t, clock, tr);
  std::vector<std::string> recorded;
  for (const char* p : {"eins", "zwei", "drei"}) recorded.push_back(gw.complete(user_prompt(p)));

  lt::TempDir dir;
  tr->save(dir / "t.jsonl");
  auto rp = Gateway::replay(cfg(), std::make_shared<Transcript>(Transcript::load(dir / "t.jsonl")));
  EXPECT_TRUE(rp.is_replay());
  int i = 0;
  for (const char* p : {"eins", "zwei", "drei"}) EXPECT_EQ(rp.complete(user_prompt(p)), recorded[i++]);
  EXPECT_EQ(error_of([&] { rp.complete(user_prompt("vier")); }), ErrorKind::ReplayMiss);

  // A different temperature is a different request.
  auto warm = cfg();
  warm.temperature = 1.0;
  auto rp2 = Gateway::replay(warm, std::make_shared<Transcript>(Transcript::load(dir / "t.jsonl")));
  EXPECT_EQ(error_of([&] { rp2.complete(user_prompt("eins")); }), ErrorKind::ReplayMiss);
}

TEST(Gateway, ReplayOfRecordedFailureRaises) {
  Transcript tr;
  const auto msgs = user_prompt("x");
  tr.append({request_hash(cfg(), msgs), request_body(cfg(), msgs), "Server Error", 500});
  auto rp = Gateway::replay(cfg(), std::make_shared<Transcript>(tr));
  EXPECT_EQ(error_of([&] { rp.complete(msgs); }), ErrorKind::BackendExhausted);
}

TEST(Gateway, ReuseRecordedAvoidsSecondCall) {
  ScriptedTransport t(ScriptedTransport::always("einmal"));
  ManualClock clock;
  auto gw = live(t, clock);
  gw.complete(user_prompt("a"));
  const auto c = gw.complete_detailed(user_prompt("a"));
  EXPECT_EQ(c.text, "einmal");
  EXPECT_EQ(c.attempts, 0);
  EXPECT_EQ(t.calls(), 1u);
}

TEST(Gateway, CompleteAllKeepsInputOrderUnderParallelism) {
  ScriptedTransport t([](const HttpRequest&, const std::string& prompt, std::size_t call) {
    if (prompt == "p7") return lt::status(400);
    (void)call;
    return lt::ok("r:" + prompt);
  });
  ManualClock clock;
  auto c = cfg();
  c.parallelism = 8;
  auto gw = live(t, clock, nullptr, c);
  std::vector<std::vector<Message>> reqs;
  for (int i = 0; i < 40; ++i) reqs.push_back(user_prompt("p" + std::to_string(i)));
  const auto out = gw.complete_all(reqs);
  ASSERT_EQ(out.size(), 40u);
  for (int i = 0; i < 40; ++i) {
    EXPECT_EQ(out[i].index, static_cast<std::size_t>(i));
    if (i == 7) {
      EXPECT_FALSE(out[i].ok());
      EXPECT_EQ(out[i].error_kind, ErrorKind::BackendExhausted);
    } else {
      EXPECT_EQ(out[i].text, "r:p" + std::to_string(i));
    }
  }
}

TEST(RequestHash, CoversModelTemperatureMessagesOnly) {
  const auto m = user_prompt("x");
  auto a = cfg();
  auto b = cfg();
  b.max_output_tokens = 17;
  b.max_retries = 0;
  b.endpoint_url = "https://example.invalid/v1";
  EXPECT_EQ(request_hash(a, m), request_hash(b, m));
  b.model_name = "gpt-4.1";
  EXPECT_NE(request_hash(a, m), request_hash(b, m));
  EXPECT_NE(request_hash(a, m), request_hash(a, user_prompt("y")));
  EXPECT_EQ(request_hash(a, m).size(), 64u);
}

TEST(RequestBody, ChatShape) {
  const auto m = user_prompt("Frage");
  const auto j = nlohmann::json::parse(request_body(cfg(), m));
  EXPECT_EQ(j["model"], "gpt-4");
  EXPECT_EQ(j["messages"][0]["role"], "user");
  EXPECT_EQ(j["messages"][0]["content"], "Frage");
  EXPECT_EQ(j["max_tokens"], 2048);
}

TEST(Transcript, RoundTripAndLastWins) {
  Transcript tr;
  tr.append({"h1", "{}", "alt", 500});
  tr.append({"h2", "{}", "zwei\n\"quoted\"", 200});
  tr.append({"h1", "{}", "neu", 200});
  lt::TempDir dir;
  tr.save(dir / "t.jsonl");
  const auto back = Transcript::load(dir / "t.jsonl");
  EXPECT_EQ(back.size(), 3u);
  EXPECT_EQ(back.lookup("h1")->response_body, "neu");
  EXPECT_EQ(back.lookup("h2")->response_body, "zwei\n\"quoted\"");
  EXPECT_FALSE(back.lookup("h3"));
}

TEST(Transcript, AppendModeMirrorsToFile) {
  lt::TempDir dir;
  {
    auto tr = Transcript::open_for_append(dir / "t.jsonl");
    tr->append({"a", "{}", "1", 200});
  }
  {
    auto tr = Transcript::open_for_append(dir / "t.jsonl");
    EXPECT_EQ(tr->size(), 1u);
    tr->append({"b", "{}", "2", 200});
  }
  EXPECT_EQ(Transcript::load(dir / "t.jsonl").size(), 2u);
}

TEST(BackendConfig, ValidationAndJson) {
  auto c = cfg();
  EXPECT_NO_THROW(c.validate());
  c.temperature = -0.5;
  EXPECT_EQ(error_of([&] { c.validate(); }), ErrorKind::Config);
  c = cfg();
  c.model_name.clear();
  EXPECT_EQ(error_of([&] { c.validate(); }), ErrorKind::Config);
  const auto j = nlohmann::json{{"model_name", "m"}, {"temperature", 0.5}};
  const auto parsed = backend_config_from_json(j, cfg());
  EXPECT_EQ(parsed.model_name, "m");
  EXPECT_EQ(parsed.max_retries, 3);
  EXPECT_FALSE(to_json(parsed).contains("api_key"));
}
