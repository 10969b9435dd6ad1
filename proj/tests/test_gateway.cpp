#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <json.hpp>

#include "support.hpp"
#include "walkeval/error.hpp"
#include "walkeval/gateway.hpp"
#include "walkeval/hashing.hpp"

using namespace walkeval;
using walkeval::testing::TempDir;
using walkeval::testing::fake_image;
namespace fs = std::filesystem;

namespace {

const PromptBundle& bundle() {
  static const auto b = build_prompt(default_registry(), ExpertiseLevel::c2, std::vector<std::string>{"Safety"});
  return b;
}

BackendConfig fast_config() {
  BackendConfig c;
  c.script = "unused";
  c.backoff_base = std::chrono::milliseconds(1);
  c.max_retries = 2;
  c.max_reasks = 2;
  return c;
}

std::unique_ptr<MockBackend> mock_for(const std::string& image, std::vector<std::string> texts, int replicate = 1) {
  std::map<std::string, std::vector<std::string>> script;
  script[make_request_key(image, bundle(), replicate).digest()] = std::move(texts);
  return std::make_unique<MockBackend>(std::move(script));
}

void reject_bad(const RawResponse& r) {
  if (r.text.starts_with("bad")) throw MissingMetrics({"CrossingAids"});
}

// Local chat-completion server on 127.0.0.1 with a scripted status sequence.
class FakeServer {
 public:
  explicit FakeServer(std::vector<int> statuses) : statuses_(std::move(statuses)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      bodies_.push_back(req.body);
      auth_.push_back(req.get_header_value("Authorization"));
      const int status = hits_ < statuses_.size() ? statuses_[hits_] : 200;
      ++hits_;
      res.status = status;
      if (status == 200) {
        nlohmann::json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "scored text"}}}}}}};
        res.set_content(body.dump(), "application/json");
      } else {
        res.set_content("{\"error\":\"nope\"}", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return fmt::format("http://127.0.0.1:{}/v1/chat/completions", port_); }
  std::size_t hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
  }
  std::vector<std::string> bodies() const {
    std::lock_guard lock(mutex_);
    return bodies_;
  }
  std::vector<std::string> auth() const {
    std::lock_guard lock(mutex_);
    return auth_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::vector<int> statuses_;
  mutable std::mutex mutex_;
  std::size_t hits_ = 0;
  std::vector<std::string> bodies_;
  std::vector<std::string> auth_;
};

BackendConfig live_config(const std::string& endpoint) {
  setenv("WALKEVAL_TEST_KEY", "secret-token", 1);
  BackendConfig c;
  c.kind = BackendConfig::Kind::live;
  c.endpoint = endpoint;
  c.credentials_env = "WALKEVAL_TEST_KEY";
  c.model_name = "gpt-4o";
  c.timeout = std::chrono::milliseconds(2000);
  c.backoff_base = std::chrono::milliseconds(1);
  c.max_retries = 3;
  return c;
}

}  // namespace

TEST(RequestKey, DependsOnEveryComponent) {
  const auto image = fake_image("a");
  const auto k1 = make_request_key(image, bundle(), 1);
  EXPECT_EQ(k1, make_request_key(image, bundle(), 1));
  EXPECT_NE(k1.digest(), make_request_key(image, bundle(), 2).digest());
  EXPECT_NE(k1.digest(), make_request_key(fake_image("b"), bundle(), 1).digest());
  const auto other = build_prompt(default_registry(), ExpertiseLevel::c3, std::vector<std::string>{"Safety"});
  EXPECT_NE(k1.digest(), make_request_key(image, other, 1).digest());
  EXPECT_EQ(k1.image_digest, sha256_hex(image));
  EXPECT_THROW(make_request_key("", bundle(), 1), ValidationError);
  EXPECT_THROW(make_request_key(image, bundle(), 0), ValidationError);
}

TEST(MockBackend, ReturnsScriptedTextByteExact) {
  TempDir dir;
  const auto image = fake_image("a");
  const std::string text = "CrossingAids: 4 - zebra\r\n\ttrailing  \xE2\x9C\x93";
  auto backend = mock_for(image, {text});
  ResponseCache cache(dir / "cache");
  Gateway gateway(*backend, cache, fast_config());
  const auto result = gateway.submit(image, bundle(), 1);
  EXPECT_FALSE(result.from_cache);
  EXPECT_EQ(result.response.text, text);
  EXPECT_EQ(result.response.backend, "mock");
  EXPECT_EQ(result.response.attempt_count, 1);
  EXPECT_EQ(walkeval::testing::read_file(cache.path_for(result.response.key)), text);
}

TEST(MockBackend, CacheHitSkipsBackend) {
  TempDir dir;
  const auto image = fake_image("a");
  auto backend = mock_for(image, {"first"});
  ResponseCache cache(dir / "cache");
  Gateway gateway(*backend, cache, fast_config());
  const auto first = gateway.submit(image, bundle(), 1);
  const auto second = gateway.submit(image, bundle(), 1);
  EXPECT_EQ(backend->calls(), 1u);
  EXPECT_TRUE(second.from_cache);
  EXPECT_EQ(second.response.text, first.response.text);
  EXPECT_EQ(second.response.received_at_us, first.response.received_at_us);
}

TEST(MockBackend, MissingKeyIsScriptMiss) {
  TempDir dir;
  MockBackend backend({});
  ResponseCache cache(dir / "cache");
  Gateway gateway(backend, cache, fast_config());
  const auto image = fake_image("a");
  try {
    gateway.submit(image, bundle(), 1);
    FAIL();
  } catch (const MockScriptMiss& e) {
    EXPECT_EQ(e.key_digest(), make_request_key(image, bundle(), 1).digest());
  }
  EXPECT_EQ(backend.calls(), 1u);
}

TEST(MockBackend, ScriptDocumentForms) {
  auto backend = MockBackend::from_json(R"({"k1": "one", "k2": ["a", "b"]})");
  EXPECT_EQ(backend->name(), "mock");
  EXPECT_THROW(MockBackend::from_json("{"), ParseError);
  EXPECT_THROW(MockBackend::from_json("[]"), ValidationError);
  EXPECT_THROW(MockBackend::from_json(R"({"k": 3})"), ValidationError);
  EXPECT_THROW(MockBackend::from_json(R"({"k": []})"), ValidationError);
  EXPECT_THROW(MockBackend::from_file("/nonexistent/script.json"), IoError);
}

TEST(Gateway, ReasksAfterRejectedResponse) {
  TempDir dir;
  const auto image = fake_image("a");
  auto backend = mock_for(image, {"bad one", "good"});
  ResponseCache cache(dir / "cache");
  Gateway gateway(*backend, cache, fast_config());
  const auto result = gateway.submit(image, bundle(), 1, reject_bad);
  EXPECT_EQ(result.response.text, "good");
  EXPECT_EQ(backend->calls(), 2u);
  EXPECT_EQ(result.response.attempt_count, 2);
  auto rejected = cache.path_for(result.response.key);
  rejected += ".rejected.0";
  EXPECT_EQ(walkeval::testing::read_file(rejected), "bad one");
}

TEST(Gateway, ReaskExhaustionRethrowsAndCachesNothing) {
  TempDir dir;
  const auto image = fake_image("a");
  auto backend = mock_for(image, {"bad"});
  ResponseCache cache(dir / "cache");
  Gateway gateway(*backend, cache, fast_config());
  EXPECT_THROW(gateway.submit(image, bundle(), 1, reject_bad), MissingMetrics);
  EXPECT_EQ(backend->calls(), 3u);
  const auto key = make_request_key(image, bundle(), 1);
  EXPECT_FALSE(cache.lookup(key).has_value());
  for (int ask = 0; ask < 3; ++ask) {
    auto p = cache.path_for(key);
    p += fmt::format(".rejected.{}", ask);
    EXPECT_TRUE(fs::exists(p)) << ask;
  }
}

TEST(Gateway, PayloadCarriesOnlyCurrentPrompt) {
  TempDir dir;
  const auto a = fake_image("a");
  const auto b = fake_image("b");
  std::map<std::string, std::vector<std::string>> script{
      {make_request_key(a, bundle(), 1).digest(), {"A"}}, {make_request_key(b, bundle(), 1).digest(), {"B"}}};
  MockBackend backend(script);
  ResponseCache cache(dir / "cache");
  Gateway gateway(backend, cache, fast_config());
  gateway.submit(a, bundle(), 1);
  gateway.submit(b, bundle(), 1);
  const auto payloads = backend.payloads();
  ASSERT_EQ(payloads.size(), 2u);
  EXPECT_EQ(payloads[0], bundle().full_text());
  EXPECT_EQ(payloads[1], bundle().full_text());
}

TEST(ResponseCache, FirstWriteWins) {
  TempDir dir;
  ResponseCache cache(dir / "cache");
  RawResponse r;
  r.key = make_request_key(fake_image("a"), bundle(), 1);
  r.text = "one";
  r.received_at_us = 10;
  r.backend = "mock";
  r.attempt_count = 1;
  EXPECT_EQ(cache.commit(r).text, "one");
  auto second = r;
  second.text = "two";
  second.received_at_us = 20;
  const auto stored = cache.commit(second);
  EXPECT_EQ(stored.text, "one");
  EXPECT_EQ(stored.received_at_us, 10);
  EXPECT_EQ(cache.lookup(r.key)->text, "one");
}

TEST(ResponseCache, ConcurrentCommitsAgree) {
  TempDir dir;
  ResponseCache cache(dir / "cache");
  const auto key = make_request_key(fake_image("a"), bundle(), 1);
  std::vector<std::thread> threads;
  std::vector<std::string> seen(8);
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      RawResponse r;
      r.key = key;
      r.text = "writer " + std::to_string(i);
      seen[static_cast<std::size_t>(i)] = cache.commit(r).text;
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& s : seen) EXPECT_EQ(s, seen[0]);
  EXPECT_EQ(cache.lookup(key)->text, seen[0]);
}

TEST(ResponseCache, LayoutAndTamperDetection) {
  TempDir dir;
  ResponseCache cache(dir / "cache");
  RawResponse r;
  r.key = make_request_key(fake_image("a"), bundle(), 3);
  r.text = "payload";
  cache.commit(r);
  const auto path = cache.path_for(r.key);
  EXPECT_EQ(path, dir / "cache" / "2" / r.key.image_digest / (r.key.prompt_digest + ".3"));
  walkeval::testing::write_file(path, "tampered");
  EXPECT_THROW(cache.lookup(r.key), IoError);
}

TEST(Timestamps, MonotoneAndFormatted) {
  const auto a = monotonic_now_us();
  const auto b = monotonic_now_us();
  EXPECT_LT(a, b);
  EXPECT_EQ(format_timestamp(0), "1970-01-01T00:00:00.000000Z");
  EXPECT_EQ(format_timestamp(1'700'000'000'123'456), "2023-11-14T22:13:20.123456Z");
}

TEST(SniffMediaType, MagicBytes) {
  EXPECT_EQ(sniff_media_type("\x89PNG\r\n"), "image/png");
  EXPECT_EQ(sniff_media_type("GIF89a"), "image/gif");
  EXPECT_EQ(sniff_media_type("RIFF1234WEBPVP8"), "image/webp");
  EXPECT_EQ(sniff_media_type(fake_image("a")), "image/jpeg");
}

TEST(BackendConfig, Validation) {
  BackendConfig c;
  EXPECT_THROW(c.validate(), ValidationError);
  c.script = "s.json";
  EXPECT_NO_THROW(c.validate());
  c.max_retries = -1;
  EXPECT_THROW(c.validate(), ValidationError);
  BackendConfig live;
  live.kind = BackendConfig::Kind::live;
  EXPECT_THROW(live.validate(), ValidationError);
  live.endpoint = "http://x";
  EXPECT_THROW(live.validate(), ValidationError);
  live.credentials_env = "X";
  EXPECT_NO_THROW(live.validate());
}

TEST(LiveBackend, RetriesServerErrorsThenSucceeds) {
  FakeServer server({500, 503});
  LiveBackend backend(live_config(server.endpoint()));
  TempDir dir;
  ResponseCache cache(dir / "cache");
  Gateway gateway(backend, cache, live_config(server.endpoint()));
  const auto image = fake_image("a");
  const auto result = gateway.submit(image, bundle(), 1);
  EXPECT_EQ(result.response.text, "scored text");
  EXPECT_EQ(result.response.attempt_count, 3);
  EXPECT_EQ(server.hits(), 3u);
  EXPECT_EQ(result.response.backend, "live:gpt-4o");

  const auto auth = server.auth();
  EXPECT_EQ(auth.back(), "Bearer secret-token");
  const auto body = nlohmann::json::parse(server.bodies().back());
  EXPECT_EQ(body["model"], "gpt-4o");
  EXPECT_EQ(body["temperature"], 0.0);
  ASSERT_EQ(body["messages"].size(), 1u);
  const auto& content = body["messages"][0]["content"];
  EXPECT_EQ(content[0]["text"], bundle().full_text());
  EXPECT_EQ(content[1]["image_url"]["url"], "data:image/jpeg;base64," + base64_encode(image));
}

TEST(LiveBackend, PersistentServerErrorsExhaustRetries) {
  FakeServer server({500, 500, 500, 500, 500, 500});
  auto config = live_config(server.endpoint());
  config.max_retries = 2;
  LiveBackend backend(config);
  TempDir dir;
  ResponseCache cache(dir / "cache");
  Gateway gateway(backend, cache, config);
  EXPECT_THROW(gateway.submit(fake_image("a"), bundle(), 1), BackendUnavailable);
  EXPECT_EQ(server.hits(), 3u);
}

TEST(LiveBackend, ClosedPortIsUnavailable) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto config = live_config(fmt::format("http://127.0.0.1:{}/v1/chat/completions", port));
  config.max_retries = 1;
  LiveBackend backend(config);
  TempDir dir;
  ResponseCache cache(dir / "cache");
  Gateway gateway(backend, cache, config);
  EXPECT_THROW(gateway.submit(fake_image("a"), bundle(), 1), BackendUnavailable);
  EXPECT_EQ(gateway.backend_requests(), 2u);
}

TEST(LiveBackend, ClientErrorIsRejectedWithoutRetry) {
  FakeServer server({400});
  LiveBackend backend(live_config(server.endpoint()));
  TempDir dir;
  ResponseCache cache(dir / "cache");
  Gateway gateway(backend, cache, live_config(server.endpoint()));
  try {
    gateway.submit(fake_image("a"), bundle(), 1);
    FAIL();
  } catch (const BackendRejected& e) {
    EXPECT_EQ(e.status(), 400);
  }
  EXPECT_EQ(server.hits(), 1u);
}

TEST(LiveBackend, ConfigurationErrors) {
  auto config = live_config("ftp://example.com/x");
  EXPECT_THROW(LiveBackend{config}, ValidationError);
  config = live_config("http://127.0.0.1:1/x");
  config.credentials_env = "WALKEVAL_TEST_UNSET_VARIABLE";
  unsetenv("WALKEVAL_TEST_UNSET_VARIABLE");
  EXPECT_THROW(LiveBackend{config}, ValidationError);
}

TEST(LiveBackend, ResponseTextShapes) {
  EXPECT_EQ(LiveBackend::response_text(R"({"choices":[{"message":{"content":"hi"}}]})"), "hi");
  EXPECT_EQ(LiveBackend::response_text(
                R"({"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]})"),
            "ab");
  EXPECT_THROW(LiveBackend::response_text("not json"), TransientFailure);
  EXPECT_THROW(LiveBackend::response_text(R"({"choices":[]})"), BackendRejected);
}
