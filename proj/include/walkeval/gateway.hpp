#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "walkeval/prompt.hpp"

namespace walkeval {

struct BackendConfig {
  enum class Kind { live, mock };

  Kind kind = Kind::mock;
  /// Chat-completion URL, live only.
  std::string endpoint;
  std::string model_name = "gpt-4o";
  double temperature = 0.0;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 3;
  /// Name of the environment variable holding the API key, live only.
  std::string credentials_env;
  /// Mock script document, mock only.
  std::filesystem::path script;
  /// First retry delay; doubles on each further retry.
  std::chrono::milliseconds backoff_base{500};
  /// Extra requests issued when a response fails validation.
  int max_reasks = 2;

  /// Throws ValidationError.
  void validate() const;
};

/// Identity of one cached model response.
struct RequestKey {
  std::string image_digest;
  std::string prompt_digest;
  ExpertiseLevel level = ExpertiseLevel::c1;
  int replicate = 1;

  /// Hex digest naming this key in mock scripts and ledgers.
  std::string digest() const;

  bool operator==(const RequestKey&) const = default;
};

RequestKey make_request_key(std::string_view image_bytes, const PromptBundle& bundle, int replicate);

struct RawResponse {
  RequestKey key;
  /// Byte-exact model output.
  std::string text;
  std::int64_t received_at_us = 0;
  std::string backend;
  int attempt_count = 0;
};

/// ISO-8601 UTC rendering with microseconds.
std::string format_timestamp(std::int64_t micros);

/// Wall-clock microseconds, strictly increasing within the process.
std::int64_t monotonic_now_us();

struct BackendRequest {
  const RequestKey& key;
  std::string_view prompt_text;
  std::string_view image_bytes;
  std::string_view image_media_type;
  std::string_view model;
  double temperature = 0.0;
  /// 0 for the first request of a key, n for the n-th re-ask.
  int ask = 0;
};

/// Raised by backends for failures worth retrying.
class TransientFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One request is one fresh conversation; implementations must not keep
/// history between calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  /// Throws TransientFailure, BackendRejected or MockScriptMiss.
  virtual std::string complete(const BackendRequest& request) = 0;
};

/// Scripted backend: request-key digest -> response text. An entry may
/// also be a list of texts, consumed by successive re-asks.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(std::map<std::string, std::vector<std::string>> script);

  /// Throws IoError / ParseError.
  static std::unique_ptr<MockBackend> from_file(const std::filesystem::path& path);
  static std::unique_ptr<MockBackend> from_json(std::string_view document);

  std::string name() const override { return "mock"; }
  std::string complete(const BackendRequest& request) override;

  std::size_t calls() const noexcept { return calls_.load(); }
  /// Prompt texts received so far, in arrival order.
  std::vector<std::string> payloads() const;

 private:
  std::map<std::string, std::vector<std::string>> script_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mutex_;
  std::vector<std::string> payloads_;
};

/// HTTPS chat-completion client. The image travels inline as a base64 data
/// URL inside the single user message.
class LiveBackend final : public Backend {
 public:
  /// Throws ValidationError when the credential variable is unset.
  explicit LiveBackend(BackendConfig config);
  ~LiveBackend() override;

  std::string name() const override;
  std::string complete(const BackendRequest& request) override;

  /// JSON request body for `request` (exposed for tests).
  static std::string request_body(const BackendRequest& request);
  /// Extracts the assistant text from a chat-completion response body.
  static std::string response_text(std::string_view body);

 private:
  BackendConfig config_;
  std::string api_key_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

/// One file per key under `<root>/<level>/<image_digest>/<prompt_digest>.<replicate>`
/// plus a `.meta.json` sidecar. The first successful write of a key is
/// permanent.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path path_for(const RequestKey& key) const;

  std::optional<RawResponse> lookup(const RequestKey& key) const;

  /// Stores `response` unless the key already exists; returns the entry
  /// that is stored afterwards. Throws IoError.
  RawResponse commit(const RawResponse& response);

  /// Keeps a rejected response next to the entry as `<file>.rejected.<n>`.
  void archive_rejected(const RequestKey& key, std::string_view text, int ask);

 private:
  std::mutex& key_mutex(const std::string& digest);

  std::filesystem::path root_;
  std::mutex mutexes_guard_;
  std::map<std::string, std::unique_ptr<std::mutex>> mutexes_;
};

/// Throws a ResponseError subtype to reject a response.
using ResponseValidator = std::function<void(const RawResponse&)>;

struct SubmitResult {
  RawResponse response;
  bool from_cache = false;
};

class Gateway {
 public:
  Gateway(Backend& backend, ResponseCache& cache, BackendConfig config);

  /// Cached response when the key exists; otherwise one fresh request with
  /// retries on transient failures, re-asked up to `max_reasks` times while
  /// `validate` rejects it. Throws BackendUnavailable, BackendRejected,
  /// MockScriptMiss, or the validator's error after the last re-ask.
  SubmitResult submit(std::string_view image, const PromptBundle& bundle, int replicate,
                      const ResponseValidator& validate = {});

  const BackendConfig& config() const noexcept { return config_; }
  std::size_t backend_requests() const noexcept { return requests_.load(); }

 private:
  std::string fetch_with_retries(const BackendRequest& request, int& attempts);

  Backend& backend_;
  ResponseCache& cache_;
  BackendConfig config_;
  std::atomic<std::size_t> requests_{0};
};

/// Media type sniffed from magic bytes; "image/jpeg" when unknown.
std::string_view sniff_media_type(std::string_view image);

}  // namespace walkeval
