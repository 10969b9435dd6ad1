#include "walkeval/gateway.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "walkeval/error.hpp"
#include "walkeval/hashing.hpp"

namespace walkeval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("short write to '{}'", path.string()));
}

std::string unique_suffix() {
  static std::atomic<std::uint64_t> counter{0};
  thread_local std::mt19937_64 rng{std::random_device{}()};
  return fmt::format("{:x}.{:x}", rng(), counter.fetch_add(1));
}

// Links `temp` to `target`; false if `target` already exists.
bool publish(const fs::path& temp, const fs::path& target) {
  std::error_code ec;
  fs::create_hard_link(temp, target, ec);
  fs::remove(temp);
  if (!ec) return true;
  if (fs::exists(target)) return false;
  throw IoError(fmt::format("cannot store '{}': {}", target.string(), ec.message()));
}

fs::path meta_path(const fs::path& entry) {
  auto p = entry;
  p += ".meta.json";
  return p;
}

}  // namespace

void BackendConfig::validate() const {
  if (temperature < 0) throw ValidationError("backend temperature must be >= 0");
  if (max_retries < 0) throw ValidationError("backend max_retries must be >= 0");
  if (max_reasks < 0) throw ValidationError("backend max_reasks must be >= 0");
  if (kind == Kind::mock) {
    if (script.empty()) throw ValidationError("mock backend requires a script path");
  } else {
    if (endpoint.empty()) throw ValidationError("live backend requires an endpoint");
    if (credentials_env.empty()) throw ValidationError("live backend requires credentials_env");
  }
}

std::string RequestKey::digest() const {
  return sha256_hex(fmt::format("walkeval-request-v1\n{}\n{}\n{}\n{}", image_digest, prompt_digest,
                                to_int(level), replicate));
}

RequestKey make_request_key(std::string_view image_bytes, const PromptBundle& bundle, int replicate) {
  if (image_bytes.empty()) throw ValidationError("image is empty");
  if (replicate < 1) throw ValidationError("replicate must be >= 1");
  std::string prompt = bundle.body_text;
  prompt.push_back('\0');
  prompt += bundle.format_instruction;
  return RequestKey{sha256_hex(image_bytes), sha256_hex(prompt), bundle.level, replicate};
}

std::string format_timestamp(std::int64_t micros) {
  const std::time_t seconds = static_cast<std::time_t>(micros / 1'000'000);
  std::tm utc{};
  gmtime_r(&seconds, &utc);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:06}Z", utc.tm_year + 1900, utc.tm_mon + 1, utc.tm_mday,
                     utc.tm_hour, utc.tm_min, utc.tm_sec, micros % 1'000'000);
}

std::int64_t monotonic_now_us() {
  static std::atomic<std::int64_t> last{0};
  const std::int64_t now =
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count();
  std::int64_t prev = last.load();
  std::int64_t next;
  do {
    next = std::max(now, prev + 1);
  } while (!last.compare_exchange_weak(prev, next));
  return next;
}

std::string_view sniff_media_type(std::string_view image) {
  if (image.starts_with("\x89PNG")) return "image/png";
  if (image.size() >= 12 && image.substr(0, 4) == "RIFF" && image.substr(8, 4) == "WEBP") return "image/webp";
  if (image.starts_with("GIF8")) return "image/gif";
  return "image/jpeg";
}

// ---- MockBackend ------------------------------------------------------------

MockBackend::MockBackend(std::map<std::string, std::vector<std::string>> script) : script_(std::move(script)) {}

std::unique_ptr<MockBackend> MockBackend::from_file(const fs::path& path) { return from_json(read_file(path)); }

std::unique_ptr<MockBackend> MockBackend::from_json(std::string_view document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), 0, e.byte);
  }
  if (!root.is_object()) throw ValidationError("mock script must be a JSON object");
  std::map<std::string, std::vector<std::string>> script;
  for (const auto& [key, value] : root.items()) {
    if (value.is_string()) {
      script[key] = {value.get<std::string>()};
    } else if (value.is_array() && !value.empty() &&
               std::all_of(value.begin(), value.end(), [](const json& v) { return v.is_string(); })) {
      script[key] = value.get<std::vector<std::string>>();
    } else {
      throw ValidationError(fmt::format("mock script entry '{}' must be a string or a list of strings", key));
    }
  }
  return std::make_unique<MockBackend>(std::move(script));
}

std::string MockBackend::complete(const BackendRequest& request) {
  calls_.fetch_add(1);
  {
    std::lock_guard lock(mutex_);
    payloads_.emplace_back(request.prompt_text);
  }
  const std::string digest = request.key.digest();
  auto it = script_.find(digest);
  if (it == script_.end()) throw MockScriptMiss(digest);
  const auto& texts = it->second;
  return texts[std::min<std::size_t>(static_cast<std::size_t>(request.ask), texts.size() - 1)];
}

std::vector<std::string> MockBackend::payloads() const {
  std::lock_guard lock(mutex_);
  return payloads_;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  config.validate();
  if (config.kind == BackendConfig::Kind::mock) {
    return MockBackend::from_file(config.script);
  }
  return std::make_unique<LiveBackend>(config);
}

// ---- ResponseCache ----------------------------------------------------------

ResponseCache::ResponseCache(fs::path root) : root_(std::move(root)) {}

fs::path ResponseCache::path_for(const RequestKey& key) const {
  return root_ / std::to_string(to_int(key.level)) / key.image_digest /
         fmt::format("{}.{}", key.prompt_digest, key.replicate);
}

std::optional<RawResponse> ResponseCache::lookup(const RequestKey& key) const {
  const fs::path entry = path_for(key);
  const fs::path meta = meta_path(entry);
  if (!fs::exists(entry) || !fs::exists(meta)) return std::nullopt;

  RawResponse response;
  response.key = key;
  response.text = read_file(entry);
  json m;
  try {
    m = json::parse(read_file(meta));
  } catch (const json::exception& e) {
    throw IoError(fmt::format("corrupt cache metadata '{}': {}", meta.string(), e.what()));
  }
  response.received_at_us = m.value("received_at_us", std::int64_t{0});
  response.backend = m.value("backend", std::string{});
  response.attempt_count = m.value("attempt_count", 0);
  if (m.value("response_digest", std::string{}) != sha256_hex(response.text)) {
    throw IoError(fmt::format("cache entry '{}' does not match its recorded digest", entry.string()));
  }
  return response;
}

std::mutex& ResponseCache::key_mutex(const std::string& digest) {
  std::lock_guard lock(mutexes_guard_);
  auto& slot = mutexes_[digest];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

RawResponse ResponseCache::commit(const RawResponse& response) {
  std::lock_guard lock(key_mutex(response.key.digest()));
  if (auto existing = lookup(response.key)) return *existing;

  const fs::path entry = path_for(response.key);
  std::error_code ec;
  fs::create_directories(entry.parent_path(), ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", entry.parent_path().string(), ec.message()));

  json meta = {
      {"key_digest", response.key.digest()},
      {"received_at_us", response.received_at_us},
      {"received_at", format_timestamp(response.received_at_us)},
      {"backend", response.backend},
      {"attempt_count", response.attempt_count},
      {"response_digest", sha256_hex(response.text)},
  };
  const fs::path suffix = ".tmp." + unique_suffix();
  fs::path meta_tmp = entry;
  meta_tmp += suffix;
  meta_tmp += ".meta";
  fs::path text_tmp = entry;
  text_tmp += suffix;
  write_file(meta_tmp, meta.dump(2) + "\n");
  write_file(text_tmp, response.text);

  // Metadata first: an entry is only visible once its text file exists.
  if (!publish(meta_tmp, meta_path(entry))) {
    fs::remove(text_tmp);
    if (auto existing = lookup(response.key)) return *existing;
    throw IoError(fmt::format("cache entry '{}' is half written", entry.string()));
  }
  if (!publish(text_tmp, entry)) {
    if (auto existing = lookup(response.key)) return *existing;
    throw IoError(fmt::format("cache entry '{}' is inconsistent", entry.string()));
  }
  return response;
}

void ResponseCache::archive_rejected(const RequestKey& key, std::string_view text, int ask) {
  fs::path target = path_for(key);
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", target.parent_path().string(), ec.message()));
  target += fmt::format(".rejected.{}", ask);
  write_file(target, text);
}

// ---- Gateway ----------------------------------------------------------------

Gateway::Gateway(Backend& backend, ResponseCache& cache, BackendConfig config)
    : backend_(backend), cache_(cache), config_(std::move(config)) {}

std::string Gateway::fetch_with_retries(const BackendRequest& request, int& attempts) {
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0 && config_.backoff_base.count() > 0) {
      std::this_thread::sleep_for(config_.backoff_base * (1LL << std::min(attempt - 1, 16)));
    }
    ++attempts;
    requests_.fetch_add(1);
    try {
      return backend_.complete(request);
    } catch (const TransientFailure& e) {
      last_error = e.what();
    }
  }
  throw BackendUnavailable(
      fmt::format("{} failed after {} attempts: {}", backend_.name(), config_.max_retries + 1, last_error));
}

SubmitResult Gateway::submit(std::string_view image, const PromptBundle& bundle, int replicate,
                             const ResponseValidator& validate) {
  const RequestKey key = make_request_key(image, bundle, replicate);
  if (auto cached = cache_.lookup(key)) {
    return {std::move(*cached), true};
  }

  const std::string prompt = bundle.full_text();
  int attempts = 0;
  for (int ask = 0;; ++ask) {
    BackendRequest request{key, prompt, image, sniff_media_type(image), config_.model_name, config_.temperature, ask};
    RawResponse response;
    response.key = key;
    response.text = fetch_with_retries(request, attempts);
    response.received_at_us = monotonic_now_us();
    response.backend = backend_.name();
    response.attempt_count = attempts;
    if (validate) {
      try {
        validate(response);
      } catch (const ResponseError&) {
        cache_.archive_rejected(key, response.text, ask);
        if (ask >= config_.max_reasks) throw;
        continue;
      }
    }
    return {cache_.commit(response), false};
  }
}

}  // namespace walkeval
