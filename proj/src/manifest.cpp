#include "walkeval/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "walkeval/error.hpp"

namespace walkeval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& object, std::initializer_list<std::string_view> allowed, std::string_view where) {
  for (const auto& [key, value] : object.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError(fmt::format("{}: unknown key '{}'", where, key));
    }
  }
}

template <class T>
T field(const json& object, const char* key, std::string_view where) {
  try {
    return object.at(key).get<T>();
  } catch (const json::out_of_range&) {
    throw ValidationError(fmt::format("{}: missing '{}'", where, key));
  } catch (const json::type_error&) {
    throw ValidationError(fmt::format("{}: '{}' has the wrong type", where, key));
  }
}

template <class T>
T field_or(const json& object, const char* key, T fallback, std::string_view where) {
  if (!object.contains(key)) return fallback;
  return field<T>(object, key, where);
}

fs::path resolve(const fs::path& base, const std::string& path) {
  fs::path p(path);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

BackendConfig parse_backend(const json& node, const fs::path& base) {
  if (!node.is_object()) throw ValidationError("manifest: 'backend' must be an object");
  reject_unknown(node,
                 {"kind", "endpoint", "model", "temperature", "timeout_ms", "max_retries", "credentials_env",
                  "script", "backoff_ms", "max_reasks"},
                 "backend");
  BackendConfig cfg;
  const auto kind = field<std::string>(node, "kind", "backend");
  if (kind == "mock") {
    cfg.kind = BackendConfig::Kind::mock;
  } else if (kind == "live") {
    cfg.kind = BackendConfig::Kind::live;
  } else {
    throw ValidationError(fmt::format("backend: kind must be 'mock' or 'live', got '{}'", kind));
  }
  cfg.endpoint = field_or<std::string>(node, "endpoint", cfg.endpoint, "backend");
  cfg.model_name = field_or<std::string>(node, "model", cfg.model_name, "backend");
  cfg.temperature = field_or<double>(node, "temperature", cfg.temperature, "backend");
  cfg.timeout = std::chrono::milliseconds(field_or<long long>(node, "timeout_ms", cfg.timeout.count(), "backend"));
  cfg.max_retries = field_or<int>(node, "max_retries", cfg.max_retries, "backend");
  cfg.credentials_env = field_or<std::string>(node, "credentials_env", cfg.credentials_env, "backend");
  if (node.contains("script")) cfg.script = resolve(base, field<std::string>(node, "script", "backend"));
  cfg.backoff_base =
      std::chrono::milliseconds(field_or<long long>(node, "backoff_ms", cfg.backoff_base.count(), "backend"));
  cfg.max_reasks = field_or<int>(node, "max_reasks", cfg.max_reasks, "backend");
  if (cfg.timeout.count() <= 0) throw ValidationError("backend: timeout_ms must be > 0");
  if (cfg.backoff_base.count() < 0) throw ValidationError("backend: backoff_ms must be >= 0");
  cfg.validate();
  return cfg;
}

std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < std::min(byte > 0 ? byte - 1 : 0, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

}  // namespace

StreetAssignment CampaignManifest::streets() const {
  StreetAssignment out;
  for (const auto& image : images) out.emplace(image.id, image.street);
  return out;
}

CampaignManifest parse_manifest(std::string_view document, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    auto [line, column] = line_and_column(document, e.byte);
    throw ParseError(e.what(), line, column);
  }
  if (!root.is_object()) throw ParseError("manifest must be a JSON object", 1, 1);
  reject_unknown(root,
                 {"images", "levels", "replicates", "criteria", "backend", "output_dir", "registry",
                  "per_criterion", "strict_global_order", "workers"},
                 "manifest");

  CampaignManifest m;
  if (!root.contains("images") || !root["images"].is_array()) {
    throw ValidationError("manifest: 'images' must be an array");
  }
  std::set<std::string> ids;
  for (const auto& node : root["images"]) {
    if (!node.is_object()) throw ValidationError("manifest: every image must be an object");
    reject_unknown(node, {"id", "path", "street"}, "image");
    CampaignImage image;
    image.id = field<std::string>(node, "id", "image");
    image.path = resolve(base_dir, field<std::string>(node, "path", "image"));
    image.street = field<std::string>(node, "street", "image");
    if (image.id.empty()) throw ValidationError("image: empty id");
    if (image.street.empty()) throw ValidationError(fmt::format("image '{}': empty street", image.id));
    if (!ids.insert(image.id).second) throw ValidationError(fmt::format("duplicate image id '{}'", image.id));
    m.images.push_back(std::move(image));
  }

  if (root.contains("levels")) {
    m.options.levels.clear();
    for (int level : field<std::vector<int>>(root, "levels", "manifest")) {
      m.options.levels.push_back(level_from_int(level));
    }
  }
  m.options.replicates = field_or<int>(root, "replicates", m.options.replicates, "manifest");
  if (m.options.replicates < 1) throw ValidationError("manifest: replicates must be >= 1");
  m.options.criteria = field_or<std::vector<std::string>>(root, "criteria", m.options.criteria, "manifest");
  if (m.options.criteria.empty()) throw ValidationError("manifest: criteria must not be empty");
  m.options.per_criterion = field_or<bool>(root, "per_criterion", m.options.per_criterion, "manifest");
  m.options.strict_global_order =
      field_or<bool>(root, "strict_global_order", m.options.strict_global_order, "manifest");
  m.options.workers = field_or<int>(root, "workers", m.options.workers, "manifest");
  if (m.options.workers < 1) throw ValidationError("manifest: workers must be >= 1");

  if (!root.contains("backend")) throw ValidationError("manifest: missing 'backend'");
  m.backend = parse_backend(root["backend"], base_dir);
  m.output_dir = resolve(base_dir, field<std::string>(root, "output_dir", "manifest"));
  if (root.contains("registry")) m.registry = resolve(base_dir, field<std::string>(root, "registry", "manifest"));
  return m;
}

CampaignManifest load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read manifest {}", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_manifest(text.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

}  // namespace walkeval
