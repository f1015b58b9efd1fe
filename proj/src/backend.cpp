#include "pae/backend.hpp"

#include <cstdlib>
#include <fstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace pae::remote {
namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace

BackendConfig BackendConfig::from_env() {
  BackendConfig c;
  c.base_url = env_or("PAE_API_BASE", "");
  c.model = env_or("PAE_API_MODEL", "");
  c.api_key = env_or("PAE_API_KEY", "");
  return c;
}

BackendConfig BackendConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open backend config " + path.string());
  const auto j = nlohmann::json::parse(in);
  BackendConfig env = from_env();
  BackendConfig c;
  c.base_url = j.value("base_url", env.base_url);
  c.model = j.value("model", env.model);
  c.api_key = j.value("api_key", env.api_key);
  c.temperature = j.value("temperature", 1.0);
  c.timeout_seconds = j.value("timeout_seconds", 120);
  if (c.base_url.empty()) c.base_url = env.base_url;
  if (c.model.empty()) c.model = env.model;
  if (c.api_key.empty()) c.api_key = env.api_key;
  return c;
}

HttpChatBackend::HttpChatBackend(BackendConfig config) : config_(std::move(config)) {
  const auto scheme = config_.base_url.find("://");
  if (config_.base_url.empty() || scheme == std::string::npos) {
    throw std::invalid_argument("backend base_url must look like http(s)://host[:port][/path]");
  }
  const auto slash = config_.base_url.find('/', scheme + 3);
  origin_ = config_.base_url.substr(0, slash);
  path_prefix_ = slash == std::string::npos ? "" : config_.base_url.substr(slash);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpChatBackend::complete(const std::vector<ChatMessage>& messages) {
  nlohmann::json body = {{"model", config_.model}, {"temperature", config_.temperature}};
  body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) throw TransportError("request to " + origin_ + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw TransportError("backend returned HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  try {
    const auto reply = nlohmann::json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed backend response: ") + e.what());
  }
}

}  // namespace pae::remote
