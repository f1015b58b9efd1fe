#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace pae::remote {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A chat-completion style model endpoint. Implementations must be safe to
/// call from one thread at a time; use one backend per worker for parallel
/// calls.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Returns the assistant message text. Throws TransportError.
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

struct BackendConfig {
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string model;
  std::string api_key;
  double temperature = 1.0;
  int timeout_seconds = 120;

  /// PAE_API_BASE, PAE_API_MODEL, PAE_API_KEY.
  static BackendConfig from_env();
  /// JSON file with base_url/model/api_key/temperature/timeout_seconds; the
  /// environment fills any field the file leaves empty.
  static BackendConfig from_file(const std::filesystem::path& path);
};

/// POSTs {"model", "messages", "temperature"} to <base_url>/chat/completions
/// and reads choices[0].message.content.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendConfig config);
  std::string complete(const std::vector<ChatMessage>& messages) override;

 private:
  BackendConfig config_;
  std::string origin_;
  std::string path_prefix_;
};

}  // namespace pae::remote
