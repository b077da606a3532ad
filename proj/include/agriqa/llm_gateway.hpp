#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace agriqa::llm {

enum class Role { System, User, Assistant, ToolResult };

std::string_view role_name(Role role);

inline constexpr std::size_t kDefaultMaxContent = 32768;

struct ChatMessage {
  Role role = Role::User;
  std::string content;
};

struct CompletionRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string provider = "mock";

  /// Throws Error(InvalidInput) when an invariant does not hold.
  void validate(std::size_t max_content = kDefaultMaxContent) const;
};

/// Ordered (pattern, response) pairs. "*" is the catch-all, a "re:" prefix
/// selects a case-insensitive ECMAScript regex, anything else is a
/// case-insensitive substring match.
class ScriptedTranscript {
 public:
  struct Entry {
    std::string pattern;
    std::string response;
  };

  ScriptedTranscript() = default;
  /// Throws Error(InvalidInput) when no catch-all entry is present.
  explicit ScriptedTranscript(std::vector<Entry> entries);
  /// Skips the catch-all check, so unmatched messages raise ScriptExhausted.
  static ScriptedTranscript unchecked(std::vector<Entry> entries);

  /// Pattern/response blocks separated by a line of three dashes. The first
  /// line of a block is the pattern; the remaining lines are the response.
  static ScriptedTranscript parse(std::string_view contents);
  static ScriptedTranscript from_file(const std::string& path);

  /// Response of the first matching entry, or nullptr.
  const std::string* match(std::string_view message) const;

  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

/// Pure function of (transcript, request): answers with the first entry
/// whose pattern matches the last User/ToolResult message.
class ScriptedProvider final : public Provider {
 public:
  explicit ScriptedProvider(ScriptedTranscript transcript) : transcript_(std::move(transcript)) {}
  std::string complete(const CompletionRequest& request) override;

 private:
  ScriptedTranscript transcript_;
};

struct RemoteEndpoint {
  std::string base_url;          // e.g. "http://127.0.0.1:8080"
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env;       // name of the env var holding the bearer token
  std::chrono::milliseconds timeout{30000};
  int retries = 1;
};

/// Generic chat-completion adapter over HTTP.
class RemoteProvider final : public Provider {
 public:
  explicit RemoteProvider(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string complete(const CompletionRequest& request) override;

  /// Request body in chat-completion wire shape.
  std::string request_body(const CompletionRequest& request) const;
  /// Extracts choices[0].message.content. Throws Error(UpstreamError).
  static std::string parse_response(std::string_view body);

 private:
  RemoteEndpoint endpoint_;
};

class Gateway {
 public:
  Gateway() = default;
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Throws Error(DuplicateProvider).
  void register_provider(const std::string& name, std::shared_ptr<Provider> provider);
  void register_provider(const std::string& name, ScriptedTranscript transcript);
  void register_provider(const std::string& name, RemoteEndpoint endpoint);

  bool has_provider(const std::string& name) const;

  /// Throws Error(ProviderNotFound | UpstreamError | ScriptExhausted |
  /// InvalidInput).
  std::string complete(const CompletionRequest& request) const;

  void set_max_content(std::size_t n) { max_content_ = n; }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Provider>> providers_;
  std::size_t max_content_ = kDefaultMaxContent;
};

}  // namespace agriqa::llm
