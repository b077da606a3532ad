#include "agriqa/llm_gateway.hpp"

#include <cstdlib>
#include <mutex>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "agriqa/error.hpp"
#include "agriqa/text.hpp"

namespace agriqa::llm {

using nlohmann::json;

std::string_view role_name(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::ToolResult: return "tool";
  }
  return "user";
}

void CompletionRequest::validate(std::size_t max_content) const {
  if (messages.empty()) throw Error(ErrorCode::InvalidInput, "completion request has no messages");
  auto first = messages.front().role;
  if (first != Role::System && first != Role::User) {
    throw Error(ErrorCode::InvalidInput, "first message must be system or user");
  }
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(ErrorCode::InvalidInput, "temperature must be in [0, 2]");
  }
  if (max_tokens <= 0) throw Error(ErrorCode::InvalidInput, "max_tokens must be positive");
  for (const auto& m : messages) {
    if (m.content.size() > max_content) {
      throw Error(ErrorCode::InvalidInput, "message content exceeds " + std::to_string(max_content) +
                                               " characters");
    }
  }
}

ScriptedTranscript::ScriptedTranscript(std::vector<Entry> entries) : entries_(std::move(entries)) {
  bool has_catch_all = false;
  for (const auto& e : entries_) has_catch_all = has_catch_all || e.pattern == "*";
  if (!has_catch_all) {
    throw Error(ErrorCode::InvalidInput, "scripted transcript needs a catch-all '*' entry");
  }
}

ScriptedTranscript ScriptedTranscript::unchecked(std::vector<Entry> entries) {
  ScriptedTranscript t;
  t.entries_ = std::move(entries);
  return t;
}

ScriptedTranscript ScriptedTranscript::parse(std::string_view contents) {
  std::vector<Entry> entries;
  std::vector<std::string> block;
  auto flush = [&] {
    // Leading blank lines are not part of a block.
    std::size_t start = 0;
    while (start < block.size() && text::trim(block[start]).empty()) ++start;
    if (start < block.size()) {
      Entry e;
      e.pattern = text::trim(block[start]);
      std::vector<std::string> body(block.begin() + static_cast<long>(start) + 1, block.end());
      while (!body.empty() && text::trim(body.back()).empty()) body.pop_back();
      e.response = text::join(body, "\n");
      entries.push_back(std::move(e));
    }
    block.clear();
  };
  for (auto& line : text::split(contents, '\n')) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "---") {
      flush();
    } else if (!(line.rfind('#', 0) == 0 && block.empty())) {
      block.push_back(line);
    }
  }
  flush();
  return ScriptedTranscript(std::move(entries));
}

ScriptedTranscript ScriptedTranscript::from_file(const std::string& path) {
  return parse(text::read_file(path));
}

const std::string* ScriptedTranscript::match(std::string_view message) const {
  for (const auto& e : entries_) {
    if (e.pattern == "*") return &e.response;
    if (e.pattern.rfind("re:", 0) == 0) {
      std::regex re(e.pattern.substr(3), std::regex::ECMAScript | std::regex::icase);
      if (std::regex_search(message.begin(), message.end(), re)) return &e.response;
    } else if (text::icontains(message, e.pattern)) {
      return &e.response;
    }
  }
  return nullptr;
}

std::string ScriptedProvider::complete(const CompletionRequest& request) {
  const ChatMessage* last = nullptr;
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
    if (it->role == Role::User || it->role == Role::ToolResult) {
      last = &*it;
      break;
    }
  }
  const std::string* response = transcript_.match(last ? std::string_view(last->content) : std::string_view());
  if (response == nullptr) throw Error(ErrorCode::ScriptExhausted, "no transcript entry matches");
  return *response;
}

std::string RemoteProvider::request_body(const CompletionRequest& request) const {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  }
  json body{{"messages", messages},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  if (!endpoint_.model.empty()) body["model"] = endpoint_.model;
  return body.dump();
}

std::string RemoteProvider::parse_response(std::string_view body) {
  auto parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) throw Error(ErrorCode::UpstreamError, "upstream returned invalid JSON");
  try {
    return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::UpstreamError, "upstream response missing choices[0].message.content");
  }
}

std::string RemoteProvider::complete(const CompletionRequest& request) {
  httplib::Client client(endpoint_.base_url);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  if (!endpoint_.api_key_env.empty()) {
    if (const char* key = std::getenv(endpoint_.api_key_env.c_str())) {
      client.set_bearer_token_auth(key);
    }
  }

  const auto body = request_body(request);
  std::string detail;
  for (int attempt = 0; attempt <= endpoint_.retries; ++attempt) {
    auto res = client.Post(endpoint_.path, body, "application/json");
    if (!res) {
      detail = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::UpstreamError,
                  "upstream status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    return parse_response(res->body);
  }
  throw Error(ErrorCode::UpstreamError, detail + " (" + endpoint_.base_url + ")");
}

void Gateway::register_provider(const std::string& name, std::shared_ptr<Provider> provider) {
  std::unique_lock lock(mu_);
  if (providers_.count(name) > 0) throw Error(ErrorCode::DuplicateProvider, name);
  providers_.emplace(name, std::move(provider));
}

void Gateway::register_provider(const std::string& name, ScriptedTranscript transcript) {
  register_provider(name, std::make_shared<ScriptedProvider>(std::move(transcript)));
}

void Gateway::register_provider(const std::string& name, RemoteEndpoint endpoint) {
  register_provider(name, std::make_shared<RemoteProvider>(std::move(endpoint)));
}

bool Gateway::has_provider(const std::string& name) const {
  std::shared_lock lock(mu_);
  return providers_.count(name) > 0;
}

std::string Gateway::complete(const CompletionRequest& request) const {
  std::shared_ptr<Provider> provider;
  {
    std::shared_lock lock(mu_);
    auto it = providers_.find(request.provider);
    if (it == providers_.end()) throw Error(ErrorCode::ProviderNotFound, request.provider);
    provider = it->second;
  }
  request.validate(max_content_);
  return provider->complete(request);
}

}  // namespace agriqa::llm
