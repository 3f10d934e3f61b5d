#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ehrqa/confidence.hpp"

namespace ehrqa {

struct Message {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;

  bool operator==(const Message&) const = default;
};

struct BackendRequest {
  std::vector<Message> messages;
  double temperature = 0.0;
  std::string model;
  bool want_logprobs = false;
  int top_logprobs = 5;
};

struct TokenPosition {
  std::string token;
  std::vector<TokenAlternative> alternatives;
};

struct BackendResponse {
  std::string text;
  // Per-position token alternatives; populated only when logprobs were
  // requested and the backend supports them.
  std::vector<TokenPosition> positions;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendResponse complete(const BackendRequest& request) = 0;
};

// Stable hash over the ordered message list; used to pin mock script
// entries to the exact prompt they answer.
std::string request_fingerprint(const BackendRequest& request);

struct ScriptEntry {
  std::optional<std::string> expect_fingerprint;
  std::string response;
  // Optional level-token logprob table; when present the response carries
  // one token position with these alternatives.
  std::map<int, double> level_logprobs;
};

// Replays a fixed response sequence. Throws BackendError when the script
// is exhausted or an expected fingerprint does not match.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::vector<ScriptEntry> script);
  BackendResponse complete(const BackendRequest& request) override;
  std::size_t remaining() const;

 private:
  std::vector<ScriptEntry> script_;
  std::size_t next_ = 0;
  mutable std::mutex mu_;
};

ScriptEntry script_entry_from_json(const nlohmann::json& j);
nlohmann::json script_entry_to_json(const ScriptEntry& entry);

// Flat script: a JSON array of entries, or {"entries": [...]}.
std::vector<ScriptEntry> load_mock_script(const std::filesystem::path& path);

// Entries carrying a "question_id" field, grouped in file order. Entries
// without one land under the empty key.
std::map<std::string, std::vector<ScriptEntry>> load_mock_script_by_question(
    const std::filesystem::path& path);

inline constexpr const char* kEndpointEnvVar = "EHRQA_ENDPOINT";
inline constexpr const char* kApiKeyEnvVar = "EHRQA_API_KEY";

struct HttpBackendOptions {
  std::string endpoint;  // e.g. http://localhost:8000/v1; falls back to $EHRQA_ENDPOINT
  std::string api_key;   // falls back to $EHRQA_API_KEY
  std::string model = "gpt-4.1-mini";
  int timeout_seconds = 120;
};

// Chat-completion endpoint speaking the common JSON contract: messages
// in, completion plus optional top-k token logprobs out.
class HttpBackend : public Backend {
 public:
  // Throws std::invalid_argument when no endpoint is configured.
  explicit HttpBackend(HttpBackendOptions options);
  ~HttpBackend() override;
  BackendResponse complete(const BackendRequest& request) override;

  const HttpBackendOptions& options() const { return options_; }

  // Exposed for tests: request body construction and response parsing.
  static nlohmann::json build_body(const BackendRequest& request, const std::string& model);
  static BackendResponse parse_body(const nlohmann::json& body);

 private:
  HttpBackendOptions options_;
  std::string host_;
  std::string path_prefix_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ehrqa
