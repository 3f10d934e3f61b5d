#include "ehrqa/backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <limits>

#include "ehrqa/util.hpp"

namespace ehrqa {

std::string request_fingerprint(const BackendRequest& request) {
  std::string buf;
  for (const auto& m : request.messages) {
    buf += m.role;
    buf.push_back('\x1f');
    buf += m.content;
    buf.push_back('\x1e');
  }
  return fnv1a64_hex(buf);
}

MockBackend::MockBackend(std::vector<ScriptEntry> script) : script_(std::move(script)) {}

std::size_t MockBackend::remaining() const {
  std::lock_guard<std::mutex> lock(mu_);
  return script_.size() - next_;
}

BackendResponse MockBackend::complete(const BackendRequest& request) {
  std::lock_guard<std::mutex> lock(mu_);
  if (next_ >= script_.size()) {
    throw BackendError("mock script exhausted after " + std::to_string(script_.size()) +
                       " responses");
  }
  const ScriptEntry& entry = script_[next_++];
  if (entry.expect_fingerprint) {
    std::string got = request_fingerprint(request);
    if (got != *entry.expect_fingerprint) {
      throw BackendError("mock script fingerprint mismatch at entry " +
                         std::to_string(next_ - 1) + ": expected " + *entry.expect_fingerprint +
                         ", got " + got);
    }
  }
  BackendResponse resp;
  resp.text = entry.response;
  if (!entry.level_logprobs.empty()) {
    TokenPosition pos;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [level, lp] : entry.level_logprobs) {
      pos.alternatives.push_back({std::to_string(level), lp});
      if (lp > best) {
        best = lp;
        pos.token = std::to_string(level);
      }
    }
    resp.positions.push_back(std::move(pos));
  }
  return resp;
}

ScriptEntry script_entry_from_json(const nlohmann::json& j) {
  ScriptEntry entry;
  entry.response = j.at("response").get<std::string>();
  if (j.contains("expect_fingerprint")) {
    entry.expect_fingerprint = j.at("expect_fingerprint").get<std::string>();
  }
  if (j.contains("level_logprobs")) {
    for (const auto& [key, value] : j.at("level_logprobs").items()) {
      entry.level_logprobs[std::stoi(key)] = value.get<double>();
    }
  }
  return entry;
}

nlohmann::json script_entry_to_json(const ScriptEntry& entry) {
  nlohmann::json j;
  j["response"] = entry.response;
  if (entry.expect_fingerprint) j["expect_fingerprint"] = *entry.expect_fingerprint;
  if (!entry.level_logprobs.empty()) {
    nlohmann::json table = nlohmann::json::object();
    for (const auto& [level, lp] : entry.level_logprobs) {
      table[std::to_string(level)] = lp;
    }
    j["level_logprobs"] = std::move(table);
  }
  return j;
}

namespace {

nlohmann::json load_script_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mock script: " + path.string());
  nlohmann::json j;
  in >> j;
  if (j.is_object() && j.contains("entries")) j = j.at("entries");
  if (!j.is_array()) {
    throw std::runtime_error("mock script must be an array of entries: " + path.string());
  }
  return j;
}

}  // namespace

std::vector<ScriptEntry> load_mock_script(const std::filesystem::path& path) {
  std::vector<ScriptEntry> out;
  for (const auto& ej : load_script_json(path)) {
    out.push_back(script_entry_from_json(ej));
  }
  return out;
}

std::map<std::string, std::vector<ScriptEntry>> load_mock_script_by_question(
    const std::filesystem::path& path) {
  std::map<std::string, std::vector<ScriptEntry>> out;
  for (const auto& ej : load_script_json(path)) {
    std::string qid = ej.value("question_id", std::string{});
    out[qid].push_back(script_entry_from_json(ej));
  }
  return out;
}

struct HttpBackend::Impl {
  std::unique_ptr<httplib::Client> client;
};

namespace {

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string{};
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendOptions options)
    : options_(std::move(options)), impl_(std::make_unique<Impl>()) {
  if (options_.endpoint.empty()) options_.endpoint = env_or_empty(kEndpointEnvVar);
  if (options_.api_key.empty()) options_.api_key = env_or_empty(kApiKeyEnvVar);
  if (options_.endpoint.empty()) {
    throw std::invalid_argument(
        std::string("no backend endpoint configured (set ") + kEndpointEnvVar +
        " or the config's endpoint, or run with a mock script)");
  }
  // Split "http://host:port/prefix" into client base and path prefix.
  std::string url = options_.endpoint;
  auto scheme_end = url.find("://");
  std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) {
    host_ = url;
    path_prefix_.clear();
  } else {
    host_ = url.substr(0, path_start);
    path_prefix_ = url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
  impl_->client = std::make_unique<httplib::Client>(host_);
  impl_->client->set_read_timeout(options_.timeout_seconds, 0);
  impl_->client->set_write_timeout(options_.timeout_seconds, 0);
}

HttpBackend::~HttpBackend() = default;

nlohmann::json HttpBackend::build_body(const BackendRequest& request, const std::string& model) {
  nlohmann::json body;
  body["model"] = request.model.empty() ? model : request.model;
  body["temperature"] = request.temperature;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : request.messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }
  if (request.want_logprobs) {
    body["logprobs"] = true;
    body["top_logprobs"] = request.top_logprobs;
  }
  return body;
}

BackendResponse HttpBackend::parse_body(const nlohmann::json& body) {
  BackendResponse resp;
  const auto& choices = body.at("choices");
  if (!choices.is_array() || choices.empty()) {
    throw BackendError("backend response has no choices");
  }
  const auto& choice = choices.at(0);
  resp.text = choice.at("message").at("content").get<std::string>();
  if (choice.contains("logprobs") && choice.at("logprobs").is_object() &&
      choice.at("logprobs").contains("content")) {
    for (const auto& pj : choice.at("logprobs").at("content")) {
      TokenPosition pos;
      pos.token = pj.value("token", std::string{});
      if (pj.contains("top_logprobs")) {
        for (const auto& aj : pj.at("top_logprobs")) {
          pos.alternatives.push_back(
              {aj.at("token").get<std::string>(), aj.at("logprob").get<double>()});
        }
      }
      // The sampled token counts as an alternative even when the server
      // omits it from the top-k list.
      bool token_listed = std::any_of(
          pos.alternatives.begin(), pos.alternatives.end(),
          [&](const TokenAlternative& a) { return a.token == pos.token; });
      if (!token_listed && pj.contains("logprob")) {
        pos.alternatives.push_back({pos.token, pj.at("logprob").get<double>()});
      }
      resp.positions.push_back(std::move(pos));
    }
  }
  return resp;
}

BackendResponse HttpBackend::complete(const BackendRequest& request) {
  nlohmann::json body = build_body(request, options_.model);
  httplib::Headers headers;
  if (!options_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options_.api_key);
  }
  auto res = impl_->client->Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                                 "application/json");
  if (!res) {
    throw BackendError("backend request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw BackendError("backend returned status " + std::to_string(res->status) + ": " +
                       res->body.substr(0, 200));
  }
  nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) {
    throw BackendError("backend returned unparseable JSON body");
  }
  try {
    return parse_body(parsed);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("backend response missing fields: ") + e.what());
  }
}

}  // namespace ehrqa
