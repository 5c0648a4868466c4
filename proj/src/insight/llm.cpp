#include "exr/insight/llm.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include <httplib.h>

#include "exr/uad/digest.hpp"
#include "exr/uad/error.hpp"

namespace exr {

namespace detail {
const std::map<std::string, std::string>& embedded_prompts();
}

using json = nlohmann::json;

std::string LlmRequest::digest() const {
  json images_j = json::array();
  for (const auto& img : images) images_j.push_back({{"mime", img.mime}, {"sha256", sha256_hex(img.data)}});
  json j = {{"system", system}, {"user", user}, {"images", images_j}, {"temperature", temperature}, {"seed", seed}};
  return sha256_hex(j.dump());
}

MockLlmClient::MockLlmClient(const json& fixtures) {
  if (!fixtures.is_array()) throw Error(ErrorCode::InvalidArgument, "mock fixtures must be a JSON array");
  for (const auto& e : fixtures) add_entry(e);
}

std::shared_ptr<MockLlmClient> MockLlmClient::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "mock fixtures " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, path.string() + " is not JSON");
  return std::make_shared<MockLlmClient>(j);
}

void MockLlmClient::add_entry(const json& e) {
  Entry entry;
  if (e.contains("fail")) {
    entry.failure = e["fail"].is_string() ? e["fail"].get<std::string>() : "fixture failure";
  } else if (e.contains("responses")) {
    entry.responses = e["responses"].get<std::vector<std::string>>();
  } else {
    entry.responses = {e.at("response").get<std::string>()};
  }
  if (e.contains("digest")) {
    by_digest_[e["digest"].get<std::string>()] = std::move(entry);
  } else {
    by_key_[{e.at("task").get<std::string>(), e.value("key", "*")}] = std::move(entry);
  }
}

void MockLlmClient::add(const std::string& task, const std::string& key, std::string response) {
  std::lock_guard lock(mu_);
  by_key_[{task, key}] = Entry{{std::move(response)}, 0, std::nullopt};
}

void MockLlmClient::add_sequence(const std::string& task, const std::string& key, std::vector<std::string> responses) {
  std::lock_guard lock(mu_);
  by_key_[{task, key}] = Entry{std::move(responses), 0, std::nullopt};
}

void MockLlmClient::add_failure(const std::string& task, const std::string& key, std::string message) {
  std::lock_guard lock(mu_);
  by_key_[{task, key}] = Entry{{}, 0, std::move(message)};
}

void MockLlmClient::add_digest(const std::string& digest, std::string response) {
  std::lock_guard lock(mu_);
  by_digest_[digest] = Entry{{std::move(response)}, 0, std::nullopt};
}

std::string MockLlmClient::complete(const LlmRequest& request) {
  const std::string digest = request.digest();
  std::lock_guard lock(mu_);
  Entry* entry = nullptr;
  if (auto it = by_digest_.find(digest); it != by_digest_.end()) entry = &it->second;
  if (!entry) {
    if (auto it = by_key_.find({request.task, request.key}); it != by_key_.end()) entry = &it->second;
  }
  if (!entry) {
    if (auto it = by_key_.find({request.task, "*"}); it != by_key_.end()) entry = &it->second;
  }
  Call call{request.task, request.key, digest, false};
  if (!entry) {
    ledger_.push_back(call);
    throw Error(ErrorCode::ClientFailure, "no mock fixture for " + request.task + " / " + request.key);
  }
  if (entry->failure) {
    ledger_.push_back(call);
    throw Error(ErrorCode::ClientFailure, *entry->failure);
  }
  if (entry->responses.empty()) {
    ledger_.push_back(call);
    throw Error(ErrorCode::ClientFailure, "empty mock fixture for " + request.task);
  }
  std::size_t i = std::min(entry->next, entry->responses.size() - 1);
  entry->next++;
  call.ok = true;
  ledger_.push_back(call);
  return entry->responses[i];
}

std::vector<MockLlmClient::Call> MockLlmClient::ledger() const {
  std::lock_guard lock(mu_);
  return ledger_;
}

std::size_t MockLlmClient::calls() const {
  std::lock_guard lock(mu_);
  return ledger_.size();
}

std::size_t MockLlmClient::calls(const std::string& task) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(
      std::count_if(ledger_.begin(), ledger_.end(), [&](const Call& c) { return c.task == task; }));
}

RemoteLlmClient::RemoteLlmClient(std::string url, std::string api_key, std::string model)
    : key_(std::move(api_key)), model_(std::move(model)) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(ErrorCode::InvalidArgument, "LLM endpoint must be an http(s) URL");
  scheme_host_ = m[1];
  path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
}

std::string RemoteLlmClient::complete(const LlmRequest& request) {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", request.user}});
  for (const auto& img : request.images) {
    content.push_back({{"type", "image_url"},
                       {"image_url", {{"url", "data:" + img.mime + ";base64," + base64_encode(img.data)}}}});
  }
  json body = {{"model", model_},
               {"temperature", request.temperature},
               {"seed", request.seed},
               {"messages", {{{"role", "system"}, {"content", request.system}}, {{"role", "user"}, {"content", content}}}}};

  httplib::Client cli(scheme_host_);
  cli.set_connection_timeout(10);
  cli.set_read_timeout(180);
  httplib::Headers headers;
  if (!key_.empty()) headers.emplace("Authorization", "Bearer " + key_);
  auto res = cli.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::ClientFailure, "LLM endpoint unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw Error(ErrorCode::ClientFailure, "LLM endpoint returned HTTP " + std::to_string(res->status));
  }
  json reply = json::parse(res->body, nullptr, false);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ClientFailure, "LLM endpoint reply has no message content");
  }
}

std::shared_ptr<LlmClient> make_llm_client(const std::string& mode, const std::filesystem::path& fixtures) {
  const char* env_mode = std::getenv("EXR_LLM_MODE");
  std::string m = !mode.empty() ? mode : (env_mode ? env_mode : "");
  if (m == "mock") return MockLlmClient::from_file(fixtures);
  if (!m.empty() && m != "remote") throw Error(ErrorCode::InvalidArgument, "LLM mode must be mock or remote");
  const char* url = std::getenv("EXR_LLM_URL");
  if (!url || !*url) throw Error(ErrorCode::InvalidArgument, "set EXR_LLM_URL or use mock mode");
  const char* key = std::getenv("EXR_LLM_KEY");
  const char* model = std::getenv("EXR_LLM_MODEL");
  return std::make_shared<RemoteLlmClient>(url, key ? key : "", model ? model : "default");
}

PromptText render_prompt(const std::string& name, const std::map<std::string, std::string>& vars) {
  const auto& all = detail::embedded_prompts();
  auto it = all.find(name);
  if (it == all.end()) throw Error(ErrorCode::NotFound, "prompt template " + name);
  PromptText out;
  std::istringstream in(it->second);
  std::string line;
  std::string* part = &out.system;
  while (std::getline(in, line)) {
    if (line.rfind("#version ", 0) == 0) {
      out.version = std::atoi(line.c_str() + 9);
      continue;
    }
    if (!line.empty() && line[0] == '#') continue;
    if (line == "---") {
      part = &out.user;
      continue;
    }
    *part += line;
    *part += '\n';
  }
  for (auto* s : {&out.system, &out.user}) {
    for (const auto& [k, v] : vars) {
      const std::string needle = "{{" + k + "}}";
      for (auto p = s->find(needle); p != std::string::npos; p = s->find(needle, p + v.size())) s->replace(p, needle.size(), v);
    }
  }
  return out;
}

json parse_reply_json(const std::string& text) {
  std::string t = text;
  auto fence = t.find("```");
  if (fence != std::string::npos) {
    auto start = t.find('\n', fence);
    auto end = t.rfind("```");
    if (start != std::string::npos && end > start) t = t.substr(start + 1, end - start - 1);
  }
  return json::parse(t, nullptr, false);
}

}  // namespace exr
