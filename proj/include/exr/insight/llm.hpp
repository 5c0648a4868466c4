#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exr/uad/session.hpp"

namespace exr {

struct LlmImage {
  std::string mime = "image/png";
  Bytes data;
};

struct LlmRequest {
  /// Routing metadata: which step issued the request and for what (record
  /// id, image digest, agent name). Not sent to remote backends.
  std::string task;
  std::string key;

  std::string system;
  std::string user;
  std::vector<LlmImage> images;
  double temperature = 0.0;
  std::uint64_t seed = 42;

  /// sha256 over the content fields (not task/key).
  std::string digest() const;
};

/// Chat-style completion. Implementations are thread-safe. Throws
/// ClientFailure.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const LlmRequest& request) = 0;
  virtual bool multimodal() const { return false; }
};

/// Replays fixtures. Lookup order: request digest, then (task, key), then
/// (task, "*"). An entry holds `response`, a `responses` list consumed in
/// order (the last one repeats), or `fail` (a message raised as
/// ClientFailure). Unknown requests fail with ClientFailure.
class MockLlmClient : public LlmClient {
 public:
  struct Call {
    std::string task, key, digest;
    bool ok = false;
  };

  MockLlmClient() = default;
  explicit MockLlmClient(const nlohmann::json& fixtures);
  static std::shared_ptr<MockLlmClient> from_file(const std::filesystem::path& path);

  void add(const std::string& task, const std::string& key, std::string response);
  void add_sequence(const std::string& task, const std::string& key, std::vector<std::string> responses);
  void add_failure(const std::string& task, const std::string& key, std::string message = "injected failure");
  void add_digest(const std::string& digest, std::string response);

  std::string complete(const LlmRequest& request) override;

  std::vector<Call> ledger() const;
  std::size_t calls() const;
  std::size_t calls(const std::string& task) const;

 private:
  struct Entry {
    std::vector<std::string> responses;
    std::size_t next = 0;
    std::optional<std::string> failure;
  };
  void add_entry(const nlohmann::json& e);

  mutable std::mutex mu_;
  std::map<std::string, Entry> by_digest_;
  std::map<std::pair<std::string, std::string>, Entry> by_key_;
  std::vector<Call> ledger_;
};

/// Chat-completions over HTTP(S). The endpoint URL includes the path.
class RemoteLlmClient : public LlmClient {
 public:
  RemoteLlmClient(std::string url, std::string api_key, std::string model = "default");
  std::string complete(const LlmRequest& request) override;
  bool multimodal() const override { return true; }

 private:
  std::string scheme_host_, path_, key_, model_;
};

/// `mode` "mock" (or EXR_LLM_MODE=mock) replays `fixtures`; otherwise
/// EXR_LLM_URL / EXR_LLM_KEY select the remote client. Throws
/// InvalidArgument when neither is configured.
std::shared_ptr<LlmClient> make_llm_client(const std::string& mode, const std::filesystem::path& fixtures);

/// Prompt templates from prompts/*.txt: `#` lines are comments, `---`
/// separates the system part from the user part, `{{name}}` is replaced.
struct PromptText {
  std::string system, user;
  int version = 0;
};
PromptText render_prompt(const std::string& name, const std::map<std::string, std::string>& vars);

/// Strips a Markdown code fence around a JSON reply and parses it; returns
/// a discarded value when the text is not JSON.
nlohmann::json parse_reply_json(const std::string& text);

}  // namespace exr
