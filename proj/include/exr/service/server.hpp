#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "exr/ingest/view.hpp"

namespace exr {

enum class ApiErrorCode { NotFound, BadFilter, Processing, Internal };
std::string_view to_string(ApiErrorCode c);

/// Body of every non-2xx response.
struct ApiError {
  ApiErrorCode code = ApiErrorCode::Internal;
  std::string message;
  std::string detail;
  int status = 500;

  nlohmann::json to_json() const;
};

struct ServerOptions {
  /// A session directory, or a directory whose children are sessions.
  std::filesystem::path root;
  std::string host = "0.0.0.0";
  int port = 8080;  // 0 picks a free port
  std::string cors_origin = "*";
  std::optional<std::filesystem::path> static_dir;
  /// LLM backend for insight jobs: "mock" or "remote"; empty follows EXR_LLM_MODE.
  std::string llm_mode;
  /// Mock fixtures used when a session has no fixtures/llm.json of its own.
  std::optional<std::filesystem::path> fixtures;
};

/// Records of a view as served by the actions endpoint: the stored form plus
/// `transcript` when one is attached.
nlohmann::ordered_json actions_json(const SessionView& view);

/// Read-only HTTP projection of processed sessions. Sessions whose subjects
/// are not aliased are never served.
class ApiServer {
 public:
  explicit ApiServer(ServerOptions options);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds the socket; returns the port. Throws IoFailure.
  int bind();
  /// Serves until stop(). Call bind() first.
  void run();
  void stop();
  /// Blocks until no insight job is running.
  void wait_for_jobs();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace exr
