#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>

#include "exr/context3d/reconstruct.hpp"
#include "exr/insight/llm.hpp"

namespace exr {

/// Pipeline steps in their fixed order; each name doubles as the per-record
/// done-marker.
inline constexpr std::array<std::string_view, 4> kProcessSteps = {"context", "classify", "describe", "intent"};

struct StepCounts {
  std::size_t applied = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
  std::size_t already_done = 0;
};

struct ProcessOptions {
  ReconstructOptions reconstruct;
  /// Called after a step's results are on disk. Used for crash injection.
  std::function<void(std::string_view step)> after_step;
};

struct ProcessSummary {
  std::map<std::string, StepCounts, std::less<>> steps;
  /// False when every record already carried every marker (nothing written).
  bool changed = false;
};

/// Runs the steps over the session at `dir`, persisting after each one.
/// Records already marked for a step are left alone, so re-running after an
/// interruption resumes and a second full run is a no-op. A step that fails
/// on a record still marks it done; the diagnostic stays on the record.
ProcessSummary process_session(const std::filesystem::path& dir, LlmClient& client, const ProcessOptions& opts = {});

}  // namespace exr

namespace exr {

/// Where the CLI keeps insight reports and judge scores inside a session.
inline std::filesystem::path insights_report_path(const std::filesystem::path& session, std::string_view mode) {
  return session / "insights" / (std::string(mode) + ".json");
}
inline std::filesystem::path eval_report_path(const std::filesystem::path& session) {
  return session / "insights" / "eval.json";
}

}  // namespace exr
