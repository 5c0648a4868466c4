#include "exr/service/process.hpp"

#include "exr/insight/steps.hpp"
#include "exr/uad/error.hpp"

namespace exr {

namespace {

StepStatus run_step(std::string_view step, ActionRecord& r, SessionStore& store, LlmClient& client,
                    const ProcessOptions& opts) {
  if (step == "classify") return classify_referent(r, store, client);
  if (step == "describe") return describe_context(r, store, client);
  if (step == "intent") return estimate_intent(r, store, client);

  if (capture_indices(r).empty()) return StepStatus::Skipped;
  auto result = reconstruct_context(r, store, opts.reconstruct);
  for (const auto& d : result.diagnostics) result.record.processing.diagnostics.push_back("context: " + d);
  r = std::move(result.record);
  return result.cloud ? StepStatus::Applied : StepStatus::Failed;
}

}  // namespace

ProcessSummary process_session(const std::filesystem::path& dir, LlmClient& client, const ProcessOptions& opts) {
  SessionStore store = read_session(dir);
  ProcessSummary summary;
  for (auto step : kProcessSteps) {
    auto& counts = summary.steps[std::string(step)];
    bool dirty = false;
    for (auto& r : store.records) {
      if (r.processing.has(step)) {
        counts.already_done++;
        continue;
      }
      switch (run_step(step, r, store, client, opts)) {
        case StepStatus::Applied: counts.applied++; break;
        case StepStatus::Skipped: counts.skipped++; break;
        case StepStatus::Failed: counts.failed++; break;
      }
      r.processing.done.emplace_back(step);
      dirty = true;
    }
    if (dirty) {
      write_session(store, dir);
      summary.changed = true;
    }
    if (opts.after_step) opts.after_step(step);
  }
  return summary;
}

}  // namespace exr
