#pragma once

#include <optional>
#include <string>

#include "exr/insight/llm.hpp"
#include "exr/uad/session.hpp"

namespace exr {

struct Classification {
  std::string label;
  double confidence = 0;
};

/// Asks the client for the object class in a referent snapshot. An
/// unparseable reply is retried once. Throws ClientFailure,
/// UnparseableResponse.
Classification classify_image(const Bytes& png, const std::string& action, LlmClient& client);

/// `couch@0.92`: confidence with at most two decimals, trailing zeros
/// dropped.
std::string classified_name(const Classification& c);

enum class StepStatus { Applied, Skipped, Failed };

/// Physical referents with a snapshot get `<label>@<confidence>` as their
/// name. Failures leave the record unclassified with a diagnostic.
StepStatus classify_referent(ActionRecord& r, const SessionStore& store, LlmClient& client);

/// Records with an RGB context capture get a context description. Images
/// are attached only for multimodal clients.
StepStatus describe_context(ActionRecord& r, const SessionStore& store, LlmClient& client);

/// `PostDefined` intents are replaced by an estimate from the transcript
/// and context, and flagged. Failures keep the sentinel and flag the record.
StepStatus estimate_intent(ActionRecord& r, const SessionStore& store, LlmClient& client);

/// Transcript text attached to a record, if any.
std::optional<std::string> transcript_of(const ActionRecord& r, const SessionStore& store);

}  // namespace exr
