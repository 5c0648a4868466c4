#include "exr/insight/steps.hpp"

#include <cmath>
#include <cstdio>

#include "exr/uad/digest.hpp"
#include "exr/uad/error.hpp"

namespace exr {

namespace {

std::string trim(std::string s) {
  const char* ws = " \t\r\n\"'";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::optional<Classification> parse_classification(const std::string& text) {
  auto j = parse_reply_json(text);
  if (!j.is_object() || !j.contains("label") || !j["label"].is_string() || !j.contains("confidence") ||
      !j["confidence"].is_number()) {
    return std::nullopt;
  }
  Classification c{trim(j["label"].get<std::string>()), j["confidence"].get<double>()};
  if (c.label.empty() || c.label.find('@') != std::string::npos || !(c.confidence >= 0 && c.confidence <= 1)) {
    return std::nullopt;
  }
  return c;
}

std::string referent_summary(const ActionRecord& r) {
  if (r.referent_name.empty()) return "none";
  return r.referent_name + " (" + std::string(to_string(r.referent_type)) + ")";
}

void flag(ActionRecord& r, const std::string& step, const std::exception& e) {
  r.processing.diagnostics.push_back(step + ": " + e.what());
}

}  // namespace

Classification classify_image(const Bytes& png, const std::string& action, LlmClient& client) {
  auto prompt = render_prompt("classify_referent", {{"action", action}});
  LlmRequest req;
  req.task = "classify_referent";
  req.key = sha256_hex(png);
  req.system = prompt.system;
  req.user = prompt.user;
  req.images.push_back({"image/png", png});
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (auto c = parse_classification(client.complete(req))) return *c;
  }
  throw Error(ErrorCode::UnparseableResponse, "classification reply is not {label, confidence}");
}

std::string classified_name(const Classification& c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", c.confidence);
  std::string conf = buf;
  while (conf.back() == '0') conf.pop_back();
  if (conf.back() == '.') conf.pop_back();
  return c.label + "@" + conf;
}

StepStatus classify_referent(ActionRecord& r, const SessionStore& store, LlmClient& client) {
  if (r.referent_type != RealityType::Physical || r.processing.referent_classified) return StepStatus::Skipped;
  const auto* img = r.find_referent(AssetKind::ReferentImage);
  if (!img) return StepStatus::Skipped;
  try {
    auto c = classify_image(store.read_asset(*img), r.name, client);
    r.referent_name = classified_name(c);
    r.processing.referent_classified = true;
    return StepStatus::Applied;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ClientFailure && e.code() != ErrorCode::UnparseableResponse) throw;
    flag(r, "unclassified", e);
    return StepStatus::Failed;
  }
}

StepStatus describe_context(ActionRecord& r, const SessionStore& store, LlmClient& client) {
  auto rgb = r.context_assets(AssetKind::ContextRGB);
  if (rgb.empty()) return StepStatus::Skipped;
  std::string note = client.multimodal() ? "The viewpoint snapshots are attached."
                                         : "No images are attached; describe what the listed fields imply.";
  auto prompt = render_prompt("describe_context", {{"action", r.name},
                                                   {"user", r.user},
                                                   {"intent", r.intent},
                                                   {"referent", referent_summary(r)},
                                                   {"captures", std::to_string(rgb.size())},
                                                   {"image_note", note}});
  LlmRequest req;
  req.task = "describe_context";
  req.key = r.id;
  req.system = prompt.system;
  req.user = prompt.user;
  try {
    if (client.multimodal()) {
      for (const auto* a : rgb) req.images.push_back({"image/png", store.read_asset(*a)});
    }
    auto text = trim(client.complete(req));
    if (text.empty()) throw Error(ErrorCode::UnparseableResponse, "empty description");
    r.context_description = text;
    return StepStatus::Applied;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ClientFailure && e.code() != ErrorCode::UnparseableResponse) throw;
    r.context_description.reset();
    flag(r, "describe_context", e);
    return StepStatus::Failed;
  }
}

std::optional<std::string> transcript_of(const ActionRecord& r, const SessionStore& store) {
  auto refs = r.context_assets(AssetKind::AudioTranscript);
  if (refs.empty()) return std::nullopt;
  auto bytes = store.read_asset(*refs.front());
  return std::string(bytes.begin(), bytes.end());
}

StepStatus estimate_intent(ActionRecord& r, const SessionStore& store, LlmClient& client) {
  if (r.intent != kPostDefinedIntent) return StepStatus::Skipped;
  auto transcript = transcript_of(r, store);
  auto prompt = render_prompt("estimate_intent", {{"action", r.name},
                                                  {"user", r.user},
                                                  {"referent", referent_summary(r)},
                                                  {"context", r.context_description.value_or("not described")},
                                                  {"transcript", transcript.value_or("none")}});
  LlmRequest req;
  req.task = "estimate_intent";
  req.key = r.id;
  req.system = prompt.system;
  req.user = prompt.user;
  try {
    auto text = trim(client.complete(req));
    if (text.empty() || text == kPostDefinedIntent) throw Error(ErrorCode::UnparseableResponse, "no intent in reply");
    r.intent = text;
    r.processing.intent_estimated = true;
    return StepStatus::Applied;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ClientFailure && e.code() != ErrorCode::UnparseableResponse) throw;
    flag(r, "estimate_intent", e);
    return StepStatus::Failed;
  }
}

}  // namespace exr
