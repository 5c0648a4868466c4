#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "exr/context3d/capture.hpp"
#include "exr/context3d/glb.hpp"
#include "exr/uad/record.hpp"
#include "exr/uad/session.hpp"

namespace exr {

using ActionId = std::string;

/// An RGB-D snapshot taken at action time. Encoded to PNG/PNG16/JSON
/// sidecars by the recorder.
using CapturePayload = ContextCapture;

struct ReferentPayload {
  std::string name;
  /// Virtual object, converted to GLB on the logging path.
  std::optional<TriangleMesh> model;
  /// Pre-encoded GLB bytes.
  std::optional<Bytes> glb;
  /// Snapshot of a physical object.
  std::optional<RgbImage> snapshot;
};

/// Arguments of one Log call, mirroring the descriptor fields.
struct LogRequest {
  std::string name;
  ActionType type = ActionType::Discrete;
  std::string intent;
  std::string user;
  std::vector<Transform> location;
  std::string trigger_source;
  Timestamp start_time;
  TimeDelta duration;
  std::optional<ReferentPayload> referent;
  RealityType referent_type = RealityType::Virtual;
  std::vector<Transform> referent_location;
  std::vector<CapturePayload> context;
  RealityType context_type = RealityType::Virtual;
  /// Optional voice clip (WAV) attached to the action context.
  std::optional<Bytes> audio;
};

struct RecorderOptions {
  std::filesystem::path session_dir;
  std::string session_id;
  std::string app_name;
  Virtuality virtuality = Virtuality::VR;
  /// Defer asset encoding and record appends to a background lane; log()
  /// then only enqueues. finalize() blocks until everything is written.
  bool async = false;
};

/// Append-only session writer. Each user gets `users/user_<N>.jsonl` (N in
/// order of first appearance); assets go to content-addressed sidecars.
class Recorder {
 public:
  Recorder();
  explicit Recorder(RecorderOptions options);
  ~Recorder();
  Recorder(Recorder&&) noexcept;
  Recorder& operator=(Recorder&&) noexcept;

  /// Throws UninitializedLogger, MalformedRecord (validation failure),
  /// StorageFull, SerializationFailure. In async mode write errors surface
  /// from finalize().
  ActionId log(LogRequest request);

  /// Drains the background lane and writes meta.json. Idempotent.
  void finalize();

  bool initialized() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Resamples a continuous action's locations at a fixed interval over its
/// duration, assuming the stored samples are evenly spaced.
std::vector<Transform> resample_locations(const ActionRecord& r, std::int64_t interval_ms);

}  // namespace exr
