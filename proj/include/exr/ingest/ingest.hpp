#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>

#include "exr/ingest/transcriber.hpp"
#include "exr/uad/session.hpp"

namespace exr {

struct IngestConfig {
  bool anonymize = true;
  /// Records with audio clips get transcripts through this. When null they
  /// are marked transcript_missing.
  std::shared_ptr<Transcriber> transcriber;
  /// Resample continuous actions to this interval.
  std::optional<std::int64_t> resample_ms;
  int transcribe_parallelism = 4;
};

/// Reads a raw session directory and prepares it for analysis: users become
/// User1..UserN by first start time, identity strings are scrubbed, records
/// are sorted (stably) by start time within each user and audio clips are
/// transcribed. Transcriber failures are recorded on the record, not thrown.
SessionStore ingest_directory(const std::filesystem::path& dir, const IngestConfig& cfg = {});

/// Same as ingest_directory on an already loaded store.
SessionStore ingest_store(SessionStore store, const IngestConfig& cfg = {});

/// Replaces every occurrence of each identity (case-insensitive) with its
/// alias.
std::string scrub_identities(std::string text, const AliasMap& aliases);

enum class RebaseMode {
  /// Keep all timestamps.
  None,
  /// Shift each later session so it starts when the first one starts.
  Origin,
};

struct MergeOptions {
  RebaseMode rebase = RebaseMode::None;
};

/// Concatenates sessions. Users are renumbered User1..UserN in input order;
/// record ids colliding with an earlier session get an `M<k>-` prefix. The
/// alias map keys are `<sessionId>/<identity>`. Throws VersionMismatch.
SessionStore merge_sessions(std::span<const SessionStore> stores, const MergeOptions& opts = {});

}  // namespace exr
