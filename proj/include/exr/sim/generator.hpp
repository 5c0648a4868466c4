#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "exr/uad/image.hpp"
#include "exr/uad/session.hpp"

namespace exr::sim {

inline constexpr const char* kPresetNames[] = {"a1_vr_game", "a2_mr_selection", "a3_ar_markers",
                                               "a4_ar_collab", "a5_ar_inspection"};

/// Directory holding the preset scripts: $EXR_SCENARIO_DIR, else the one
/// baked in at build time.
std::filesystem::path default_scenario_dir();

/// Accepts `a1`..`a5`, a full preset name, or a path to a JSON script.
nlohmann::json load_scenario(const std::string& name_or_path,
                             const std::filesystem::path& scenario_dir = default_scenario_dir());

struct GenerateOptions {
  std::uint64_t seed = 42;
  /// Keep only the first N scripted users.
  std::optional<int> users;
};

/// Writes the session directory (raw, not yet anonymized) plus
/// `manifest.json` and `fixtures/` next to it, and returns the manifest.
/// Identical script + seed gives byte-identical output. Throws IoFailure,
/// InvalidArgument for malformed scripts.
nlohmann::json generate_session(const nlohmann::json& script, const std::filesystem::path& out,
                                const GenerateOptions& opts = {});

/// Deterministic 16-bit mono PCM WAV tone.
Bytes synth_wav(double seconds, double frequency_hz, int sample_rate = 16000);

/// Flat-colored snapshot with a per-name stripe pattern.
RgbImage object_snapshot(const std::string& name, const std::array<std::uint8_t, 3>& color);

}  // namespace exr::sim
