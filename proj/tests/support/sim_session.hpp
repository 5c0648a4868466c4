#pragma once

#include <map>
#include <memory>
#include <string>

#include "exr/sim/generator.hpp"
#include "support/temp_dir.hpp"

namespace exr::test {

struct SimulatedSession {
  std::filesystem::path dir;
  nlohmann::json manifest;
  std::filesystem::path transcripts() const { return dir / "fixtures" / "transcripts"; }
};

/// Generates a preset once per process and reuses it. Callers must not
/// modify the directory.
inline const SimulatedSession& simulated(const std::string& preset, std::uint64_t seed = 42) {
  static TempDir root("exr-sim");
  static std::map<std::string, SimulatedSession> cache;
  std::string key = preset + "-" + std::to_string(seed);
  auto it = cache.find(key);
  if (it == cache.end()) {
    SimulatedSession s;
    s.dir = root / key;
    s.manifest = sim::generate_session(sim::load_scenario(preset), s.dir, {.seed = seed});
    it = cache.emplace(key, std::move(s)).first;
  }
  return it->second;
}

}  // namespace exr::test
