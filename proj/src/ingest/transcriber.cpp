#include "exr/ingest/transcriber.hpp"

#include <fstream>
#include <sstream>

#include "exr/uad/error.hpp"

namespace exr {

MockTranscriber::MockTranscriber(std::vector<std::filesystem::path> fixture_dirs) : dirs_(std::move(fixture_dirs)) {}

std::string MockTranscriber::transcribe(const std::filesystem::path& audio_file) {
  std::vector<std::filesystem::path> candidates{audio_file.string() + ".expected.txt"};
  for (const auto& d : dirs_) candidates.push_back(d / (audio_file.filename().string() + ".expected.txt"));
  for (const auto& c : candidates) {
    std::ifstream in(c, std::ios::binary);
    if (!in) continue;
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
  }
  throw Error(ErrorCode::TranscriberUnavailable, "no transcript fixture for " + audio_file.filename().string());
}

}  // namespace exr
