#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace exr {

/// Speech-to-text: one audio file in, one transcript out. Implementations
/// must be callable from several threads at once. Throws
/// TranscriberUnavailable.
class Transcriber {
 public:
  virtual ~Transcriber() = default;
  virtual std::string transcribe(const std::filesystem::path& audio_file) = 0;
};

/// Reads `<audio>.expected.txt` next to the file, then
/// `<dir>/<audio filename>.expected.txt` for each fixture directory.
class MockTranscriber : public Transcriber {
 public:
  explicit MockTranscriber(std::vector<std::filesystem::path> fixture_dirs = {});
  std::string transcribe(const std::filesystem::path& audio_file) override;

 private:
  std::vector<std::filesystem::path> dirs_;
};

}  // namespace exr
