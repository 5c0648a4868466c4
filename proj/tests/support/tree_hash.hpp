#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "exr/uad/digest.hpp"
#include "exr/uad/session.hpp"

namespace exr::test {

/// Relative path -> sha256 of every regular file below `dir`.
inline std::map<std::string, std::string> tree_hash(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      out[std::filesystem::relative(e.path(), dir).generic_string()] = sha256_hex(read_file(e.path()));
    }
  }
  return out;
}

}  // namespace exr::test
