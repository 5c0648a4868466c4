#pragma once

#include <string>
#include <vector>

#include "exr/uad/record.hpp"

namespace exr {

struct Violation {
  std::string field;
  std::string rule;
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool accepted() const { return violations.empty(); }
  bool has(std::string_view field) const;
};

struct ValidationOptions {
  /// After ingest every user must be a `UserN` alias.
  bool require_alias = false;
};

ValidationReport validate_record(const ActionRecord& r, const ValidationOptions& opts = {});

/// Session-relative, forward-slash path without `..` components.
bool is_session_relative(std::string_view path);

}  // namespace exr
