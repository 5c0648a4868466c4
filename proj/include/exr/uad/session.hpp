#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "exr/uad/record.hpp"

namespace exr {

using Bytes = std::vector<std::uint8_t>;

/// Where an asset's bytes live: a file on disk or an in-memory buffer
/// produced during processing.
using AssetSource = std::variant<std::filesystem::path, std::shared_ptr<const Bytes>>;

/// All users' records plus assets for one session. Records are grouped by
/// user in `meta.users` order and, within a user, kept in stored order.
struct SessionStore {
  SessionMeta meta;
  std::vector<ActionRecord> records;
  AliasMap aliases;
  std::map<std::string, AssetSource> assets;  // session-relative path -> source

  const ActionRecord* find(std::string_view id) const;
  Bytes read_asset(const AssetRef& ref) const;
  Bytes read_asset(const std::string& path) const;
  bool has_asset(const std::string& path) const { return assets.contains(path); }

  /// Registers new content under its content-addressed path; returns the ref.
  AssetRef add_asset(AssetKind kind, std::string_view stem, Bytes bytes);

  friend bool operator==(const SessionStore& a, const SessionStore& b) {
    return a.meta == b.meta && a.records == b.records && a.aliases == b.aliases;
  }
};

/// `assets/<first 16 hex of sha256>_<stem>.<ext>`
std::string asset_relpath(AssetKind kind, std::string_view stem, std::string_view sha256);

/// Throws CorruptAsset (digest mismatch or missing file, naming the path),
/// SchemaVersionUnsupported, MalformedRecord, IoFailure.
SessionStore read_session(const std::filesystem::path& dir);

/// Writes meta.json, users/user_<N>.jsonl, assets/ and alias_map.json. Each
/// file is replaced atomically. Throws StorageFull / IoFailure.
void write_session(const SessionStore& store, const std::filesystem::path& dir);

/// Bytes helpers with the library's error mapping.
Bytes read_file(const std::filesystem::path& p);
void write_file_atomic(const std::filesystem::path& p, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& p, std::string_view text);

/// File index N used for `users/user_<N>.jsonl`: the 1-based position in
/// `users`. After ingest users are ordered User1..UserN, so N is the alias.
int user_file_index(const std::vector<std::string>& users, std::size_t position);

}  // namespace exr
