#include "exr/uad/session.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "exr/uad/digest.hpp"
#include "exr/uad/error.hpp"
#include "exr/uad/serialize.hpp"
#include "exr/uad/validate.hpp"

namespace exr {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void throw_write_error(const fs::path& p) {
  int err = errno;
  if (err == ENOSPC || err == EDQUOT) {
    throw Error(ErrorCode::StorageFull, p.string());
  }
  throw Error(ErrorCode::IoFailure, "cannot write " + p.string() + ": " + std::strerror(err));
}

std::string sanitize_stem(std::string_view stem) {
  std::string out;
  for (char c : stem) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '-' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? "asset" : out;
}

}  // namespace

Bytes read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + p.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const fs::path& p, std::span<const std::uint8_t> bytes) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  fs::path tmp = p;
  tmp += ".tmp";
  {
    errno = 0;
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_write_error(tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw_write_error(tmp);
  }
  fs::rename(tmp, p, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot rename onto " + p.string() + ": " + ec.message());
}

void write_file_atomic(const fs::path& p, std::string_view text) {
  write_file_atomic(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

int user_file_index(const std::vector<std::string>&, std::size_t position) {
  return static_cast<int>(position) + 1;
}

std::string asset_relpath(AssetKind kind, std::string_view stem, std::string_view sha256) {
  return "assets/" + std::string(sha256.substr(0, 16)) + "_" + sanitize_stem(stem) + "." +
         std::string(file_extension(kind));
}

const ActionRecord* SessionStore::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

Bytes SessionStore::read_asset(const std::string& path) const {
  auto it = assets.find(path);
  if (it == assets.end()) throw Error(ErrorCode::NotFound, "asset " + path);
  if (const auto* file = std::get_if<fs::path>(&it->second)) return read_file(*file);
  return *std::get<std::shared_ptr<const Bytes>>(it->second);
}

Bytes SessionStore::read_asset(const AssetRef& ref) const { return read_asset(ref.path); }

AssetRef SessionStore::add_asset(AssetKind kind, std::string_view stem, Bytes bytes) {
  AssetRef ref;
  ref.kind = kind;
  ref.sha256 = sha256_hex(bytes);
  ref.path = asset_relpath(kind, stem, ref.sha256);
  if (!assets.contains(ref.path)) {
    assets.emplace(ref.path, std::make_shared<const Bytes>(std::move(bytes)));
  }
  return ref;
}

SessionStore read_session(const fs::path& dir) {
  SessionStore store;
  auto meta_text = read_file(dir / "meta.json");
  auto meta_json = ojson::parse(meta_text.begin(), meta_text.end(), nullptr, false);
  if (meta_json.is_discarded()) throw Error(ErrorCode::MalformedRecord, "meta.json is not JSON");
  store.meta = meta_from_json(meta_json);

  std::vector<std::pair<int, fs::path>> files;
  std::error_code ec;
  if (fs::is_directory(dir / "users", ec)) {
    for (const auto& entry : fs::directory_iterator(dir / "users")) {
      auto name = entry.path().filename().string();
      if (name.rfind("user_", 0) != 0 || entry.path().extension() != ".jsonl") continue;
      int n = std::atoi(name.c_str() + 5);
      files.emplace_back(n, entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::map<std::string, std::vector<ActionRecord>> by_user;
  std::vector<std::string> file_order;
  for (const auto& [n, path] : files) {
    std::ifstream in(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      ActionRecord r;
      try {
        r = parse_record_line(line);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::SchemaVersionUnsupported) throw;
        throw Error(ErrorCode::MalformedRecord,
                    path.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
      if (!by_user.contains(r.user)) file_order.push_back(r.user);
      by_user[r.user].push_back(std::move(r));
    }
  }

  std::vector<std::string> users = store.meta.users;
  for (const auto& u : file_order) {
    if (std::find(users.begin(), users.end(), u) == users.end()) users.push_back(u);
  }
  store.meta.users = users;
  for (const auto& u : users) {
    auto it = by_user.find(u);
    if (it == by_user.end()) continue;
    for (auto& r : it->second) store.records.push_back(std::move(r));
  }

  for (const auto& r : store.records) {
    for (const auto* list : {&r.referent, &r.context}) {
      for (const auto& a : *list) {
        if (store.assets.contains(a.path)) continue;
        if (!is_session_relative(a.path)) {
          throw Error(ErrorCode::CorruptAsset, a.path + " is not session-relative");
        }
        fs::path p = dir / a.path;
        if (!fs::exists(p)) throw Error(ErrorCode::CorruptAsset, a.path + " is missing");
        if (sha256_hex(read_file(p)) != a.sha256) {
          throw Error(ErrorCode::CorruptAsset, a.path + " digest mismatch");
        }
        store.assets.emplace(a.path, p);
      }
    }
  }

  if (fs::exists(dir / "alias_map.json")) {
    auto text = read_file(dir / "alias_map.json");
    store.aliases = parse_alias_map(std::string(text.begin(), text.end()));
  }
  return store;
}

void write_session(const SessionStore& store, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "users", ec);
  fs::create_directories(dir / "assets", ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());

  // Assets first so that no written record ever references a missing file.
  for (const auto& [rel, source] : store.assets) {
    fs::path target = dir / rel;
    if (const auto* file = std::get_if<fs::path>(&source)) {
      if (fs::exists(target) && fs::equivalent(*file, target, ec)) continue;
    }
    if (fs::exists(target)) continue;  // content-addressed: same name, same bytes
    write_file_atomic(target, store.read_asset(rel));
  }

  std::set<std::string> written;
  const auto& users = store.meta.users;
  for (std::size_t i = 0; i < users.size(); ++i) {
    std::ostringstream out;
    for (const auto& r : store.records) {
      if (r.user == users[i]) out << dump_record_line(r) << '\n';
    }
    auto name = "user_" + std::to_string(user_file_index(users, i)) + ".jsonl";
    write_file_atomic(dir / "users" / name, out.str());
    written.insert(name);
  }
  for (const auto& entry : fs::directory_iterator(dir / "users")) {
    auto name = entry.path().filename().string();
    if (entry.path().extension() == ".jsonl" && !written.contains(name)) fs::remove(entry.path(), ec);
  }

  write_file_atomic(dir / "meta.json", dump_meta(store.meta));
  if (!store.aliases.empty()) write_file_atomic(dir / "alias_map.json", dump_alias_map(store.aliases));
}

}  // namespace exr
