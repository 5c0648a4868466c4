#include "exr/ingest/ingest.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <map>
#include <set>
#include <thread>

#include "exr/uad/error.hpp"
#include "exr/uad/recorder.hpp"

namespace exr {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool all_aliased(const SessionStore& s) {
  for (const auto& u : s.meta.users) {
    if (!is_user_alias(u)) return false;
  }
  for (const auto& r : s.records) {
    if (!is_user_alias(r.user)) return false;
  }
  return true;
}

// Identities ordered by first start time; users without records keep their
// meta order after those with records.
std::vector<std::string> first_appearance(const SessionStore& s) {
  std::vector<std::string> order;
  std::map<std::string, std::int64_t> first;
  for (const auto& r : s.records) {
    auto t = r.start_time.unix_millis();
    auto [it, fresh] = first.emplace(r.user, t);
    if (fresh) order.push_back(r.user);
    else it->second = std::min(it->second, t);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string& a, const std::string& b) { return first[a] < first[b]; });
  for (const auto& u : s.meta.users) {
    if (!first.contains(u)) order.push_back(u);
  }
  return order;
}

void scrub_record(ActionRecord& r, const AliasMap& aliases) {
  for (auto* s : {&r.name, &r.intent, &r.trigger_source, &r.referent_name}) *s = scrub_identities(*s, aliases);
  if (r.context_description) r.context_description = scrub_identities(*r.context_description, aliases);
  for (auto& d : r.processing.diagnostics) d = scrub_identities(d, aliases);
}

struct TranscriptJob {
  std::size_t record = 0;
  fs::path audio;
  std::string text;
  std::string error;
};

void transcribe_all(SessionStore& store, const IngestConfig& cfg, const AliasMap& aliases) {
  std::vector<TranscriptJob> jobs;
  for (std::size_t i = 0; i < store.records.size(); ++i) {
    const auto& r = store.records[i];
    auto clips = r.context_assets(AssetKind::AudioClip);
    if (clips.empty() || !r.context_assets(AssetKind::AudioTranscript).empty()) continue;
    TranscriptJob job;
    job.record = i;
    auto it = store.assets.find(clips.front()->path);
    if (it != store.assets.end()) {
      if (const auto* p = std::get_if<fs::path>(&it->second)) job.audio = *p;
    }
    if (job.audio.empty()) job.error = "audio clip " + clips.front()->path + " is not on disk";
    jobs.push_back(std::move(job));
  }
  if (jobs.empty()) return;

  if (cfg.transcriber) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t k; (k = next.fetch_add(1)) < jobs.size();) {
        auto& job = jobs[k];
        if (!job.error.empty()) continue;
        try {
          job.text = cfg.transcriber->transcribe(job.audio);
        } catch (const std::exception& e) {
          job.error = e.what();
        }
      }
    };
    std::size_t n = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, cfg.transcribe_parallelism)), 1,
                                            jobs.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  } else {
    for (auto& job : jobs) {
      if (job.error.empty()) job.error = "no transcriber configured";
    }
  }

  std::sort(jobs.begin(), jobs.end(),
            [&](const auto& a, const auto& b) { return store.records[a.record].id < store.records[b.record].id; });
  for (auto& job : jobs) {
    auto& r = store.records[job.record];
    if (!job.error.empty()) {
      r.processing.transcript_missing = true;
      std::string msg = job.error;
      if (msg.rfind("TranscriberUnavailable", 0) != 0) msg = "TranscriberUnavailable: " + msg;
      r.processing.diagnostics.push_back(scrub_identities(msg, aliases));
      continue;
    }
    std::string text = scrub_identities(job.text, aliases);
    r.context.push_back(store.add_asset(AssetKind::AudioTranscript, r.id + "_transcript", Bytes(text.begin(), text.end())));
    r.processing.transcript_missing = false;
  }
}

}  // namespace

std::string scrub_identities(std::string text, const AliasMap& aliases) {
  std::vector<std::pair<std::string, std::string>> subs;
  for (const auto& [from, to] : aliases) {
    if (!from.empty() && from != to) subs.emplace_back(from, to);
  }
  // Longest first so an identity that contains another is replaced whole.
  std::stable_sort(subs.begin(), subs.end(), [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  for (const auto& [from, to] : subs) {
    std::string hay = lower(text);
    std::string needle = lower(from);
    std::string out;
    std::size_t pos = 0;
    for (std::size_t hit; (hit = hay.find(needle, pos)) != std::string::npos; pos = hit + needle.size()) {
      out.append(text, pos, hit - pos);
      out += to;
    }
    if (pos == 0) continue;
    out.append(text, pos, std::string::npos);
    text = std::move(out);
  }
  return text;
}

SessionStore ingest_store(SessionStore store, const IngestConfig& cfg) {
  if (cfg.resample_ms && *cfg.resample_ms <= 0) {
    throw Error(ErrorCode::InvalidArgument, "resample interval must be positive");
  }

  AliasMap aliases;
  if (cfg.anonymize && !all_aliased(store)) {
    auto order = first_appearance(store);
    for (std::size_t i = 0; i < order.size(); ++i) aliases[order[i]] = "User" + std::to_string(i + 1);
    for (auto& r : store.records) {
      r.user = aliases.at(r.user);
      scrub_record(r, aliases);
    }
    store.meta.users.clear();
    for (const auto& u : order) store.meta.users.push_back(aliases.at(u));
    store.meta.session_id = scrub_identities(store.meta.session_id, aliases);
    store.meta.app_name = scrub_identities(store.meta.app_name, aliases);
    store.aliases = aliases;
  } else if (cfg.anonymize) {
    if (store.aliases.empty()) {
      for (const auto& u : store.meta.users) store.aliases[u] = u;
    }
    aliases = store.aliases;
  }

  // Group by user (meta order), stable by start time within a user.
  std::map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < store.meta.users.size(); ++i) rank.emplace(store.meta.users[i], i);
  for (const auto& r : store.records) {
    if (!rank.contains(r.user)) {
      rank.emplace(r.user, store.meta.users.size());
      store.meta.users.push_back(r.user);
    }
  }
  std::stable_sort(store.records.begin(), store.records.end(), [&](const ActionRecord& a, const ActionRecord& b) {
    auto ra = rank.at(a.user), rb = rank.at(b.user);
    if (ra != rb) return ra < rb;
    return a.start_time < b.start_time;
  });

  if (cfg.resample_ms) {
    for (auto& r : store.records) r.location = resample_locations(r, *cfg.resample_ms);
  }
  transcribe_all(store, cfg, aliases);
  return store;
}

SessionStore ingest_directory(const fs::path& dir, const IngestConfig& cfg) {
  return ingest_store(read_session(dir), cfg);
}

SessionStore merge_sessions(std::span<const SessionStore> stores, const MergeOptions& opts) {
  std::vector<const SessionStore*> inputs;
  for (const auto& s : stores) {
    if (!s.records.empty() || !s.meta.users.empty()) inputs.push_back(&s);
  }
  if (inputs.empty()) return stores.empty() ? SessionStore{} : stores.front();
  for (const auto* s : inputs) {
    if (s->meta.uad_version != inputs.front()->meta.uad_version) {
      throw Error(ErrorCode::VersionMismatch,
                  s->meta.session_id + " has version " + s->meta.uad_version + ", expected " +
                      inputs.front()->meta.uad_version);
    }
  }
  if (inputs.size() == 1) return *inputs.front();

  SessionStore out;
  out.meta = inputs.front()->meta;
  out.meta.users.clear();
  std::vector<std::string> ids, apps;
  std::set<std::string> used_ids;
  const auto origin = inputs.front()->meta.recording_start.unix_millis();
  bool first = true;
  int k = 0;
  for (const auto* s : inputs) {
    ++k;
    std::int64_t shift = opts.rebase == RebaseMode::Origin ? origin - s->meta.recording_start.unix_millis() : 0;
    std::map<std::string, std::string> renamed;
    for (const auto& u : s->meta.users) {
      std::string alias = "User" + std::to_string(out.meta.users.size() + 1);
      renamed[u] = alias;
      out.meta.users.push_back(alias);
      std::string original = u;
      for (const auto& [raw, a] : s->aliases) {
        if (a == u) original = raw;
      }
      out.aliases[s->meta.session_id + "/" + original] = alias;
    }
    for (auto r : s->records) {
      r.user = renamed.at(r.user);
      if (used_ids.contains(r.id)) r.id = "M" + std::to_string(k) + "-" + r.id;
      used_ids.insert(r.id);
      if (shift != 0) r.start_time = Timestamp::from_unix_millis(r.start_time.unix_millis() + shift);
      out.records.push_back(std::move(r));
    }
    for (const auto& [path, src] : s->assets) out.assets.emplace(path, src);
    auto start = Timestamp::from_unix_millis(s->meta.recording_start.unix_millis() + shift);
    auto end = Timestamp::from_unix_millis(s->meta.recording_end.unix_millis() + shift);
    if (first || start < out.meta.recording_start) out.meta.recording_start = start;
    if (first || out.meta.recording_end < end) out.meta.recording_end = end;
    first = false;
    ids.push_back(s->meta.session_id);
    if (std::find(apps.begin(), apps.end(), s->meta.app_name) == apps.end()) apps.push_back(s->meta.app_name);
  }
  out.meta.session_id.clear();
  for (const auto& id : ids) out.meta.session_id += (out.meta.session_id.empty() ? "" : "+") + id;
  out.meta.app_name.clear();
  for (const auto& a : apps) out.meta.app_name += (out.meta.app_name.empty() ? "" : "+") + a;
  return out;
}

}  // namespace exr
