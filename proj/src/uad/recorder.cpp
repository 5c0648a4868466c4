#include "exr/uad/recorder.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <deque>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "exr/uad/digest.hpp"
#include "exr/uad/error.hpp"
#include "exr/uad/serialize.hpp"
#include "exr/uad/validate.hpp"

namespace exr {

namespace fs = std::filesystem;

namespace {

struct UserLog {
  std::ofstream out;
  fs::path path;
};

std::string make_id(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "A%06llu", static_cast<unsigned long long>(n));
  return buf;
}

std::string join_violations(const ValidationReport& report) {
  std::string out;
  for (const auto& v : report.violations) {
    if (!out.empty()) out += "; ";
    out += v.field + ": " + v.rule;
  }
  return out;
}

}  // namespace

struct Recorder::Impl {
  RecorderOptions opts;

  std::mutex meta_mu;
  std::vector<std::string> users;  // first-appearance order
  std::optional<Timestamp> first_start;
  std::optional<Timestamp> last_end;
  std::uint64_t next_id = 1;
  bool finalized = false;

  std::mutex logs_mu;
  std::map<std::string, UserLog> logs;

  // Background lane (async mode only). Single FIFO worker keeps per-user
  // append order equal to call order.
  std::mutex q_mu;
  std::condition_variable q_cv;
  std::condition_variable idle_cv;
  std::deque<std::function<void()>> jobs;
  bool busy = false;
  bool stopping = false;
  std::exception_ptr deferred_error;
  std::thread worker;

  explicit Impl(RecorderOptions o) : opts(std::move(o)) {
    std::error_code ec;
    fs::create_directories(opts.session_dir / "users", ec);
    fs::create_directories(opts.session_dir / "assets", ec);
    if (ec) {
      throw Error(ErrorCode::IoFailure, "cannot create " + opts.session_dir.string() + ": " + ec.message());
    }
    if (opts.async) worker = std::thread([this] { run(); });
  }

  ~Impl() {
    try {
      drain();
    } catch (...) {
    }
  }

  void run() {
    std::unique_lock lock(q_mu);
    for (;;) {
      q_cv.wait(lock, [&] { return stopping || !jobs.empty(); });
      if (jobs.empty()) return;
      auto job = std::move(jobs.front());
      jobs.pop_front();
      busy = true;
      lock.unlock();
      try {
        job();
      } catch (...) {
        std::lock_guard g(q_mu);
        if (!deferred_error) deferred_error = std::current_exception();
      }
      lock.lock();
      busy = false;
      if (jobs.empty()) idle_cv.notify_all();
    }
  }

  void drain() {
    if (!worker.joinable()) return;
    {
      std::lock_guard g(q_mu);
      stopping = true;
    }
    q_cv.notify_all();
    worker.join();
  }

  AssetRef store_asset(AssetKind kind, const std::string& stem, const Bytes& bytes,
                       std::optional<int> capture = std::nullopt) {
    AssetRef ref;
    ref.kind = kind;
    ref.sha256 = sha256_hex(bytes);
    ref.path = asset_relpath(kind, stem, ref.sha256);
    ref.capture = capture;
    fs::path target = opts.session_dir / ref.path;
    if (!fs::exists(target)) write_file_atomic(target, bytes);
    return ref;
  }

  void append(const ActionRecord& r, int file_index) {
    std::string line;
    try {
      line = dump_record_line(r);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::SerializationFailure, e.what());
    }
    line.push_back('\n');

    std::lock_guard g(logs_mu);
    auto [it, inserted] = logs.try_emplace(r.user);
    UserLog& log = it->second;
    if (inserted) {
      log.path = opts.session_dir / "users" / ("user_" + std::to_string(file_index) + ".jsonl");
      log.out.open(log.path, std::ios::binary | std::ios::app);
      if (!log.out) throw Error(ErrorCode::IoFailure, "cannot open " + log.path.string());
    }
    errno = 0;
    log.out.write(line.data(), static_cast<std::streamsize>(line.size()));
    log.out.flush();
    if (!log.out) {
      if (errno == ENOSPC || errno == EDQUOT) throw Error(ErrorCode::StorageFull, log.path.string());
      throw Error(ErrorCode::IoFailure, "cannot append to " + log.path.string() + ": " +
                                            std::strerror(errno));
    }
  }

  void materialize(ActionRecord r, LogRequest& req, int file_index) {
    if (req.referent) {
      auto& ref = *req.referent;
      if (ref.model) {
        r.referent.push_back(store_asset(AssetKind::ReferentModel, ref.name, encode_mesh_glb(*ref.model)));
      }
      if (ref.glb) r.referent.push_back(store_asset(AssetKind::ReferentModel, ref.name, *ref.glb));
      if (ref.snapshot) {
        r.referent.push_back(store_asset(AssetKind::ReferentImage, ref.name, encode_png(*ref.snapshot)));
      }
    }
    for (std::size_t i = 0; i < req.context.size(); ++i) {
      const auto& cap = req.context[i];
      int k = static_cast<int>(i);
      std::string stem = r.id + "_" + std::to_string(i);
      r.context.push_back(store_asset(AssetKind::ContextRGB, stem + "_rgb", encode_png(cap.rgb), k));
      r.context.push_back(store_asset(AssetKind::ContextDepth, stem + "_depth", encode_png(cap.depth), k));
      auto params = dump_camera_params(cap.params);
      r.context.push_back(store_asset(AssetKind::CameraParams, stem + "_cam",
                                      Bytes(params.begin(), params.end()), k));
    }
    if (req.audio) r.context.push_back(store_asset(AssetKind::AudioClip, r.id + "_audio", *req.audio));
    append(r, file_index);
  }

  ActionId log(LogRequest req) {
    ActionRecord r;
    r.name = req.name;
    r.type = req.type;
    r.intent = req.intent;
    r.user = req.user;
    r.location = req.location;
    r.trigger_source = req.trigger_source;
    r.start_time = req.start_time;
    r.duration = req.duration;
    r.referent_name = req.referent ? req.referent->name : std::string();
    r.referent_type = req.referent_type;
    r.referent_location = req.referent_location;
    r.context_type = req.context_type;

    int file_index = 0;
    {
      std::lock_guard g(meta_mu);
      if (finalized) throw Error(ErrorCode::UninitializedLogger, "recorder already finalized");
      r.id = make_id(next_id);
      auto report = validate_record(r);
      if (!report.accepted()) throw Error(ErrorCode::MalformedRecord, join_violations(report));
      for (const auto& cap : req.context) {
        if (cap.rgb.width != cap.params.width || cap.rgb.height != cap.params.height ||
            cap.depth.width != cap.params.width || cap.depth.height != cap.params.height) {
          throw Error(ErrorCode::DimensionMismatch, "capture size differs from camera params");
        }
      }
      ++next_id;
      auto pos = std::find(users.begin(), users.end(), r.user);
      if (pos == users.end()) pos = users.insert(users.end(), r.user);
      file_index = static_cast<int>(pos - users.begin()) + 1;
      Timestamp end = std::max(r.end_time(), Timestamp::from_unix_millis(r.start_time.unix_millis() + 1));
      if (!first_start || r.start_time < *first_start) first_start = r.start_time;
      if (!last_end || *last_end < end) last_end = end;
    }

    ActionId id = r.id;
    if (!opts.async) {
      materialize(std::move(r), req, file_index);
      return id;
    }
    {
      std::lock_guard g(q_mu);
      jobs.emplace_back([this, rec = std::move(r), rq = std::move(req), file_index]() mutable {
        materialize(std::move(rec), rq, file_index);
      });
    }
    q_cv.notify_one();
    return id;
  }

  void finalize() {
    {
      std::lock_guard g(meta_mu);
      if (finalized) return;
      finalized = true;
    }
    drain();
    {
      std::lock_guard g(logs_mu);
      for (auto& [user, log] : logs) log.out.close();
    }
    if (deferred_error) std::rethrow_exception(deferred_error);

    SessionMeta meta;
    meta.session_id = opts.session_id;
    meta.app_name = opts.app_name;
    meta.virtuality = opts.virtuality;
    meta.users = users;
    if (first_start) meta.recording_start = *first_start;
    if (last_end) meta.recording_end = *last_end;
    write_file_atomic(opts.session_dir / "meta.json", dump_meta(meta));
  }
};

Recorder::Recorder() = default;
Recorder::Recorder(RecorderOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
Recorder::~Recorder() = default;
Recorder::Recorder(Recorder&&) noexcept = default;
Recorder& Recorder::operator=(Recorder&&) noexcept = default;

ActionId Recorder::log(LogRequest request) {
  if (!impl_) throw Error(ErrorCode::UninitializedLogger, "recorder has no session directory");
  return impl_->log(std::move(request));
}

void Recorder::finalize() {
  if (!impl_) throw Error(ErrorCode::UninitializedLogger, "recorder has no session directory");
  impl_->finalize();
}

bool Recorder::initialized() const { return impl_ != nullptr; }

std::vector<Transform> resample_locations(const ActionRecord& r, std::int64_t interval_ms) {
  if (interval_ms <= 0) throw Error(ErrorCode::InvalidArgument, "resample interval must be positive");
  if (r.type == ActionType::Discrete || r.location.empty()) return r.location;
  std::int64_t dur = r.duration.total_millis();
  std::int64_t n = std::max<std::int64_t>(1, (dur + interval_ms - 1) / interval_ms);
  const auto& src = r.location;
  std::vector<Transform> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    if (src.size() == 1 || dur == 0) {
      out.push_back(src.front());
      continue;
    }
    double f = static_cast<double>(k * interval_ms) / static_cast<double>(dur) *
               static_cast<double>(src.size() - 1);
    auto i = std::min(static_cast<std::size_t>(f), src.size() - 2);
    double w = f - static_cast<double>(i);
    Transform t;
    for (int c = 0; c < 3; ++c) {
      t.pos[c] = src[i].pos[c] + w * (src[i + 1].pos[c] - src[i].pos[c]);
      t.rot[c] = src[i].rot[c] + w * (src[i + 1].rot[c] - src[i].rot[c]);
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace exr
