#include "exr/service/bench.hpp"

#include <sys/utsname.h>
#include <sys/vfs.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "exr/sim/scene.hpp"
#include "exr/uad/error.hpp"
#include "exr/uad/recorder.hpp"

namespace exr {

namespace fs = std::filesystem;

namespace {

constexpr long kTmpfsMagic = 0x01021994;
constexpr BenchMode kModes[] = {BenchMode::Base, BenchMode::VirtualContext, BenchMode::Referent};

bool is_ram_backed(const fs::path& p) {
  struct statfs s {};
  return statfs(p.c_str(), &s) == 0 && static_cast<long>(s.f_type) == kTmpfsMagic;
}

std::pair<fs::path, bool> pick_scratch(const std::optional<fs::path>& requested) {
  if (requested) return {*requested, is_ram_backed(*requested)};
  const fs::path shm = "/dev/shm";
  if (fs::is_directory(shm) && access(shm.c_str(), W_OK) == 0) return {shm, is_ram_backed(shm)};
  return {fs::temp_directory_path(), is_ram_backed(fs::temp_directory_path())};
}

struct Payload {
  ContextCapture capture;
  TriangleMesh mesh;
};

Payload make_payload() {
  sim::Scene scene;
  sim::Primitive back;
  back.name = "Backdrop";
  back.point = {0, 0, 4};
  back.color = {90, 120, 160};
  sim::Primitive ball;
  ball.name = "Ball";
  ball.kind = sim::PrimitiveKind::Sphere;
  ball.point = {0.3, 0.1, 2.5};
  ball.radius = 0.5;
  ball.color = {220, 80, 40};
  scene.primitives = {back, ball};
  return {sim::render_capture(scene, sim::axis_camera({0, 0, 0}, "+z")),
          sim::uv_sphere_mesh("Referent", 0.25, 96, 192, {0.8f, 0.3f, 0.2f, 1.0f})};
}

/// Content varies per call so content-addressed assets are really written.
LogRequest make_request(BenchMode mode, const Payload& p, int i) {
  LogRequest req;
  req.name = "Bench";
  req.intent = "Measure logging cost";
  req.user = "User1";
  req.location = {Transform{{0.1 * (i % 7), 1.6, 0.2}, {0, 0, 0}}};
  req.trigger_source = "Bench";
  req.start_time = Timestamp::from_unix_millis(1'722'500'000'000LL + 100LL * i);
  req.duration = TimeDelta::from_millis(50);
  if (mode == BenchMode::Base) return req;
  auto cap = p.capture;
  auto* px = cap.rgb.at(i % cap.rgb.width, (i / cap.rgb.width) % cap.rgb.height);
  px[0] = static_cast<std::uint8_t>(i);
  px[1] = static_cast<std::uint8_t>(i >> 8);
  req.context = {std::move(cap)};
  req.context_type = RealityType::Virtual;
  if (mode == BenchMode::VirtualContext) return req;
  auto mesh = p.mesh;
  mesh.positions[0][0] += static_cast<float>(i) * 1e-4f;
  req.referent = ReferentPayload{"Referent", std::move(mesh), std::nullopt, std::nullopt};
  req.referent_type = RealityType::Virtual;
  req.referent_location = {Transform{{0.3, 0.1, 2.5}, {0, 0, 0}}};
  return req;
}

double timed_log(Recorder& rec, LogRequest req) {
  auto t0 = std::chrono::steady_clock::now();
  rec.log(std::move(req));
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

Recorder open(const fs::path& dir, bool async) {
  return Recorder(RecorderOptions{dir, dir.filename().string(), "bench", Virtuality::VR, async});
}

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string_view to_string(BenchMode m) {
  switch (m) {
    case BenchMode::Base: return "base";
    case BenchMode::VirtualContext: return "+virtualContext";
    case BenchMode::Referent: return "+referent";
  }
  return "base";
}

std::string_view to_string(BenchLane l) { return l == BenchLane::Sync ? "sync" : "async-perceived"; }

const BenchRow& BenchReport::row(BenchMode m, BenchLane l) const {
  for (const auto& r : rows) {
    if (r.mode == m && r.lane == l) return r;
  }
  throw Error(ErrorCode::NotFound, "bench row missing");
}

bool BenchReport::ordering_holds() const {
  const auto& b = row(BenchMode::Base, BenchLane::Sync).run_means;
  const auto& v = row(BenchMode::VirtualContext, BenchLane::Sync).run_means;
  const auto& r = row(BenchMode::Referent, BenchLane::Sync).run_means;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!(b[i] < v[i] && v[i] < r[i])) return false;
  }
  return !b.empty();
}

BenchStats summarize(std::vector<double> xs) {
  BenchStats s;
  if (xs.empty()) return s;
  std::sort(xs.begin(), xs.end());
  s.mean = mean_of(xs);
  std::size_t n = xs.size();
  s.median = n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2;
  // Nearest-rank percentile.
  auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95 = xs[std::clamp<std::size_t>(rank, 1, n) - 1];
  return s;
}

BenchReport bench_log(const BenchOptions& opts) {
  if (opts.iterations < 10) throw Error(ErrorCode::InvalidArgument, "bench needs at least 10 iterations");
  if (opts.runs < 1) throw Error(ErrorCode::InvalidArgument, "bench needs at least one run");
  auto [scratch, ram] = pick_scratch(opts.scratch);
  const fs::path root = scratch / ("exr-bench-" + std::to_string(getpid()));
  const Payload payload = make_payload();

  BenchReport report;
  report.iterations = opts.iterations;
  report.runs = opts.runs;
  report.scratch = scratch;
  report.ram_backed = ram;
  std::vector<std::vector<double>> samples(6);
  for (auto lane : {BenchLane::Sync, BenchLane::AsyncPerceived}) {
    for (auto mode : kModes) report.rows.push_back({mode, lane, {}, {}});
  }
  auto slot = [](BenchMode m, BenchLane l) {
    return static_cast<std::size_t>(l) * 3 + static_cast<std::size_t>(m);
  };

  std::error_code ec;
  try {
    for (int run = 0; run < opts.runs; ++run) {
      const fs::path dir = root / ("run" + std::to_string(run));
      fs::create_directories(dir);

      std::vector<Recorder> sync;
      for (auto mode : kModes) sync.push_back(open(dir / ("sync_" + std::to_string(static_cast<int>(mode))), false));
      std::array<std::vector<double>, 3> sync_t;
      // Warm-up call per mode, untimed.
      for (auto mode : kModes) sync[static_cast<std::size_t>(mode)].log(make_request(mode, payload, 1 << 20 | run));
      for (int i = 0; i < opts.iterations; ++i) {
        for (int k = 0; k < 3; ++k) {
          auto mode = kModes[(i + k) % 3];
          auto m = static_cast<std::size_t>(mode);
          sync_t[m].push_back(timed_log(sync[m], make_request(mode, payload, run * opts.iterations + i)));
        }
      }
      for (auto& r : sync) r.finalize();

      std::array<std::vector<double>, 3> async_t;
      for (auto mode : kModes) {
        auto m = static_cast<std::size_t>(mode);
        auto rec = open(dir / ("async_" + std::to_string(m)), true);
        for (int i = 0; i < opts.iterations; ++i) {
          auto req = make_request(mode, payload, run * opts.iterations + i);
          async_t[m].push_back(timed_log(rec, std::move(req)));
        }
        rec.finalize();
      }

      for (auto mode : kModes) {
        auto m = static_cast<std::size_t>(mode);
        for (auto [lane, times] : {std::pair{BenchLane::Sync, &sync_t[m]}, std::pair{BenchLane::AsyncPerceived, &async_t[m]}}) {
          auto& row = report.rows[slot(mode, lane)];
          row.run_means.push_back(mean_of(*times));
          auto& all = samples[slot(mode, lane)];
          all.insert(all.end(), times->begin(), times->end());
        }
      }
      fs::remove_all(dir, ec);
    }
  } catch (...) {
    fs::remove_all(root, ec);
    throw;
  }
  fs::remove_all(root, ec);
  for (std::size_t i = 0; i < report.rows.size(); ++i) report.rows[i].all = summarize(samples[i]);

  utsname u{};
  uname(&u);
  report.environment = {{"os", std::string(u.sysname) + " " + u.release},
                        {"machine", u.machine},
                        {"hardwareThreads", std::thread::hardware_concurrency()},
                        {"compiler", __VERSION__},
#ifdef NDEBUG
                        {"optimized", true},
#else
                        {"optimized", false},
#endif
                        {"captureSize", std::to_string(payload.capture.rgb.width) + "x" +
                                            std::to_string(payload.capture.rgb.height)},
                        {"referentTriangles", payload.mesh.indices.size() / 3}};
  return report;
}

nlohmann::json to_json(const BenchReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"mode", to_string(row.mode)},
                    {"lane", to_string(row.lane)},
                    {"meanMs", row.all.mean},
                    {"medianMs", row.all.median},
                    {"p95Ms", row.all.p95},
                    {"runMeansMs", row.run_means}});
  }
  return {{"iterations", r.iterations},
          {"runs", r.runs},
          {"scratch", r.scratch.string()},
          {"ramBacked", r.ram_backed},
          {"environment", r.environment},
          {"orderingHolds", r.ordering_holds()},
          {"rows", rows}};
}

std::string render_table(const BenchReport& r) {
  std::ostringstream out;
  out << "Log call latency (ms), " << r.runs << " runs x " << r.iterations << " calls, scratch "
      << r.scratch.string() << (r.ram_backed ? " (RAM)" : " (disk)") << "\n\n";
  out << "| Mode | Sync mean | Sync median | Sync p95 | Async mean | Async median | Async p95 |\n";
  out << "|---|---:|---:|---:|---:|---:|---:|\n";
  for (auto mode : kModes) {
    const auto& s = r.row(mode, BenchLane::Sync).all;
    const auto& a = r.row(mode, BenchLane::AsyncPerceived).all;
    out << "| " << to_string(mode) << " | " << fmt(s.mean) << " | " << fmt(s.median) << " | " << fmt(s.p95) << " | "
        << fmt(a.mean) << " | " << fmt(a.median) << " | " << fmt(a.p95) << " |\n";
  }
  return out.str();
}

}  // namespace exr
