#include "exr/service/server.hpp"

#include <atomic>
#include <condition_variable>
#include <iostream>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include <httplib.h>

#include "exr/analytics/analytics.hpp"
#include "exr/ingest/ingest.hpp"
#include "exr/insight/insights.hpp"
#include "exr/insight/steps.hpp"
#include "exr/service/process.hpp"
#include "exr/uad/error.hpp"
#include "exr/uad/serialize.hpp"

namespace exr {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(ApiErrorCode c) {
  switch (c) {
    case ApiErrorCode::NotFound: return "NotFound";
    case ApiErrorCode::BadFilter: return "BadFilter";
    case ApiErrorCode::Processing: return "Processing";
    case ApiErrorCode::Internal: return "Internal";
  }
  return "Internal";
}

json ApiError::to_json() const { return {{"code", to_string(code)}, {"message", message}, {"detail", detail}}; }

ojson actions_json(const SessionView& view) {
  ojson out = ojson::array();
  for (const auto* r : view) {
    ojson j = exr::to_json(*r);
    if (auto t = transcript_of(*r, view.store())) j["transcript"] = *t;
    out.push_back(std::move(j));
  }
  return out;
}

namespace {

struct ApiFailure {
  ApiError error;
};

[[noreturn]] void fail(ApiErrorCode code, int status, std::string message, std::string detail = {}) {
  throw ApiFailure{{code, std::move(message), std::move(detail), status}};
}

bool is_filter_error(ErrorCode c) {
  return c == ErrorCode::InvalidArgument || c == ErrorCode::MalformedTimestamp || c == ErrorCode::InvalidCalendar ||
         c == ErrorCode::MalformedTimedelta;
}

std::optional<std::string> param(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  auto v = req.get_param_value(key);
  if (v.empty()) return std::nullopt;
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto comma = s.find(',', start);
    auto item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

FilterSpec filter_from(const httplib::Request& req, bool with_sets = true) {
  json j = json::object();
  if (with_sets) {
    if (auto u = param(req, "users")) j["users"] = split_list(*u);
    if (auto a = param(req, "actions")) j["actions"] = split_list(*a);
  }
  if (auto f = param(req, "from")) j["from"] = *f;
  if (auto t = param(req, "to")) j["to"] = *t;
  return FilterSpec::from_json(j);
}

std::string content_type_for(const fs::path& p) {
  auto ext = p.extension().string();
  if (ext == ".glb") return "model/gltf-binary";
  if (ext == ".png") return "image/png";
  if (ext == ".wav") return "audio/wav";
  if (ext == ".json") return "application/json";
  if (ext == ".txt") return "text/plain; charset=utf-8";
  return "application/octet-stream";
}

bool valid_id(const std::string& s) {
  static const std::regex re(R"([A-Za-z0-9._-]+)");
  return std::regex_match(s, re) && s != "." && s != "..";
}

struct Loaded {
  std::string signature;
  std::shared_ptr<const SessionStore> store;
};

struct Job {
  std::string id;
  std::string status;  // running, done, failed
  std::optional<InsightReport> report;
  std::optional<ApiError> error;
};

}  // namespace

struct ApiServer::Impl {
  ServerOptions opts;
  httplib::Server http;

  std::mutex mu;
  std::map<std::string, Loaded> cache;
  std::map<std::string, Job> jobs;
  std::vector<std::thread> workers;
  std::condition_variable jobs_cv;
  std::uint64_t next_job = 1;
  std::set<std::string> warned;

  explicit Impl(ServerOptions o) : opts(std::move(o)) { routes(); }

  ~Impl() {
    for (auto& t : workers) {
      if (t.joinable()) t.join();
    }
  }

  // --- catalog ---------------------------------------------------------------

  std::map<std::string, fs::path> sessions() const {
    std::map<std::string, fs::path> out;
    std::error_code ec;
    if (fs::exists(opts.root / "meta.json", ec)) {
      out.emplace(fs::absolute(opts.root).lexically_normal().filename().string(), opts.root);
      return out;
    }
    if (!fs::is_directory(opts.root, ec)) return out;
    for (const auto& e : fs::directory_iterator(opts.root, ec)) {
      auto name = e.path().filename().string();
      if (e.is_directory() && valid_id(name) && fs::exists(e.path() / "meta.json")) out.emplace(name, e.path());
    }
    return out;
  }

  static std::string signature(const fs::path& dir) {
    std::string sig;
    std::error_code ec;
    auto stamp = [&](const fs::path& p) {
      auto t = fs::last_write_time(p, ec);
      sig += p.filename().string() + ":" + std::to_string(t.time_since_epoch().count()) + ":" +
             std::to_string(fs::file_size(p, ec)) + ";";
    };
    stamp(dir / "meta.json");
    if (fs::is_directory(dir / "users", ec)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(dir / "users", ec)) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) stamp(f);
    }
    return sig;
  }

  static bool anonymized(const SessionStore& s) {
    for (const auto& u : s.meta.users) {
      if (!is_user_alias(u)) return false;
    }
    for (const auto& r : s.records) {
      if (!is_user_alias(r.user)) return false;
    }
    return true;
  }

  std::pair<fs::path, std::shared_ptr<const SessionStore>> load(const std::string& sid) {
    if (!valid_id(sid)) fail(ApiErrorCode::NotFound, 404, "unknown session", sid);
    auto all = sessions();
    auto it = all.find(sid);
    if (it == all.end()) fail(ApiErrorCode::NotFound, 404, "unknown session", sid);
    auto sig = signature(it->second);
    {
      std::lock_guard lock(mu);
      auto c = cache.find(sid);
      if (c != cache.end() && c->second.signature == sig) {
        if (!c->second.store) fail(ApiErrorCode::NotFound, 404, "unknown session", sid);
        return {it->second, c->second.store};
      }
    }
    std::shared_ptr<const SessionStore> store;
    try {
      store = std::make_shared<const SessionStore>(read_session(it->second));
    } catch (const Error& e) {
      fail(ApiErrorCode::Processing, 500, "session cannot be read", e.what());
    }
    std::lock_guard lock(mu);
    if (!anonymized(*store)) {
      // Raw sessions are invisible: nothing about them is served.
      if (warned.insert(sid).second) std::cerr << "skipping session " << sid << ": subjects are not aliased\n";
      cache[sid] = {sig, nullptr};
      fail(ApiErrorCode::NotFound, 404, "unknown session", sid);
    }
    cache[sid] = {sig, store};
    return {it->second, store};
  }

  // --- responses -------------------------------------------------------------

  static void send_json(httplib::Response& res, const std::string& body, const SessionStore* store, int status = 200) {
    res.status = status;
    // Last line of defence: no stored identity leaves the process.
    res.set_content(store && !store->aliases.empty() ? scrub_identities(body, store->aliases) : body,
                    "application/json");
  }

  static void send_error(httplib::Response& res, const ApiError& e) {
    res.status = e.status;
    res.set_content(e.to_json().dump(), "application/json");
  }

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const ApiFailure& a) {
        send_error(res, a.error);
      } catch (const Error& e) {
        if (is_filter_error(e.code())) send_error(res, {ApiErrorCode::BadFilter, "invalid query", e.what(), 400});
        else if (e.code() == ErrorCode::NotFound) send_error(res, {ApiErrorCode::NotFound, "not found", e.what(), 404});
        else send_error(res, {ApiErrorCode::Processing, "processing failed", e.what(), 500});
      } catch (const std::exception& e) {
        send_error(res, {ApiErrorCode::Internal, "internal error", e.what(), 500});
      }
    };
  }

  // --- insight jobs ------------------------------------------------------------

  std::shared_ptr<LlmClient> client_for(const fs::path& dir) {
    auto local = dir / "fixtures" / "llm.json";
    const char* env = std::getenv("EXR_LLM_MODE");
    std::string mode = !opts.llm_mode.empty() ? opts.llm_mode : (env ? env : "");
    if (mode == "mock") {
      if (fs::exists(local)) return MockLlmClient::from_file(local);
      if (opts.fixtures) return MockLlmClient::from_file(*opts.fixtures);
      throw Error(ErrorCode::ClientFailure, "mock mode without fixtures");
    }
    return make_llm_client(mode, {});
  }

  bool mock_mode() const {
    const char* env = std::getenv("EXR_LLM_MODE");
    return (!opts.llm_mode.empty() ? opts.llm_mode : (env ? env : "")) == "mock";
  }

  void run_job(const std::string& sid, const fs::path& dir, std::shared_ptr<const SessionStore> store,
               std::string aoi, InsightMode mode) {
    Job result;
    try {
      auto client = client_for(dir);
      result.report = generate_insights(*store, aoi, mode, *client);
      result.status = "done";
    } catch (const std::exception& e) {
      result.status = "failed";
      result.error = ApiError{ApiErrorCode::Processing, "insight generation failed", e.what(), 500};
    }
    std::lock_guard lock(mu);
    auto& job = jobs[sid];
    job.status = result.status;
    job.report = std::move(result.report);
    job.error = std::move(result.error);
    jobs_cv.notify_all();
  }

  static json job_json(const Job& job) {
    json out = job.report ? to_json(*job.report) : json{{"insights", json::array()}, {"markers", json::array()}};
    out["status"] = job.status;
    out["jobId"] = job.id;
    if (job.error) out["error"] = job.error->to_json();
    return out;
  }

  // --- routes ------------------------------------------------------------------

  void routes() {
    const std::string sid = "/api/sessions/([^/]+)";

    http.Get("/api/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      for (const auto& [id, dir] : sessions()) {
        try {
          auto [d, store] = load(id);
          auto [lo, hi] = session_bounds(*store);
          out.push_back({{"id", id},
                         {"sessionId", store->meta.session_id},
                         {"appName", store->meta.app_name},
                         {"virtuality", to_string(store->meta.virtuality)},
                         {"users", store->meta.users},
                         {"recordCount", store->records.size()},
                         {"start", lo.to_string()},
                         {"end", hi.to_string()}});
        } catch (const ApiFailure&) {
        }
      }
      send_json(res, out.dump(), nullptr);
    }));

    http.Get(sid, guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto [dir, store] = load(req.matches[1]);
      auto [lo, hi] = session_bounds(*store);
      std::vector<std::string> actions;
      for (const auto& r : store->records) {
        if (std::find(actions.begin(), actions.end(), r.name) == actions.end()) actions.push_back(r.name);
      }
      std::vector<std::string> stored;
      for (auto m : {InsightMode::Single, InsightMode::Multi}) {
        if (fs::exists(insights_report_path(dir, to_string(m)))) stored.emplace_back(to_string(m));
      }
      json out = {{"id", req.matches[1]},
                  {"meta", json::parse(exr::to_json(store->meta).dump())},
                  {"start", lo.to_string()},
                  {"end", hi.to_string()},
                  {"recordCount", store->records.size()},
                  {"users", store->meta.users},
                  {"actions", actions},
                  {"storedInsights", stored},
                  {"hasEval", fs::exists(eval_report_path(dir))}};
      send_json(res, out.dump(), store.get());
    }));

    http.Get(sid + "/actions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto [dir, store] = load(req.matches[1]);
      send_json(res, actions_json(make_view(*store, filter_from(req))).dump(), store.get());
    }));

    http.Get(sid + "/timeline", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto [dir, store] = load(req.matches[1]);
      auto bin = param(req, "bin") ? TimeDelta::parse(*param(req, "bin")) : TimeDelta::from_millis(1000);
      auto norm = param(req, "norm") ? parse_colormap_norm(*param(req, "norm")) : ColormapNorm::Row;
      auto m = bin_timeline(make_view(*store, filter_from(req)), bin);
      send_json(res, to_json(m, norm).dump(), store.get());
    }));

    http.Get(sid + "/trace", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto [dir, store] = load(req.matches[1]);
      double grid = kDefaultTraceGrid;
      if (auto g = param(req, "grid")) {
        try {
          std::size_t used = 0;
          grid = std::stod(*g, &used);
          if (used != g->size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          fail(ApiErrorCode::BadFilter, 400, "grid must be a number of meters", *g);
        }
      }
      send_json(res, to_json(trace_map(make_view(*store, filter_from(req)), grid)).dump(), store.get());
    }));

    http.Get(sid + "/stats", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto [dir, store] = load(req.matches[1]);
      send_json(res, to_json(referent_stats(make_view(*store, filter_from(req)))).dump(), store.get());
    }));

    http.Get(sid + "/assets/([^/]+)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto [dir, store] = load(req.matches[1]);
      std::string id = req.matches[2];
      std::string key = "assets/" + id;
      if (!valid_id(id) || !store->has_asset(key)) fail(ApiErrorCode::NotFound, 404, "unknown asset", id);
      auto bytes = store->read_asset(key);
      res.set_content(std::string(bytes.begin(), bytes.end()), content_type_for(key));
    }));

    http.Post(sid + "/insights", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string s = req.matches[1];
      auto [dir, store] = load(s);
      json body = req.body.empty() ? json::object() : json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) fail(ApiErrorCode::BadFilter, 400, "body must be a JSON object");
      std::string aoi;
      InsightMode mode = InsightMode::Multi;
      try {
        aoi = body.value("aoi", std::string());
        if (body.contains("mode")) mode = parse_insight_mode(body["mode"].get<std::string>());
      } catch (const std::exception& e) {
        fail(ApiErrorCode::BadFilter, 400, "aoi must be text and mode single or multi", e.what());
      }
      std::string id;
      {
        std::lock_guard lock(mu);
        auto it = jobs.find(s);
        if (it != jobs.end() && it->second.status == "running") {
          fail(ApiErrorCode::Processing, 409, "an insight job is already running", it->second.id);
        }
        id = s + "-" + std::to_string(next_job++);
        jobs[s] = Job{id, "running", std::nullopt, std::nullopt};
      }
      if (mock_mode()) {
        run_job(s, dir, store, aoi, mode);
      } else {
        std::lock_guard lock(mu);
        workers.emplace_back([this, s, d = dir, st = store, aoi, mode] { run_job(s, d, st, aoi, mode); });
      }
      send_json(res, json{{"jobId", id}}.dump(), store.get(), 202);
    }));

    http.Get(sid + "/insights", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string s = req.matches[1];
      auto [dir, store] = load(s);
      auto wanted = param(req, "mode");
      if (wanted) parse_insight_mode(*wanted);
      {
        std::lock_guard lock(mu);
        auto it = jobs.find(s);
        if (it != jobs.end() && (!wanted || !it->second.report || to_string(it->second.report->mode) == *wanted)) {
          send_json(res, job_json(it->second).dump(), store.get());
          return;
        }
      }
      std::vector<std::string> order = wanted ? std::vector<std::string>{*wanted} : std::vector<std::string>{"multi", "single"};
      for (const auto& m : order) {
        auto p = insights_report_path(dir, m);
        if (!fs::exists(p)) continue;
        auto bytes = read_file(p);
        json stored = json::parse(bytes.begin(), bytes.end(), nullptr, false);
        if (stored.is_discarded()) fail(ApiErrorCode::Processing, 500, "stored insight report is not JSON", m);
        json j = to_json(insight_report_from_json(stored));
        j["status"] = "done";
        j["jobId"] = nullptr;
        send_json(res, j.dump(), store.get());
        return;
      }
      send_json(res, json{{"status", "none"}, {"insights", json::array()}, {"markers", json::array()}}.dump(), store.get());
    }));

    http.Get(sid + "/insights/eval", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto [dir, store] = load(req.matches[1]);
      auto p = eval_report_path(dir);
      if (!fs::exists(p)) fail(ApiErrorCode::NotFound, 404, "no evaluation stored for this session");
      auto bytes = read_file(p);
      json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
      if (j.is_discarded()) fail(ApiErrorCode::Processing, 500, "stored evaluation is not JSON");
      send_json(res, j.dump(), store.get());
    }));

    http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    http.set_default_headers({{"Access-Control-Allow-Origin", opts.cors_origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});

    if (opts.static_dir && !http.set_mount_point("/", opts.static_dir->string())) {
      throw Error(ErrorCode::NotFound, "static directory " + opts.static_dir->string());
    }

    http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      ApiError e{res.status == 404 ? ApiErrorCode::NotFound : ApiErrorCode::Internal,
                 res.status == 404 ? "no such endpoint" : "request failed", req.method + " " + req.path, res.status};
      res.set_content(e.to_json().dump(), "application/json");
      return httplib::Server::HandlerResponse::Handled;
    });
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "unknown";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      send_error(res, {ApiErrorCode::Internal, "internal error", what, 500});
    });
  }
};

ApiServer::ApiServer(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
ApiServer::~ApiServer() {
  stop();
}

int ApiServer::bind() {
  auto& o = impl_->opts;
  if (o.port == 0) {
    int p = impl_->http.bind_to_any_port(o.host);
    if (p <= 0) throw Error(ErrorCode::IoFailure, "cannot bind " + o.host);
    o.port = p;
  } else if (!impl_->http.bind_to_port(o.host, o.port)) {
    throw Error(ErrorCode::IoFailure, "cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  return o.port;
}

void ApiServer::run() { impl_->http.listen_after_bind(); }

void ApiServer::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

void ApiServer::wait_for_jobs() {
  std::unique_lock lock(impl_->mu);
  impl_->jobs_cv.wait(lock, [&] {
    return std::none_of(impl_->jobs.begin(), impl_->jobs.end(),
                        [](const auto& kv) { return kv.second.status == "running"; });
  });
}

}  // namespace exr
