#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <future>
#include <random>
#include <thread>

#include <httplib.h>

#include "exr/analytics/analytics.hpp"
#include "exr/ingest/ingest.hpp"
#include "exr/insight/insights.hpp"
#include "exr/service/bench.hpp"
#include "exr/service/process.hpp"
#include "exr/service/server.hpp"
#include "exr/uad/error.hpp"
#include "support/cli.hpp"
#include "support/sim_session.hpp"
#include "support/temp_dir.hpp"
#include "support/tree_hash.hpp"

using namespace exr;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

/// Ingests a simulated preset into `out`, carrying its mock replies along.
void ingest_to(const std::string& preset, const fs::path& out) {
  const auto& s = test::simulated(preset);
  IngestConfig cfg;
  cfg.transcriber = std::make_shared<MockTranscriber>(std::vector<fs::path>{s.transcripts()});
  write_session(ingest_directory(s.dir, cfg), out);
  fs::create_directories(out / "fixtures");
  fs::copy_file(s.dir / "fixtures" / "llm.json", out / "fixtures" / "llm.json", fs::copy_options::overwrite_existing);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

// --- process -----------------------------------------------------------------

TEST(Process, StepsRunInOrderAndSecondRunIsNoOp) {
  test::TempDir t;
  ingest_to("a4", t / "s");
  auto mock = MockLlmClient::from_file(t / "s" / "fixtures" / "llm.json");
  std::vector<std::string> seen;
  ProcessOptions opts;
  opts.after_step = [&](std::string_view s) { seen.emplace_back(s); };
  auto first = process_session(t / "s", *mock, opts);
  EXPECT_TRUE(first.changed);
  EXPECT_EQ(seen, (std::vector<std::string>{"context", "classify", "describe", "intent"}));
  EXPECT_EQ(first.steps.at("intent").applied, 8u);
  EXPECT_EQ(first.steps.at("classify").applied, 26u);

  auto store = read_session(t / "s");
  for (const auto& r : store.records) {
    EXPECT_EQ(r.processing.done, (std::vector<std::string>{"context", "classify", "describe", "intent"})) << r.id;
    bool captured = !capture_indices(r).empty();
    EXPECT_EQ(!r.context_assets(AssetKind::ContextCloud).empty(), captured) << r.id;
    EXPECT_EQ(r.context_description.has_value(), captured) << r.id;
  }

  auto before = test::tree_hash(t / "s");
  const auto calls = mock->calls();
  auto second = process_session(t / "s", *mock);
  EXPECT_FALSE(second.changed);
  EXPECT_EQ(mock->calls(), calls);
  EXPECT_EQ(test::tree_hash(t / "s"), before);
}

TEST(Process, FailedStepsStayMarkedAndDiagnosed) {
  test::TempDir t;
  ingest_to("a3", t / "s");
  MockLlmClient dead;
  for (const char* task : {"classify_referent", "describe_context", "estimate_intent"}) dead.add_failure(task, "*");
  auto summary = process_session(t / "s", dead);
  EXPECT_EQ(summary.steps.at("classify").failed, 10u);
  auto store = read_session(t / "s");
  for (const auto& r : store.records) {
    EXPECT_TRUE(r.processing.has("classify"));
    if (r.referent_type == RealityType::Physical) {
      EXPECT_FALSE(r.processing.referent_classified);
      EXPECT_FALSE(r.processing.diagnostics.empty());
    }
  }
  EXPECT_FALSE(process_session(t / "s", dead).changed);
}

TEST(Process, CrashAfterEachStepConvergesViaCli) {
  test::TempDir t;
  ingest_to("a5", t / "clean");
  ASSERT_EQ(test::run_cli("process " + test::quoted((t / "clean").string()) + " --llm mock"), 0);
  const auto want = test::tree_hash(t / "clean");
  for (auto step : kProcessSteps) {
    auto dir = t / ("crash_" + std::string(step));
    ingest_to("a5", dir);
    const auto d = test::quoted(dir.string());
    EXPECT_EQ(test::run_cli("process " + d + " --llm mock --crash-after " + std::string(step)), 75) << step;
    EXPECT_EQ(test::run_cli("process " + d + " --llm mock"), 0) << step;
    EXPECT_EQ(test::tree_hash(dir), want) << step;
  }
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(test::run_cli(""), 2);
  EXPECT_EQ(test::run_cli("bench -k 0"), 2);
  EXPECT_EQ(test::run_cli("frobnicate"), 2);
  EXPECT_EQ(test::run_cli("simulate --out /tmp/x"), 2);
  EXPECT_EQ(test::run_cli("--help"), 0);
  test::TempDir t;
  EXPECT_EQ(test::run_cli("simulate --preset no_such_preset --out " + test::quoted((t / "o").string())), 1);
  EXPECT_EQ(test::run_cli("eval " + test::quoted(t.path().string()) + " --llm mock"), 1);
}

TEST(Cli, SimulateIngestInsightsEval) {
  test::TempDir t;
  const auto raw = test::quoted((t / "raw").string()), s = test::quoted((t / "s").string());
  ASSERT_EQ(test::run_cli("simulate --preset a5 --seed 42 --out " + raw), 0);
  ASSERT_EQ(test::run_cli("ingest " + raw + " --out " + s), 0);
  ASSERT_EQ(test::run_cli("process " + s + " --llm mock"), 0);
  ASSERT_EQ(test::run_cli("insights " + s + " --aoi 'Where are pipes inspected?' --mode multi --llm mock"), 0);
  ASSERT_EQ(test::run_cli("insights " + s + " --mode single --llm mock"), 0);
  ASSERT_EQ(test::run_cli("eval " + s + " --runs 3 --llm mock"), 0);
  auto bytes = read_file(eval_report_path(t / "s"));
  auto j = json::parse(bytes.begin(), bytes.end());
  EXPECT_EQ(j["single"]["runs"], 3);
  EXPECT_DOUBLE_EQ(j["single"]["c1"].get<double>(), 7.0);
  EXPECT_DOUBLE_EQ(j["multi"]["c5"].get<double>(), 8.0);
  EXPECT_NE(j["table"].get<std::string>().find("| Multi-agent | 8.00"), std::string::npos);
  auto rb = read_file(insights_report_path(t / "s", "multi"));
  auto report = insight_report_from_json(json::parse(rb.begin(), rb.end()));
  EXPECT_EQ(report.aoi, "Where are pipes inspected?");
  EXPECT_LE(report.insights.size(), 10u);
}

// --- bench -------------------------------------------------------------------

TEST(Bench, SummaryStatistics) {
  auto s = summarize({5, 1, 3, 2, 4});
  EXPECT_DOUBLE_EQ(s.mean, 3);
  EXPECT_DOUBLE_EQ(s.median, 3);
  EXPECT_DOUBLE_EQ(s.p95, 5);
  std::vector<double> xs;
  for (int i = 1; i <= 100; ++i) xs.push_back(i);
  std::shuffle(xs.begin(), xs.end(), std::mt19937(4));
  s = summarize(xs);
  EXPECT_DOUBLE_EQ(s.median, 50.5);
  EXPECT_DOUBLE_EQ(s.p95, 95);
  EXPECT_DOUBLE_EQ(summarize({2, 4}).median, 3);
}

TEST(Bench, RejectsTooFewIterations) {
  BenchOptions o;
  o.iterations = 9;
  EXPECT_THROW(bench_log(o), Error);
  o.iterations = 10;
  o.runs = 0;
  EXPECT_THROW(bench_log(o), Error);
}

TEST(Bench, SmallRunProducesFiniteReport) {
  test::TempDir t;
  BenchOptions o;
  o.iterations = 10;
  o.runs = 2;
  o.scratch = t.path();
  auto r = bench_log(o);
  ASSERT_EQ(r.rows.size(), 6u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.run_means.size(), 2u);
    for (double v : {row.all.mean, row.all.median, row.all.p95}) EXPECT_TRUE(std::isfinite(v) && v >= 0);
    EXPECT_LE(row.all.median, row.all.p95);
  }
  auto j = to_json(r);
  EXPECT_EQ(j["scratch"], t.path().string());
  EXPECT_TRUE(j.contains("ramBacked"));
  EXPECT_TRUE(j["environment"].contains("hardwareThreads"));
  EXPECT_NE(render_table(r).find("| +referent |"), std::string::npos);
  // Scratch is cleaned up.
  EXPECT_TRUE(fs::is_empty(t.path()));
}

// --- server ------------------------------------------------------------------

class Served : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new test::TempDir("exr-served");
    for (const char* p : {"a1", "a4"}) {
      ingest_to(p, root_->path() / p);
      auto mock = MockLlmClient::from_file(root_->path() / p / "fixtures" / "llm.json");
      process_session(root_->path() / p, *mock);
    }
    fs::copy(test::simulated("a4").dir, root_->path() / "raw", fs::copy_options::recursive);
    ServerOptions o;
    o.root = root_->path();
    o.host = "127.0.0.1";
    o.port = 0;
    o.llm_mode = "mock";
    server_ = new ApiServer(o);
    port_ = server_->bind();
    thread_ = new std::thread([] { server_->run(); });
  }
  static void TearDownTestSuite() {
    server_->stop();
    thread_->join();
    delete thread_;
    delete server_;
    delete root_;
  }

  static httplib::Result get(const std::string& path) {
    httplib::Client c("127.0.0.1", port_);
    return c.Get(path);
  }
  static httplib::Result post(const std::string& path, const std::string& body) {
    httplib::Client c("127.0.0.1", port_);
    return c.Post(path, body, "application/json");
  }
  static SessionStore store(const std::string& sid) { return read_session(root_->path() / sid); }

  static void expect_api_error(const httplib::Result& r, int status, const std::string& code) {
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, status);
    auto j = json::parse(r->body, nullptr, false);
    ASSERT_TRUE(j.is_object()) << r->body;
    EXPECT_EQ(j["code"], code) << r->body;
    EXPECT_TRUE(j.contains("message"));
    EXPECT_TRUE(j.contains("detail"));
  }

  static inline test::TempDir* root_ = nullptr;
  static inline ApiServer* server_ = nullptr;
  static inline std::thread* thread_ = nullptr;
  static inline int port_ = 0;
};

TEST_F(Served, ListsOnlyAnonymizedSessions) {
  auto r = get("/api/sessions");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  auto j = json::parse(r->body);
  std::vector<std::string> ids;
  for (const auto& s : j) ids.push_back(s["id"]);
  EXPECT_EQ(ids, (std::vector<std::string>{"a1", "a4"}));
  EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "*");
  expect_api_error(get("/api/sessions/raw"), 404, "NotFound");
  expect_api_error(get("/api/sessions/raw/actions"), 404, "NotFound");
}

TEST_F(Served, AnalyticsMatchLibraryCallsByteForByte) {
  auto s = store("a4");
  auto all = make_view(s);
  EXPECT_EQ(get("/api/sessions/a4/actions")->body, actions_json(all).dump());
  EXPECT_EQ(get("/api/sessions/a4/timeline?bin=000000:000002:000")->body,
            to_json(bin_timeline(all, TimeDelta::from_millis(2000)), ColormapNorm::Row).dump());
  EXPECT_EQ(get("/api/sessions/a4/timeline?norm=global")->body,
            to_json(bin_timeline(all, TimeDelta::from_millis(1000)), ColormapNorm::Global).dump());
  EXPECT_EQ(get("/api/sessions/a4/trace?grid=0.25")->body, to_json(trace_map(all, 0.25)).dump());
  EXPECT_EQ(get("/api/sessions/a4/stats")->body, to_json(referent_stats(all)).dump());

  FilterSpec f;
  f.users = std::vector<std::string>{"User2"};
  f.actions = std::vector<std::string>{"Point"};
  auto view = make_view(s, f);
  EXPECT_EQ(get("/api/sessions/a4/actions?users=User2&actions=Point")->body, actions_json(view).dump());
  EXPECT_EQ(get("/api/sessions/a4/trace?users=User2&actions=Point")->body, to_json(trace_map(view, 0.05)).dump());
}

TEST_F(Served, ActionsCarryTranscripts) {
  auto j = json::parse(get("/api/sessions/a4/actions?actions=Speak")->body);
  ASSERT_EQ(j.size(), 8u);
  for (const auto& r : j) EXPECT_TRUE(r.contains("transcript")) << r.dump();
}

TEST_F(Served, EdgeCaseQueries) {
  auto s = store("a4");
  auto [lo, hi] = session_bounds(s);
  auto at = lo.to_string();
  EXPECT_EQ(get("/api/sessions/a4/actions?from=" + at + "&to=" + at)->body, "[]");
  auto whole = json::parse(get("/api/sessions/a4/timeline?bin=010000:000000:000")->body);
  EXPECT_EQ(whole["bins"].size(), 1u);
  auto trace = json::parse(get("/api/sessions/a1/trace")->body);
  std::int64_t sum = 0;
  for (const auto& p : trace) sum += p["count"].get<std::int64_t>();
  EXPECT_EQ(sum, test::simulated("a1").manifest["traceSampleCount"].get<std::int64_t>());
}

TEST_F(Served, ErrorsAreApiErrors) {
  expect_api_error(get("/api/sessions/nope"), 404, "NotFound");
  expect_api_error(get("/api/sessions/a4/assets/nope.glb"), 404, "NotFound");
  expect_api_error(get("/api/sessions/a4/assets/alias_map.json"), 404, "NotFound");
  expect_api_error(get("/api/sessions/a4/assets/..%2Falias_map.json"), 404, "NotFound");
  expect_api_error(get("/api/nothing/here"), 404, "NotFound");
  expect_api_error(get("/api/sessions/a4/timeline?bin=garbage"), 400, "BadFilter");
  expect_api_error(get("/api/sessions/a4/timeline?bin=000000:000000:000"), 400, "BadFilter");
  expect_api_error(get("/api/sessions/a4/trace?grid=-1"), 400, "BadFilter");
  expect_api_error(get("/api/sessions/a4/trace?grid=abc"), 400, "BadFilter");
  expect_api_error(get("/api/sessions/a4/actions?from=240807:160000:000&to=240807:150000:000"), 400, "BadFilter");
  expect_api_error(get("/api/sessions/a4/stats?from=yesterday"), 400, "BadFilter");
  expect_api_error(post("/api/sessions/a4/insights", "{not json"), 400, "BadFilter");
  expect_api_error(post("/api/sessions/a4/insights", R"({"mode":"both"})"), 400, "BadFilter");
  expect_api_error(get("/api/sessions/a4/insights/eval"), 404, "NotFound");
}

TEST_F(Served, AssetsHaveContentTypes) {
  auto s = store("a4");
  bool glb = false, png = false;
  for (const auto& [key, src] : s.assets) {
    auto id = fs::path(key).filename().string();
    auto r = get("/api/sessions/a4/assets/" + id);
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << id;
    auto bytes = s.read_asset(key);
    EXPECT_EQ(r->body, std::string(bytes.begin(), bytes.end()));
    if (fs::path(key).extension() == ".glb") {
      glb = true;
      EXPECT_EQ(r->get_header_value("Content-Type"), "model/gltf-binary");
    }
    if (fs::path(key).extension() == ".png") {
      png = true;
      EXPECT_EQ(r->get_header_value("Content-Type"), "image/png");
    }
  }
  EXPECT_TRUE(glb && png);
}

TEST_F(Served, InsightJobInMockMode) {
  auto before = json::parse(get("/api/sessions/a1/insights")->body);
  EXPECT_EQ(before["status"], "none");
  EXPECT_TRUE(before["insights"].empty());
  auto r = post("/api/sessions/a1/insights", R"({"aoi":"Where do grabs happen?","mode":"multi"})");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 202);
  auto job = json::parse(r->body)["jobId"].get<std::string>();
  server_->wait_for_jobs();
  auto j = json::parse(get("/api/sessions/a1/insights")->body);
  EXPECT_EQ(j["status"], "done");
  EXPECT_EQ(j["jobId"], job);
  EXPECT_EQ(j["aoi"], "Where do grabs happen?");
  EXPECT_GE(j["insights"].size(), 1u);
  EXPECT_LE(j["insights"].size(), 10u);
  auto s = store("a1");
  for (const auto& m : j["markers"]) EXPECT_NE(s.find(m["actionId"].get<std::string>()), nullptr);
}

TEST_F(Served, StoredEvalIsServed) {
  json scores = {{"multi", to_json(EvalScores{{8, 8, 8, 8, 8}, InsightMode::Multi, 3, 0})}};
  fs::create_directories(eval_report_path(root_->path() / "a4").parent_path());
  write_file_atomic(eval_report_path(root_->path() / "a4"), scores.dump());
  auto r = get("/api/sessions/a4/insights/eval");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body), scores);
  fs::remove(eval_report_path(root_->path() / "a4"));
}

TEST_F(Served, CorsPreflight) {
  httplib::Client c("127.0.0.1", port_);
  auto r = c.Options("/api/sessions/a4/insights");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 204);
  EXPECT_NE(r->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}

TEST_F(Served, EndpointWalkLeaksNoIdentity) {
  std::vector<std::string> identities;
  for (const char* p : {"a1", "a4"}) {
    for (const auto& u : test::simulated(p).manifest["users"]) identities.push_back(lower(u.get<std::string>()));
  }
  post("/api/sessions/a4/insights", R"({"aoi":"who talks?"})");
  server_->wait_for_jobs();
  std::vector<std::string> paths = {"/api/sessions"};
  for (const char* sid : {"a1", "a4"}) {
    std::string b = std::string("/api/sessions/") + sid;
    for (const char* suffix : {"", "/actions", "/timeline", "/trace", "/stats", "/insights", "/insights/eval",
                               "/assets/alias_map.json", "/assets/meta.json"}) {
      paths.push_back(b + suffix);
    }
    for (const auto& [key, src] : store(sid).assets) paths.push_back(b + "/assets/" + fs::path(key).filename().string());
  }
  std::size_t walked = 0;
  for (const auto& p : paths) {
    auto r = get(p);
    ASSERT_TRUE(r) << p;
    auto body = lower(r->body);
    for (const auto& id : identities) EXPECT_EQ(body.find(id), std::string::npos) << p << " leaks " << id;
    ++walked;
  }
  EXPECT_GT(walked, 30u);
}

TEST(ServedRemote, SecondJobWhileRunningConflicts) {
  test::TempDir root("exr-remote");
  ingest_to("a4", root / "a4");
  const auto cited = read_session(root / "a4").records.front().id;

  // Stand-in chat-completions endpoint that holds replies until released.
  httplib::Server llm;
  std::promise<void> release;
  std::shared_future<void> gate = release.get_future().share();
  llm.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    gate.wait();
    json content = json::array({{{"title", "Remote finding"}, {"body", "Returned by the stand-in endpoint."},
                                 {"markers", {cited}}}});
    res.set_content(json{{"choices", {{{"message", {{"content", content.dump()}}}}}}}.dump(), "application/json");
  });
  int llm_port = llm.bind_to_any_port("127.0.0.1");
  std::thread llm_thread([&] { llm.listen_after_bind(); });
  setenv("EXR_LLM_URL", ("http://127.0.0.1:" + std::to_string(llm_port) + "/v1/chat/completions").c_str(), 1);

  ServerOptions o;
  o.root = root.path();
  o.host = "127.0.0.1";
  o.port = 0;
  o.llm_mode = "remote";
  ApiServer server(o);
  int port = server.bind();
  std::thread t([&] { server.run(); });
  httplib::Client c("127.0.0.1", port);

  auto first = c.Post("/api/sessions/a4/insights", R"({"aoi":"x"})", "application/json");
  ASSERT_TRUE(first);
  EXPECT_EQ(first->status, 202);
  auto running = json::parse(c.Get("/api/sessions/a4/insights")->body);
  EXPECT_EQ(running["status"], "running");
  auto second = c.Post("/api/sessions/a4/insights", R"({"aoi":"y"})", "application/json");
  ASSERT_TRUE(second);
  EXPECT_EQ(second->status, 409);
  EXPECT_EQ(json::parse(second->body)["code"], "Processing");

  release.set_value();
  server.wait_for_jobs();
  auto done = json::parse(c.Get("/api/sessions/a4/insights")->body);
  EXPECT_EQ(done["status"], "done");
  ASSERT_EQ(done["insights"].size(), 1u);
  EXPECT_EQ(done["insights"][0]["title"], "Remote finding");
  EXPECT_EQ(c.Post("/api/sessions/a4/insights", R"({"aoi":"z"})", "application/json")->status, 202);
  server.wait_for_jobs();

  server.stop();
  t.join();
  llm.stop();
  llm_thread.join();
  unsetenv("EXR_LLM_URL");
}
