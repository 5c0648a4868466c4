#include <gtest/gtest.h>

#include <algorithm>
#include <mutex>
#include <random>
#include <set>

#include "exr/ingest/ingest.hpp"
#include "exr/insight/insights.hpp"
#include "exr/insight/steps.hpp"
#include "exr/uad/digest.hpp"
#include "exr/uad/error.hpp"
#include "support/insight_fixture.hpp"
#include "support/sim_session.hpp"

using namespace exr;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const SessionStore& ingested(const std::string& preset) {
  static std::map<std::string, SessionStore> cache;
  auto it = cache.find(preset);
  if (it == cache.end()) {
    const auto& s = test::simulated(preset);
    IngestConfig cfg;
    cfg.transcriber = std::make_shared<MockTranscriber>(std::vector<fs::path>{s.transcripts()});
    it = cache.emplace(preset, ingest_directory(s.dir, cfg)).first;
  }
  return it->second;
}

std::shared_ptr<MockLlmClient> fixtures_of(const std::string& preset) {
  return MockLlmClient::from_file(test::simulated(preset).dir / "fixtures" / "llm.json");
}

/// Forwards to an inner client and keeps every request.
class Recording : public LlmClient {
 public:
  explicit Recording(LlmClient& inner, bool multimodal = false) : inner_(inner), mm_(multimodal) {}
  std::string complete(const LlmRequest& r) override {
    {
      std::lock_guard lock(mu_);
      requests.push_back(r);
    }
    return inner_.complete(r);
  }
  bool multimodal() const override { return mm_; }
  std::vector<LlmRequest> requests;

 private:
  LlmClient& inner_;
  bool mm_;
  std::mutex mu_;
};

std::string judge_reply(double v) {
  json j;
  for (int c = 1; c <= 5; ++c) j["c" + std::to_string(c)] = v;
  return j.dump();
}

bool subset(const Insight& a, const Insight& b) {
  for (const auto& m : a.markers) {
    if (std::none_of(b.markers.begin(), b.markers.end(), [&](const AoIMarker& n) { return n.action_id == m.action_id; })) {
      return false;
    }
  }
  return true;
}

}  // namespace

// --- mock client -----------------------------------------------------------

TEST(MockLlm, LookupOrderAndLedger) {
  MockLlmClient mock;
  mock.add("t", "*", "wild");
  mock.add("t", "k1", "keyed");
  LlmRequest a{"t", "k1", "sys", "user"};
  LlmRequest b{"t", "k2", "sys", "user2"};
  mock.add_digest(b.digest(), "by digest");
  EXPECT_EQ(mock.complete(a), "keyed");
  EXPECT_EQ(mock.complete(b), "by digest");
  EXPECT_EQ(mock.complete(LlmRequest{"t", "zzz", "", ""}), "wild");
  EXPECT_THROW(mock.complete(LlmRequest{"other", "k", "", ""}), Error);
  EXPECT_EQ(mock.calls(), 4u);
  EXPECT_EQ(mock.calls("t"), 3u);
  EXPECT_FALSE(mock.ledger().back().ok);
}

TEST(MockLlm, SequencesRepeatTheLastReply) {
  MockLlmClient mock;
  mock.add_sequence("t", "*", {"one", "two"});
  LlmRequest r{"t", "x", "", ""};
  EXPECT_EQ(mock.complete(r), "one");
  EXPECT_EQ(mock.complete(r), "two");
  EXPECT_EQ(mock.complete(r), "two");
}

TEST(MockLlm, FixtureFileShape) {
  MockLlmClient mock(json::parse(R"([{"task":"a","key":"k","response":"r"},{"task":"b","fail":"down"}])"));
  EXPECT_EQ(mock.complete({"a", "k", "", ""}), "r");
  try {
    mock.complete({"b", "k", "", ""});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ClientFailure);
  }
  EXPECT_THROW(MockLlmClient(json::object()), Error);
}

TEST(MockLlm, DigestIgnoresRoutingFields) {
  LlmRequest a{"t1", "k1", "s", "u"};
  LlmRequest b{"t2", "k2", "s", "u"};
  EXPECT_EQ(a.digest(), b.digest());
  b.seed = 7;
  EXPECT_NE(a.digest(), b.digest());
}

TEST(Prompts, EveryTemplateRendersWithoutPlaceholders) {
  const std::map<std::string, std::map<std::string, std::string>> vars = {
      {"classify_referent", {{"action", "Touch"}}},
      {"describe_context",
       {{"action", "a"}, {"user", "u"}, {"intent", "i"}, {"referent", "r"}, {"captures", "1"}, {"image_note", "n"}}},
      {"estimate_intent", {{"action", "a"}, {"user", "u"}, {"referent", "r"}, {"context", "c"}, {"transcript", "t"}}},
      {"insight_agent", {{"aspect", "time"}, {"aoi", "q"}, {"digest", "d"}}},
      {"insight_single", {{"aoi", "q"}, {"digest", "d"}}},
      {"judge", {{"aoi", "q"}, {"insights", "[]"}}},
  };
  for (const auto& [name, v] : vars) {
    auto p = render_prompt(name, v);
    EXPECT_GE(p.version, 1) << name;
    EXPECT_FALSE(p.system.empty()) << name;
    EXPECT_FALSE(p.user.empty()) << name;
    EXPECT_EQ(p.system.find("{{"), std::string::npos) << name;
    EXPECT_EQ(p.user.find("{{"), std::string::npos) << name;
  }
  EXPECT_THROW(render_prompt("nope", {}), Error);
}

TEST(Prompts, ReplyJsonToleratesCodeFences) {
  EXPECT_EQ(parse_reply_json("```json\n{\"a\":1}\n```")["a"], 1);
  EXPECT_EQ(parse_reply_json(" [1,2] ").size(), 2u);
  EXPECT_TRUE(parse_reply_json("not json").is_discarded());
}

// --- processing steps ------------------------------------------------------

TEST(Classify, LabelAndConfidenceBecomeTheName) {
  EXPECT_EQ(classified_name({"couch", 0.92}), "couch@0.92");
  EXPECT_EQ(classified_name({"valve", 0.9}), "valve@0.9");
  EXPECT_EQ(classified_name({"lamp", 1.0}), "lamp@1");

  SessionStore store = ingested("a3");
  MockLlmClient mock;
  mock.add("classify_referent", "*", R"({"label": "couch", "confidence": 0.92})");
  int applied = 0, skipped = 0;
  for (auto& r : store.records) {
    auto st = classify_referent(r, store, mock);
    if (st == StepStatus::Applied) {
      ++applied;
      EXPECT_EQ(r.referent_name, "couch@0.92");
      EXPECT_TRUE(r.processing.referent_classified);
    } else {
      EXPECT_EQ(st, StepStatus::Skipped);
      ++skipped;
    }
  }
  EXPECT_EQ(applied, 10);
  EXPECT_EQ(mock.calls("classify_referent"), 10u);
  EXPECT_GT(skipped, 0);
}

TEST(Classify, GeneratedFixturesMatchSnapshots) {
  SessionStore store = ingested("a3");
  auto mock = fixtures_of("a3");
  for (auto& r : store.records) {
    if (r.referent_type != RealityType::Physical) continue;
    ASSERT_EQ(classify_referent(r, store, *mock), StepStatus::Applied) << r.id;
    EXPECT_EQ(r.referent_name.rfind("valve@", 0), 0u) << r.referent_name;
  }
}

TEST(Classify, VirtualReferentsAreNotSent) {
  SessionStore store = ingested("a1");
  MockLlmClient mock;
  mock.add("classify_referent", "*", R"({"label": "x", "confidence": 1})");
  for (auto& r : store.records) EXPECT_EQ(classify_referent(r, store, mock), StepStatus::Skipped);
  EXPECT_EQ(mock.calls(), 0u);
}

TEST(Classify, UnparseableTwiceLeavesRecordUnclassified) {
  SessionStore store = ingested("a3");
  auto it = std::find_if(store.records.begin(), store.records.end(),
                         [](const ActionRecord& r) { return r.referent_type == RealityType::Physical; });
  ASSERT_NE(it, store.records.end());
  const std::string before = it->referent_name;
  MockLlmClient mock;
  mock.add("classify_referent", "*", "???");
  EXPECT_EQ(classify_referent(*it, store, mock), StepStatus::Failed);
  EXPECT_EQ(mock.calls(), 2u);
  EXPECT_EQ(it->referent_name, before);
  EXPECT_FALSE(it->processing.referent_classified);
  ASSERT_FALSE(it->processing.diagnostics.empty());
  EXPECT_EQ(it->processing.diagnostics.back().rfind("unclassified", 0), 0u);
}

TEST(Classify, ClientFailureIsNotRetried) {
  SessionStore store = ingested("a3");
  auto& r = *std::find_if(store.records.begin(), store.records.end(),
                          [](const ActionRecord& x) { return x.referent_type == RealityType::Physical; });
  MockLlmClient mock;
  mock.add_failure("classify_referent", "*");
  EXPECT_EQ(classify_referent(r, store, mock), StepStatus::Failed);
  EXPECT_EQ(mock.calls(), 1u);
}

TEST(Describe, OneCallPerCapturedRecord) {
  for (const char* preset : {"a1", "a4", "a5"}) {
    SessionStore store = ingested(preset);
    auto mock = fixtures_of(preset);
    std::size_t captured = 0;
    for (auto& r : store.records) {
      bool has = !r.context_assets(AssetKind::ContextRGB).empty();
      captured += has;
      auto st = describe_context(r, store, *mock);
      EXPECT_EQ(st, has ? StepStatus::Applied : StepStatus::Skipped) << r.id;
      EXPECT_EQ(r.context_description.has_value(), has);
    }
    EXPECT_GT(captured, 0u);
    EXPECT_EQ(mock->calls("describe_context"), captured) << preset;
  }
}

TEST(Describe, ImagesOnlyForMultimodalClients) {
  SessionStore store = ingested("a4");
  MockLlmClient mock;
  mock.add("describe_context", "*", "A desk.");
  Recording text_only(mock, false), vision(mock, true);
  auto& r = *std::find_if(store.records.begin(), store.records.end(),
                          [](const ActionRecord& x) { return !x.context_assets(AssetKind::ContextRGB).empty(); });
  auto copy = r;
  describe_context(copy, store, text_only);
  describe_context(copy, store, vision);
  ASSERT_EQ(text_only.requests.size(), 1u);
  EXPECT_TRUE(text_only.requests[0].images.empty());
  EXPECT_EQ(vision.requests[0].images.size(), r.context_assets(AssetKind::ContextRGB).size());
}

TEST(Describe, FailureLeavesFieldEmpty) {
  SessionStore store = ingested("a4");
  MockLlmClient mock;
  mock.add_failure("describe_context", "*");
  for (auto& r : store.records) {
    if (describe_context(r, store, mock) != StepStatus::Skipped) {
      EXPECT_FALSE(r.context_description);
      EXPECT_FALSE(r.processing.diagnostics.empty());
    }
  }
}

TEST(Intent, OnlyPostDefinedRecordsAreEstimated) {
  SessionStore store = ingested("a4");
  auto base = fixtures_of("a4");
  Recording rec(*base);
  int estimated = 0;
  for (auto& r : store.records) {
    const bool post = r.intent == kPostDefinedIntent;
    auto st = estimate_intent(r, store, rec);
    if (!post) {
      EXPECT_EQ(st, StepStatus::Skipped);
      EXPECT_FALSE(r.processing.intent_estimated);
      continue;
    }
    ASSERT_EQ(st, StepStatus::Applied) << r.id;
    auto transcript = transcript_of(r, store);
    ASSERT_TRUE(transcript) << r.id;
    EXPECT_NE(rec.requests.back().user.find(*transcript), std::string::npos);
    EXPECT_TRUE(r.processing.intent_estimated);
    EXPECT_NE(r.intent, kPostDefinedIntent);
    ++estimated;
  }
  EXPECT_EQ(estimated, 8);
  ASSERT_EQ(rec.requests.size(), 8u);
  // Speech reaches the prompt already scrubbed of names.
  const auto& manifest = test::simulated("a4").manifest;
  for (const auto& req : rec.requests) {
    for (const auto& u : manifest["users"]) EXPECT_EQ(req.user.find(u.get<std::string>()), std::string::npos);
  }
}

// --- coordination ----------------------------------------------------------

TEST(Coordinate, TitleSimilarity) {
  EXPECT_DOUBLE_EQ(title_similarity("Grab is common", "grab IS common!"), 1.0);
  EXPECT_DOUBLE_EQ(title_similarity("a b c d", "a b c d e"), 0.8);
  EXPECT_DOUBLE_EQ(title_similarity("a b", "c d"), 0.0);
  std::mt19937_64 rng(3);
  const char* words[] = {"grab", "cube", "user1", "often", "late", "desk", "gaze", "the"};
  for (int i = 0; i < 300; ++i) {
    std::string a, b;
    for (int k = 0; k < 1 + static_cast<int>(rng() % 5); ++k) a += std::string(words[rng() % 8]) + " ";
    for (int k = 0; k < 1 + static_cast<int>(rng() % 5); ++k) b += std::string(words[rng() % 8]) + " ";
    double s = title_similarity(a, b);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_DOUBLE_EQ(s, title_similarity(b, a));
    EXPECT_DOUBLE_EQ(title_similarity(a, a), 1.0);
  }
}

TEST(Coordinate, ParseFindings) {
  auto f = parse_findings(R"({"insights":[{"title":"T","body":"Body","markers":[{"actionId":"A1"},"A2"]},
                                          {"body":"no title"}]})",
                          AgentKind::Time);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].aspect, AgentKind::Time);
  EXPECT_EQ(f[0].action_ids, (std::vector<std::string>{"A1", "A2"}));
  EXPECT_EQ(parse_findings(R"([{"title":"T","body":"Body","aspect":"space"}])", AgentKind::Time)[0].aspect,
            AgentKind::Space);
  EXPECT_THROW(parse_findings("sorry, I cannot", AgentKind::Time), Error);
  EXPECT_THROW(parse_findings(R"({"x":1})", AgentKind::Time), Error);
}

TEST(Coordinate, OverlappingFixtureCollapsesDuplicates) {
  const auto& store = ingested("a4");
  auto findings = test::overlapping_findings(store);
  ASSERT_EQ(findings.size(), 14u);
  auto report = coordinate(findings, store, InsightMode::Multi);
  EXPECT_EQ(report.insights.size(), test::kOverlappingDistinct);
  EXPECT_LE(report.insights.size(), 10u);
  // The merged "pointing" cluster keeps the action agent's wording and both agents' markers.
  auto it = std::find_if(report.insights.begin(), report.insights.end(),
                         [](const Insight& i) { return i.title == "Pointing dominates the action mix"; });
  ASSERT_NE(it, report.insights.end());
  EXPECT_EQ(it->aspects, (std::vector<AgentKind>{AgentKind::Action, AgentKind::User}));
  std::set<std::string> want(findings[2].action_ids.begin(), findings[2].action_ids.end());
  want.insert(findings[9].action_ids.begin(), findings[9].action_ids.end());
  std::set<std::string> got;
  for (const auto& m : it->markers) got.insert(m.action_id);
  EXPECT_EQ(got, want);
}

TEST(Coordinate, CapsAtMaxKeepingBestSupported) {
  const auto& store = ingested("a4");
  std::vector<Finding> findings;
  for (int i = 0; i < 15; ++i) {
    findings.push_back({AgentKind::Time, "distinct topic number " + std::to_string(i) + " word" + std::to_string(i),
                        "A body that is longer than the title for sure " + std::to_string(i),
                        {store.records[static_cast<std::size_t>(i)].id}});
  }
  findings.push_back({AgentKind::User, "distinct topic number 14 word14", "Repeated with more support here.",
                      {store.records[20].id}});
  auto report = coordinate(findings, store, InsightMode::Multi);
  ASSERT_EQ(report.insights.size(), 10u);
  EXPECT_TRUE(std::any_of(report.insights.begin(), report.insights.end(),
                          [](const Insight& i) { return i.title == "distinct topic number 14 word14"; }));
}

TEST(Coordinate, InvalidMarkersAndFindingsAreDropped) {
  const auto& store = ingested("a4");
  std::vector<Finding> findings = {
      {AgentKind::Time, "Only ghosts cited here", "Every marker points at a missing action id.", {"NOPE1", "NOPE2"}},
      {AgentKind::Time, "Half valid citations", "One real action id and one invented one.",
       {"NOPE3", store.records[0].id}},
      {AgentKind::Time, "Title longer than its own body text", "Short.", {store.records[1].id}},
      {AgentKind::Time, "", "Empty title.", {store.records[1].id}},
  };
  auto report = coordinate(findings, store, InsightMode::Multi);
  ASSERT_EQ(report.insights.size(), 1u);
  EXPECT_EQ(report.insights[0].markers.size(), 1u);
  EXPECT_EQ(report.insights[0].markers[0].action_id, store.records[0].id);
  EXPECT_GE(report.diagnostics.size(), 4u);
  EXPECT_TRUE(coordinate({}, store, InsightMode::Multi).insights.empty());
}

TEST(Coordinate, RandomFindingsKeepInvariants) {
  const auto& store = ingested("a4");
  std::mt19937_64 rng(11);
  const char* words[] = {"pointing", "monitor", "speech", "desk", "late", "early", "user1", "user2", "gaze", "lamp"};
  for (int trial = 0; trial < 150; ++trial) {
    std::vector<Finding> findings;
    int n = static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i) {
      Finding f;
      f.aspect = kAgentKinds[rng() % 6];
      for (int w = 0; w < 2 + static_cast<int>(rng() % 3); ++w) f.title += std::string(words[rng() % 10]) + " ";
      f.body = f.title + "with a longer explanation attached";
      for (int m = 0; m < static_cast<int>(rng() % 4); ++m) {
        f.action_ids.push_back(rng() % 5 == 0 ? "X" + std::to_string(rng() % 100)
                                              : store.records[rng() % store.records.size()].id);
      }
      findings.push_back(std::move(f));
    }
    auto report = coordinate(findings, store, InsightMode::Multi);
    ASSERT_LE(report.insights.size(), 10u);
    std::set<std::string> cited;
    for (std::size_t i = 0; i < report.insights.size(); ++i) {
      const auto& ins = report.insights[i];
      EXPECT_EQ(ins.id, "ins-" + std::to_string(i + 1));
      ASSERT_FALSE(ins.markers.empty());
      EXPECT_TRUE(std::is_sorted(ins.markers.begin(), ins.markers.end(),
                                 [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; }));
      if (i > 0) EXPECT_LE(report.insights[i - 1].markers.front().timestamp, ins.markers.front().timestamp);
      for (std::size_t j = 0; j < i; ++j) EXPECT_LT(title_similarity(report.insights[j].title, ins.title), 0.8);
      for (const auto& m : ins.markers) {
        const auto* r = store.find(m.action_id);
        ASSERT_NE(r, nullptr);
        EXPECT_EQ(r->start_time, m.timestamp);
        cited.insert(m.action_id);
      }
    }
    std::set<std::string> global;
    for (const auto& m : report.markers) {
      global.insert(m.action_id);
      for (const auto& iid : m.insight_ids) {
        auto& ins = report.insights.at(std::stoul(iid.substr(4)) - 1);
        EXPECT_TRUE(std::any_of(ins.markers.begin(), ins.markers.end(),
                                [&](const AoIMarker& x) { return x.action_id == m.action_id; }));
      }
    }
    EXPECT_EQ(global, cited);
  }
}

// --- generation ------------------------------------------------------------

TEST(Generate, MultiAgentRunOnCollaborationPreset) {
  const auto& store = ingested("a4");
  auto mock = fixtures_of("a4");
  auto report = generate_insights(store, "How do the two subjects coordinate?", InsightMode::Multi, *mock);
  EXPECT_GE(report.insights.size(), 1u);
  EXPECT_LE(report.insights.size(), 10u);
  EXPECT_EQ(mock->calls(), 6u);
  for (auto k : kAgentKinds) EXPECT_EQ(mock->calls("insight." + std::string(to_string(k))), 1u);
  EXPECT_TRUE(std::any_of(report.insights.begin(), report.insights.end(),
                          [](const Insight& i) { return i.aspects.size() > 1; }))
      << "the duplicated frequency finding should merge";
  for (const auto& i : report.insights) EXPECT_EQ(i.source, InsightMode::Multi);
}

TEST(Generate, ByteDeterministicAcrossRunsAndParallelism) {
  const auto& store = ingested("a4");
  std::string first;
  for (std::size_t par : {6u, 1u, 3u, 6u}) {
    auto mock = fixtures_of("a4");
    InsightOptions opts;
    opts.parallelism = par;
    auto dump = to_json(generate_insights(store, "", InsightMode::Multi, *mock, opts)).dump();
    if (first.empty()) first = dump;
    EXPECT_EQ(dump, first) << "parallelism " << par;
  }
}

TEST(Generate, AgentIsolation) {
  const auto& store = ingested("a4");
  auto full = generate_insights(store, "", InsightMode::Multi, *fixtures_of("a4"));
  for (auto x : kAgentKinds) {
    auto mock = fixtures_of("a4");
    mock->add_failure("insight." + std::string(to_string(x)), "*");
    auto part = generate_insights(store, "", InsightMode::Multi, *mock);
    ASSERT_FALSE(part.diagnostics.empty());
    EXPECT_NE(part.diagnostics.front().find(std::string(to_string(x))), std::string::npos);
    for (const auto& p : part.insights) {
      EXPECT_EQ(std::count(p.aspects.begin(), p.aspects.end(), x), 0) << to_string(x);
      // Nothing new: every surviving insight restates one from the full run and cites a subset.
      auto twin = std::find_if(full.insights.begin(), full.insights.end(),
                               [&](const Insight& f) { return title_similarity(f.title, p.title) >= 0.8; });
      ASSERT_NE(twin, full.insights.end()) << p.title;
      EXPECT_TRUE(subset(p, *twin));
    }
    for (const auto& f : full.insights) {
      bool only_x = f.aspects == std::vector<AgentKind>{x};
      bool touches_x = std::count(f.aspects.begin(), f.aspects.end(), x) > 0;
      auto twin = std::find_if(part.insights.begin(), part.insights.end(),
                               [&](const Insight& p) { return title_similarity(f.title, p.title) >= 0.8; });
      if (only_x) {
        EXPECT_EQ(twin, part.insights.end()) << f.title;
      } else {
        ASSERT_NE(twin, part.insights.end()) << f.title;
        if (!touches_x) {
          EXPECT_EQ(twin->title, f.title);
          EXPECT_EQ(twin->body, f.body);
          EXPECT_EQ(twin->markers.size(), f.markers.size());
        }
      }
    }
  }
}

TEST(Generate, UnparseableAgentReplyIsRetriedOnce) {
  const auto& store = ingested("a4");
  auto mock = fixtures_of("a4");
  mock->add_sequence("insight.space", "*", {"not json at all", R"([{"title":"Subjects stay apart",
      "body":"The two subjects keep a steady distance throughout.","markers":[")" + store.records[3].id + R"("]}])"});
  auto report = generate_insights(store, "", InsightMode::Multi, *mock);
  EXPECT_EQ(mock->calls("insight.space"), 2u);
  EXPECT_TRUE(std::any_of(report.insights.begin(), report.insights.end(),
                          [](const Insight& i) { return i.title == "Subjects stay apart"; }));

  auto twice = fixtures_of("a4");
  twice->add("insight.space", "*", "still not json");
  auto r2 = generate_insights(store, "", InsightMode::Multi, *twice);
  EXPECT_EQ(twice->calls("insight.space"), 2u);
  EXPECT_TRUE(std::none_of(r2.insights.begin(), r2.insights.end(), [](const Insight& i) {
    return std::count(i.aspects.begin(), i.aspects.end(), AgentKind::Space) > 0;
  }));
}

TEST(Generate, AllAgentsFailing) {
  const auto& store = ingested("a4");
  MockLlmClient mock;
  for (auto k : kAgentKinds) mock.add_failure("insight." + std::string(to_string(k)), "*");
  try {
    generate_insights(store, "", InsightMode::Multi, mock);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllAgentsFailed);
  }
  MockLlmClient dangling;
  for (auto k : kAgentKinds) {
    dangling.add("insight." + std::string(to_string(k)), "*",
                 R"([{"title":"Ghost","body":"Cites nothing real at all.","markers":["NOPE"]}])");
  }
  EXPECT_THROW(generate_insights(store, "", InsightMode::Multi, dangling), Error);
}

TEST(Generate, SingleModeUsesOneCall) {
  const auto& store = ingested("a4");
  auto mock = fixtures_of("a4");
  Recording rec(*mock);
  auto report = generate_insights(store, "", InsightMode::Single, rec);
  EXPECT_EQ(mock->calls(), 1u);
  EXPECT_EQ(mock->ledger()[0].task, "insight.single");
  EXPECT_GE(report.insights.size(), 1u);
  EXPECT_LE(report.insights.size(), 10u);
  for (const auto& i : report.insights) EXPECT_EQ(i.source, InsightMode::Single);
  // The combined prompt carries every aspect's summary.
  for (auto k : kAgentKinds) {
    EXPECT_NE(rec.requests[0].user.find("[" + std::string(to_string(k)) + "]"), std::string::npos);
  }
}

TEST(Generate, DigestsCiteRealIdsAndNoRawNames) {
  for (const char* preset : {"a1", "a4", "a5"}) {
    const auto& store = ingested(preset);
    const auto& manifest = test::simulated(preset).manifest;
    for (auto k : kAgentKinds) {
      auto d = aspect_digest(store, k);
      EXPECT_FALSE(d.empty());
      for (const auto& u : manifest["users"]) EXPECT_EQ(d.find(u.get<std::string>()), std::string::npos);
      if (k != AgentKind::Context) EXPECT_NE(d.find(store.records.front().id.substr(0, 1)), std::string::npos);
    }
  }
}

TEST(Generate, ReportJsonRoundTrip) {
  const auto& store = ingested("a4");
  auto report = generate_insights(store, "aoi", InsightMode::Multi, *fixtures_of("a4"));
  auto j = to_json(report);
  EXPECT_EQ(to_json(insight_report_from_json(j)), j);
  EXPECT_THROW(insight_report_from_json(json::object()), Error);
}

// --- judging ---------------------------------------------------------------

TEST(Evaluate, ConstantJudgeAveragesToItsScore) {
  const auto& store = ingested("a4");
  auto report = generate_insights(store, "", InsightMode::Multi, *fixtures_of("a4"));
  MockLlmClient judge;
  judge.add("judge", "*", judge_reply(7));
  auto s = evaluate_insights(report, "", judge, 5);
  for (double c : s.c) EXPECT_DOUBLE_EQ(c, 7.0);
  EXPECT_EQ(s.runs, 5);
  EXPECT_EQ(judge.calls(), 5u);
  EXPECT_EQ(s.method, InsightMode::Multi);
}

TEST(Evaluate, MeanOverRunsAndFailedRunsExcluded) {
  const auto& store = ingested("a4");
  auto report = generate_insights(store, "", InsightMode::Multi, *fixtures_of("a4"));
  MockLlmClient judge;
  judge.add_sequence("judge", "*", {judge_reply(6), judge_reply(8)});
  auto s = evaluate_insights(report, "", judge, 2);
  for (double c : s.c) EXPECT_DOUBLE_EQ(c, 7.0);

  MockLlmClient flaky;
  flaky.add_sequence("judge", "*", {judge_reply(6), "nonsense", judge_reply(11), judge_reply(9)});
  auto f = evaluate_insights(report, "", flaky, 4);
  EXPECT_EQ(f.runs, 2);
  EXPECT_EQ(f.failed_runs, 2);
  for (double c : f.c) EXPECT_DOUBLE_EQ(c, 7.5);

  MockLlmClient dead;
  dead.add_failure("judge", "*");
  try {
    evaluate_insights(report, "", dead, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllRunsFailed);
  }
  EXPECT_THROW(evaluate_insights(report, "", judge, 0), Error);
}

TEST(Evaluate, JudgeSeesInsightsAndAoIOnly) {
  const auto& store = ingested("a4");
  auto report = generate_insights(store, "Where do they look?", InsightMode::Multi, *fixtures_of("a4"));
  MockLlmClient judge;
  judge.add("judge", "*", judge_reply(5));
  Recording rec(judge);
  evaluate_insights(report, "Where do they look?", rec, 3);
  ASSERT_EQ(rec.requests.size(), 3u);
  std::set<std::uint64_t> seeds;
  for (const auto& r : rec.requests) {
    seeds.insert(r.seed);
    EXPECT_TRUE(r.images.empty());
    EXPECT_NE(r.user.find("Where do they look?"), std::string::npos);
    EXPECT_NE(r.user.find(report.insights.front().title), std::string::npos);
    for (const auto& m : report.markers) EXPECT_EQ(r.user.find(m.action_id), std::string::npos);
    EXPECT_EQ(r.user.find(store.meta.session_id), std::string::npos);
  }
  EXPECT_EQ(seeds.size(), 3u);
}

TEST(Evaluate, ComparisonTable) {
  EvalScores single{{8.20, 7.64, 9.38, 8.72, 8.00}, InsightMode::Single, 1, 0};
  EvalScores multi{{8.73, 8.78, 9.29, 9.35, 8.90}, InsightMode::Multi, 1, 0};
  auto table = render_comparison(single, multi);
  EXPECT_NE(table.find("| Single-agent | 8.20 | 7.64 | 9.38 | 8.72 | 8.00 |"), std::string::npos) << table;
  EXPECT_NE(table.find("| Multi-agent | 8.73 | 8.78 | 9.29 | 9.35 | 8.90 |"), std::string::npos) << table;
  EXPECT_EQ(render_comparison(std::nullopt, multi).find("Single"), std::string::npos);
  auto j = to_json(multi);
  auto back = eval_scores_from_json(j);
  EXPECT_EQ(back.c, multi.c);
  EXPECT_EQ(back.method, InsightMode::Multi);
}
