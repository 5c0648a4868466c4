#include <gtest/gtest.h>

#include <fstream>
#include <map>

#include "exr/context3d/reconstruct.hpp"
#include "exr/sim/generator.hpp"
#include "exr/uad/digest.hpp"
#include "exr/uad/error.hpp"
#include "support/geometry_oracle.hpp"
#include "support/temp_dir.hpp"
#include "support/tree_hash.hpp"

using namespace exr;
namespace fs = std::filesystem;

namespace {

class Presets : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new test::TempDir();
    for (const char* p : sim::kPresetNames) {
      manifests_[p] = sim::generate_session(sim::load_scenario(p), root_->path() / p);
    }
  }
  static void TearDownTestSuite() {
    delete root_;
    root_ = nullptr;
    manifests_.clear();
  }
  static fs::path dir(const std::string& p) { return root_->path() / p; }

  static inline test::TempDir* root_ = nullptr;
  static inline std::map<std::string, nlohmann::json> manifests_;
};

}  // namespace

TEST(Scenario, ShortNamesResolve) {
  auto a = sim::load_scenario("a2");
  auto b = sim::load_scenario("a2_mr_selection");
  EXPECT_EQ(a, b);
  EXPECT_THROW(sim::load_scenario("a9"), Error);
}

TEST(Scenario, SameSeedSameBytes) {
  test::TempDir t;
  auto script = sim::load_scenario("a3");
  sim::generate_session(script, t / "x", {.seed = 7});
  sim::generate_session(script, t / "y", {.seed = 7});
  sim::generate_session(script, t / "z", {.seed = 8});
  EXPECT_EQ(test::tree_hash(t / "x"), test::tree_hash(t / "y"));
  EXPECT_NE(test::tree_hash(t / "x"), test::tree_hash(t / "z"));
}

TEST(Scenario, UserCountLimit) {
  test::TempDir t;
  auto script = sim::load_scenario("a1");
  auto m = sim::generate_session(script, t / "s", {.seed = 1, .users = 1});
  EXPECT_EQ(m["users"].size(), 1u);
  EXPECT_EQ(read_session(t / "s").meta.users.size(), 1u);
  EXPECT_THROW(sim::generate_session(script, t / "s", {.seed = 1, .users = 3}), Error);
}

TEST(Scenario, MalformedScript) {
  test::TempDir t;
  EXPECT_THROW(sim::generate_session(nlohmann::json::object(), t / "s"), Error);
  auto script = sim::load_scenario("a2");
  script["tracks"][0]["referent"]["object"] = "Nope";
  EXPECT_THROW(sim::generate_session(script, t / "s"), Error);
}

TEST(Scenario, WavHeader) {
  auto wav = sim::synth_wav(0.5, 440);
  ASSERT_EQ(wav.size(), 44u + 16000u);
  EXPECT_EQ(std::string(wav.begin(), wav.begin() + 4), "RIFF");
  EXPECT_EQ(std::string(wav.begin() + 8, wav.begin() + 12), "WAVE");
}

TEST_F(Presets, ManifestMatchesStore) {
  for (const auto& [preset, m] : manifests_) {
    SCOPED_TRACE(preset);
    auto store = read_session(dir(preset));
    ASSERT_EQ(store.records.size(), m["recordCount"].get<std::size_t>());
    ASSERT_EQ(m["instances"].size(), store.records.size());
    std::size_t captures = 0;
    for (const auto& inst : m["instances"]) {
      const auto* r = store.find(inst["id"].get<std::string>());
      ASSERT_NE(r, nullptr);
      EXPECT_EQ(r->user, inst["user"]);
      EXPECT_EQ(r->name, inst["name"]);
      EXPECT_EQ(r->start_time.to_string(), inst["start"]);
      EXPECT_EQ(r->duration.total_millis(), inst["durationMs"]);
      ASSERT_EQ(r->location.size(), inst["locations"].size());
      for (std::size_t i = 0; i < r->location.size(); ++i) {
        EXPECT_EQ(r->location[i].pos, inst["locations"][i].get<Vec3>());
      }
      if (inst.contains("referent")) EXPECT_EQ(r->referent_name, inst["referent"]);
      captures += capture_indices(*r).size();
    }
    EXPECT_EQ(captures, m["captures"].size());
    EXPECT_GT(captures, 0u);
    EXPECT_LE(captures, 12u);

    std::int64_t counted = 0;
    for (const auto& [alias, actions] : m["counts"].items()) {
      for (const auto& [name, n] : actions.items()) counted += n.get<std::int64_t>();
    }
    EXPECT_EQ(counted, static_cast<std::int64_t>(store.records.size()));
  }
}

TEST_F(Presets, RecordsLoggedOutOfStartOrder) {
  // Completion-order logging means stored order is not start order, which
  // ingest has to fix.
  auto store = read_session(dir("a1_vr_game"));
  bool unordered = false;
  for (std::size_t i = 1; i < store.records.size(); ++i) {
    if (store.records[i].user == store.records[i - 1].user &&
        store.records[i].start_time < store.records[i - 1].start_time) {
      unordered = true;
    }
  }
  EXPECT_TRUE(unordered);
}

TEST_F(Presets, GrabSplitInFirstPreset) {
  const auto& m = manifests_["a1_vr_game"];
  std::string grabber = m["aliases"]["marco.ibanez"];
  EXPECT_EQ(m["counts"][grabber]["Grab"], 289);
  EXPECT_EQ(m["referentClassCounts"][grabber]["Cube"], 262);
  EXPECT_EQ(m["referentClassCounts"][grabber]["Sphere"], 27);
}

TEST_F(Presets, SelectionTechniquesAlternate) {
  auto store = read_session(dir("a2_mr_selection"));
  std::vector<const ActionRecord*> sel;
  for (const auto& r : store.records) {
    if (r.name == "RaySelect" || r.name == "GazeSelect") sel.push_back(&r);
  }
  ASSERT_EQ(sel.size(), 80u);
  std::stable_sort(sel.begin(), sel.end(),
                   [](const auto* a, const auto* b) { return a->start_time < b->start_time; });
  for (std::size_t i = 1; i < sel.size(); ++i) EXPECT_NE(sel[i]->name, sel[i - 1]->name) << i;
}

TEST_F(Presets, SpeechCarriesAudioAndPostDefinedIntent) {
  auto store = read_session(dir("a4_ar_collab"));
  int speak = 0;
  for (const auto& r : store.records) {
    if (r.name != "Speak") continue;
    ++speak;
    EXPECT_EQ(r.intent, kPostDefinedIntent);
    auto clips = r.context_assets(AssetKind::AudioClip);
    ASSERT_EQ(clips.size(), 1u);
    auto expected = dir("a4_ar_collab") / "fixtures" / "transcripts" /
                    (fs::path(clips[0]->path).filename().string() + ".expected.txt");
    EXPECT_TRUE(fs::exists(expected)) << expected;
  }
  EXPECT_EQ(speak, 8);
}

TEST_F(Presets, PhysicalReferentsHaveSnapshots) {
  auto store = read_session(dir("a5_ar_inspection"));
  for (const auto& r : store.records) {
    if (r.referent_type != RealityType::Physical || r.referent_name.empty()) continue;
    EXPECT_NE(r.find_referent(AssetKind::ReferentImage), nullptr) << r.id;
  }
}

TEST_F(Presets, FixturesCoverEveryAgent) {
  std::ifstream in(dir("a4_ar_collab") / "fixtures" / "llm.json");
  auto fx = nlohmann::json::parse(in);
  std::set<std::string> tasks;
  for (const auto& e : fx) tasks.insert(e["task"].get<std::string>());
  for (const char* t : {"insight.space", "insight.time", "insight.action", "insight.intent", "insight.context",
                        "insight.user", "insight.single", "judge", "classify_referent", "describe_context",
                        "estimate_intent"}) {
    EXPECT_TRUE(tasks.contains(t)) << t;
  }
}

TEST_F(Presets, BackprojectedCapturesLieOnSceneSurfaces) {
  for (const auto& [preset, m] : manifests_) {
    SCOPED_TRACE(preset);
    auto store = read_session(dir(preset));
    double worst = 0;
    std::size_t points = 0;
    for (const auto& r : store.records) {
      for (int idx : capture_indices(r)) {
        auto cloud = backproject(load_capture(store, r, idx), {.stride = 1});
        for (const auto& p : cloud.points) {
          worst = std::max(worst, test::surface_distance(m["scene"], {p.xyz[0], p.xyz[1], p.xyz[2]}));
        }
        points += cloud.points.size();
      }
    }
    EXPECT_GT(points, 0u);
    EXPECT_LT(worst, 1e-4);
  }
}
