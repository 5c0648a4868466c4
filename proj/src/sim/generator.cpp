#include "exr/sim/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "exr/context3d/reconstruct.hpp"
#include "exr/sim/scene.hpp"
#include "exr/uad/digest.hpp"
#include "exr/uad/error.hpp"
#include "exr/uad/recorder.hpp"
#include "exr/uad/serialize.hpp"
#include "exr/uad/validate.hpp"

#ifndef EXR_SCENARIO_DIR
#define EXR_SCENARIO_DIR "scenarios"
#endif

namespace exr::sim {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Raw engine output mapped by hand so results do not depend on the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double uniform() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  double range(double a, double b) { return a + (b - a) * uniform(); }
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : g_() % n; }

 private:
  std::mt19937_64 g_;
};

double snap(double v, double unit) { return std::round(v / unit) * unit; }

struct ObjectDef {
  RealityType reality = RealityType::Virtual;
  std::string model = "none";  // box | sphere | none
  Vec3 size{0.1, 0.1, 0.1};
  Color color{180, 180, 180};
  std::string label;
  double confidence = 0.9;
};

struct Instance {
  int track = 0;
  int index = 0;
  int user = 0;  // 0-based
  std::string name;
  ActionType type = ActionType::Discrete;
  std::string intent;
  std::string trigger;
  std::int64_t start_ms = 0;
  std::int64_t duration_ms = 0;
  std::vector<Transform> locations;
  std::string referent;  // instance name, empty when none
  std::string object;    // catalog key
  Transform referent_location;
  bool capture = false;
  RealityType context_type = RealityType::Virtual;
  std::optional<std::string> transcript;
  std::optional<std::string> intent_estimate;
  std::string id;
  std::string alias;
};

Vec3 vec3(const json& j) { return j.get<Vec3>(); }

void bump(json& obj, const std::string& key, std::int64_t by) {
  if (!obj.is_object()) obj = json::object();
  obj[key] = obj.value(key, std::int64_t{0}) + by;
}

std::string strip_digits(const std::string& s) {
  auto end = s.find_last_not_of("0123456789");
  return end == std::string::npos ? s : s.substr(0, end + 1);
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

json marker_list(const std::vector<const Instance*>& xs, std::size_t limit) {
  json out = json::array();
  for (std::size_t i = 0; i < xs.size() && i < limit; ++i) out.push_back({{"actionId", xs[i]->id}});
  return out;
}

json finding(std::string title, std::string body, json markers) {
  return {{"title", std::move(title)}, {"body", std::move(body)}, {"markers", std::move(markers)}};
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Findings the mock agents return. They cite real record ids so marker
// validation passes; one title deliberately repeats across agents.
std::map<std::string, json> insight_fixtures(const std::vector<Instance>& all) {
  std::vector<const Instance*> by_start;
  for (const auto& x : all) by_start.push_back(&x);
  std::stable_sort(by_start.begin(), by_start.end(),
                   [](const Instance* a, const Instance* b) { return a->start_ms < b->start_ms; });

  std::map<std::string, std::vector<const Instance*>> per_user, per_action;
  std::vector<std::string> user_order, action_order;
  for (const auto* x : by_start) {
    if (!per_user.contains(x->alias)) user_order.push_back(x->alias);
    if (!per_action.contains(x->name)) action_order.push_back(x->name);
    per_user[x->alias].push_back(x);
    per_action[x->name].push_back(x);
  }
  auto most = [](const auto& groups, const auto& order) {
    std::string best = order.front();
    for (const auto& k : order) {
      if (groups.at(k).size() > groups.at(best).size()) best = k;
    }
    return best;
  };
  auto least = [](const auto& groups, const auto& order) {
    std::string best = order.front();
    for (const auto& k : order) {
      if (groups.at(k).size() < groups.at(best).size()) best = k;
    }
    return best;
  };
  std::map<std::string, json> out;
  const std::string top_action = most(per_action, action_order);
  const std::string rare_action = least(per_action, action_order);
  const std::string top_user = most(per_user, user_order);

  json space = json::array();
  for (std::size_t u = 0; u < user_order.size() && u < 2; ++u) {
    const auto& xs = per_user[user_order[u]];
    double cx = 0, cz = 0;
    for (const auto* x : xs) {
      cx += x->locations.front().pos[0];
      cz += x->locations.front().pos[2];
    }
    cx /= static_cast<double>(xs.size());
    cz /= static_cast<double>(xs.size());
    space.push_back(finding(user_order[u] + " stays within a compact area",
                            "Most of " + user_order[u] + "'s " + std::to_string(xs.size()) +
                                " actions were logged around x=" + fmt2(cx) + ", z=" + fmt2(cz) +
                                ", suggesting a stable working position.",
                            marker_list(xs, 2)));
  }
  out["space"] = space;

  json time = json::array();
  time.push_back(finding("Session opens with " + by_start.front()->name,
                         "The first logged actions are " + by_start.front()->name +
                             " events, which set the pace for the rest of the session.",
                         marker_list(by_start, 2)));
  std::vector<const Instance*> tail(by_start.end() - 1, by_start.end());
  time.push_back(finding(tail.front()->alias + " remains active until the end",
                         "The final action of the session belongs to " + tail.front()->alias + " (" +
                             tail.front()->name + ").",
                         marker_list(tail, 1)));
  out["time"] = time;

  json action = json::array();
  action.push_back(finding(top_action + " is the most frequent action",
                           top_action + " occurs " + std::to_string(per_action[top_action].size()) +
                               " times, more than any other action type.",
                           marker_list(per_action[top_action], 3)));
  if (rare_action != top_action) {
    action.push_back(finding(rare_action + " is rarely used",
                             rare_action + " appears only " + std::to_string(per_action[rare_action].size()) +
                                 " times across all subjects.",
                             marker_list(per_action[rare_action], 1)));
  }
  out["action"] = action;

  json intent = json::array();
  std::vector<const Instance*> post;
  for (const auto* x : by_start) {
    if (x->intent == kPostDefinedIntent) post.push_back(x);
  }
  if (!post.empty()) {
    intent.push_back(finding("Spoken remarks carry post-defined intents",
                             std::to_string(post.size()) +
                                 " actions had no developer-defined intent and were explained from speech.",
                             marker_list(post, 3)));
  } else {
    const auto* first = by_start.front();
    intent.push_back(finding("Most actions aim to " + first->intent,
                             "The dominant declared intent is '" + first->intent + "', matching the task script.",
                             marker_list(by_start, 2)));
  }
  out["intent"] = intent;

  json context = json::array();
  std::vector<const Instance*> captured;
  for (const auto* x : by_start) {
    if (x->capture) captured.push_back(x);
  }
  context.push_back(finding(captured.empty() ? "No scene captures were logged" : "Captured context shows the work area",
                            captured.empty() ? "The session holds no context snapshots, so spatial context is "
                                               "limited to logged transforms."
                                             : std::to_string(captured.size()) +
                                                   " actions carry RGB-D snapshots of the surrounding panels.",
                            marker_list(captured.empty() ? by_start : captured, 3)));
  out["context"] = context;

  json user = json::array();
  user.push_back(finding(top_user + " is the most active subject",
                         top_user + " logged " + std::to_string(per_user[top_user].size()) +
                             " actions, the highest count in the session.",
                         marker_list(per_user[top_user], 2)));
  // Same claim as the Action agent, differently cased: the coordinator merges it.
  user.push_back(finding(top_action + " Is The Most Frequent Action",
                         "Across subjects, " + top_action + " dominates the action mix in this session.",
                         marker_list(std::vector<const Instance*>(per_action[top_action].rbegin(),
                                                                  per_action[top_action].rend()),
                                     2)));
  out["user"] = user;

  json single = json::array();
  for (const auto& [agent, f] : {std::pair{"action", action[0]}, std::pair{"time", time[0]},
                                 std::pair{"user", user[0]}, std::pair{"context", context[0]}}) {
    json tagged = f;
    tagged["aspect"] = agent;
    single.push_back(tagged);
  }
  out["single"] = single;
  return out;
}

}  // namespace

fs::path default_scenario_dir() {
  if (const char* env = std::getenv("EXR_SCENARIO_DIR"); env && *env) return env;
  return EXR_SCENARIO_DIR;
}

json load_scenario(const std::string& name_or_path, const fs::path& scenario_dir) {
  fs::path path = name_or_path;
  if (!fs::exists(path)) {
    std::string wanted = name_or_path;
    for (const char* preset : kPresetNames) {
      std::string p = preset;
      if (wanted == p || wanted == p.substr(0, 2)) wanted = p;
    }
    path = scenario_dir / (wanted + ".json");
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "scenario " + name_or_path + " (looked at " + path.string() + ")");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, path.string() + " is not JSON");
  return j;
}

Bytes synth_wav(double seconds, double frequency_hz, int sample_rate) {
  auto n = static_cast<std::uint32_t>(std::lround(seconds * sample_rate));
  Bytes out;
  auto put = [&](std::uint32_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put(36 + n * 2, 4);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put(16, 4);
  put(1, 2);  // PCM
  put(1, 2);  // mono
  put(static_cast<std::uint32_t>(sample_rate), 4);
  put(static_cast<std::uint32_t>(sample_rate * 2), 4);
  put(2, 2);
  put(16, 2);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put(n * 2, 4);
  for (std::uint32_t i = 0; i < n; ++i) {
    double s = 0.3 * std::sin(2 * std::numbers::pi * frequency_hz * i / sample_rate);
    put(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(s * 32767))), 2);
  }
  return out;
}

RgbImage object_snapshot(const std::string& name, const Color& color) {
  RgbImage img(64, 48);
  std::uint32_t h = 2166136261u;
  for (unsigned char c : name) h = (h ^ c) * 16777619u;
  int period = 4 + static_cast<int>(h % 9);
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      bool stripe = ((u + v) / period) % 2 == 0;
      auto* px = img.at(u, v);
      for (int c = 0; c < 3; ++c) px[c] = static_cast<std::uint8_t>(stripe ? color[c] : color[c] * 3 / 4);
    }
  }
  return img;
}

json generate_session(const json& script, const fs::path& out, const GenerateOptions& opts) {
  try {
    Rng rng(opts.seed);
    std::vector<std::string> users = script.at("users").get<std::vector<std::string>>();
    if (opts.users) {
      if (*opts.users < 1 || static_cast<std::size_t>(*opts.users) > users.size()) {
        throw Error(ErrorCode::InvalidArgument, "scenario scripts " + std::to_string(users.size()) + " users");
      }
      users.resize(static_cast<std::size_t>(*opts.users));
    }
    const std::string preset = script.value("preset", "custom");
    const Timestamp session_start = Timestamp::parse(script.value("start", "240801:090000:000"));
    const json cap_cfg = script.value("capture", json::object());
    const int cap_w = cap_cfg.value("width", 480), cap_h = cap_cfg.value("height", 270);
    const double focal = cap_cfg.value("focal", 300.0);
    const std::string cap_axis = cap_cfg.value("axis", "+z");
    Scene scene = scene_from_json(script.at("scene"));
    if (scene.primitives.empty()) throw Error(ErrorCode::InvalidArgument, "scene has no primitives");
    {
      std::set<std::string> names;
      for (const auto& p : scene.primitives) {
        if (!names.insert(p.name).second) throw Error(ErrorCode::InvalidArgument, "duplicate primitive " + p.name);
      }
    }

    std::map<std::string, ObjectDef> catalog;
    const json objects = script.value("objects", json::object());
    for (const auto& [key, o] : objects.items()) {
      ObjectDef d;
      d.reality = parse_reality_type(o.value("reality", "Virtual"));
      d.model = o.value("model", "none");
      if (o.contains("size")) d.size = vec3(o["size"]);
      if (o.contains("color")) d.color = o["color"].get<Color>();
      d.label = o.value("label", key);
      d.confidence = o.value("confidence", 0.9);
      catalog[key] = d;
    }

    // Expand tracks into action instances.
    std::vector<Instance> all;
    std::map<std::string, Transform> referent_pose;
    int track_no = 0;
    for (const auto& t : script.at("tracks")) {
      ++track_no;
      int user = t.at("user").get<int>() - 1;
      if (user < 0 || static_cast<std::size_t>(user) >= users.size()) continue;
      std::vector<std::string> names = t.contains("names") ? t["names"].get<std::vector<std::string>>()
                                                           : std::vector<std::string>{t.at("name").get<std::string>()};
      std::vector<std::string> triggers = t.contains("triggers")
                                              ? t["triggers"].get<std::vector<std::string>>()
                                              : std::vector<std::string>{t.value("trigger", "XRController")};
      const auto type = parse_action_type(t.value("type", "Discrete"));
      const int count = t.at("count").get<int>();
      const std::int64_t period = t.value("periodMs", 1000);
      const std::int64_t jitter = t.value("jitterMs", 0);
      const auto dur = t.value("durationMs", std::vector<std::int64_t>{100, 100});
      const std::int64_t sample_ms = t.value("sampleMs", 100);
      const json area = t.value("area", json{{"center", {0, 1.6, 0}}, {"radius", 0.5}});
      const Vec3 center = vec3(area.at("center"));
      const double radius = area.value("radius", 0.5);
      const int capture_every = t.value("captureEvery", 0);
      const auto context_type = parse_reality_type(t.value("contextType", "Virtual"));
      const json referent = t.value("referent", json());
      const json audio = t.value("audio", json());
      const auto estimates = t.value("intentEstimates", std::vector<std::string>{});

      std::int64_t cursor = session_start.unix_millis() + t.value("startMs", 0);
      for (int i = 0; i < count; ++i) {
        Instance x;
        x.track = track_no;
        x.index = i;
        x.user = user;
        x.name = names[static_cast<std::size_t>(i) % names.size()];
        x.trigger = triggers[static_cast<std::size_t>(i) % triggers.size()];
        x.type = type;
        x.intent = t.at("intent").get<std::string>();
        x.start_ms = cursor + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(jitter) + 1));
        x.duration_ms = dur[0] + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(dur[1] - dur[0]) + 1));
        cursor += period;

        double ang = rng.range(0, 2 * std::numbers::pi), rad = radius * std::sqrt(rng.uniform());
        Transform loc;
        loc.pos = {snap(center[0] + rad * std::cos(ang), 1e-3), snap(center[1], 1e-3),
                   snap(center[2] + rad * std::sin(ang), 1e-3)};
        loc.rot = {snap(rng.range(-15, 15), 0.1), snap(rng.range(-180, 180), 0.1), 0};
        x.locations.push_back(loc);
        if (type == ActionType::Continuous) {
          std::int64_t n = std::max<std::int64_t>(1, (x.duration_ms + sample_ms - 1) / sample_ms);
          for (std::int64_t k = 1; k < n; ++k) {
            Transform next = x.locations.back();
            next.pos[0] = snap(next.pos[0] + rng.range(-0.03, 0.03), 1e-3);
            next.pos[2] = snap(next.pos[2] + rng.range(-0.03, 0.03), 1e-3);
            next.rot[1] = snap(std::clamp(next.rot[1] + rng.range(-3, 3), -180.0, 180.0), 0.1);
            x.locations.push_back(next);
          }
        }

        if (!referent.is_null()) {
          x.object = referent.at("object").get<std::string>();
          if (!catalog.contains(x.object)) throw Error(ErrorCode::InvalidArgument, "unknown object " + x.object);
          int instances = referent.value("instances", 1);
          x.referent = x.object + std::to_string(1 + rng.below(static_cast<std::uint64_t>(instances)));
          if (!referent_pose.contains(x.referent)) {
            Transform p;
            double a = rng.range(0, 2 * std::numbers::pi);
            p.pos = {snap(center[0] + 1.5 * std::cos(a), 1e-3), snap(rng.range(0.5, 1.5), 1e-3),
                     snap(center[2] + 1.5 * std::sin(a), 1e-3)};
            referent_pose[x.referent] = p;
          }
          x.referent_location = referent_pose[x.referent];
        }
        x.capture = capture_every > 0 && i % capture_every == 0;
        x.context_type = context_type;
        if (!audio.is_null()) {
          auto lines = audio.at("transcripts").get<std::vector<std::string>>();
          x.transcript = lines[static_cast<std::size_t>(i) % lines.size()];
        }
        if (x.intent == kPostDefinedIntent && !estimates.empty()) {
          x.intent_estimate = estimates[static_cast<std::size_t>(i) % estimates.size()];
        }
        all.push_back(std::move(x));
      }
    }
    if (all.empty()) throw Error(ErrorCode::InvalidArgument, "scenario produced no actions");

    // Log in completion order, as a live application would.
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return all[a].start_ms + all[a].duration_ms < all[b].start_ms + all[b].duration_ms;
    });

    // Expected aliases: first appearance by start time.
    std::vector<std::pair<std::int64_t, int>> first_seen;
    for (std::size_t u = 0; u < users.size(); ++u) {
      std::int64_t best = INT64_MAX;
      for (const auto& x : all) {
        if (x.user == static_cast<int>(u)) best = std::min(best, x.start_ms);
      }
      if (best != INT64_MAX) first_seen.emplace_back(best, static_cast<int>(u));
    }
    std::stable_sort(first_seen.begin(), first_seen.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::map<int, std::string> alias_of;
    json alias_json = json::object();
    for (std::size_t k = 0; k < first_seen.size(); ++k) {
      alias_of[first_seen[k].second] = "User" + std::to_string(k + 1);
      alias_json[users[static_cast<std::size_t>(first_seen[k].second)]] = alias_of[first_seen[k].second];
    }
    for (auto& x : all) x.alias = alias_of[x.user];

    fs::remove_all(out);
    fs::create_directories(out);
    json captures_manifest = json::array();
    std::map<std::string, std::pair<std::string, double>> classify_by_sha;
    {
      RecorderOptions ro;
      ro.session_dir = out;
      ro.session_id = script.value("sessionId", preset + "-" + std::to_string(opts.seed));
      ro.app_name = script.value("appName", preset);
      ro.virtuality = parse_virtuality(script.value("virtuality", "VR"));
      Recorder rec(ro);
      for (std::size_t oi : order) {
        auto& x = all[oi];
        LogRequest req;
        req.name = x.name;
        req.type = x.type;
        req.intent = x.intent;
        req.user = users[static_cast<std::size_t>(x.user)];
        req.location = x.locations;
        req.trigger_source = x.trigger;
        req.start_time = Timestamp::from_unix_millis(x.start_ms);
        req.duration = TimeDelta::from_millis(x.duration_ms);
        req.context_type = x.context_type;
        if (!x.referent.empty()) {
          const auto& def = catalog[x.object];
          ReferentPayload rp;
          rp.name = x.referent;
          std::array<float, 4> col{def.color[0] / 255.0f, def.color[1] / 255.0f, def.color[2] / 255.0f, 1.0f};
          if (def.model == "box") {
            rp.model = box_mesh(x.referent, {def.size[0] / 2, def.size[1] / 2, def.size[2] / 2}, col);
          } else if (def.model == "sphere") {
            rp.model = uv_sphere_mesh(x.referent, def.size[0] / 2, 12, 24, col);
          }
          if (def.reality == RealityType::Physical) {
            rp.snapshot = object_snapshot(x.referent, def.color);
            classify_by_sha[sha256_hex(encode_png(*rp.snapshot))] = {def.label, def.confidence};
          }
          req.referent = std::move(rp);
          req.referent_type = def.reality;
          req.referent_location = {x.referent_location};
        }
        if (x.capture) {
          auto k = axis_camera(x.locations.front().pos, cap_axis, cap_w, cap_h, focal);
          req.context.push_back(render_capture(scene, k));
          req.context.back().source_reality = x.context_type;
        }
        if (x.transcript) {
          req.audio = synth_wav(0.25 + 0.05 * static_cast<double>(x.index % 5), 220.0 + 20.0 * x.index);
        }
        x.id = rec.log(std::move(req));
      }
      rec.finalize();
    }

    // Re-parse what was written: every record must validate and the
    // manifest is built from the emitted ids.
    SessionStore store = read_session(out);
    if (store.records.size() != all.size()) {
      throw Error(ErrorCode::IoFailure, "emitted record count differs from script");
    }
    for (const auto& r : store.records) {
      auto rep = validate_record(r);
      if (!rep.accepted()) throw Error(ErrorCode::MalformedRecord, r.id + " fails validation");
    }

    std::sort(all.begin(), all.end(), [](const Instance& a, const Instance& b) { return a.id < b.id; });
    json instances = json::array();
    json counts = json::object(), referent_counts = json::object(), class_counts = json::object();
    json samples = json::object();
    std::int64_t total_samples = 0;
    json fixtures = json::array();
    fs::create_directories(out / "fixtures" / "transcripts");
    for (const auto& x : all) {
      const ActionRecord* r = store.find(x.id);
      json locs = json::array();
      for (const auto& l : x.locations) locs.push_back(l.pos);
      json inst = {{"id", x.id},
                   {"user", users[static_cast<std::size_t>(x.user)]},
                   {"alias", x.alias},
                   {"name", x.name},
                   {"type", to_string(x.type)},
                   {"intent", x.intent},
                   {"start", Timestamp::from_unix_millis(x.start_ms).to_string()},
                   {"durationMs", x.duration_ms},
                   {"locations", locs}};
      if (!x.referent.empty()) {
        const auto& def = catalog[x.object];
        inst["referent"] = x.referent;
        inst["referentType"] = to_string(def.reality);
        std::string key = def.reality == RealityType::Physical ? def.label : x.referent;
        bump(referent_counts[x.alias], key, 1);
        std::string cls = def.reality == RealityType::Physical ? def.label : strip_digits(x.referent);
        bump(class_counts[x.alias], cls, 1);
      }
      if (x.capture) {
        inst["capture"] = true;
        json cam = json::parse(dump_camera_params(axis_camera(x.locations.front().pos, cap_axis, cap_w, cap_h, focal)));
        captures_manifest.push_back({{"actionId", x.id}, {"camera", cam}});
        std::vector<std::string> panels;
        for (const auto& p : scene.primitives) panels.push_back(p.name);
        fixtures.push_back({{"task", "describe_context"},
                            {"key", x.id},
                            {"response", "Snapshot taken while " + x.alias + " performed " + x.name +
                                             "; surfaces in view include " + join(panels, ", ") + "."}});
      }
      if (x.transcript) {
        inst["transcript"] = *x.transcript;
        auto clips = r->context_assets(AssetKind::AudioClip);
        if (clips.empty()) throw Error(ErrorCode::IoFailure, x.id + " lost its audio clip");
        std::ofstream(out / "fixtures" / "transcripts" / (fs::path(clips[0]->path).filename().string() + ".expected.txt"),
                      std::ios::binary)
            << *x.transcript;
      }
      if (x.intent_estimate) {
        fixtures.push_back({{"task", "estimate_intent"}, {"key", x.id}, {"response", *x.intent_estimate}});
        inst["intentEstimate"] = *x.intent_estimate;
      }
      bump(counts[x.alias], x.name, 1);
      bump(samples[x.alias], x.name, static_cast<std::int64_t>(x.locations.size()));
      total_samples += static_cast<std::int64_t>(x.locations.size());
      instances.push_back(inst);
    }
    for (const auto& [sha, lc] : classify_by_sha) {
      json resp = {{"label", lc.first}, {"confidence", lc.second}};
      fixtures.push_back({{"task", "classify_referent"}, {"key", sha}, {"response", resp.dump()}});
    }
    for (const auto& [agent, findings] : insight_fixtures(all)) {
      fixtures.push_back({{"task", "insight." + agent}, {"key", "*"}, {"response", findings.dump()}});
    }
    const json judge = script.value("judge", json{{"single", {7, 7, 7, 7, 7}}, {"multi", {8, 8, 8, 8, 8}}});
    for (const auto& [mode, scores] : judge.items()) {
      json resp = json::object();
      for (int c = 0; c < 5; ++c) resp["c" + std::to_string(c + 1)] = scores.at(static_cast<std::size_t>(c));
      fixtures.push_back({{"task", "judge"}, {"key", mode}, {"response", resp.dump()}});
    }

    json manifest = {{"preset", preset},
                     {"label", script.value("label", "")},
                     {"seed", opts.seed},
                     {"sessionId", store.meta.session_id},
                     {"users", users},
                     {"aliases", alias_json},
                     {"recordCount", all.size()},
                     {"traceSampleCount", total_samples},
                     {"counts", counts},
                     {"sampleCounts", samples},
                     {"referentCounts", referent_counts},
                     {"referentClassCounts", class_counts},
                     {"scene", to_json(scene)},
                     {"captures", captures_manifest},
                     {"instances", instances}};
    std::ofstream(out / "manifest.json", std::ios::binary) << manifest.dump(1) << '\n';
    std::ofstream(out / "fixtures" / "llm.json", std::ios::binary) << fixtures.dump(1) << '\n';
    return manifest;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("scenario script: ") + e.what());
  }
}

}  // namespace exr::sim
