#include "exr/insight/insights.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "exr/analytics/analytics.hpp"
#include "exr/insight/steps.hpp"
#include "exr/uad/error.hpp"

namespace exr {

using json = nlohmann::json;

namespace {

std::set<std::string> title_tokens(const std::string& s) {
  std::set<std::string> out;
  std::string cur;
  for (char ch : s) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.insert(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(cur);
  return out;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string seconds_between(Timestamp a, Timestamp b) {
  return fixed(static_cast<double>(b.unix_millis() - a.unix_millis()) / 1000.0, 1) + " s";
}

template <typename T>
std::string join_ids(const std::vector<T>& xs, std::size_t limit) {
  std::string out;
  for (std::size_t i = 0; i < xs.size() && i < limit; ++i) out += (i ? ", " : "") + std::string(xs[i]);
  if (xs.size() > limit) out += ", ... (" + std::to_string(xs.size()) + " total)";
  return out;
}

std::string header(const SessionStore& store) {
  auto [lo, hi] = session_bounds(store);
  std::ostringstream out;
  out << "Session " << store.meta.session_id << " (" << to_string(store.meta.virtuality) << ", app "
      << store.meta.app_name << "), " << store.records.size() << " actions by " << store.meta.users.size()
      << " subjects (" << join_ids(store.meta.users, 16) << ") from " << lo.to_string() << " to " << hi.to_string()
      << ".\n";
  return out.str();
}

std::string space_digest(const SessionStore& store) {
  std::ostringstream out;
  auto view = make_view(store);
  auto points = trace_map(view, 0.5);
  std::map<std::string, std::vector<const TracePoint*>> by_user;
  for (const auto& p : points) by_user[p.user].push_back(&p);
  for (const auto& u : store.meta.users) {
    auto& pts = by_user[u];
    if (pts.empty()) continue;
    std::stable_sort(pts.begin(), pts.end(), [](const auto* a, const auto* b) { return a->count > b->count; });
    out << u << " most visited 0.5 m cells:\n";
    for (std::size_t i = 0; i < pts.size() && i < 5; ++i) {
      const auto& p = *pts[i];
      out << "  (" << fixed(p.pos[0]) << ", " << fixed(p.pos[1]) << ", " << fixed(p.pos[2]) << ") " << p.action
          << " x" << p.count << " e.g. " << p.action_ids.front() << "\n";
    }
  }
  std::map<std::string, std::pair<Vec3, std::string>> referents;
  for (const auto& r : store.records) {
    if (!r.referent_name.empty() && !r.referent_location.empty() && !referents.contains(referent_key(r))) {
      referents[referent_key(r)] = {r.referent_location.front().pos, r.id};
    }
  }
  if (!referents.empty()) out << "Referent positions:\n";
  for (const auto& [name, v] : referents) {
    out << "  " << name << " at (" << fixed(v.first[0]) << ", " << fixed(v.first[1]) << ", " << fixed(v.first[2])
        << ") first touched in " << v.second << "\n";
  }
  return out.str();
}

std::string time_digest(const SessionStore& store) {
  std::ostringstream out;
  auto [lo, hi] = session_bounds(store);
  std::int64_t span = hi.unix_millis() - lo.unix_millis();
  std::int64_t bin = std::max<std::int64_t>(1000, (span + 19) / 20);
  auto m = bin_timeline(make_view(store), TimeDelta::from_millis(bin));
  out << "Timeline with " << m.bins.size() << " bins of " << fixed(static_cast<double>(bin) / 1000.0, 1) << " s:\n";
  for (const auto& row : m.rows) {
    out << "  " << row.user << " " << row.action << ":";
    for (int c : row.counts) out << ' ' << c;
    std::vector<std::string> ids;
    for (const auto& r : store.records) {
      if (r.user == row.user && r.name == row.action) ids.push_back(r.id);
    }
    out << " | first " << ids.front() << ", last " << ids.back() << "\n";
  }
  return out.str();
}

std::string action_digest(const SessionStore& store) {
  std::ostringstream out;
  auto stats = referent_stats(make_view(store));
  for (const auto& d : stats.durations) {
    double sum = 0;
    for (double s : d.seconds) sum += s;
    std::vector<std::string> ids;
    for (const auto& r : store.records) {
      if (r.user == d.user && r.name == d.action) ids.push_back(r.id);
    }
    out << "  " << d.user << " " << d.action << ": " << d.seconds.size() << " times, mean "
        << fixed(sum / static_cast<double>(d.seconds.size())) << " s; ids " << join_ids(ids, 4) << "\n";
  }
  if (!stats.classes.empty()) out << "Referents by class:\n";
  for (const auto& e : stats.classes) {
    out << "  " << e.user << " " << e.referent << " (" << to_string(e.type) << "): " << e.count << " interactions, "
        << fixed(e.total_seconds) << " s\n";
  }
  return out.str();
}

std::string intent_digest(const SessionStore& store) {
  std::ostringstream out;
  std::map<std::string, std::vector<std::string>> by_intent;
  for (const auto& r : store.records) by_intent[r.intent].push_back(r.id);
  for (const auto& [intent, ids] : by_intent) out << "  \"" << intent << "\": " << join_ids(ids, 4) << "\n";
  for (const auto& r : store.records) {
    auto t = transcript_of(r, store);
    if (!t && !r.processing.intent_estimated) continue;
    out << "  " << r.id << " " << r.user << " " << r.name;
    if (r.processing.intent_estimated) out << " estimated intent \"" << r.intent << "\"";
    if (t) out << " said \"" << *t << "\"";
    out << "\n";
  }
  return out.str();
}

std::string context_digest(const SessionStore& store) {
  std::ostringstream out;
  std::size_t n = 0;
  for (const auto& r : store.records) {
    if (!r.context_description) continue;
    out << "  " << r.id << " " << r.user << " " << r.name << " (" << to_string(r.context_type)
        << "): " << *r.context_description << "\n";
    ++n;
  }
  if (n == 0) {
    out << "  No context descriptions. Captured actions: ";
    std::vector<std::string> ids;
    for (const auto& r : store.records) {
      if (!r.context_assets(AssetKind::ContextRGB).empty()) ids.push_back(r.id);
    }
    out << (ids.empty() ? "none" : join_ids(ids, 10)) << "\n";
  }
  return out.str();
}

std::string user_digest(const SessionStore& store) {
  std::ostringstream out;
  for (const auto& u : store.meta.users) {
    std::map<std::string, int> counts;
    std::vector<const ActionRecord*> mine;
    for (const auto& r : store.records) {
      if (r.user == u) {
        counts[r.name]++;
        mine.push_back(&r);
      }
    }
    if (mine.empty()) continue;
    auto first = std::min_element(mine.begin(), mine.end(),
                                  [](const auto* a, const auto* b) { return a->start_time < b->start_time; });
    auto last = std::max_element(mine.begin(), mine.end(),
                                 [](const auto* a, const auto* b) { return a->end_time() < b->end_time(); });
    out << "  " << u << ": " << mine.size() << " actions over " << seconds_between((*first)->start_time, (*last)->end_time())
        << " (" << (*first)->id << " to " << (*last)->id << "); mix:";
    for (const auto& [name, c] : counts) out << ' ' << name << '=' << c;
    out << "\n";
  }
  return out.str();
}

std::vector<Finding> ask(LlmClient& client, const LlmRequest& req, AgentKind default_aspect) {
  for (int attempt = 0;; ++attempt) {
    try {
      return parse_findings(client.complete(req), default_aspect);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableResponse || attempt == 1) throw;
    }
  }
}

std::string insights_for_judge(const InsightReport& report) {
  json arr = json::array();
  for (const auto& i : report.insights) {
    arr.push_back({{"title", i.title}, {"body", i.body}, {"aspect", to_string(i.aspect)}});
  }
  return arr.dump(1);
}

}  // namespace

std::string_view to_string(AgentKind k) {
  switch (k) {
    case AgentKind::Space: return "space";
    case AgentKind::Time: return "time";
    case AgentKind::Action: return "action";
    case AgentKind::Intent: return "intent";
    case AgentKind::Context: return "context";
    case AgentKind::User: return "user";
  }
  return "action";
}

AgentKind parse_agent_kind(std::string_view s) {
  for (auto k : kAgentKinds) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown aspect " + std::string(s));
}

std::string_view to_string(InsightMode m) { return m == InsightMode::Single ? "single" : "multi"; }

InsightMode parse_insight_mode(std::string_view s) {
  if (s == "single") return InsightMode::Single;
  if (s == "multi") return InsightMode::Multi;
  throw Error(ErrorCode::InvalidArgument, "mode must be single or multi");
}

double title_similarity(const std::string& a, const std::string& b) {
  auto x = title_tokens(a), y = title_tokens(b);
  if (x.empty() && y.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& t : x) inter += y.count(t);
  return static_cast<double>(inter) / static_cast<double>(x.size() + y.size() - inter);
}

std::vector<Finding> parse_findings(const std::string& reply, AgentKind default_aspect) {
  json j = parse_reply_json(reply);
  if (j.is_object()) {
    for (const char* key : {"insights", "findings"}) {
      if (j.contains(key)) {
        j = j[key];
        break;
      }
    }
  }
  if (!j.is_array()) throw Error(ErrorCode::UnparseableResponse, "agent reply is not a JSON list of findings");
  std::vector<Finding> out;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("title") || !e["title"].is_string() || !e.contains("body") ||
        !e["body"].is_string()) {
      continue;
    }
    Finding f;
    f.aspect = default_aspect;
    if (e.contains("aspect") && e["aspect"].is_string()) {
      try {
        f.aspect = parse_agent_kind(e["aspect"].get<std::string>());
      } catch (const Error&) {
      }
    }
    f.title = e["title"];
    f.body = e["body"];
    if (e.contains("markers") && e["markers"].is_array()) {
      for (const auto& m : e["markers"]) {
        if (m.is_string()) f.action_ids.push_back(m.get<std::string>());
        else if (m.is_object() && m.contains("actionId") && m["actionId"].is_string()) f.action_ids.push_back(m["actionId"]);
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

InsightReport coordinate(const std::vector<Finding>& findings, const SessionStore& store, InsightMode mode,
                         const InsightOptions& opts) {
  InsightReport report;
  report.mode = mode;
  auto [lo, hi] = session_bounds(store);

  struct Cluster {
    Finding head;
    std::vector<AgentKind> aspects;
    std::vector<std::string> ids;  // insertion order, unique
    int contributors = 0;
    std::size_t first = 0;
  };
  std::vector<Cluster> clusters;
  for (std::size_t i = 0; i < findings.size(); ++i) {
    const auto& f = findings[i];
    std::vector<std::string> ids;
    for (const auto& id : f.action_ids) {
      const auto* r = store.find(id);
      if (!r || r->start_time < lo || hi < r->start_time) {
        report.diagnostics.push_back("dropped marker " + id + " cited by \"" + f.title + "\"");
        continue;
      }
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
    if (f.title.empty() || f.title.size() >= f.body.size()) {
      report.diagnostics.push_back("dropped finding \"" + f.title + "\": title must be non-empty and shorter than body");
      continue;
    }
    if (ids.empty()) {
      report.diagnostics.push_back("dropped finding \"" + f.title + "\": no valid markers");
      continue;
    }
    auto it = std::find_if(clusters.begin(), clusters.end(), [&](const Cluster& c) {
      return title_similarity(c.head.title, f.title) >= opts.jaccard_threshold;
    });
    if (it == clusters.end()) {
      clusters.push_back({f, {f.aspect}, ids, 1, i});
      continue;
    }
    it->contributors++;
    if (std::find(it->aspects.begin(), it->aspects.end(), f.aspect) == it->aspects.end()) it->aspects.push_back(f.aspect);
    for (const auto& id : ids) {
      if (std::find(it->ids.begin(), it->ids.end(), id) == it->ids.end()) it->ids.push_back(id);
    }
  }

  std::vector<std::size_t> order(clusters.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto &x = clusters[a], &y = clusters[b];
    if (x.contributors != y.contributors) return x.contributors > y.contributors;
    if (x.ids.size() != y.ids.size()) return x.ids.size() > y.ids.size();
    return x.first < y.first;
  });
  if (order.size() > opts.max_insights) order.resize(opts.max_insights);

  auto marker_of = [&](const std::string& id) { return AoIMarker{id, store.find(id)->start_time, {}}; };
  auto by_time = [](const AoIMarker& a, const AoIMarker& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.action_id < b.action_id;
  };
  std::vector<Insight> out;
  for (std::size_t idx : order) {
    auto& c = clusters[idx];
    Insight ins;
    ins.title = c.head.title;
    ins.body = c.head.body;
    ins.aspect = c.head.aspect;
    ins.aspects = c.aspects;
    std::sort(ins.aspects.begin(), ins.aspects.end());
    ins.source = mode;
    for (const auto& id : c.ids) ins.markers.push_back(marker_of(id));
    std::sort(ins.markers.begin(), ins.markers.end(), by_time);
    out.push_back(std::move(ins));
  }
  // Chronological by first marker; rank order breaks ties.
  std::stable_sort(out.begin(), out.end(),
                   [](const Insight& a, const Insight& b) { return a.markers.front().timestamp < b.markers.front().timestamp; });
  std::map<std::string, AoIMarker> global;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].id = "ins-" + std::to_string(i + 1);
    for (auto& m : out[i].markers) {
      m.insight_ids = {out[i].id};
      auto [it, fresh] = global.emplace(m.action_id, m);
      if (!fresh) it->second.insight_ids.push_back(out[i].id);
    }
  }
  report.insights = std::move(out);
  for (auto& [id, m] : global) report.markers.push_back(std::move(m));
  std::sort(report.markers.begin(), report.markers.end(), by_time);
  return report;
}

std::string aspect_digest(const SessionStore& store, AgentKind aspect) {
  std::string body;
  switch (aspect) {
    case AgentKind::Space: body = space_digest(store); break;
    case AgentKind::Time: body = time_digest(store); break;
    case AgentKind::Action: body = action_digest(store); break;
    case AgentKind::Intent: body = intent_digest(store); break;
    case AgentKind::Context: body = context_digest(store); break;
    case AgentKind::User: body = user_digest(store); break;
  }
  return header(store) + body;
}

InsightReport generate_insights(const SessionStore& store, const std::string& aoi, InsightMode mode, LlmClient& client,
                                const InsightOptions& opts) {
  const std::string aoi_text = aoi.empty() ? "none given; cover what stands out" : aoi;
  std::vector<Finding> findings;
  std::vector<std::string> diagnostics;

  if (mode == InsightMode::Single) {
    std::string digest = header(store);
    for (auto k : kAgentKinds) digest += "\n[" + std::string(to_string(k)) + "]\n" + aspect_digest(store, k).substr(header(store).size());
    auto prompt = render_prompt("insight_single", {{"aoi", aoi_text}, {"digest", digest}});
    LlmRequest req{"insight.single", store.meta.session_id, prompt.system, prompt.user, {}, 0.0, 42};
    try {
      findings = ask(client, req, AgentKind::Action);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ClientFailure && e.code() != ErrorCode::UnparseableResponse) throw;
      throw Error(ErrorCode::AllAgentsFailed, std::string("single agent: ") + e.what());
    }
  } else {
    struct Slot {
      std::vector<Finding> findings;
      std::string error;
    };
    std::array<Slot, kAgentKinds.size()> slots;
    std::array<LlmRequest, kAgentKinds.size()> requests;
    for (std::size_t i = 0; i < kAgentKinds.size(); ++i) {
      auto k = kAgentKinds[i];
      auto prompt = render_prompt("insight_agent", {{"aspect", std::string(to_string(k))},
                                                    {"aoi", aoi_text},
                                                    {"digest", aspect_digest(store, k)}});
      requests[i] = {"insight." + std::string(to_string(k)), store.meta.session_id, prompt.system, prompt.user, {}, 0.0, 42};
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < kAgentKinds.size();) {
        try {
          slots[i].findings = ask(client, requests[i], kAgentKinds[i]);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::ClientFailure && e.code() != ErrorCode::UnparseableResponse) {
            slots[i].error = std::string("internal: ") + e.what();
          } else {
            slots[i].error = e.what();
          }
        } catch (const std::exception& e) {
          slots[i].error = std::string("internal: ") + e.what();
        }
      }
    };
    std::size_t n = std::clamp<std::size_t>(opts.parallelism, 1, kAgentKinds.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::size_t failed = 0;
    for (std::size_t i = 0; i < kAgentKinds.size(); ++i) {
      if (!slots[i].error.empty()) {
        ++failed;
        diagnostics.push_back(std::string(to_string(kAgentKinds[i])) + " agent failed: " + slots[i].error);
        continue;
      }
      // The agent's own aspect wins over whatever the reply claims.
      for (auto& f : slots[i].findings) {
        f.aspect = kAgentKinds[i];
        findings.push_back(std::move(f));
      }
    }
    if (failed == kAgentKinds.size()) {
      std::string all;
      for (const auto& d : diagnostics) all += (all.empty() ? "" : "; ") + d;
      throw Error(ErrorCode::AllAgentsFailed, all);
    }
  }

  auto report = coordinate(findings, store, mode, opts);
  report.aoi = aoi;
  report.diagnostics.insert(report.diagnostics.begin(), diagnostics.begin(), diagnostics.end());
  if (report.insights.empty()) {
    throw Error(ErrorCode::AllAgentsFailed, "no finding survived marker validation");
  }
  return report;
}

json to_json(const InsightReport& r) {
  auto marker_json = [](const AoIMarker& m, bool links) {
    json j = {{"actionId", m.action_id}, {"timestamp", m.timestamp.to_string()}};
    if (links) j["insightIds"] = m.insight_ids;
    return j;
  };
  json insights = json::array();
  for (const auto& i : r.insights) {
    json markers = json::array();
    for (const auto& m : i.markers) markers.push_back(marker_json(m, false));
    json aspects = json::array();
    for (auto a : i.aspects) aspects.push_back(to_string(a));
    insights.push_back({{"id", i.id},
                        {"title", i.title},
                        {"body", i.body},
                        {"aspect", to_string(i.aspect)},
                        {"aspects", aspects},
                        {"source", to_string(i.source)},
                        {"markers", markers}});
  }
  json markers = json::array();
  for (const auto& m : r.markers) markers.push_back(marker_json(m, true));
  return {{"aoi", r.aoi},
          {"mode", to_string(r.mode)},
          {"insights", insights},
          {"markers", markers},
          {"diagnostics", r.diagnostics}};
}

InsightReport insight_report_from_json(const json& j) {
  try {
    InsightReport r;
    r.aoi = j.at("aoi").get<std::string>();
    r.mode = parse_insight_mode(j.at("mode").get<std::string>());
    for (const auto& e : j.at("insights")) {
      Insight i;
      i.id = e.at("id");
      i.title = e.at("title");
      i.body = e.at("body");
      i.aspect = parse_agent_kind(e.at("aspect").get<std::string>());
      for (const auto& a : e.value("aspects", json::array())) i.aspects.push_back(parse_agent_kind(a.get<std::string>()));
      i.source = parse_insight_mode(e.at("source").get<std::string>());
      for (const auto& m : e.at("markers")) {
        i.markers.push_back({m.at("actionId"), Timestamp::parse(m.at("timestamp").get<std::string>()), {i.id}});
      }
      r.insights.push_back(std::move(i));
    }
    for (const auto& m : j.at("markers")) {
      r.markers.push_back({m.at("actionId"), Timestamp::parse(m.at("timestamp").get<std::string>()),
                           m.at("insightIds").get<std::vector<std::string>>()});
    }
    r.diagnostics = j.value("diagnostics", std::vector<std::string>{});
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("insight report: ") + e.what());
  }
}

EvalScores evaluate_insights(const InsightReport& report, const std::string& aoi, LlmClient& client, int runs) {
  if (runs < 1) throw Error(ErrorCode::InvalidArgument, "at least one judging run is required");
  auto prompt = render_prompt("judge", {{"aoi", aoi.empty() ? "none given" : aoi}, {"insights", insights_for_judge(report)}});
  EvalScores out;
  out.method = report.mode;
  std::array<double, 5> sum{};
  std::string last_error;
  for (int run = 0; run < runs; ++run) {
    LlmRequest req{"judge", std::string(to_string(report.mode)), prompt.system, prompt.user, {}, 0.0,
                   42 + static_cast<std::uint64_t>(run)};
    try {
      auto j = parse_reply_json(client.complete(req));
      std::array<double, 5> s{};
      bool ok = j.is_object();
      for (int c = 0; ok && c < 5; ++c) {
        auto key = "c" + std::to_string(c + 1);
        ok = j.contains(key) && j[key].is_number();
        if (ok) s[c] = j[key].get<double>();
        ok = ok && s[c] >= 0 && s[c] <= 10;
      }
      if (!ok) throw Error(ErrorCode::UnparseableResponse, "judge reply lacks c1..c5 in [0, 10]");
      for (int c = 0; c < 5; ++c) sum[c] += s[c];
      out.runs++;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ClientFailure && e.code() != ErrorCode::UnparseableResponse) throw;
      out.failed_runs++;
      last_error = e.what();
    }
  }
  if (out.runs == 0) throw Error(ErrorCode::AllRunsFailed, last_error);
  for (int c = 0; c < 5; ++c) out.c[c] = sum[c] / out.runs;
  return out;
}

json to_json(const EvalScores& s) {
  return {{"method", to_string(s.method)},
          {"c1", s.c[0]},
          {"c2", s.c[1]},
          {"c3", s.c[2]},
          {"c4", s.c[3]},
          {"c5", s.c[4]},
          {"runs", s.runs},
          {"failedRuns", s.failed_runs}};
}

EvalScores eval_scores_from_json(const json& j) {
  try {
    EvalScores s;
    s.method = parse_insight_mode(j.at("method").get<std::string>());
    for (int c = 0; c < 5; ++c) s.c[c] = j.at("c" + std::to_string(c + 1)).get<double>();
    s.runs = j.value("runs", 0);
    s.failed_runs = j.value("failedRuns", 0);
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("eval scores: ") + e.what());
  }
}

std::string render_comparison(const std::optional<EvalScores>& single, const std::optional<EvalScores>& multi) {
  std::ostringstream out;
  out << "| Method | C1 | C2 | C3 | C4 | C5 |\n";
  out << "|---|---:|---:|---:|---:|---:|\n";
  for (const auto& [label, s] : {std::pair{"Single-agent", single}, std::pair{"Multi-agent", multi}}) {
    if (!s) continue;
    out << "| " << label;
    for (double v : s->c) out << " | " << fixed(v);
    out << " |\n";
  }
  return out.str();
}

}  // namespace exr
