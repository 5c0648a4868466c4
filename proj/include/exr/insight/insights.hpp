#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exr/insight/llm.hpp"
#include "exr/uad/session.hpp"

namespace exr {

enum class AgentKind { Space, Time, Action, Intent, Context, User };
inline constexpr std::array<AgentKind, 6> kAgentKinds = {AgentKind::Space,  AgentKind::Time,    AgentKind::Action,
                                                         AgentKind::Intent, AgentKind::Context, AgentKind::User};
std::string_view to_string(AgentKind k);
AgentKind parse_agent_kind(std::string_view s);

enum class InsightMode { Single, Multi };
std::string_view to_string(InsightMode m);
InsightMode parse_insight_mode(std::string_view s);

struct AoIMarker {
  std::string action_id;
  Timestamp timestamp;
  std::vector<std::string> insight_ids;
};

struct Insight {
  std::string id;
  std::string title;
  std::string body;
  AgentKind aspect = AgentKind::Action;
  /// Every agent whose finding was merged in, in enumeration order.
  std::vector<AgentKind> aspects;
  InsightMode source = InsightMode::Multi;
  /// Sorted by timestamp, then id.
  std::vector<AoIMarker> markers;
  /// Reserved; never filled.
  std::optional<double> confidence;
};

/// One raw agent finding before coordination.
struct Finding {
  AgentKind aspect = AgentKind::Action;
  std::string title;
  std::string body;
  std::vector<std::string> action_ids;
};

struct InsightOptions {
  double jaccard_threshold = 0.8;
  std::size_t max_insights = 10;
  std::size_t parallelism = 6;
};

struct InsightReport {
  std::string aoi;
  InsightMode mode = InsightMode::Multi;
  std::vector<Insight> insights;
  /// One per referenced action, linking every insight that cites it.
  std::vector<AoIMarker> markers;
  std::vector<std::string> diagnostics;
};

/// Case-folded alphanumeric token sets' Jaccard index.
double title_similarity(const std::string& a, const std::string& b);

/// Parses an agent reply into findings. Throws UnparseableResponse.
std::vector<Finding> parse_findings(const std::string& reply, AgentKind default_aspect);

/// Deterministic merge: findings are visited in the given order; a finding
/// whose title is similar enough to an earlier cluster joins it (markers
/// united). Invalid markers are dropped, then findings without markers.
/// Clusters rank by contributor count, then marker count, then first
/// appearance; the top `max_insights` are ordered by first marker time.
InsightReport coordinate(const std::vector<Finding>& findings, const SessionStore& store, InsightMode mode,
                         const InsightOptions& opts = {});

/// Text the agent for `aspect` sees: a compact summary, not raw clouds.
std::string aspect_digest(const SessionStore& store, AgentKind aspect);

/// Single mode sends one combined prompt; multi mode queries the six agents
/// concurrently and coordinates. Failed agents are listed in diagnostics.
/// Throws AllAgentsFailed when nothing usable comes back.
InsightReport generate_insights(const SessionStore& store, const std::string& aoi, InsightMode mode, LlmClient& client,
                                const InsightOptions& opts = {});

nlohmann::json to_json(const InsightReport& r);
InsightReport insight_report_from_json(const nlohmann::json& j);

struct EvalScores {
  std::array<double, 5> c{};
  InsightMode method = InsightMode::Multi;
  int runs = 0;
  int failed_runs = 0;
};

/// Judge sees the insights and the AoI only. Runs that fail or return
/// out-of-range scores are excluded. Throws AllRunsFailed, InvalidArgument
/// for runs < 1.
EvalScores evaluate_insights(const InsightReport& report, const std::string& aoi, LlmClient& client, int runs);

nlohmann::json to_json(const EvalScores& s);
EvalScores eval_scores_from_json(const nlohmann::json& j);

/// Markdown comparison table, one row per method present.
std::string render_comparison(const std::optional<EvalScores>& single, const std::optional<EvalScores>& multi);

}  // namespace exr
