#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exr/ingest/view.hpp"

namespace exr {

struct TimeBin {
  Timestamp start, end;
};

struct TimelineRow {
  std::string user;
  std::string action;
  std::vector<int> counts;
  int max() const;
};

/// Per (user, action) counts of instances intersecting each bin. Rows are
/// ordered by user (store order), then by the action's first start time.
struct TimelineMatrix {
  TimeDelta bin_size;
  Timestamp start, end;
  std::vector<TimeBin> bins;
  std::vector<TimelineRow> rows;
};

enum class ColormapNorm { Row, User, Global };

/// count / rowMax, or 0 when rowMax is 0.
double colormap_intensity(int count, int row_max);

/// Intensities for every cell under the chosen normalization.
std::vector<std::vector<double>> intensities(const TimelineMatrix& m, ColormapNorm norm = ColormapNorm::Row);

/// Session bounds widened to cover every record.
std::pair<Timestamp, Timestamp> session_bounds(const SessionStore& store);

/// Bins partition the view's time range: the filter's from/to where set,
/// the session bounds otherwise; the last bin is clipped. Throws
/// InvalidArgument for a non-positive bin size or more than 10^6 bins.
TimelineMatrix bin_timeline(const SessionView& view, const TimeDelta& bin_size);

struct TracePoint {
  Vec3 pos{};  // grid cell center
  std::string user;
  std::string action;
  int count = 0;
  /// One entry per contributing location sample, so ids repeat when a
  /// continuous action revisits the same cell.
  std::vector<std::string> action_ids;
};

inline constexpr double kDefaultTraceGrid = 0.05;

/// Groups every location sample of the view by (grid cell, user, action).
/// Throws InvalidArgument for grid <= 0.
std::vector<TracePoint> trace_map(const SessionView& view, double grid = kDefaultTraceGrid);

struct ReferentEntry {
  std::string user;
  std::string referent;
  RealityType type = RealityType::Virtual;
  int count = 0;
  double total_seconds = 0;
};

struct DurationEntry {
  std::string user;
  std::string action;
  std::vector<double> seconds;  // view order
};

struct ReferentStats {
  std::vector<ReferentEntry> referents;
  /// Same, keyed by class: trailing digits stripped from virtual names.
  std::vector<ReferentEntry> classes;
  std::vector<DurationEntry> durations;
  /// Some duration had a nonzero date part and was converted approximately.
  bool approximate = false;
};

/// Physical referents are keyed by their classified label (the part before
/// `@`), virtual ones by object name. Records without a referent only count
/// towards durations.
std::string referent_key(const ActionRecord& r);
std::string referent_class(const ActionRecord& r);
ReferentStats referent_stats(const SessionView& view);

struct LinkedSelection {
  SessionView view;
  TimelineMatrix timeline;
  std::vector<TracePoint> traces;
  ReferentStats stats;
};

struct LinkedOptions {
  TimeDelta bin_size = TimeDelta::from_millis(1000);
  double grid = kDefaultTraceGrid;
};

/// All products computed from one filtered view.
LinkedSelection linked_selection(const SessionStore& store, const FilterSpec& filter, const LinkedOptions& opts = {});

nlohmann::json to_json(const TimelineMatrix& m, ColormapNorm norm = ColormapNorm::Row);
nlohmann::json to_json(const std::vector<TracePoint>& points);
nlohmann::json to_json(const ReferentStats& s);
std::string_view to_string(ColormapNorm n);
ColormapNorm parse_colormap_norm(std::string_view s);

}  // namespace exr
