#include "exr/analytics/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "exr/uad/error.hpp"

namespace exr {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

std::map<std::string, std::size_t> user_rank(const SessionView& view) {
  std::map<std::string, std::size_t> rank;
  for (const auto& u : view.store().meta.users) rank.emplace(u, rank.size());
  for (const auto* r : view) rank.emplace(r->user, rank.size());
  return rank;
}

std::string strip_trailing_digits(const std::string& s) {
  auto end = s.find_last_not_of("0123456789");
  return end == std::string::npos ? s : s.substr(0, end + 1);
}

}  // namespace

int TimelineRow::max() const { return counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end()); }

double colormap_intensity(int count, int row_max) {
  if (row_max <= 0 || count <= 0) return 0.0;
  return static_cast<double>(std::min(count, row_max)) / row_max;
}

std::vector<std::vector<double>> intensities(const TimelineMatrix& m, ColormapNorm norm) {
  std::map<std::string, int> user_max;
  int global_max = 0;
  for (const auto& row : m.rows) {
    user_max[row.user] = std::max(user_max[row.user], row.max());
    global_max = std::max(global_max, row.max());
  }
  std::vector<std::vector<double>> out;
  for (const auto& row : m.rows) {
    int denom = norm == ColormapNorm::Row ? row.max() : norm == ColormapNorm::User ? user_max[row.user] : global_max;
    std::vector<double> line;
    for (int c : row.counts) line.push_back(colormap_intensity(c, denom));
    out.push_back(std::move(line));
  }
  return out;
}

std::pair<Timestamp, Timestamp> session_bounds(const SessionStore& store) {
  Timestamp lo = store.meta.recording_start, hi = store.meta.recording_end;
  if (hi < lo) hi = lo;
  for (const auto& r : store.records) {
    lo = std::min(lo, r.start_time);
    auto end = std::max(r.end_time(), Timestamp::from_unix_millis(r.start_time.unix_millis() + 1));
    hi = std::max(hi, end);
  }
  return {lo, hi};
}

TimelineMatrix bin_timeline(const SessionView& view, const TimeDelta& bin_size) {
  const std::int64_t bin = bin_size.total_millis();
  if (bin <= 0) throw Error(ErrorCode::InvalidArgument, "bin size must be positive");
  auto [lo, hi] = session_bounds(view.store());
  if (view.filter().from) lo = *view.filter().from;
  if (view.filter().to) hi = *view.filter().to;

  TimelineMatrix m;
  m.bin_size = bin_size;
  m.start = lo;
  m.end = std::max(lo, hi);
  const std::int64_t t0 = m.start.unix_millis(), t1 = m.end.unix_millis();
  const std::int64_t nbins = t1 > t0 ? (t1 - t0 + bin - 1) / bin : 0;
  if (nbins > 1'000'000) throw Error(ErrorCode::InvalidArgument, "bin size yields more than 10^6 bins");
  for (std::int64_t b = 0; b < nbins; ++b) {
    m.bins.push_back({Timestamp::from_unix_millis(t0 + b * bin), Timestamp::from_unix_millis(std::min(t1, t0 + (b + 1) * bin))});
  }
  if (nbins == 0) return m;

  auto rank = user_rank(view);
  std::map<std::pair<std::string, std::string>, std::size_t> row_of;
  std::vector<std::tuple<std::size_t, std::int64_t, std::string, std::string>> keys;
  for (const auto* r : view) {
    auto key = std::make_pair(r->user, r->name);
    auto it = row_of.find(key);
    if (it == row_of.end()) {
      row_of.emplace(key, keys.size());
      keys.emplace_back(rank.at(r->user), r->start_time.unix_millis(), r->name, r->user);
    } else {
      auto& k = keys[it->second];
      std::get<1>(k) = std::min(std::get<1>(k), r->start_time.unix_millis());
    }
  }
  std::vector<std::size_t> order(keys.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  std::vector<std::size_t> slot(keys.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    slot[order[i]] = i;
    const auto& k = keys[order[i]];
    m.rows.push_back({std::get<3>(k), std::get<2>(k), std::vector<int>(static_cast<std::size_t>(nbins), 0)});
  }

  for (const auto* r : view) {
    auto& row = m.rows[slot[row_of.at({r->user, r->name})]];
    std::int64_t s = r->start_time.unix_millis(), e = s + r->duration.total_millis();
    std::int64_t first, last;
    if (e <= s) {
      if (s < t0 || s >= t1) continue;
      first = last = (s - t0) / bin;
    } else {
      if (e <= t0 || s >= t1) continue;
      first = floor_div(std::max(s, t0) - t0, bin);
      last = floor_div(std::min(e, t1) - 1 - t0, bin);
    }
    for (std::int64_t b = first; b <= last; ++b) row.counts[static_cast<std::size_t>(b)]++;
  }
  return m;
}

std::vector<TracePoint> trace_map(const SessionView& view, double grid) {
  if (!(grid > 0) || !std::isfinite(grid)) throw Error(ErrorCode::InvalidArgument, "grid must be positive");
  auto rank = user_rank(view);
  using Key = std::tuple<std::size_t, std::string, std::int64_t, std::int64_t, std::int64_t>;
  std::map<Key, TracePoint> cells;
  for (const auto* r : view) {
    for (const auto& loc : r->location) {
      std::array<std::int64_t, 3> c{};
      for (int i = 0; i < 3; ++i) c[i] = static_cast<std::int64_t>(std::floor(loc.pos[i] / grid));
      auto& p = cells[Key{rank.at(r->user), r->name, c[0], c[1], c[2]}];
      if (p.count == 0) {
        for (int i = 0; i < 3; ++i) p.pos[i] = (static_cast<double>(c[i]) + 0.5) * grid;
        p.user = r->user;
        p.action = r->name;
      }
      p.count++;
      p.action_ids.push_back(r->id);
    }
  }
  std::vector<TracePoint> out;
  out.reserve(cells.size());
  for (auto& [k, p] : cells) out.push_back(std::move(p));
  return out;
}

std::string referent_key(const ActionRecord& r) {
  if (r.referent_type == RealityType::Physical) {
    auto at = r.referent_name.rfind('@');
    if (at != std::string::npos) return r.referent_name.substr(0, at);
  }
  return r.referent_name;
}

std::string referent_class(const ActionRecord& r) {
  auto key = referent_key(r);
  return r.referent_type == RealityType::Virtual ? strip_trailing_digits(key) : key;
}

ReferentStats referent_stats(const SessionView& view) {
  auto rank = user_rank(view);
  ReferentStats s;
  std::map<std::tuple<std::size_t, std::string>, ReferentEntry> refs, classes;
  std::map<std::tuple<std::size_t, std::string>, DurationEntry> durs;
  for (const auto* r : view) {
    double secs = r->duration.as_seconds();
    if (r->duration.has_date_part()) s.approximate = true;
    auto& d = durs[{rank.at(r->user), r->name}];
    d.user = r->user;
    d.action = r->name;
    d.seconds.push_back(secs);
    if (r->referent_name.empty()) continue;
    for (auto [map, key] : {std::pair{&refs, referent_key(*r)}, std::pair{&classes, referent_class(*r)}}) {
      auto& e = (*map)[{rank.at(r->user), key}];
      e.user = r->user;
      e.referent = key;
      e.type = r->referent_type;
      e.count++;
      e.total_seconds += secs;
    }
  }
  for (auto& [k, e] : refs) s.referents.push_back(std::move(e));
  for (auto& [k, e] : classes) s.classes.push_back(std::move(e));
  for (auto& [k, d] : durs) s.durations.push_back(std::move(d));
  return s;
}

LinkedSelection linked_selection(const SessionStore& store, const FilterSpec& filter, const LinkedOptions& opts) {
  LinkedSelection out{make_view(store, filter), {}, {}, {}};
  out.timeline = bin_timeline(out.view, opts.bin_size);
  out.traces = trace_map(out.view, opts.grid);
  out.stats = referent_stats(out.view);
  return out;
}

std::string_view to_string(ColormapNorm n) {
  switch (n) {
    case ColormapNorm::Row: return "row";
    case ColormapNorm::User: return "user";
    case ColormapNorm::Global: return "global";
  }
  return "row";
}

ColormapNorm parse_colormap_norm(std::string_view s) {
  if (s == "row") return ColormapNorm::Row;
  if (s == "user") return ColormapNorm::User;
  if (s == "global") return ColormapNorm::Global;
  throw Error(ErrorCode::InvalidArgument, "normalization must be row, user or global");
}

nlohmann::json to_json(const TimelineMatrix& m, ColormapNorm norm) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : m.bins) bins.push_back({{"start", b.start.to_string()}, {"end", b.end.to_string()}});
  auto inten = intensities(m, norm);
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const auto& r = m.rows[i];
    rows.push_back({{"user", r.user}, {"action", r.action}, {"counts", r.counts}, {"max", r.max()},
                    {"intensity", inten[i]}});
  }
  return {{"binSize", m.bin_size.to_string()},
          {"start", m.start.to_string()},
          {"end", m.end.to_string()},
          {"normalization", to_string(norm)},
          {"bins", bins},
          {"rows", rows}};
}

nlohmann::json to_json(const std::vector<TracePoint>& points) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : points) {
    out.push_back({{"pos", p.pos}, {"user", p.user}, {"action", p.action}, {"count", p.count}, {"actionIds", p.action_ids}});
  }
  return out;
}

nlohmann::json to_json(const ReferentStats& s) {
  auto entries = [](const std::vector<ReferentEntry>& xs) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : xs) {
      out.push_back({{"user", e.user},
                     {"referent", e.referent},
                     {"type", to_string(e.type)},
                     {"count", e.count},
                     {"totalSeconds", e.total_seconds}});
    }
    return out;
  };
  nlohmann::json durs = nlohmann::json::array();
  for (const auto& d : s.durations) durs.push_back({{"user", d.user}, {"action", d.action}, {"seconds", d.seconds}});
  return {{"referents", entries(s.referents)},
          {"classes", entries(s.classes)},
          {"durations", durs},
          {"approximate", s.approximate}};
}

}  // namespace exr
