#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace exr {

enum class BenchMode { Base, VirtualContext, Referent };
enum class BenchLane { Sync, AsyncPerceived };

std::string_view to_string(BenchMode m);
std::string_view to_string(BenchLane l);

struct BenchOptions {
  int iterations = 100;  // calls per run, at least 10
  int runs = 10;
  /// Defaults to a RAM-backed directory when one is writable.
  std::optional<std::filesystem::path> scratch;
};

struct BenchStats {
  double mean = 0, median = 0, p95 = 0;
};

struct BenchRow {
  BenchMode mode = BenchMode::Base;
  BenchLane lane = BenchLane::Sync;
  BenchStats all;                 // over every call of every run
  std::vector<double> run_means;  // ms, one per run
};

struct BenchReport {
  int iterations = 0;
  int runs = 0;
  std::filesystem::path scratch;
  bool ram_backed = false;
  nlohmann::json environment;
  std::vector<BenchRow> rows;

  const BenchRow& row(BenchMode m, BenchLane l) const;
  /// base < +virtualContext < +referent (sync means) in every run.
  bool ordering_holds() const;
};

BenchStats summarize(std::vector<double> samples_ms);

/// Times Recorder::log in three payload modes. Sync calls of the three modes
/// are interleaved per iteration so drift hits them equally; async runs
/// time only the enqueue and drain outside the clock. Throws
/// InvalidArgument (iterations < 10 or runs < 1), StorageFull.
BenchReport bench_log(const BenchOptions& opts = {});

nlohmann::json to_json(const BenchReport& r);
std::string render_table(const BenchReport& r);

}  // namespace exr
