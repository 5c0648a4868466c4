// Command-line front end: simulate, ingest, process, insights, eval, bench, serve.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "exr/ingest/ingest.hpp"
#include "exr/insight/insights.hpp"
#include "exr/service/bench.hpp"
#include "exr/service/process.hpp"
#include "exr/service/server.hpp"
#include "exr/sim/generator.hpp"
#include "exr/uad/error.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kUsage = 2;
constexpr int kFailure = 1;
constexpr int kInjectedCrash = 75;

struct LlmFlags {
  std::string mode;
  std::string fixtures;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--llm", mode, "LLM backend: mock or remote (default: $EXR_LLM_MODE, else remote)")
        ->check(CLI::IsMember({"mock", "remote"}));
    cmd->add_option("--fixtures", fixtures, "Mock replies (default: <session>/fixtures/llm.json)");
  }

  std::shared_ptr<exr::LlmClient> client(const fs::path& session) const {
    fs::path f = fixtures.empty() ? session / "fixtures" / "llm.json" : fs::path(fixtures);
    return exr::make_llm_client(mode, f);
  }
};

void write_json(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  exr::write_file_atomic(p, j.dump(1) + "\n");
}

json read_json(const fs::path& p) {
  auto bytes = exr::read_file(p);
  json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (j.is_discarded()) throw exr::Error(exr::ErrorCode::MalformedRecord, p.string() + " is not JSON");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Record, process and analyze extended-reality user action sessions."};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a scripted session with ground truth");
  std::string preset, sim_out;
  std::uint64_t seed = 42;
  int users = 0;
  sim->add_option("--preset", preset, "a1..a5, a preset name, or a scenario JSON path")->required();
  sim->add_option("--seed", seed, "Random seed");
  sim->add_option("--users", users, "Limit the number of subjects")->check(CLI::PositiveNumber);
  sim->add_option("--out", sim_out, "Output directory")->required();

  // ingest
  auto* ing = app.add_subcommand("ingest", "Validate, anonymize and merge sessions");
  std::vector<std::string> ing_in;
  std::string ing_out, rebase = "none";
  std::vector<std::string> transcripts;
  bool keep_names = false;
  std::int64_t resample_ms = 0;
  ing->add_option("inputs", ing_in, "Session directories")->required()->check(CLI::ExistingDirectory);
  ing->add_option("--out", ing_out, "Output directory")->required();
  ing->add_option("--transcripts", transcripts, "Extra directories of <clip>.expected.txt transcripts");
  ing->add_option("--resample-ms", resample_ms, "Resample continuous locations at this interval")
      ->check(CLI::PositiveNumber);
  ing->add_option("--rebase", rebase, "Align merged sessions: none or origin")->check(CLI::IsMember({"none", "origin"}));
  ing->add_flag("--keep-names", keep_names, "Skip anonymization");

  // process
  auto* proc = app.add_subcommand("process", "Run context, classify, describe and intent steps");
  std::string proc_dir, crash_after;
  LlmFlags proc_llm;
  proc->add_option("session", proc_dir, "Session directory")->required()->check(CLI::ExistingDirectory);
  proc_llm.add_to(proc);
  proc->add_option("--crash-after", crash_after, "Testing aid: exit abruptly once this step is on disk")
      ->check(CLI::IsMember({"context", "classify", "describe", "intent"}))
      ->group("Testing");

  // insights
  auto* ins = app.add_subcommand("insights", "Generate insights for an area of interest");
  std::string ins_dir, aoi, mode = "multi";
  LlmFlags ins_llm;
  ins->add_option("session", ins_dir, "Session directory")->required()->check(CLI::ExistingDirectory);
  ins->add_option("--aoi", aoi, "Area of interest, free text");
  ins->add_option("--mode", mode, "single or multi")->check(CLI::IsMember({"single", "multi"}));
  ins_llm.add_to(ins);

  // eval
  auto* ev = app.add_subcommand("eval", "Score stored insight reports with a judge model");
  std::string ev_dir;
  int runs = 5;
  LlmFlags ev_llm;
  ev->add_option("session", ev_dir, "Session directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--runs", runs, "Judging runs per method")->check(CLI::PositiveNumber);
  ev_llm.add_to(ev);

  // bench
  auto* bench = app.add_subcommand("bench", "Measure Log call overhead");
  exr::BenchOptions bopts;
  std::string scratch, bench_out = "bench_report.json";
  bench->add_option("--iterations,-k", bopts.iterations, "Calls per run")->check(CLI::Range(10, 1'000'000));
  bench->add_option("--runs", bopts.runs, "Independent runs")->check(CLI::Range(1, 1000));
  bench->add_option("--scratch", scratch, "Scratch directory (default: RAM-backed when available)")
      ->check(CLI::ExistingDirectory);
  bench->add_option("--out", bench_out, "JSON report path");

  // serve
  auto* srv = app.add_subcommand("serve", "Serve processed sessions over HTTP");
  exr::ServerOptions sopts;
  std::string static_dir, srv_fixtures;
  srv->add_option("root", sopts.root, "Session directory or a directory of sessions")
      ->required()
      ->check(CLI::ExistingDirectory);
  srv->add_option("--port", sopts.port, "TCP port")->check(CLI::Range(0, 65535));
  srv->add_option("--host", sopts.host, "Bind address");
  srv->add_option("--cors-origin", sopts.cors_origin, "Allowed browser origin");
  srv->add_option("--static", static_dir, "Directory with the web UI bundle")->check(CLI::ExistingDirectory);
  srv->add_option("--llm", sopts.llm_mode, "LLM backend for insight jobs")->check(CLI::IsMember({"mock", "remote"}));
  srv->add_option("--fixtures", srv_fixtures, "Mock replies for sessions without their own");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*sim) {
      exr::sim::GenerateOptions g;
      g.seed = seed;
      if (users > 0) g.users = users;
      auto manifest = exr::sim::generate_session(exr::sim::load_scenario(preset), sim_out, g);
      std::cout << "wrote " << manifest["recordCount"] << " actions of " << manifest["preset"].get<std::string>()
                << " to " << sim_out << "\n";
    } else if (*ing) {
      exr::IngestConfig cfg;
      cfg.anonymize = !keep_names;
      if (resample_ms > 0) cfg.resample_ms = resample_ms;
      std::vector<fs::path> dirs(transcripts.begin(), transcripts.end());
      for (const auto& in : ing_in) {
        if (fs::is_directory(fs::path(in) / "fixtures" / "transcripts")) dirs.push_back(fs::path(in) / "fixtures" / "transcripts");
      }
      if (!dirs.empty()) cfg.transcriber = std::make_shared<exr::MockTranscriber>(dirs);
      std::vector<exr::SessionStore> stores;
      for (const auto& in : ing_in) stores.push_back(exr::ingest_directory(in, cfg));
      exr::MergeOptions m;
      m.rebase = rebase == "origin" ? exr::RebaseMode::Origin : exr::RebaseMode::None;
      auto store = stores.size() == 1 ? std::move(stores[0]) : exr::merge_sessions(stores, m);
      exr::write_session(store, ing_out);
      // Mock LLM replies travel with a single ingested session; transcripts do not.
      if (ing_in.size() == 1 && fs::exists(fs::path(ing_in[0]) / "fixtures" / "llm.json")) {
        fs::create_directories(fs::path(ing_out) / "fixtures");
        fs::copy_file(fs::path(ing_in[0]) / "fixtures" / "llm.json", fs::path(ing_out) / "fixtures" / "llm.json",
                      fs::copy_options::overwrite_existing);
      }
      std::size_t missing = 0;
      for (const auto& r : store.records) missing += r.processing.transcript_missing;
      std::cout << "ingested " << store.records.size() << " actions from " << store.meta.users.size()
                << " subjects into " << ing_out;
      if (missing) std::cout << " (" << missing << " clips without transcript)";
      std::cout << "\n";
    } else if (*proc) {
      auto client = proc_llm.client(proc_dir);
      exr::ProcessOptions popts;
      if (!crash_after.empty()) {
        popts.after_step = [&](std::string_view step) {
          if (step == crash_after) {
            std::cerr << "crash injected after " << step << "\n";
            std::_Exit(kInjectedCrash);
          }
        };
      }
      auto summary = exr::process_session(proc_dir, *client, popts);
      for (auto step : exr::kProcessSteps) {
        const auto& c = summary.steps.at(std::string(step));
        std::cout << step << ": " << c.applied << " applied, " << c.skipped << " skipped, " << c.failed << " failed, "
                  << c.already_done << " already done\n";
      }
      if (!summary.changed) std::cout << "nothing to do\n";
    } else if (*ins) {
      auto store = exr::read_session(ins_dir);
      auto client = ins_llm.client(ins_dir);
      auto report = exr::generate_insights(store, aoi, exr::parse_insight_mode(mode), *client);
      auto j = exr::to_json(report);
      write_json(exr::insights_report_path(ins_dir, mode), j);
      std::cout << j.dump(1) << "\n";
    } else if (*ev) {
      auto client = ev_llm.client(ev_dir);
      std::optional<exr::EvalScores> scored[2];
      json out = json::object();
      for (auto m : {exr::InsightMode::Single, exr::InsightMode::Multi}) {
        auto p = exr::insights_report_path(ev_dir, exr::to_string(m));
        if (!fs::exists(p)) continue;
        auto report = exr::insight_report_from_json(read_json(p));
        auto s = exr::evaluate_insights(report, report.aoi, *client, runs);
        out[std::string(exr::to_string(m))] = exr::to_json(s);
        scored[static_cast<int>(m)] = s;
      }
      if (out.empty()) {
        throw exr::Error(exr::ErrorCode::NotFound, "no stored insight reports; run `insights` first");
      }
      out["table"] = exr::render_comparison(scored[0], scored[1]);
      write_json(exr::eval_report_path(ev_dir), out);
      std::cout << out["table"].get<std::string>();
    } else if (*bench) {
      if (!scratch.empty()) bopts.scratch = scratch;
      auto report = exr::bench_log(bopts);
      write_json(bench_out, exr::to_json(report));
      std::cout << exr::render_table(report) << "\nreport: " << bench_out << "\n";
    } else if (*srv) {
      if (!static_dir.empty()) sopts.static_dir = static_dir;
      if (!srv_fixtures.empty()) sopts.fixtures = srv_fixtures;
      static exr::ApiServer* running = nullptr;
      exr::ApiServer server(sopts);
      int port = server.bind();
      running = &server;
      std::signal(SIGINT, [](int) {
        if (running) running->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (running) running->stop();
      });
      std::cout << "serving " << sopts.root.string() << " on http://" << sopts.host << ":" << port << std::endl;
      server.run();
      running = nullptr;
    }
  } catch (const exr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return 0;
}
