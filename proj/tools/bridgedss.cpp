#include <fmt/format.h>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bridgedss/classifier.hpp"
#include "bridgedss/clusterers.hpp"
#include "bridgedss/errors.hpp"
#include "bridgedss/evalbench.hpp"
#include "bridgedss/filters.hpp"
#include "bridgedss/log.hpp"
#include "bridgedss/modelstore.hpp"
#include "bridgedss/ruleforge.hpp"
#include "bridgedss/service.hpp"
#include "bridgedss/version.hpp"
#include "httplib.h"

namespace fs = std::filesystem;
using namespace bdss;

namespace {

struct Common {
  std::string config;
  unsigned threads = 0;
  bool verbose = false;
  bool quiet = false;
};

struct DataSource {
  std::string arff;     // rule dataset written by `rules extract`
  std::string records;  // scenario records written by `dataset generate`
};

SimConfig simConfig(const Common& c) { return c.config.empty() ? SimConfig{} : loadSimConfig(c.config); }

std::ifstream openIn(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path));
  return in;
}

std::ofstream openOut(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  return out;
}

std::vector<ScenarioRecord> readRecords(const std::string& path) {
  auto in = openIn(path);
  return fs::path(path).extension() == ".jsonl" ? readScenarioJsonl(in) : readScenarioCsv(in);
}

std::vector<ScenarioRecord> recordsFor(const Common& c, const std::string& path) {
  if (!path.empty()) return readRecords(path);
  log::info("simulating the scenario grid ({} scenarios x 12 actions)", kScenarioCount);
  return generateScenarioRecords(simConfig(c), c.threads);
}

Dataset ruleDataset(const Common& c, const DataSource& src) {
  if (!src.arff.empty()) {
    auto in = openIn(src.arff);
    return readArff(in);
  }
  return ruleDatasetFor(simConfig(c), recordsFor(c, src.records));
}

void addSource(CLI::App* cmd, DataSource& src) {
  auto* a = cmd->add_option("--data", src.arff, "Rule dataset ARFF from `rules extract`")->check(CLI::ExistingFile);
  cmd->add_option("--records", src.records, "Scenario records from `dataset generate` (.csv or .jsonl)")
      ->check(CLI::ExistingFile)
      ->excludes(a);
}

double seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

httplib::Server* runningServer = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bridge corridor decision support: simulator, rule extraction, learners and live sessions"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config, "Simulator configuration INI")->check(CLI::ExistingFile);
  app.add_option("--threads", common.threads, "Worker threads for grid simulation (0: all cores)");
  app.add_flag("-v,--verbose", common.verbose, "Debug logging");
  app.add_flag("-q,--quiet", common.quiet, "Errors only");

  auto* dataset = app.add_subcommand("dataset", "Scenario grid");
  dataset->require_subcommand(1);
  auto* generate = dataset->add_subcommand("generate", "Simulate every scenario and label it with its best action");
  std::string genOut = "scenarios.csv";
  std::string genArff;
  generate->add_option("--out", genOut, "Records file; .jsonl for JSON lines, CSV otherwise");
  generate->add_option("--arff", genArff, "Also write the labeled dataset as ARFF");

  auto* rules = app.add_subcommand("rules", "Fuzzy rule base");
  rules->require_subcommand(1);
  auto* extract = rules->add_subcommand("extract", "Wang-Mendel rules from the labeled scenarios, one instance per rule");
  std::string rulesRecords;
  std::string rulesOut = "rules.arff";
  extract->add_option("--records", rulesRecords, "Scenario records; simulated when omitted")->check(CLI::ExistingFile);
  extract->add_option("--out", rulesOut, "Rule dataset ARFF");

  auto* train = app.add_subcommand("train", "Train one learner on the rule dataset and store it");
  DataSource trainSrc;
  TrainSpec spec;
  std::string filterName = "normal";
  std::string splitText = "80/20";
  std::string paramsText = "{}";
  std::string modelsDir = "models";
  std::string modelOut;
  train->add_option("--algorithm", spec.algorithm, "Learner id")->check(CLI::IsMember(classifierIds()));
  train->add_option("--filter", filterName, "normal or discrete")->check(CLI::IsMember({"normal", "discrete"}));
  train->add_option("--split", splitText, "Train share: 0.8, 80 or 80/20");
  train->add_option("--seed", spec.splitSeed, "Split seed");
  train->add_option("--params", paramsText, "Learner parameters as a JSON object");
  train->add_option("--models", modelsDir, "Model store directory");
  train->add_option("--out", modelOut, "Write the model JSON here instead of the store");
  addSource(train, trainSrc);

  auto* bench = app.add_subcommand("benchmark", "Every learner on every filter and split");
  DataSource benchSrc;
  BenchmarkConfig benchCfg;
  std::string benchOut = "report.csv";
  std::string benchJson;
  std::string arffDir;
  std::vector<std::string> fractionTexts;
  std::vector<std::string> filterNames;
  bool noTiming = false;
  bench->add_option("--out", benchOut, "Report CSV");
  bench->add_option("--json", benchJson, "Report JSON with metadata and chart series");
  bench->add_option("--arff-dir", arffDir, "Write each filtered dataset as ARFF here");
  bench->add_option("--fractions", fractionTexts, "Train shares (default 65/35 70/30 80/20)");
  bench->add_option("--filters", filterNames, "Filters (default normal discrete)")
      ->check(CLI::IsMember({"normal", "discrete"}));
  bench->add_option("--supervised", benchCfg.supervised, "Supervised learners (default all)")
      ->check(CLI::IsMember(classifierIds()));
  bench->add_option("--unsupervised", benchCfg.unsupervised, "Clusterers (default all)")
      ->check(CLI::IsMember(clustererIds()));
  bench->add_option("--seed", benchCfg.splitSeed, "Split seed");
  bench->add_flag("--strict-timing,!--parallel", benchCfg.strictTiming,
                  "Run rows one at a time (default) or on a worker pool");
  bench->add_flag("--no-timing", noTiming, "Zero the timing columns for byte-comparable reports");
  addSource(bench, benchSrc);

  auto* serve = app.add_subcommand("serve", "HTTP/JSON API with per-session event streams");
  DataSource serveSrc;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string dataDir = "bridgedss-data";
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port; 0 picks a free one")->check(CLI::Range(0, 65535));
  serve->add_option("--data-dir", dataDir, "Model store and session logs");
  addSource(serve, serveSrc);

  auto* replay = app.add_subcommand("replay", "Re-simulate a session log and compare it with the logged states");
  std::string logPath;
  std::string timelineOut;
  replay->add_option("--log", logPath, "Session JSONL log")->required()->check(CLI::ExistingFile);
  replay->add_option("--timeline", timelineOut, "Write the reconstructed timeline as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  log::setLevel(common.verbose ? log::Level::Debug : common.quiet ? log::Level::Error : log::Level::Info);

  try {
    if (generate->parsed()) {
      const auto cfg = simConfig(common);
      const auto t0 = std::chrono::steady_clock::now();
      const auto recs = generateScenarioRecords(cfg, common.threads);
      const double secs = seconds(t0);
      auto out = openOut(genOut);
      if (fs::path(genOut).extension() == ".jsonl") {
        writeScenarioJsonl(out, recs);
      } else {
        writeScenarioCsv(out, recs);
      }
      if (!genArff.empty()) {
        auto arff = openOut(genArff);
        writeArff(arff, toLabeledDataset(cfg, recs), "scenarios");
      }
      fmt::print("{} labeled instances in {:.1f} s -> {}\n", recs.size(), secs, genOut);
    } else if (extract->parsed()) {
      const auto cfg = simConfig(common);
      const auto labeled = toLabeledDataset(cfg, recordsFor(common, rulesRecords));
      const auto pipe = runRulePipeline(labeled);
      ExtractionStats stats;
      extractRules(labeled, pipe.partitions, &stats);
      auto out = openOut(rulesOut);
      writeArff(out, pipe.ruleDataset, "rules");
      fmt::print("{} rules from {} instances ({} antecedent conflicts) -> {}\n", pipe.rules.size(), labeled.rows(),
                 stats.conflicts, rulesOut);
    } else if (train->parsed()) {
      spec.filter = parseFilterKind(filterName);
      spec.trainFraction = parseTrainFraction(splitText);
      spec.params = nlohmann::json::parse(paramsText);
      if (!spec.params.is_object()) throw ValidationError("--params must be a JSON object");
      auto model = trainModel(ruleDataset(common, trainSrc), spec);
      std::string where;
      if (!modelOut.empty()) {
        model.id = fs::path(modelOut).stem().string();
        saveModel(model, modelOut);
        where = modelOut;
      } else {
        ModelStore store(modelsDir);
        store.loadDirectory();
        const auto id = store.add(std::move(model));
        where = (fs::path(modelsDir) / (id + ".json")).string();
        model = *store.get(id);
      }
      fmt::print("{}\n{}\n", model.summary().dump(2), where);
    } else if (bench->parsed()) {
      if (!fractionTexts.empty()) {
        benchCfg.fractions.clear();
        for (const auto& f : fractionTexts) benchCfg.fractions.push_back(parseTrainFraction(f));
      }
      if (!filterNames.empty()) {
        benchCfg.filters.clear();
        for (const auto& f : filterNames) benchCfg.filters.push_back(parseFilterKind(f));
      }
      benchCfg.recordTiming = !noTiming;
      benchCfg.onRow = [](const ReportRow& r) {
        log::info("{} {} {} {} {}", r.algorithm, toString(r.filter), r.trainFraction, toString(r.status),
                  r.status == RowStatus::Ok ? fmt::format("{:.4f}", r.accuracy) : r.note);
      };
      const auto data = ruleDataset(common, benchSrc);
      if (!arffDir.empty()) {
        for (const auto kind : benchCfg.filters) {
          auto out = openOut((fs::path(arffDir) / fmt::format("rules-{}.arff", toString(kind))).string());
          writeArff(out, applyFilter(data, kind).data, fmt::format("rules-{}", toString(kind)));
        }
      }
      const auto report = runBenchmark(data, benchCfg);
      {
        auto out = openOut(benchOut);
        writeReportCsv(out, report);
      }
      if (!benchJson.empty()) openOut(benchJson) << reportToJson(report).dump(2) << '\n';
      std::size_t failed = 0;
      for (const auto& r : report.rows) failed += r.status == RowStatus::Failed;
      fmt::print("{} rows ({} failed) -> {}\n", report.rows.size(), failed, benchOut);
      if (failed > 0) return 2;
    } else if (serve->parsed()) {
      const auto cfg = simConfig(common);
      DssService service({cfg, dataDir, [&] { return ruleDataset(common, serveSrc); }});
      httplib::Server server;
      mountRoutes(server, service);
      const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
      if (bound < 0) throw std::runtime_error(fmt::format("cannot bind {}:{}", host, port));
      runningServer = &server;
      std::signal(SIGINT, [](int) { runningServer->stop(); });
      std::signal(SIGTERM, [](int) { runningServer->stop(); });
      fmt::print("listening on http://{}:{}\n", host, bound);
      std::fflush(stdout);
      server.listen_after_bind();
      runningServer = nullptr;
    } else if (replay->parsed()) {
      auto in = openIn(logPath);
      const auto parsed = parseSessionLog(in);
      if (parsed.error) throw ValidationError(fmt::format("{}:{}: {}", logPath, parsed.errorLine, *parsed.error));
      const auto t = replaySession(parsed.records);
      if (!timelineOut.empty()) {
        nlohmann::json states = nlohmann::json::array();
        for (std::size_t i = 0; i < t.replayed.size(); ++i) {
          states.push_back({{"tick", i},
                            {"action", i < t.activeActions.size() ? nlohmann::json(t.activeActions[i]) : nlohmann::json()},
                            {"state", trafficStateToJson(t.replayed[i])}});
        }
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : t.recommendations) recs.push_back(toJson(r));
        openOut(timelineOut) << nlohmann::json{{"sessionId", t.sessionId}, {"states", states}, {"recommendations", recs}}
                                    .dump(2)
                             << '\n';
      }
      fmt::print("session {}: {} ticks, {} recommendations, {} decisions, {} injections\n", t.sessionId,
                 t.logged.empty() ? 0 : t.logged.size() - 1, t.recommendations.size(), t.decisions, t.injections);
      if (!t.identical()) {
        fmt::print("replay diverges at tick {}\n", t.firstMismatch ? *t.firstMismatch : static_cast<int>(t.replayed.size()));
        return 2;
      }
      fmt::print("replay identical\n");
    }
  } catch (const ValidationError& e) {
    log::error("{}", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    log::error("invalid JSON: {}", e.what());
    return 1;
  } catch (const std::exception& e) {
    log::error("{}", e.what());
    return 2;
  }
  return 0;
}
