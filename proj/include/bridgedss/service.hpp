#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "bridgedss/corridor.hpp"
#include "bridgedss/dataset.hpp"
#include "bridgedss/evalbench.hpp"
#include "bridgedss/modelstore.hpp"
#include "bridgedss/session.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace bdss {

struct ServiceOptions {
  SimConfig sim;
  /// models/ and sessions/ live here; empty keeps everything in memory.
  std::filesystem::path dataDir;
  /// The rule dataset used for training and benchmarks, built on first use.
  std::function<Dataset()> ruleDataset;
};

/// Live sessions, the model registry and background benchmark jobs behind one API.
class DssService {
 public:
  explicit DssService(ServiceOptions opt);
  ~DssService();

  const SimConfig& simConfig() const { return opt_.sim; }
  ModelStore& models() { return models_; }
  std::shared_ptr<const Dataset> ruleDataset();

  std::shared_ptr<const TrainedModel> train(const TrainSpec& spec);

  /// Unknown model ids are NotFoundError; the session starts paused.
  std::string createSession(SessionOptions opt);
  std::shared_ptr<Session> session(const std::string& id) const;
  std::vector<std::shared_ptr<Session>> sessions() const;

  std::string startBenchmark(BenchmarkConfig cfg);
  /// {id, status: running | done | failed, report?, error?}
  nlohmann::json benchmark(const std::string& id) const;
  std::string benchmarkCsv(const std::string& id) const;

 private:
  struct BenchmarkJob {
    std::string id;
    mutable std::mutex mutex;
    std::string status = "running";
    std::string error;
    EvaluationReport report;
    std::jthread worker;
  };

  std::shared_ptr<BenchmarkJob> job(const std::string& id) const;

  ServiceOptions opt_;
  ModelStore models_;

  std::mutex datasetMutex_;
  std::shared_ptr<const Dataset> dataset_;

  mutable std::mutex sessionsMutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<int> nextSession_{1};

  mutable std::mutex jobsMutex_;
  std::map<std::string, std::shared_ptr<BenchmarkJob>> jobs_;
  int nextJob_ = 1;
};

/// Registers the HTTP/JSON API and the per-session event stream on `server`.
void mountRoutes(httplib::Server& server, DssService& service);

}  // namespace bdss
