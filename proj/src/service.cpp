#include "bridgedss/service.hpp"

#include <fmt/format.h>

#include <charconv>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <sstream>

#include "bridgedss/clusterers.hpp"
#include "bridgedss/errors.hpp"
#include "bridgedss/log.hpp"
#include "bridgedss/version.hpp"
#include "httplib.h"

namespace bdss {

DssService::DssService(ServiceOptions opt)
    : opt_(std::move(opt)), models_(opt_.dataDir.empty() ? std::filesystem::path{} : opt_.dataDir / "models") {
  validate(opt_.sim);
  if (!opt_.dataDir.empty()) {
    std::filesystem::create_directories(opt_.dataDir / "sessions");
    const int loaded = models_.loadDirectory();
    if (loaded > 0) log::info("loaded {} stored models", loaded);
    // session logs are append-only, so numbering resumes past earlier runs
    for (const auto& e : std::filesystem::directory_iterator(opt_.dataDir / "sessions")) {
      const auto stem = e.path().stem().string();
      if (e.path().extension() != ".jsonl" || stem.size() < 2 || stem[0] != 's') continue;
      int n = 0;
      const auto [ptr, ec] = std::from_chars(stem.data() + 1, stem.data() + stem.size(), n);
      if (ec == std::errc{} && ptr == stem.data() + stem.size() && n >= nextSession_) nextSession_ = n + 1;
    }
  }
}

DssService::~DssService() {
  std::vector<std::shared_ptr<BenchmarkJob>> jobs;
  {
    std::lock_guard lock(jobsMutex_);
    for (auto& [id, j] : jobs_) jobs.push_back(j);
  }
  for (auto& j : jobs) {
    if (j->worker.joinable()) j->worker.join();
  }
}

std::shared_ptr<const Dataset> DssService::ruleDataset() {
  std::lock_guard lock(datasetMutex_);
  if (!dataset_) {
    if (!opt_.ruleDataset) throw PreconditionError("no rule dataset is configured for this service");
    dataset_ = std::make_shared<const Dataset>(opt_.ruleDataset());
  }
  return dataset_;
}

std::shared_ptr<const TrainedModel> DssService::train(const TrainSpec& spec) {
  const auto data = ruleDataset();
  const std::string id = models_.add(trainModel(*data, spec));
  return models_.get(id);
}

std::string DssService::createSession(SessionOptions opt) {
  auto model = models_.get(opt.modelId);
  const std::string id = fmt::format("s{}", nextSession_++);
  if (!opt_.dataDir.empty() && opt.logFile.empty()) opt.logFile = opt_.dataDir / "sessions" / (id + ".jsonl");
  auto s = std::make_shared<Session>(id, opt_.sim, std::move(model), std::move(opt));
  std::lock_guard lock(sessionsMutex_);
  sessions_[id] = std::move(s);
  return id;
}

std::shared_ptr<Session> DssService::session(const std::string& id) const {
  std::lock_guard lock(sessionsMutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError(fmt::format("unknown session '{}'", id));
  return it->second;
}

std::vector<std::shared_ptr<Session>> DssService::sessions() const {
  std::lock_guard lock(sessionsMutex_);
  std::vector<std::shared_ptr<Session>> out;
  for (const auto& [id, s] : sessions_) out.push_back(s);
  return out;
}

std::string DssService::startBenchmark(BenchmarkConfig cfg) {
  const auto data = ruleDataset();
  auto j = std::make_shared<BenchmarkJob>();
  {
    std::lock_guard lock(jobsMutex_);
    j->id = fmt::format("b{}", nextJob_++);
    jobs_[j->id] = j;
  }
  j->worker = std::jthread([j, data, cfg = std::move(cfg)] {
    try {
      auto report = runBenchmark(*data, cfg);
      std::lock_guard lock(j->mutex);
      j->report = std::move(report);
      j->status = "done";
    } catch (const std::exception& e) {
      std::lock_guard lock(j->mutex);
      j->status = "failed";
      j->error = e.what();
    }
  });
  return j->id;
}

std::shared_ptr<DssService::BenchmarkJob> DssService::job(const std::string& id) const {
  std::lock_guard lock(jobsMutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) throw NotFoundError(fmt::format("unknown benchmark '{}'", id));
  return it->second;
}

nlohmann::json DssService::benchmark(const std::string& id) const {
  const auto j = job(id);
  std::lock_guard lock(j->mutex);
  nlohmann::json out = {{"id", j->id}, {"status", j->status}};
  if (j->status == "done") out["report"] = reportToJson(j->report);
  if (j->status == "failed") out["error"] = j->error;
  return out;
}

std::string DssService::benchmarkCsv(const std::string& id) const {
  const auto j = job(id);
  std::lock_guard lock(j->mutex);
  if (j->status != "done") throw PreconditionError(fmt::format("benchmark '{}' is {}", id, j->status));
  std::ostringstream out;
  writeReportCsv(out, j->report);
  return out.str();
}

namespace {

using httplib::Request;
using httplib::Response;

void sendJson(Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void sendError(Response& res, int status, const std::string& message) {
  sendJson(res, {{"error", message}}, status);
}

template <typename F>
void guarded(Response& res, F&& f) {
  try {
    f();
  } catch (const NotFoundError& e) {
    sendError(res, 404, e.what());
  } catch (const PreconditionError& e) {
    sendError(res, 409, e.what());
  } catch (const ValidationError& e) {
    sendError(res, 400, e.what());
  } catch (const nlohmann::json::exception& e) {
    sendError(res, 400, fmt::format("malformed request body: {}", e.what()));
  } catch (const std::exception& e) {
    log::error("request failed: {}", e.what());
    sendError(res, 500, e.what());
  }
}

nlohmann::json body(const Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  auto j = nlohmann::json::parse(req.body);
  if (!j.is_object()) throw ValidationError("request body must be a JSON object");
  return j;
}

void rejectUnknown(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, v] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      throw ValidationError(fmt::format("unknown field '{}'", key));
    }
  }
}

double splitField(const nlohmann::json& v) {
  if (v.is_string()) return parseTrainFraction(v.get<std::string>());
  return parseTrainFraction(fmt::format("{}", v.get<double>()));
}

BenchmarkConfig benchmarkFromJson(const nlohmann::json& j) {
  rejectUnknown(j, {"fractions", "filters", "supervised", "unsupervised", "splitSeed", "seed", "clusters", "params",
                    "strictTiming", "recordTiming"});
  BenchmarkConfig cfg;
  if (j.contains("fractions")) {
    cfg.fractions.clear();
    for (const auto& f : j.at("fractions")) cfg.fractions.push_back(splitField(f));
  }
  if (j.contains("filters")) {
    cfg.filters.clear();
    for (const auto& f : j.at("filters")) cfg.filters.push_back(parseFilterKind(f.get<std::string>()));
  }
  if (j.contains("supervised")) cfg.supervised = j.at("supervised").get<std::vector<std::string>>();
  if (j.contains("unsupervised")) cfg.unsupervised = j.at("unsupervised").get<std::vector<std::string>>();
  cfg.splitSeed = j.value("splitSeed", cfg.splitSeed);
  cfg.eval.seed = j.value("seed", cfg.eval.seed);
  cfg.eval.clusters = j.value("clusters", cfg.eval.clusters);
  cfg.eval.params = j.value("params", nlohmann::json::object());
  cfg.strictTiming = j.value("strictTiming", true);
  cfg.recordTiming = j.value("recordTiming", true);
  for (const auto& a : cfg.supervised) {
    if (std::find(classifierIds().begin(), classifierIds().end(), a) == classifierIds().end()) {
      throw ValidationError(fmt::format("unknown supervised algorithm '{}'", a));
    }
  }
  for (const auto& a : cfg.unsupervised) {
    if (std::find(clustererIds().begin(), clustererIds().end(), a) == clustererIds().end()) {
      throw ValidationError(fmt::format("unknown unsupervised algorithm '{}'", a));
    }
  }
  return cfg;
}

/// Records handed from the session worker to one event-stream connection.
class EventQueue {
 public:
  void push(std::string event) {
    {
      std::lock_guard lock(mutex_);
      events_.push_back(std::move(event));
    }
    cv_.notify_one();
  }
  std::deque<std::string> waitPop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [&] { return !events_.empty(); });
    std::deque<std::string> out;
    out.swap(events_);
    return out;
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> events_;
};

std::string sseMessage(std::string_view event, std::int64_t id, const nlohmann::json& data) {
  return fmt::format("id: {}\nevent: {}\ndata: {}\n\n", id, event, data.dump());
}

}  // namespace

void mountRoutes(httplib::Server& server, DssService& service) {
  server.Get("/health", [](const Request&, Response& res) {
    sendJson(res, {{"status", "ok"}, {"version", kVersion}});
  });

  server.Get("/models", [&](const Request&, Response& res) {
    guarded(res, [&] {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& m : service.models().list()) out.push_back(m->summary());
      sendJson(res, out);
    });
  });

  server.Get("/models/:id", [&](const Request& req, Response& res) {
    guarded(res, [&] { sendJson(res, service.models().get(req.path_params.at("id"))->summary()); });
  });

  server.Post("/models/train", [&](const Request& req, Response& res) {
    guarded(res, [&] {
      const auto j = body(req);
      rejectUnknown(j, {"algorithm", "filter", "split", "seed", "params"});
      TrainSpec spec;
      spec.algorithm = j.at("algorithm").get<std::string>();
      spec.filter = parseFilterKind(j.value("filter", std::string("normal")));
      if (j.contains("split")) spec.trainFraction = splitField(j.at("split"));
      spec.splitSeed = j.value("seed", spec.splitSeed);
      spec.params = j.value("params", nlohmann::json::object());
      sendJson(res, service.train(spec)->summary(), 201);
    });
  });

  server.Get("/sessions", [&](const Request&, Response& res) {
    guarded(res, [&] {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& s : service.sessions()) out.push_back(toJson(s->snapshot()));
      sendJson(res, out);
    });
  });

  server.Post("/sessions", [&](const Request& req, Response& res) {
    guarded(res, [&] {
      const auto j = body(req);
      rejectUnknown(j, {"scenario", "modelId", "tickPeriodMs", "mode", "initialAction"});
      SessionOptions opt;
      opt.scenario = scenarioFromJson(j.value("scenario", nlohmann::json::object()));
      opt.modelId = j.at("modelId").get<std::string>();
      opt.tickPeriodMs = j.value("tickPeriodMs", opt.tickPeriodMs);
      opt.mode = parseOperatorMode(j.value("mode", std::string("manual")));
      if (j.contains("initialAction")) opt.initialAction = actionFromJson(j.at("initialAction"));
      const auto id = service.createSession(std::move(opt));
      sendJson(res, toJson(service.session(id)->snapshot()), 201);
    });
  });

  auto lifecycle = [&](const char* path, void (Session::*op)()) {
    server.Post(path, [&service, op](const Request& req, Response& res) {
      guarded(res, [&] {
        auto s = service.session(req.path_params.at("id"));
        ((*s).*op)();
        sendJson(res, toJson(s->snapshot()));
      });
    });
  };
  lifecycle("/sessions/:id/start", &Session::start);
  lifecycle("/sessions/:id/pause", &Session::pause);
  lifecycle("/sessions/:id/end", &Session::end);

  server.Post("/sessions/:id/tick", [&](const Request& req, Response& res) {
    guarded(res, [&] {
      const auto r = service.session(req.path_params.at("id"))->tick();
      sendJson(res, {{"tick", r.tick}, {"state", trafficStateToJson(r.state)}, {"recommendation", toJson(r.recommendation)}});
    });
  });

  server.Get("/sessions/:id/state", [&](const Request& req, Response& res) {
    guarded(res, [&] { sendJson(res, toJson(service.session(req.path_params.at("id"))->snapshot())); });
  });

  server.Post("/sessions/:id/mode", [&](const Request& req, Response& res) {
    guarded(res, [&] {
      const auto j = body(req);
      rejectUnknown(j, {"mode"});
      auto s = service.session(req.path_params.at("id"));
      s->setMode(parseOperatorMode(j.at("mode").get<std::string>()));
      sendJson(res, toJson(s->snapshot()));
    });
  });

  server.Post("/sessions/:id/decision", [&](const Request& req, Response& res) {
    guarded(res, [&] {
      const auto j = body(req);
      rejectUnknown(j, {"recommendationId", "verdict", "action"});
      auto s = service.session(req.path_params.at("id"));
      const auto verdict = j.at("verdict").get<std::string>();
      std::optional<ControlAction> override;
      if (verdict == "override") {
        override = actionFromJson(j.at("action"));
      } else if (verdict != "accept") {
        throw ValidationError(fmt::format("verdict must be accept or override, got '{}'", verdict));
      }
      const auto applied = s->decide(j.at("recommendationId").get<int>(), override);
      sendJson(res, {{"applied", actionToJson(applied)}, {"session", toJson(s->snapshot())}});
    });
  });

  server.Post("/sessions/:id/inject", [&](const Request& req, Response& res) {
    guarded(res, [&] {
      auto s = service.session(req.path_params.at("id"));
      const int effective = s->inject(injectionFromJson(body(req)));
      sendJson(res, {{"acknowledged", true}, {"effectiveTick", effective}});
    });
  });

  server.Get("/sessions/:id/log", [&](const Request& req, Response& res) {
    guarded(res, [&] {
      const std::size_t from = req.has_param("from") ? std::stoul(req.get_param_value("from")) : 0;
      nlohmann::json out = nlohmann::json::array();
      for (const auto& r : service.session(req.path_params.at("id"))->log(from)) out.push_back(toJson(r));
      sendJson(res, out);
    });
  });

  server.Get("/sessions/:id/recommendations", [&](const Request& req, Response& res) {
    guarded(res, [&] {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& r : service.session(req.path_params.at("id"))->recommendations()) out.push_back(toJson(r));
      sendJson(res, out);
    });
  });

  server.Get("/sessions/:id/events", [&](const Request& req, Response& res) {
    guarded(res, [&] {
      auto session = service.session(req.path_params.at("id"));
      auto queue = std::make_shared<EventQueue>();
      const auto snap = session->snapshot();
      queue->push(sseMessage("snapshot", 0, toJson(snap)));
      const int token = session->subscribe([queue](const LogRecord& r) {
        queue->push(sseMessage(r.kind, r.timestamp, toJson(r)));
      });
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream",
          [queue](std::size_t, httplib::DataSink& sink) {
            auto events = queue->waitPop(std::chrono::milliseconds(500));
            if (events.empty()) {
              static const std::string keepalive = ": keepalive\n\n";
              return sink.is_writable() && sink.write(keepalive.data(), keepalive.size());
            }
            for (const auto& e : events) {
              if (!sink.write(e.data(), e.size())) return false;
            }
            return true;
          },
          [session, token](bool) { session->unsubscribe(token); });
    });
  });

  server.Post("/benchmarks", [&](const Request& req, Response& res) {
    guarded(res, [&] {
      const auto id = service.startBenchmark(benchmarkFromJson(body(req)));
      sendJson(res, {{"id", id}, {"status", "running"}}, 202);
    });
  });

  server.Get("/benchmarks/:id", [&](const Request& req, Response& res) {
    guarded(res, [&] { sendJson(res, service.benchmark(req.path_params.at("id"))); });
  });

  server.Get("/benchmarks/:id/csv", [&](const Request& req, Response& res) {
    guarded(res, [&] { res.set_content(service.benchmarkCsv(req.path_params.at("id")), "text/csv"); });
  });
}

}  // namespace bdss
