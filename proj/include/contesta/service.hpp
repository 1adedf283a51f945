#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "contesta/cohort.hpp"
#include "contesta/global_explain.hpp"
#include "contesta/local_explain.hpp"
#include "contesta/models.hpp"

namespace httplib {
class Server;
}

namespace contesta {

// --- clinician feedback -----------------------------------------------------------

struct VerdictEntry {
  std::string timestamp;  // ISO 8601, UTC
  std::string record_id;
  std::string model_id;
  Verdict machine_verdict = Verdict::Inconclusive;
  Verdict clinician_verdict = Verdict::Justify;  // Justify or Contest only
  std::string note;
};

nlohmann::json verdict_json(const VerdictEntry& entry);
VerdictEntry verdict_from_json(const nlohmann::json& j);

// Append-only JSON-lines log. Each append is flushed and synced before it
// returns, so an acknowledged entry survives a restart.
class VerdictLog {
 public:
  explicit VerdictLog(std::filesystem::path path);

  void append(const VerdictEntry& entry);
  std::vector<VerdictEntry> entries() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
};

// --- training requests and stored models ------------------------------------------

struct TrainRequest {
  std::string name;    // model name; one job at a time per name
  std::string cohort;  // stored cohort name
  ClassifierSpec spec;
  double train_fraction = 0.7;
  int permutations = kDefaultPermutations;

  nlohmann::json to_json() const;
  static TrainRequest from_json(const nlohmann::json& j);
};

// Everything served for one trained model. Immutable once published.
struct ModelBundle {
  std::string id;
  TrainRequest request;
  std::shared_ptr<const Cohort> cohort;  // reference set for neighbors and importance
  TrainedModel model;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  EvalReport evaluation;
  ImportanceReport importance;
};

// Split, fit, evaluate on the held-out part and compute permutation
// importance over the whole cohort. Deterministic in (cohort, request).
ModelBundle train_bundle(const std::string& id, const TrainRequest& request,
                         std::shared_ptr<const Cohort> cohort);

// Content-derived id: identical cohort data and request give the same id.
std::string model_id_for(const TrainRequest& request, const Cohort& cohort);

// --- data directory --------------------------------------------------------------------

// Layout:
//   cohorts/<name>.csv (+ .meta.json)
//   models/<id>/{request,model,evaluation,importance,split,status}.json
//   verdicts.jsonl
class Store {
 public:
  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path cohort_path(const std::string& name) const;
  std::filesystem::path model_dir(const std::string& id) const;

  std::vector<std::string> cohort_names() const;
  std::shared_ptr<const Cohort> cohort(const std::string& name) const;  // NotFound when absent
  void put_cohort(const std::string& name, const Cohort& cohort);

  std::vector<std::string> model_ids() const;
  bool has_model(const std::string& id) const;
  std::shared_ptr<const ModelBundle> model(const std::string& id) const;  // NotFound when absent
  void put_model(const ModelBundle& bundle);

  VerdictLog& verdicts() noexcept { return verdicts_; }

 private:
  std::filesystem::path root_;
  VerdictLog verdicts_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::string, std::shared_ptr<const Cohort>> cohorts_;
  mutable std::map<std::string, std::shared_ptr<const ModelBundle>> models_;
};

// Names used for cohorts and models: [A-Za-z0-9_.-], 1..64 chars, no leading dot.
bool valid_name(std::string_view name) noexcept;

// --- HTTP service ------------------------------------------------------------------------

struct ServiceConfig {
  std::filesystem::path data_dir = "data";
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds an ephemeral port
  std::optional<std::filesystem::path> static_dir;  // built UI assets
  std::string cors_origin = "*";
};

enum class JobState { Queued, Running, Done, Failed };
std::string_view job_state_name(JobState s) noexcept;

struct JobStatus {
  std::string model_id;
  std::string name;
  JobState state = JobState::Queued;
  std::string error_code;
  std::string message;
};

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Serves on the calling thread until stop().
  void run();
  void stop();
  // Blocks until every training job has finished.
  void wait_for_jobs();

  Store& store() noexcept { return store_; }

 private:
  void routes();
  std::string submit(const TrainRequest& request, bool wait);
  std::optional<JobStatus> job(const std::string& id) const;
  std::shared_ptr<const ModelBundle> latest_model_for(const std::string& cohort) const;

  ServiceConfig config_;
  Store store_;
  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
  int bound_port_ = 0;

  mutable std::mutex jobs_mutex_;
  std::map<std::string, JobStatus> jobs_;           // by model id
  std::map<std::string, std::string> active_names_;  // name -> model id being trained
  std::vector<std::thread> workers_;
};

}  // namespace contesta
