#include "contesta/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <httplib.h>

#include "contesta/error.hpp"
#include "contesta/io.hpp"
#include "contesta/rng.hpp"

namespace contesta {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string now_iso() {
  const auto now = std::chrono::floor<std::chrono::milliseconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%S}Z", now);
}

Verdict parse_clinician_verdict(std::string_view text) {
  const Verdict v = parse_verdict(text);
  if (v == Verdict::Inconclusive)
    fail(ErrorCode::InvalidArgument, "clinician verdict must be Justify or Contest");
  return v;
}

std::vector<std::string> record_ids(const Cohort& c) {
  std::vector<std::string> ids;
  for (const auto& r : c.records()) ids.push_back(r.record_id);
  return ids;
}

}  // namespace

// --- verdicts ---------------------------------------------------------------------

json verdict_json(const VerdictEntry& e) {
  return {{"timestamp", e.timestamp},
          {"record_id", e.record_id},
          {"model_id", e.model_id},
          {"machine_verdict", std::string(verdict_name(e.machine_verdict))},
          {"clinician_verdict", std::string(verdict_name(e.clinician_verdict))},
          {"note", e.note}};
}

VerdictEntry verdict_from_json(const json& j) {
  VerdictEntry e;
  e.timestamp = j.at("timestamp").get<std::string>();
  e.record_id = j.at("record_id").get<std::string>();
  e.model_id = j.at("model_id").get<std::string>();
  e.machine_verdict = parse_verdict(j.at("machine_verdict").get<std::string>());
  e.clinician_verdict = parse_clinician_verdict(j.at("clinician_verdict").get<std::string>());
  e.note = j.value("note", "");
  return e;
}

VerdictLog::VerdictLog(fs::path path) : path_(std::move(path)) {}

void VerdictLog::append(const VerdictEntry& entry) {
  const std::string line = verdict_json(entry).dump() + "\n";
  std::lock_guard lock(mutex_);
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) fail(ErrorCode::IoError, fmt::format("cannot open {}: {}", path_.string(), std::strerror(errno)));
  std::size_t done = 0;
  while (done < line.size()) {
    const auto n = ::write(fd, line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      fail(ErrorCode::IoError, fmt::format("cannot append to {}: {}", path_.string(), std::strerror(err)));
    }
    done += static_cast<std::size_t>(n);
  }
  const bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (!synced) fail(ErrorCode::IoError, fmt::format("cannot sync {}", path_.string()));
}

std::vector<VerdictEntry> VerdictLog::entries() const {
  std::lock_guard lock(mutex_);
  std::vector<VerdictEntry> out;
  std::ifstream in(path_);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    try {
      out.push_back(verdict_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      fail(ErrorCode::ParseError, fmt::format("{}:{}: {}", path_.string(), n, e.what()));
    }
  }
  return out;
}

// --- training ------------------------------------------------------------------------

json TrainRequest::to_json() const {
  return {{"name", name},
          {"cohort", cohort},
          {"spec", spec_json(spec)},
          {"train_fraction", train_fraction},
          {"permutations", permutations}};
}

TrainRequest TrainRequest::from_json(const json& j) {
  TrainRequest r;
  try {
    r.name = j.at("name").get<std::string>();
    r.cohort = j.at("cohort").get<std::string>();
    if (j.contains("spec")) {
      r.spec = spec_from_json(j.at("spec"));
    } else {
      // Flat form: {"algorithm": "rf", "seed": 3, ...}
      json spec = {{"algorithm", j.value("algorithm", "rf")}};
      for (const char* k : {"seed", "search_draws", "cv_repeats", "cv_folds"})
        if (j.contains(k)) spec[k] = j[k];
      r.spec = spec_from_json(spec);
    }
    r.train_fraction = j.value("train_fraction", r.train_fraction);
    r.permutations = j.value("permutations", r.permutations);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, fmt::format("invalid training request: {}", e.what()));
  }
  if (!valid_name(r.name)) fail(ErrorCode::InvalidArgument, fmt::format("invalid model name '{}'", r.name));
  if (!valid_name(r.cohort)) fail(ErrorCode::InvalidArgument, fmt::format("invalid cohort name '{}'", r.cohort));
  if (!(r.train_fraction > 0.0 && r.train_fraction < 1.0))
    fail(ErrorCode::InvalidArgument, "train_fraction must lie in (0, 1)");
  if (r.permutations < 1) fail(ErrorCode::InvalidArgument, "permutations must be >= 1");
  r.spec.validate();
  return r;
}

std::string model_id_for(const TrainRequest& request, const Cohort& cohort) {
  std::uint64_t h = hash_tag(request.to_json().dump());
  h = derive_seed(h, {hash_tag(cohort_csv(cohort)), hash_tag(cohort_meta_json(cohort).dump())});
  return fmt::format("{}-{:016x}", request.name, h);
}

ModelBundle train_bundle(const std::string& id, const TrainRequest& request,
                         std::shared_ptr<const Cohort> cohort) {
  ModelBundle b;
  b.id = id;
  b.request = request;
  b.cohort = std::move(cohort);
  const auto split = stratified_split(*b.cohort, request.train_fraction, request.spec.seed);
  b.model = fit(request.spec, split.train);
  b.evaluation = evaluate(b.model, split.test);
  b.importance = permutation_importance(b.model, *b.cohort, request.permutations, request.spec.seed);
  b.train_ids = record_ids(split.train);
  b.test_ids = record_ids(split.test);
  return b;
}

// --- store ----------------------------------------------------------------------------

bool valid_name(std::string_view name) noexcept {
  if (name.empty() || name.size() > 64 || name.front() == '.') return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-' || c == '.';
  });
}

Store::Store(fs::path root) : root_(std::move(root)), verdicts_(root_ / "verdicts.jsonl") {
  fs::create_directories(root_ / "cohorts");
  fs::create_directories(root_ / "models");
}

fs::path Store::cohort_path(const std::string& name) const { return root_ / "cohorts" / (name + ".csv"); }
fs::path Store::model_dir(const std::string& id) const { return root_ / "models" / id; }

std::vector<std::string> Store::cohort_names() const {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(root_ / "cohorts"))
    if (e.path().extension() == ".csv" && valid_name(e.path().stem().string()))
      names.push_back(e.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

std::shared_ptr<const Cohort> Store::cohort(const std::string& name) const {
  if (!valid_name(name)) fail(ErrorCode::NotFound, fmt::format("unknown cohort '{}'", name));
  {
    std::shared_lock lock(mutex_);
    if (auto it = cohorts_.find(name); it != cohorts_.end()) return it->second;
  }
  const auto path = cohort_path(name);
  if (!fs::exists(path)) fail(ErrorCode::NotFound, fmt::format("unknown cohort '{}'", name));
  auto loaded = std::make_shared<const Cohort>(read_cohort(path));
  std::unique_lock lock(mutex_);
  return cohorts_.try_emplace(name, std::move(loaded)).first->second;
}

void Store::put_cohort(const std::string& name, const Cohort& cohort) {
  if (!valid_name(name)) fail(ErrorCode::InvalidArgument, fmt::format("invalid cohort name '{}'", name));
  std::unique_lock lock(mutex_);
  write_cohort(cohort_path(name), cohort);
  cohorts_[name] = std::make_shared<const Cohort>(cohort);
}

std::vector<std::string> Store::model_ids() const {
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(root_ / "models"))
    if (e.is_directory() && valid_name(e.path().filename().string()))
      ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

bool Store::has_model(const std::string& id) const {
  return valid_name(id) && fs::exists(model_dir(id) / "model.json");
}

std::shared_ptr<const ModelBundle> Store::model(const std::string& id) const {
  {
    std::shared_lock lock(mutex_);
    if (auto it = models_.find(id); it != models_.end()) return it->second;
  }
  if (!has_model(id)) fail(ErrorCode::NotFound, fmt::format("unknown model '{}'", id));
  const auto dir = model_dir(id);
  const auto load = [&](const char* file) {
    try {
      return json::parse(io::read_text(dir / file));
    } catch (const json::exception& e) {
      fail(ErrorCode::ParseError, fmt::format("{}: {}", (dir / file).string(), e.what()));
    }
  };
  auto b = std::make_shared<ModelBundle>();
  b->id = id;
  b->request = TrainRequest::from_json(load("request.json"));
  b->cohort = std::make_shared<const Cohort>(read_cohort(dir / "cohort.csv"));
  b->model = model_from_json(load("model.json"));
  b->evaluation = eval_from_json(load("evaluation.json"));
  b->importance = importance_from_json(load("importance.json"));
  const auto split = load("split.json");
  b->train_ids = split.at("train").get<std::vector<std::string>>();
  b->test_ids = split.at("test").get<std::vector<std::string>>();

  std::unique_lock lock(mutex_);
  return models_.try_emplace(id, std::move(b)).first->second;
}

void Store::put_model(const ModelBundle& b) {
  // Assemble in a scratch directory, then rename into place: a model
  // directory is either complete or absent.
  const auto final_dir = model_dir(b.id);
  const auto tmp = root_ / "models" / fmt::format(".tmp-{}-{}", b.id, ::getpid());
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  io::atomic_write_text(tmp / "request.json", b.request.to_json().dump(2) + "\n");
  write_cohort(tmp / "cohort.csv", *b.cohort);
  io::atomic_write_text(tmp / "model.json", model_json(b.model).dump() + "\n");
  io::atomic_write_text(tmp / "evaluation.json", eval_json(b.evaluation).dump(2) + "\n");
  io::atomic_write_text(tmp / "importance.json", importance_json(b.importance).dump(2) + "\n");
  io::atomic_write_text(tmp / "split.json",
                        json{{"train", b.train_ids}, {"test", b.test_ids}}.dump(2) + "\n");
  io::atomic_write_text(tmp / "meta.json", json{{"created", now_iso()}}.dump(2) + "\n");

  std::unique_lock lock(mutex_);
  if (fs::exists(final_dir)) {
    fs::remove_all(tmp);  // an identical request finished first
  } else {
    fs::rename(tmp, final_dir);
  }
  models_.erase(b.id);
}

// --- HTTP --------------------------------------------------------------------------------

std::string_view job_state_name(JobState s) noexcept {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "?";
}

namespace {

int http_status(ErrorCode code) {
  if (code == ErrorCode::NotFound) return 404;
  if (code == ErrorCode::Conflict) return 409;
  if (is_validation_error(code)) return 422;
  return 500;
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, {{"error", std::string(code)}, {"message", message}}, status);
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

// Maps module errors to HTTP statuses with machine-readable codes.
Handler guarded(Handler h) {
  return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    try {
      h(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), error_code_name(e.code()), e.what());
    } catch (const json::exception& e) {
      send_error(res, 422, error_code_name(ErrorCode::ParseError), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, fmt::format("request body is not JSON: {}", e.what()));
  }
}

Feature feature_param(const httplib::Request& req, const std::string& key) {
  const auto text = req.get_param_value(key);
  const auto f = feature_from_name(text);
  if (!f) fail(ErrorCode::UnknownFeature, fmt::format("unknown feature '{}'", text));
  return *f;
}

double number_param(const httplib::Request& req, const std::string& key, double fallback) {
  if (!req.has_param(key)) return fallback;
  return io::parse_double(req.get_param_value(key), "query parameter " + key);
}

json demographics_json(const Demographics& d) {
  return {{"gen", std::string(gender_name(d.gen))}, {"ga_wk", d.ga}, {"bw_g", d.bw}, {"w_g", d.w},
          {"pna_wk", d.pna}};
}

json record_json(const EpisodeRecord& r, const Cohort& cohort) {
  json features = json::object();
  for (auto f : kAllFeatures)
    if (is_dynamic(f)) features[std::string(feature_name(f))] = feature_value(r, f);
  json active = json::array();
  for (auto f : cohort.active_features()) active.push_back(std::string(feature_name(f)));
  return {{"record_id", r.record_id},
          {"demographics", demographics_json(r.demographics)},
          {"features", features},
          {"label", std::string(label_name(r.label))},
          {"active_features", active}};
}

LatentSpaceConfig contest_config(const httplib::Request& req, const ModelBundle& b) {
  LatentSpaceConfig c;
  c.panel_features = top_dynamic_features(b.importance, 2);
  c.weight_ga = number_param(req, "w_ga", c.weight_ga);
  c.weight_w = number_param(req, "w_w", c.weight_w);
  c.weight_pna = number_param(req, "w_pna", c.weight_pna);
  c.weight_gen = number_param(req, "w_gen", c.weight_gen);
  c.overlap_cutoff = number_param(req, "cutoff", c.overlap_cutoff);
  if (req.has_param("k")) c.k = static_cast<int>(io::parse_int(req.get_param_value("k"), "query parameter k"));
  if (req.has_param("features")) {
    c.panel_features.clear();
    std::stringstream ss(req.get_param_value("features"));
    for (std::string name; std::getline(ss, name, ',');) {
      const auto f = feature_from_name(name);
      if (!f) fail(ErrorCode::UnknownFeature, fmt::format("unknown feature '{}'", name));
      c.panel_features.push_back(*f);
    }
  }
  return c;
}

const EpisodeRecord& find_case(const Cohort& cohort, const std::string& id) {
  const auto* r = cohort.find(id);
  if (!r) fail(ErrorCode::NotFound, fmt::format("unknown case '{}'", id));
  return *r;
}

}  // namespace

Service::Service(ServiceConfig config)
    : config_(std::move(config)), store_(config_.data_dir), server_(std::make_unique<httplib::Server>()) {
  routes();
}

Service::~Service() {
  stop();
  wait_for_jobs();
}

int Service::start() {
  if (config_.port == 0)
    bound_port_ = server_->bind_to_any_port(config_.host);
  else
    bound_port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
  if (bound_port_ < 0)
    fail(ErrorCode::IoError, fmt::format("cannot bind {}:{}", config_.host, config_.port));
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound_port_;
}

void Service::run() {
  if (!server_->listen(config_.host, config_.port))
    fail(ErrorCode::IoError, fmt::format("cannot listen on {}:{}", config_.host, config_.port));
}

void Service::stop() {
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
}

void Service::wait_for_jobs() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(jobs_mutex_);
    workers.swap(workers_);
  }
  for (auto& t : workers)
    if (t.joinable()) t.join();
}

std::optional<JobStatus> Service::job(const std::string& id) const {
  std::lock_guard lock(jobs_mutex_);
  if (auto it = jobs_.find(id); it != jobs_.end()) return it->second;
  return std::nullopt;
}

std::string Service::submit(const TrainRequest& request, bool wait) {
  const auto cohort = store_.cohort(request.cohort);
  const auto id = model_id_for(request, *cohort);
  if (store_.has_model(id)) return id;
  {
    std::lock_guard lock(jobs_mutex_);
    if (auto it = active_names_.find(request.name); it != active_names_.end()) {
      if (it->second == id) return id;  // the same request is already running
      fail(ErrorCode::Conflict, fmt::format("training already in progress for '{}'", request.name));
    }
    active_names_[request.name] = id;
    jobs_[id] = {id, request.name, JobState::Queued, "", ""};
  }
  // With rethrow set, a failure propagates to the caller after the job
  // record is updated.
  auto work = [this, id, request, cohort](bool rethrow) {
    {
      std::lock_guard lock(jobs_mutex_);
      jobs_[id].state = JobState::Running;
    }
    JobStatus status{id, request.name, JobState::Done, "", ""};
    std::exception_ptr failure;
    try {
      store_.put_model(train_bundle(id, request, cohort));
    } catch (const Error& e) {
      status = {id, request.name, JobState::Failed, std::string(error_code_name(e.code())), e.what()};
      failure = std::current_exception();
    } catch (const std::exception& e) {
      status = {id, request.name, JobState::Failed, "Internal", e.what()};
      failure = std::current_exception();
    }
    {
      std::lock_guard lock(jobs_mutex_);
      jobs_[id] = status;
      active_names_.erase(request.name);
    }
    if (rethrow && failure) std::rethrow_exception(failure);
  };
  if (wait) {
    work(true);
  } else {
    std::lock_guard lock(jobs_mutex_);
    workers_.emplace_back(work, false);
  }
  return id;
}

std::shared_ptr<const ModelBundle> Service::latest_model_for(const std::string& cohort) const {
  std::shared_ptr<const ModelBundle> best;
  std::string best_created;
  for (const auto& id : store_.model_ids()) {
    if (!store_.has_model(id)) continue;
    const auto b = store_.model(id);
    if (b->request.cohort != cohort) continue;
    std::string created;
    try {
      created = json::parse(io::read_text(store_.model_dir(id) / "meta.json")).value("created", "");
    } catch (const std::exception&) {
    }
    if (!best || created > best_created || (created == best_created && id > best->id)) {
      best = b;
      best_created = created;
    }
  }
  return best;
}

void Service::routes() {
  auto& s = *server_;
  const std::string api = "/api/v1";

  s.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", config_.cors_origin);
  });
  s.Options(api + R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  if (config_.static_dir) s.set_mount_point("/", config_.static_dir->string());

  s.Get(api + "/health", guarded([](const httplib::Request&, httplib::Response& res) { send_json(res, {{"status", "ok"}}); }));

  // Cohorts.
  s.Get(api + "/cohorts", guarded([this](const httplib::Request&, httplib::Response& res) {
          json out = json::array();
          for (const auto& name : store_.cohort_names()) {
            const auto c = store_.cohort(name);
            json active = json::array();
            for (auto f : c->active_features()) active.push_back(std::string(feature_name(f)));
            out.push_back({{"name", name},
                           {"records", c->size()},
                           {"losnec", c->count(Label::LosNec)},
                           {"healthy", c->count(Label::Healthy)},
                           {"active_features", active}});
          }
          send_json(res, out);
        }));
  s.Put(api + R"(/cohorts/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const std::string name = req.matches[1];
          if (!valid_name(name)) fail(ErrorCode::InvalidArgument, fmt::format("invalid cohort name '{}'", name));
          // text/csv uploads a bare cohort; JSON carries {"csv": ..., "meta": ...}
          // so a pruned cohort keeps its active set and frozen ranges.
          Cohort cohort;
          if (req.get_header_value("Content-Type").starts_with("application/json")) {
            const auto body = parse_body(req);
            if (!body.contains("csv") || !body["csv"].is_string())
              fail(ErrorCode::InvalidArgument, "cohort body needs a csv string");
            cohort = parse_cohort_csv(body["csv"].get<std::string>(), name);
            if (body.contains("meta")) cohort = apply_cohort_meta(cohort, body["meta"], name);
          } else {
            cohort = parse_cohort_csv(req.body, name);
          }
          store_.put_cohort(name, cohort);
          send_json(res, {{"name", name}, {"records", store_.cohort(name)->size()}}, 201);
        }));

  // Cases.
  s.Get(api + "/cases", guarded([this](const httplib::Request& req, httplib::Response& res) {
          std::shared_ptr<const ModelBundle> model;
          std::string cohort_name;
          if (req.has_param("model")) {
            model = store_.model(req.get_param_value("model"));
            cohort_name = model->request.cohort;
          }
          if (req.has_param("cohort")) cohort_name = req.get_param_value("cohort");
          if (cohort_name.empty()) {
            const auto names = store_.cohort_names();
            if (names.empty()) return send_json(res, json::array());
            cohort_name = names.front();
          }
          if (!model) model = latest_model_for(cohort_name);
          const auto cohort = model && model->request.cohort == cohort_name ? model->cohort
                                                                              : store_.cohort(cohort_name);
          json out = json::array();
          for (const auto& r : cohort->records()) {
            json item = {{"record_id", r.record_id},
                         {"cohort", cohort_name},
                         {"demographics", demographics_json(r.demographics)},
                         {"label", std::string(label_name(r.label))},
                         {"prediction", nullptr}};
            if (model) {
              const double score = model->model.predict_proba(r);
              item["prediction"] = {{"model_id", model->id},
                                    {"score", score},
                                    {"label", std::string(label_name(classify(score)))}};
            }
            out.push_back(std::move(item));
          }
          send_json(res, out);
        }));
  s.Get(api + R"(/cases/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const std::string id = req.matches[1];
          std::shared_ptr<const Cohort> cohort;
          if (req.has_param("model"))
            cohort = store_.model(req.get_param_value("model"))->cohort;
          else if (req.has_param("cohort"))
            cohort = store_.cohort(req.get_param_value("cohort"));
          else
            for (const auto& name : store_.cohort_names())
              if (store_.cohort(name)->find(id)) {
                cohort = store_.cohort(name);
                break;
              }
          if (!cohort) fail(ErrorCode::NotFound, fmt::format("unknown case '{}'", id));
          send_json(res, record_json(find_case(*cohort, id), *cohort));
        }));
  s.Post(api + R"(/cases/([^/]+)/verdict)", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const std::string id = req.matches[1];
           const auto body = parse_body(req);
           if (!body.contains("model_id") || !body.contains("verdict"))
             fail(ErrorCode::InvalidArgument, "verdict body needs model_id and verdict");
           const auto model = store_.model(body.at("model_id").get<std::string>());
           const auto& record = find_case(*model->cohort, id);
           VerdictEntry e;
           e.clinician_verdict = parse_clinician_verdict(body.at("verdict").get<std::string>());
           e.note = body.value("note", "");
           LatentSpaceConfig config;
           config.panel_features = top_dynamic_features(model->importance, 2);
           e.machine_verdict = contest(record, model->model, model->id, *model->cohort, config).verdict;
           e.timestamp = now_iso();
           e.record_id = id;
           e.model_id = model->id;
           store_.verdicts().append(e);
           send_json(res, verdict_json(e), 201);
         }));
  s.Get(api + "/verdicts", guarded([this](const httplib::Request&, httplib::Response& res) {
          json out = json::array();
          for (const auto& e : store_.verdicts().entries()) out.push_back(verdict_json(e));
          send_json(res, out);
        }));

  // Models.
  s.Post(api + "/models", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto body = parse_body(req);
           const auto request = TrainRequest::from_json(body);
           const bool wait = body.value("wait", false) || req.get_param_value("wait") == "true";
           const auto id = submit(request, wait);
           const bool done = store_.has_model(id);
           send_json(res, {{"id", id}, {"status", done ? "done" : "queued"}}, done ? 201 : 202);
         }));
  s.Get(api + "/models", guarded([this](const httplib::Request&, httplib::Response& res) {
          json out = json::array();
          for (const auto& id : store_.model_ids()) {
            if (!store_.has_model(id)) continue;
            const auto b = store_.model(id);
            out.push_back({{"id", id},
                           {"name", b->request.name},
                           {"cohort", b->request.cohort},
                           {"algorithm", std::string(algorithm_name(b->request.spec.algorithm))}});
          }
          send_json(res, out);
        }));
  s.Get(api + R"(/models/([^/]+)/status)", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const std::string id = req.matches[1];
          if (const auto st = job(id)) {
            json out = {{"id", id}, {"name", st->name}, {"status", std::string(job_state_name(st->state))}};
            if (st->state == JobState::Failed) out["error"] = {{"error", st->error_code}, {"message", st->message}};
            return send_json(res, out);
          }
          if (!store_.has_model(id)) fail(ErrorCode::NotFound, fmt::format("unknown model '{}'", id));
          send_json(res, {{"id", id}, {"name", store_.model(id)->request.name}, {"status", "done"}});
        }));
  s.Get(api + R"(/models/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const auto b = store_.model(req.matches[1]);
          json features = json::array();
          for (auto f : b->model.features) features.push_back(std::string(feature_name(f)));
          send_json(res, {{"id", b->id},
                          {"request", b->request.to_json()},
                          {"features", features},
                          {"chosen_hypers", hypers_json(b->model.chosen)},
                          {"cv_auc", b->model.cv_auc},
                          {"train_ids", b->train_ids},
                          {"test_ids", b->test_ids}});
        }));
  s.Get(api + R"(/models/([^/]+)/evaluation)", guarded([this](const httplib::Request& req, httplib::Response& res) {
          send_json(res, eval_json(store_.model(req.matches[1])->evaluation));
        }));
  s.Get(api + R"(/models/([^/]+)/importance)", guarded([this](const httplib::Request& req, httplib::Response& res) {
          send_json(res, importance_json(store_.model(req.matches[1])->importance));
        }));
  s.Get(api + R"(/models/([^/]+)/pdp)", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const auto b = store_.model(req.matches[1]);
          if (!req.has_param("feature")) fail(ErrorCode::InvalidArgument, "query parameter 'feature' is required");
          const Feature f = feature_param(req, "feature");
          if (req.has_param("static")) {
            const int sp = static_cast<int>(number_param(req, "static_points", kDefaultSurfacePoints));
            const int dp = static_cast<int>(number_param(req, "points", kDefaultSurfacePoints));
            return send_json(res, pdp_json(pdp_2d(b->model, feature_param(req, "static"), f, *b->cohort, sp, dp)));
          }
          const int points = static_cast<int>(number_param(req, "points", kDefaultGridPoints));
          send_json(res, pdp_json(pdp_1d(b->model, f, *b->cohort, points)));
        }));
  s.Get(api + R"(/models/([^/]+)/contest/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const auto b = store_.model(req.matches[1]);
          const auto& record = find_case(*b->cohort, req.matches[2]);
          send_json(res, contest_json(contest(record, b->model, b->id, *b->cohort, contest_config(req, *b))));
        }));

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404)
      send_error(res, 404, "NotFound", "no such route");
    else
      send_error(res, res.status, "HttpError", fmt::format("request rejected with status {}", res.status));
  });
}

}  // namespace contesta
