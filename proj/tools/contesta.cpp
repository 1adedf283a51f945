// Batch driver: synthetic data, feature extraction, pruning, training,
// evaluation, explanations and the HTTP service.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <unistd.h>

#include "contesta/cohort.hpp"
#include "contesta/error.hpp"
#include "contesta/global_explain.hpp"
#include "contesta/io.hpp"
#include "contesta/local_explain.hpp"
#include "contesta/models.hpp"
#include "contesta/plots.hpp"
#include "contesta/service.hpp"
#include "contesta/signals.hpp"
#include "contesta/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace contesta;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

// Output files are rendered in memory and written only once every artifact
// of a command exists, each through a temp file and rename.
class Outputs {
 public:
  void add(fs::path path, std::string content) { files_.emplace_back(std::move(path), std::move(content)); }
  void add_json(fs::path path, const json& j) { add(std::move(path), j.dump(2) + "\n"); }
  void add_cohort(const fs::path& csv, const Cohort& cohort) {
    add(csv, cohort_csv(cohort));
    add_json(cohort_meta_path(csv), cohort_meta_json(cohort));
  }
  void commit() const {
    for (const auto& [path, content] : files_) io::atomic_write_text(path, content);
  }

 private:
  std::vector<std::pair<fs::path, std::string>> files_;
};

json read_json(const fs::path& path) {
  const auto text = io::read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, fmt::format("{}: {}", path.string(), e.what()));
  }
}

TrainedModel read_model(const fs::path& path) {
  try {
    return model_from_json(read_json(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, fmt::format("{}: {}", path.string(), e.what()));
  }
}

Feature parse_feature(const std::string& name) {
  const auto f = feature_from_name(name);
  if (!f) fail(ErrorCode::UnknownFeature, fmt::format("unknown feature '{}'", name));
  return *f;
}

fs::path dir_of(const fs::path& file) { return file.has_parent_path() ? file.parent_path() : fs::path("."); }

// Everything the user could have set, defaults resolved, as a TOML file that
// --config accepts.
std::string effective_config(const CLI::App& root, const CLI::App& sub) {
  std::string out = fmt::format("# contesta {}\n", sub.get_name());
  for (const auto* opt : root.get_options()) {
    if (opt->get_single_name() == "help" || opt->get_single_name() == "config") continue;
    const auto value = opt->as<std::string>();
    out += fmt::format("{} = {}\n", opt->get_single_name(), value.empty() ? "\"\"" : value);
  }
  out += fmt::format("\n[{}]\n", sub.get_name());
  for (const auto* opt : sub.get_options()) {
    if (opt->get_single_name() == "help") continue;
    std::vector<std::string> values;
    for (const auto& r : opt->results()) values.push_back(r);
    if (values.empty()) {
      const auto d = opt->get_default_str();
      if (d.empty()) continue;
      values.push_back(d);
    }
    const auto quote = [](const std::string& v) {
      std::string q = "\"";
      for (char c : v) q += (c == '"' || c == '\\') ? std::string("\\") + c : std::string(1, c);
      return q + "\"";
    };
    if (opt->get_expected_max() > 1) {
      std::string list;
      for (std::size_t i = 0; i < values.size(); ++i) list += (i ? ", " : "") + quote(values[i]);
      out += fmt::format("{} = [{}]\n", opt->get_single_name(), list);
    } else {
      out += fmt::format("{} = {}\n", opt->get_single_name(), quote(values.back()));
    }
  }
  return out;
}

// --- commands ---------------------------------------------------------------------

struct Common {
  std::uint64_t seed = 0;
};

struct SynthArgs {
  fs::path out;
  int n_per_class = SynthConfig{}.n_per_class;
  double contrast = SynthConfig{}.contrast;
};

void run_synth(const Common& common, const SynthArgs& a, const std::string& echo) {
  SynthConfig config;
  config.seed = common.seed;
  config.n_per_class = a.n_per_class;
  config.contrast = a.contrast;
  const auto output = generate_cohort(config);

  // Stage the whole tree next to the target, then move it into place.
  const auto target = fs::absolute(a.out).lexically_normal();
  const auto stage = fs::path(target.string() + fmt::format(".tmp-{}", ::getpid()));
  fs::remove_all(stage);
  try {
    write_synth_output(stage, output);
    io::atomic_write_text(stage / "synth_config.json", synth_config_json(config).dump(2) + "\n");
    io::atomic_write_text(stage / "synth.config.toml", echo);
    fs::create_directories(target);
    for (const auto& entry : fs::directory_iterator(stage)) {
      const auto dest = target / entry.path().filename();
      fs::remove_all(dest);
      fs::rename(entry.path(), dest);
    }
    fs::remove_all(stage);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(stage, ec);
    throw;
  }
  fmt::print("wrote {} epochs for {} infants to {}\n", output.epochs.size(), output.demographics.size(),
             a.out.string());
}

struct ExtractArgs {
  fs::path manifest;
  fs::path demographics;
  fs::path out;
  int max_lag = kDefaultMaxLagSeconds;
};

void run_extract(const ExtractArgs& a, const std::string& echo) {
  const auto demo_path = a.demographics.empty() ? dir_of(a.manifest) / "demographics.csv" : a.demographics;
  const auto episodes = extract_daily_episodes(a.manifest, a.max_lag);
  const auto cohort = assemble_cohort(episodes, read_demographics(demo_path));
  Outputs out;
  out.add_cohort(a.out, cohort);
  out.add(dir_of(a.out) / "extract.config.toml", echo);
  out.commit();
  fmt::print("extracted {} daily records to {}\n", cohort.size(), a.out.string());
}

struct PruneArgs {
  fs::path cohort;
  fs::path out;
  double threshold = kDefaultVifThreshold;
};

void run_prune(const PruneArgs& a, const std::string& echo) {
  const auto result = prune_multicollinearity(read_cohort(a.cohort), a.threshold);
  const auto out_path = a.out.empty() ? dir_of(a.cohort) / (a.cohort.stem().string() + "_pruned.csv") : a.out;
  Outputs out;
  out.add_cohort(out_path, result.cohort);
  out.add_json(dir_of(out_path) / (out_path.stem().string() + ".prune_log.json"),
               prune_log_json(result, a.threshold));
  out.add(dir_of(out_path) / "prune.config.toml", echo);
  out.commit();
  std::string removed;
  for (const auto& step : result.log)
    if (step.removed) removed += fmt::format(" {}", feature_name(*step.removed));
  fmt::print("removed:{}\n", removed.empty() ? " none" : removed);
}

struct SplitArgs {
  fs::path cohort;
  fs::path out_dir;
  double train_frac = 0.7;
};

void run_split(const Common& common, const SplitArgs& a, const std::string& echo) {
  const auto split = stratified_split(read_cohort(a.cohort), a.train_frac, common.seed);
  Outputs out;
  out.add_cohort(a.out_dir / "train.csv", split.train);
  out.add_cohort(a.out_dir / "test.csv", split.test);
  out.add(a.out_dir / "split.config.toml", echo);
  out.commit();
  fmt::print("train {} / test {}\n", split.train.size(), split.test.size());
}

struct TrainArgs {
  fs::path cohort;
  fs::path out;
  std::string algo = "rf";
  int search_draws = ClassifierSpec{}.search_draws;
  int cv_repeats = ClassifierSpec{}.cv_repeats;
  int cv_folds = ClassifierSpec{}.cv_folds;
};

void run_train(const Common& common, const TrainArgs& a, const std::string& echo) {
  ClassifierSpec spec;
  spec.algorithm = parse_algorithm(a.algo);
  spec.seed = common.seed;
  spec.search_draws = a.search_draws;
  spec.cv_repeats = a.cv_repeats;
  spec.cv_folds = a.cv_folds;
  spec.validate();
  const auto model = fit(spec, read_cohort(a.cohort));
  Outputs out;
  out.add(a.out, model_json(model).dump() + "\n");
  out.add(dir_of(a.out) / "train.config.toml", echo);
  out.commit();
  fmt::print("{} trained, cv auc {:.4f}\n", algorithm_name(spec.algorithm), model.cv_auc);
}

struct EvaluateArgs {
  fs::path model;
  fs::path cohort;
  fs::path out;
  double threshold = kDecisionThreshold;
};

void run_evaluate(const EvaluateArgs& a, const std::string& echo) {
  const auto report = evaluate(read_model(a.model), read_cohort(a.cohort), a.threshold);
  const auto j = eval_json(report);
  Outputs out;
  out.add_json(a.out, j);
  out.add(dir_of(a.out) / "evaluate.config.toml", echo);
  out.commit();
  fmt::print("{}\n", j.dump());
}

struct GlobalArgs {
  fs::path model;
  fs::path cohort;
  fs::path out_dir;
  int permutations = kDefaultPermutations;
  int grid_points = kDefaultGridPoints;
  int surface_points = kDefaultSurfacePoints;
  std::vector<std::string> features;  // empty: every dynamic model feature
  std::vector<std::string> statics{"w"};
};

void run_explain_global(const Common& common, const GlobalArgs& a, const std::string& echo) {
  const auto model = read_model(a.model);
  const auto cohort = read_cohort(a.cohort);
  const auto importance = permutation_importance(model, cohort, a.permutations, common.seed);

  std::vector<Feature> dynamic;
  if (a.features.empty()) {
    for (auto f : model.features)
      if (is_dynamic(f)) dynamic.push_back(f);
  } else {
    for (const auto& name : a.features) dynamic.push_back(parse_feature(name));
  }

  Outputs out;
  out.add_json(a.out_dir / "importance.json", importance_json(importance));
  out.add(a.out_dir / "importance.svg", plots::importance_svg(importance));
  for (auto f : dynamic) {
    const auto curve = pdp_1d(model, f, cohort, a.grid_points);
    const auto stem = fmt::format("pdp_{}", feature_name(f));
    out.add_json(a.out_dir / (stem + ".json"), pdp_json(curve));
    out.add(a.out_dir / (stem + ".svg"), plots::pdp_svg(curve));
  }
  // Surfaces pair each requested static feature with the two most important
  // dynamic features.
  const auto top = top_dynamic_features(importance, 2);
  for (const auto& name : a.statics) {
    const Feature s = parse_feature(name);
    if (std::find(model.features.begin(), model.features.end(), s) == model.features.end()) {
      fmt::print(stderr, "skipping surface for {}: not a model feature\n", name);
      continue;
    }
    for (auto f : top) {
      const auto surface = pdp_2d(model, s, f, cohort, a.surface_points, a.surface_points);
      const auto stem = fmt::format("pdp2d_{}_{}", feature_name(s), feature_name(f));
      out.add_json(a.out_dir / (stem + ".json"), pdp_json(surface));
      out.add(a.out_dir / (stem + ".svg"), plots::pdp_surface_svg(surface));
    }
  }
  out.add(a.out_dir / "explain-global.config.toml", echo);
  out.commit();
  std::string ranking;
  for (auto f : importance.ranking()) ranking += fmt::format(" {}", feature_name(f));
  fmt::print("ranking:{}\n", ranking);
}

struct LocalArgs {
  fs::path model;
  fs::path cohort;
  fs::path importance;
  fs::path out_dir;
  std::string case_id;
  int k = LatentSpaceConfig{}.k;
  double w_ga = LatentSpaceConfig{}.weight_ga;
  double w_w = LatentSpaceConfig{}.weight_w;
  double w_pna = LatentSpaceConfig{}.weight_pna;
  double w_gen = LatentSpaceConfig{}.weight_gen;
  double cutoff = LatentSpaceConfig{}.overlap_cutoff;
  std::vector<std::string> features;
};

void run_explain_local(const LocalArgs& a, const std::string& echo) {
  const auto model = read_model(a.model);
  const auto cohort = read_cohort(a.cohort);
  const auto* query = cohort.find(a.case_id);
  if (!query) fail(ErrorCode::NotFound, fmt::format("case '{}' is not in {}", a.case_id, a.cohort.string()));

  LatentSpaceConfig config;
  config.k = a.k;
  config.weight_ga = a.w_ga;
  config.weight_w = a.w_w;
  config.weight_pna = a.w_pna;
  config.weight_gen = a.w_gen;
  config.overlap_cutoff = a.cutoff;
  if (!a.features.empty()) {
    config.panel_features.clear();
    for (const auto& name : a.features) config.panel_features.push_back(parse_feature(name));
  } else if (!a.importance.empty()) {
    config.panel_features = top_dynamic_features(importance_from_json(read_json(a.importance)), 2);
  }
  const auto report = contest(*query, model, a.model.stem().string(), cohort, config);

  Outputs out;
  out.add_json(a.out_dir / fmt::format("contest_{}.json", a.case_id), contest_json(report));
  out.add(a.out_dir / fmt::format("contest_{}.svg", a.case_id), plots::contest_svg(report));
  out.add(a.out_dir / "explain-local.config.toml", echo);
  out.commit();
  fmt::print("{}: predicted {}, verdict {}\n", a.case_id, label_name(report.prediction), verdict_name(report.verdict));
}

struct ServeArgs {
  fs::path data_dir = "data";
  fs::path static_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
};

Service* g_service = nullptr;

void run_serve(const ServeArgs& a) {
  ServiceConfig config;
  config.data_dir = a.data_dir;
  config.host = a.host;
  config.port = a.port;
  config.cors_origin = a.cors_origin;
  if (!a.static_dir.empty()) config.static_dir = a.static_dir;
  Service service(config);
  g_service = &service;
  std::signal(SIGINT, [](int) { if (g_service) g_service->stop(); });
  std::signal(SIGTERM, [](int) { if (g_service) g_service->stop(); });
  const int port = service.start();
  fmt::print("serving http://{}:{}/api/v1 (data {})\n", a.host, port, a.data_dir.string());
  std::fflush(stdout);
  pause();
  service.stop();
  service.wait_for_jobs();
  g_service = nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contestable explanations for preterm-infant morbidity models"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML configuration; command-line flags take precedence");
  Common common;
  app.add_option("--seed", common.seed, "seed threaded through every stochastic stage")->capture_default_str();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic cohort (epochs, manifest, demographics, truth)");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--n-per-class", synth.n_per_class, "infants per class")->capture_default_str();
  synth_cmd->add_option("--contrast", synth.contrast, "class contrast (0 = indistinguishable)")->capture_default_str();

  ExtractArgs extract;
  auto* extract_cmd = app.add_subcommand("extract", "epochs to daily episode records");
  extract_cmd->add_option("--manifest", extract.manifest, "manifest CSV")->required()->check(CLI::ExistingFile);
  extract_cmd->add_option("--demographics", extract.demographics, "demographics CSV (default: next to the manifest)");
  extract_cmd->add_option("--out", extract.out, "cohort CSV")->required();
  extract_cmd->add_option("--max-lag", extract.max_lag, "cross-correlation lag bound in seconds")->capture_default_str();

  PruneArgs prune;
  auto* prune_cmd = app.add_subcommand("prune", "iterative VIF pruning");
  prune_cmd->add_option("--cohort", prune.cohort, "cohort CSV")->required()->check(CLI::ExistingFile);
  prune_cmd->add_option("--vif-threshold", prune.threshold, "VIF threshold")->capture_default_str();
  prune_cmd->add_option("--out", prune.out, "pruned cohort CSV (default: <cohort>_pruned.csv)");

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "stratified train/test split");
  split_cmd->add_option("--cohort", split.cohort, "cohort CSV")->required()->check(CLI::ExistingFile);
  split_cmd->add_option("--train-frac", split.train_frac, "training fraction")->capture_default_str();
  split_cmd->add_option("--out-dir", split.out_dir, "directory for train.csv and test.csv")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "random search with repeated stratified CV, then refit");
  train_cmd->add_option("--cohort", train.cohort, "training cohort CSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--algo", train.algo, "rf or svm")->check(CLI::IsMember({"rf", "svm"}))->capture_default_str();
  train_cmd->add_option("--search-draws", train.search_draws, "random-search candidates")->capture_default_str();
  train_cmd->add_option("--cv-repeats", train.cv_repeats, "CV repeats")->capture_default_str();
  train_cmd->add_option("--cv-folds", train.cv_folds, "CV folds")->capture_default_str();
  train_cmd->add_option("--out", train.out, "model JSON")->required();

  EvaluateArgs evaluate_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "held-out metrics");
  eval_cmd->add_option("--model", evaluate_args.model, "model JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--cohort", evaluate_args.cohort, "test cohort CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--threshold", evaluate_args.threshold, "decision threshold")->capture_default_str();
  eval_cmd->add_option("--out", evaluate_args.out, "evaluation JSON")->required();

  GlobalArgs global;
  auto* global_cmd = app.add_subcommand("explain-global", "permutation importance and partial dependence");
  global_cmd->add_option("--model", global.model, "model JSON")->required()->check(CLI::ExistingFile);
  global_cmd->add_option("--cohort", global.cohort, "cohort CSV")->required()->check(CLI::ExistingFile);
  global_cmd->add_option("--out-dir", global.out_dir, "output directory")->required();
  global_cmd->add_option("--permutations", global.permutations, "permutations per feature")->capture_default_str();
  global_cmd->add_option("--grid-points", global.grid_points, "1D grid size")->capture_default_str();
  global_cmd->add_option("--surface-points", global.surface_points, "2D grid size per axis")->capture_default_str();
  global_cmd->add_option("--features", global.features, "dynamic features for 1D plots (default: all)")->delimiter(',');
  global_cmd->add_option("--static", global.statics, "static features for 2D surfaces")->delimiter(',')->capture_default_str();

  LocalArgs local;
  auto* local_cmd = app.add_subcommand("explain-local", "latent-space neighbors and a contest verdict for one case");
  local_cmd->add_option("--model", local.model, "model JSON")->required()->check(CLI::ExistingFile);
  local_cmd->add_option("--cohort", local.cohort, "reference cohort CSV containing the case")->required()->check(CLI::ExistingFile);
  local_cmd->add_option("--case", local.case_id, "record id")->required();
  local_cmd->add_option("--k", local.k, "neighbors")->capture_default_str();
  local_cmd->add_option("--w-ga", local.w_ga, "latent weight of ga")->capture_default_str();
  local_cmd->add_option("--w-w", local.w_w, "latent weight of w")->capture_default_str();
  local_cmd->add_option("--w-pna", local.w_pna, "latent weight of pna")->capture_default_str();
  local_cmd->add_option("--w-gen", local.w_gen, "latent weight of gen")->capture_default_str();
  local_cmd->add_option("--cutoff", local.cutoff, "max misclassified share for a conclusive boundary")->capture_default_str();
  local_cmd->add_option("--features", local.features, "panel features (default: top 2 dynamic by importance, else xc_hr_spo2,sa_hr)")->delimiter(',');
  local_cmd->add_option("--importance", local.importance, "importance JSON used to pick panel features")->check(CLI::ExistingFile);
  local_cmd->add_option("--out-dir", local.out_dir, "output directory")->required();

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "start the REST service");
  serve_cmd->add_option("--port", serve.port, "port (0 picks a free one)")->envname("CONTESTA_PORT")->capture_default_str();
  serve_cmd->add_option("--data-dir", serve.data_dir, "data directory")->envname("CONTESTA_DATA_DIR")->capture_default_str();
  serve_cmd->add_option("--host", serve.host, "bind address")->capture_default_str();
  serve_cmd->add_option("--static-dir", serve.static_dir, "built UI assets to serve at /");
  serve_cmd->add_option("--cors-origin", serve.cors_origin, "Access-Control-Allow-Origin value")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const auto echo = effective_config(app, *sub);
    if (sub == synth_cmd) run_synth(common, synth, echo);
    else if (sub == extract_cmd) run_extract(extract, echo);
    else if (sub == prune_cmd) run_prune(prune, echo);
    else if (sub == split_cmd) run_split(common, split, echo);
    else if (sub == train_cmd) run_train(common, train, echo);
    else if (sub == eval_cmd) run_evaluate(evaluate_args, echo);
    else if (sub == global_cmd) run_explain_global(common, global, echo);
    else if (sub == local_cmd) run_explain_local(local, echo);
    else if (sub == serve_cmd) run_serve(serve);
  } catch (const Error& e) {
    fmt::print(stderr, "error [{}]: {}\n", error_code_name(e.code()), e.what());
    return is_validation_error(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
