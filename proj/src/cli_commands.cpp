#include "coid/cli_commands.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "coid/error.hpp"
#include "coid/parallel.hpp"

namespace coid {

namespace fs = std::filesystem;

namespace {

nlohmann::json sweep_to_json(const SweepConfig& s) {
  return {{"kind", s.kind},
          {"theta_max", s.theta_max},
          {"steps", s.steps},
          {"depth_levels", s.depth_levels},
          {"gps_levels", s.gps_levels}};
}

SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  SweepConfig s;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") s.kind = value.get<std::string>();
    else if (key == "theta_max") s.theta_max = value.get<double>();
    else if (key == "steps") s.steps = value.get<int>();
    else if (key == "depth_levels") s.depth_levels = value.get<std::vector<double>>();
    else if (key == "gps_levels") s.gps_levels = value.get<std::vector<double>>();
    else throw ConfigError("sweep config: unknown key '" + key + "'");
  }
  if (s.kind != "theta" && s.kind != "depth" && s.kind != "gps")
    throw ConfigError("sweep kind must be theta, depth or gps, got '" + s.kind + "'");
  return s;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

void prepare_out(const RunConfig& cfg) {
  if (cfg.out.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec || !fs::is_directory(cfg.out)) throw DataError("cannot create output directory " + cfg.out);
  write_json(fs::path(cfg.out) / kSnapshotName, cfg.to_json());
}

// Timestamps live only here, so every other output is reproducible.
class RunLog {
 public:
  explicit RunLog(const std::string& dir) : out_(fs::path(dir) / "run.log", std::ios::app) {}
  void line(const std::string& msg) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    out_ << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << msg << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

const std::string kPointHeader = "theta,precision,recall,f1,tp,fp,fn\n";

std::string point_row(const PrPoint& p) {
  return fmt(p.theta) + "," + fmt(p.prf.precision) + "," + fmt(p.prf.recall) + "," + fmt(p.prf.f1) + "," +
         std::to_string(p.counts.tp) + "," + std::to_string(p.counts.fp) + "," + std::to_string(p.counts.fn) +
         "\n";
}

PrPoint as_point(const MetricsReport& r) { return {r.theta, r.counts, r.prf}; }

Split parse_split(const std::string& s) {
  try {
    return split_from_name(s);
  } catch (const Error&) {
    throw ConfigError("unknown split '" + s + "'");
  }
}

std::vector<PreparedInstance> load_split(const RunConfig& cfg, int workers, DatasetConfig* data_cfg = nullptr) {
  if (cfg.data.empty()) throw ConfigError("--data is required");
  Dataset ds = load_dataset(cfg.data, workers);
  if (data_cfg) *data_cfg = ds.config;
  return prepare_all(ds.split(parse_split(cfg.split)), workers);
}

ParamStore load_params(const RunConfig& cfg, const CoidModel& model) {
  if (cfg.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  ParamStore params = load_checkpoint(cfg.checkpoint).params;
  model.check_compatible(params);
  return params;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  return {{"command", command},
          {"seed", seed},
          {"out", out},
          {"data", data},
          {"checkpoint", checkpoint},
          {"resume", resume},
          {"split", split},
          {"dataset", coid::to_json(dataset)},
          {"model", coid::to_json(model)},
          {"train", coid::to_json(train)},
          {"sweep", sweep_to_json(sweep)},
          {"baseline", coid::to_json(baseline)},
          {"tune_baselines", tune_baselines}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "command") cfg.command = value.get<std::string>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "out") cfg.out = value.get<std::string>();
      else if (key == "data") cfg.data = value.get<std::string>();
      else if (key == "checkpoint") cfg.checkpoint = value.get<std::string>();
      else if (key == "resume") cfg.resume = value.get<std::string>();
      else if (key == "split") cfg.split = value.get<std::string>();
      else if (key == "dataset") cfg.dataset = dataset_config_from_json(value);
      else if (key == "model") cfg.model = model_config_from_json(value);
      else if (key == "train") cfg.train = train_config_from_json(value);
      else if (key == "sweep") cfg.sweep = sweep_config_from_json(value);
      else if (key == "baseline") cfg.baseline = baseline_config_from_json(value);
      else if (key == "tune_baselines") cfg.tune_baselines = value.get<bool>();
      else throw ConfigError("run config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return cfg;
}

void scale_split_sizes(DatasetConfig& cfg, int total) {
  if (total < 0) throw ConfigError("n_instances must be >= 0");
  const long configured = static_cast<long>(cfg.n_train) + cfg.n_val + cfg.n_test;
  if (configured <= 0) {
    cfg.n_train = total;
    return;
  }
  cfg.n_val = static_cast<int>(static_cast<long>(total) * cfg.n_val / configured);
  cfg.n_test = static_cast<int>(static_cast<long>(total) * cfg.n_test / configured);
  cfg.n_train = total - cfg.n_val - cfg.n_test;
}

void cmd_generate(const RunConfig& cfg, int workers) {
  cfg.dataset.validate();
  prepare_out(cfg);
  RunLog log(cfg.out);
  log.line("generate start");
  const Dataset ds = generate_dataset(cfg.dataset, workers);
  write_dataset(ds, cfg.out);
  log.line("generate done, " + std::to_string(ds.size()) + " instances");
}

void cmd_train(const RunConfig& cfg, int workers) {
  prepare_out(cfg);
  RunLog log(cfg.out);
  log.line("train start");
  if (cfg.data.empty()) throw ConfigError("--data is required");
  const Dataset ds = load_dataset(cfg.data, workers);
  const auto train = prepare_all(ds.train, workers);
  const auto val = prepare_all(ds.val, workers);

  const CoidModel model(cfg.model);
  const Trainer trainer(model, cfg.train, cfg.seed);
  TrainState state = trainer.init();
  if (!cfg.resume.empty()) {
    const Checkpoint last = load_checkpoint(cfg.resume);
    model.check_compatible(last.params);
    state.params = last.params;
    state.restore_bookkeeping(last.extra);
    const fs::path best_path = fs::path(cfg.resume).parent_path() / kBestCheckpointName;
    state.best = fs::exists(best_path) ? load_checkpoint(best_path).params : state.params.clone();
    log.line("resumed at epoch " + std::to_string(state.epochs_done) + ", step " +
             std::to_string(state.params.step()));
  }

  const nlohmann::json ckpt_config{{"seed", cfg.seed}, {"model", to_json(cfg.model)}, {"train", to_json(cfg.train)}};
  const fs::path out(cfg.out);
  auto write_outputs = [&](const TrainState& s) {
    std::string csv = "epoch,step,train_loss,val_loss\n";
    for (const auto& e : s.log)
      csv += std::to_string(e.epoch) + "," + std::to_string(e.step) + "," + fmt(e.train_loss) + "," +
             fmt(e.val_loss) + "\n";
    write_text(out / "loss.csv", csv);
    save_checkpoint(out / kLastCheckpointName, {s.params, ckpt_config, s.bookkeeping()});
    save_checkpoint(out / kBestCheckpointName, {s.best, ckpt_config, s.bookkeeping()});
  };
  trainer.run(state, train, val, [&](const EpochLog& e, const TrainState& s) {
    write_outputs(s);
    log.line("epoch " + std::to_string(e.epoch) + " train " + fmt(e.train_loss) + " val " + fmt(e.val_loss));
  });
  write_outputs(state);
  log.line("train done");
}

void cmd_eval(const RunConfig& cfg, int workers) {
  prepare_out(cfg);
  RunLog log(cfg.out);
  log.line("eval start");
  const CoidModel model(cfg.model);
  const ParamStore params = load_params(cfg, model);
  const auto instances = load_split(cfg, workers);
  const MetricsReport report =
      pr_curve(model, params, instances, {cfg.seed, workers}, cfg.sweep.theta_max, cfg.sweep.steps);
  const fs::path out(cfg.out);
  write_json(out / "metrics.json", to_json(report));
  write_text(out / "metrics.csv", kPointHeader + point_row(as_point(report)));
  std::string curve = kPointHeader;
  for (const auto& p : report.pr_curve) curve += point_row(p);
  write_text(out / "pr_curve.csv", curve);
  log.line("eval done, " + std::to_string(report.instances) + " instances, f1 " + fmt(report.prf.f1));
}

void cmd_sweep(const RunConfig& cfg, int workers) {
  prepare_out(cfg);
  RunLog log(cfg.out);
  log.line("sweep " + cfg.sweep.kind + " start");
  const CoidModel model(cfg.model);
  const ParamStore params = load_params(cfg, model);
  DatasetConfig data_cfg;
  const auto instances = load_split(cfg, workers, &data_cfg);
  const EvalOptions opts{cfg.seed, workers};
  const fs::path out(cfg.out);
  nlohmann::json summary{{"kind", cfg.sweep.kind}};
  if (cfg.sweep.kind == "theta") {
    const MetricsReport r = pr_curve(model, params, instances, opts, cfg.sweep.theta_max, cfg.sweep.steps);
    std::string csv = kPointHeader;
    const PrPoint* best = nullptr;
    for (const auto& p : r.pr_curve) {
      csv += point_row(p);
      if (!best || p.prf.f1 > best->prf.f1) best = &p;
    }
    write_text(out / "sweep_theta.csv", csv);
    summary["auc"] = r.auc;
    summary["best"] = to_json(*best);
    summary["at_config_theta"] = to_json(as_point(r));
  } else {
    const bool depth = cfg.sweep.kind == "depth";
    const auto& levels = depth ? cfg.sweep.depth_levels : cfg.sweep.gps_levels;
    const auto rows =
        sweep_noise(depth ? NoiseKind::kDepth : NoiseKind::kGps, levels, data_cfg, parse_split(cfg.split), model, params, opts);
    std::string csv = "level," + kPointHeader;
    nlohmann::json levels_json = nlohmann::json::array();
    for (const auto& row : rows) {
      csv += fmt(row.level) + "," + point_row(as_point(row.report));
      levels_json.push_back({{"level", row.level}, {"metrics", to_json(row.report)}});
    }
    write_text(out / ("sweep_" + cfg.sweep.kind + ".csv"), csv);
    summary["levels"] = levels_json;
  }
  write_json(out / "summary.json", summary);
  log.line("sweep done");
}

void cmd_baseline(const RunConfig& cfg, int workers) {
  prepare_out(cfg);
  RunLog log(cfg.out);
  log.line("baseline start");
  if (cfg.data.empty()) throw ConfigError("--data is required");
  const Dataset ds = load_dataset(cfg.data, workers);
  const auto instances = prepare_all(ds.split(parse_split(cfg.split)), workers);
  BaselineConfig b = cfg.baseline;
  if (cfg.tune_baselines && !ds.val.empty()) b = tune_baselines(prepare_all(ds.val, workers));
  const MetricsReport app = appearance_baseline(instances, b.appearance_theta);
  const MetricsReport gps = gps_baseline(instances, b.gps_gate);
  const fs::path out(cfg.out);
  write_text(out / "baselines.csv", "baseline,parameter,precision,recall,f1,tp,fp,fn\n" +
                                        ("appearance," + point_row(as_point(app))) +
                                        ("gps," + point_row(as_point(gps))));
  write_json(out / "baselines.json",
             {{"config", to_json(b)}, {"appearance", to_json(app)}, {"gps", to_json(gps)}});
  log.line("baseline done");
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Correspondence identification between two agents' scene graphs"};
  app.require_subcommand(1);
  std::string config_path, out_dir, data, checkpoint, resume, split, sweep_kind, levels;
  std::uint64_t seed = 0;
  int workers = default_workers(), n_instances = -1, epochs = -1, batch = -1;
  double theta = std::nan(""), lr = -1.0;
  bool no_gps = false, no_tune = false;

  auto add_global = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config (a previous config.json reruns that run)");
    sub->add_option("--seed", seed, "Global seed");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--workers", workers, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  };
  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  add_global(gen);
  gen->add_option("--n-instances", n_instances, "Total instance count, split in the configured proportions");

  auto* train = app.add_subcommand("train", "Train the matcher");
  add_global(train);
  train->add_option("--data", data, "Dataset directory");
  train->add_option("--epochs", epochs);
  train->add_option("--lr", lr);
  train->add_option("--batch-size", batch);
  train->add_flag("--no-gps", no_gps, "Disable the position-consistency term");
  train->add_option("--resume", resume, "Continue from a last.json checkpoint");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  auto* sweep = app.add_subcommand("sweep", "Threshold or noise sweeps");
  for (auto* sub : {eval, sweep}) {
    add_global(sub);
    sub->add_option("--data", data, "Dataset directory");
    sub->add_option("--checkpoint", checkpoint, "Checkpoint file");
    sub->add_option("--theta", theta, "Non-covisibility threshold");
    sub->add_flag("--no-gps", no_gps, "Disable the position-consistency term");
    sub->add_option("--split", split, "train, val or test");
  }
  sweep->add_option("--sweep", sweep_kind, "theta, depth or gps")->check(CLI::IsMember({"theta", "depth", "gps"}));
  sweep->add_option("--levels", levels, "Comma-separated noise levels");

  auto* base = app.add_subcommand("baseline", "Appearance-only and GPS nearest-neighbour baselines");
  add_global(base);
  base->add_option("--data", data, "Dataset directory");
  base->add_option("--split", split, "train, val or test");
  base->add_flag("--no-tune", no_tune, "Use the configured baseline parameters instead of tuning on val");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }
  const CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  try {
    nlohmann::json raw = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config " + config_path);
      try {
        raw = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + config_path + " is not valid JSON: " + e.what());
      }
      if (!raw.is_object()) throw ConfigError("config must be a JSON object");
    }
    raw["command"] = command;
    if (sub->count("--seed")) raw["seed"] = seed;
    if (sub->count("--out")) raw["out"] = out_dir;
    if (!data.empty()) raw["data"] = data;
    if (!checkpoint.empty()) raw["checkpoint"] = checkpoint;
    if (!resume.empty()) raw["resume"] = resume;
    if (!split.empty()) raw["split"] = split;

    // The model starts from the checkpoint's own configuration when there is one.
    const std::string base_ckpt = command == "train" ? raw.value("resume", "") : raw.value("checkpoint", "");
    nlohmann::json model = to_json(ModelConfig{});
    if ((command == "train" || command == "eval" || command == "sweep") && !base_ckpt.empty()) {
      const Checkpoint ckpt = load_checkpoint(base_ckpt);
      if (ckpt.config.contains("model")) model = ckpt.config.at("model");
    }
    if (raw.contains("model")) model.merge_patch(raw.at("model"));
    if (no_gps) model["matcher"]["use_gps"] = false;
    if (!std::isnan(theta)) model["matcher"]["theta"] = theta;
    raw["model"] = model;

    RunConfig cfg = run_config_from_json(raw);
    cfg.dataset.seed = cfg.seed;
    if (n_instances >= 0) scale_split_sizes(cfg.dataset, n_instances);
    if (epochs >= 0) cfg.train.epochs = epochs;
    if (lr >= 0.0) cfg.train.lr = lr;
    if (batch >= 0) cfg.train.batch_size = batch;
    cfg.train.validate();
    if (!sweep_kind.empty()) cfg.sweep.kind = sweep_kind;
    if (!levels.empty()) {
      std::vector<double> parsed;
      std::stringstream ss(levels);
      for (std::string tok; std::getline(ss, tok, ',');) {
        try {
          parsed.push_back(std::stod(tok));
        } catch (const std::exception&) {
          throw ConfigError("bad noise level '" + tok + "'");
        }
      }
      (cfg.sweep.kind == "depth" ? cfg.sweep.depth_levels : cfg.sweep.gps_levels) = parsed;
    }
    if (no_tune) cfg.tune_baselines = false;

    if (command == "generate") cmd_generate(cfg, workers);
    else if (command == "train") cmd_train(cfg, workers);
    else if (command == "eval") cmd_eval(cfg, workers);
    else if (command == "sweep") cmd_sweep(cfg, workers);
    else cmd_baseline(cfg, workers);
    out << command << " ok\n";
    return static_cast<int>(ExitCode::kOk);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kData);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kData);
  }
}

}  // namespace coid
