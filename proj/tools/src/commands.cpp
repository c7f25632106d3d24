#include "spectgnn_cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>

#include "spectgnn/errors.hpp"
#include "spectgnn/rng.hpp"
#include "spectgnn/scene_io.hpp"

namespace spectgnn::cli {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

void require_path(const fs::path& p, const char* flag, const char* command) {
  if (p.empty()) throw ConfigError(std::string(command) + " needs --" + flag);
}

fs::path prepare_out(const RunConfig& cfg, const char* command) {
  require_path(cfg.out, "out", command);
  fs::create_directories(cfg.out);
  write_text(cfg.out / "resolved_config.txt", cfg.resolved_text());
  return cfg.out;
}

// Wall-clock metadata is kept out of every other artifact so reruns compare
// byte for byte.
class RunInfo {
 public:
  RunInfo(std::string command, fs::path dir)
      : command_(std::move(command)), dir_(std::move(dir)), started_(utc_now()),
        t0_(std::chrono::steady_clock::now()) {}

  void finish() const {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["started_utc"] = started_;
    j["finished_utc"] = utc_now();
    j["duration_s"] = secs;
    write_text(dir_ / ("run_info." + command_ + ".json"), j.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path dir_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
};

std::vector<SceneWindow> load_scenes(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<SceneWindow> scenes = load_dataset(path);
    if (scenes.empty()) throw DataError("dataset " + path.string() + " contains no .scene files");
    return scenes;
  }
  if (fs::is_regular_file(path)) return {parse_scene(path)};
  throw DataError("dataset path " + path.string() + " does not exist");
}

std::vector<SceneWindow> select_part(std::vector<SceneWindow> scenes, const RunConfig& cfg,
                                     SplitPart part) {
  if (part == SplitPart::all) return scenes;
  const Split split = split_dataset(scenes.size(), cfg.split, cfg.seed);
  std::vector<std::size_t> idx = part == SplitPart::train ? split.train
                                 : part == SplitPart::val ? split.val
                                                          : split.test;
  std::sort(idx.begin(), idx.end());
  std::vector<SceneWindow> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(std::move(scenes[i]));
  if (out.empty()) {
    throw DataError("the " + to_string(part) + " split of " + std::to_string(scenes.size()) +
                    " scenes is empty");
  }
  return out;
}

std::vector<PreparedScene> prepare_all(const std::vector<SceneWindow>& scenes, const ModelConfig& model,
                                       bool need_future) {
  std::vector<PreparedScene> out;
  out.reserve(scenes.size());
  for (const SceneWindow& s : scenes) {
    if (need_future && !s.has_future()) {
      throw DataError("scene '" + s.scene_id + "' has no future positions to score against");
    }
    if (s.t_fut != 0 && s.t_fut != model.t_fut) {
      throw DataError("scene '" + s.scene_id + "' has " + std::to_string(s.t_fut) +
                      " future steps; the model predicts " + std::to_string(model.t_fut));
    }
    out.push_back(prepare_scene(s, model));
  }
  return out;
}

void log_model(const ModelConfig& m, std::ostream& log, const char* origin) {
  log << "[spectgnn] model config (" << origin << "):\n";
  for (const auto& [k, v] : m.entries()) log << "  " << k << " = " << v << "\n";
}

SpecTGNN load_model(const RunConfig& cfg, const char* command, std::ostream& log) {
  require_path(cfg.checkpoint, "checkpoint", command);
  SpecTGNN model = load_checkpoint(cfg.checkpoint);
  log_model(model.config(), log, "from checkpoint");
  return model;
}

void log_metrics(const MetricsReport& r, std::ostream& log) {
  char buf[96];
  log << "[spectgnn]      K     minADE     minFDE\n";
  for (std::size_t i = 0; i < r.k_list.size(); ++i) {
    std::snprintf(buf, sizeof buf, "[spectgnn] %6zu %10.4f %10.4f\n", r.k_list[i], r.min_ade[i], r.min_fde[i]);
    log << buf;
  }
}

nlohmann::ordered_json nested(std::span<const double> data, std::size_t steps, std::size_t agents,
                              std::size_t width) {
  // [agent][step][width] for readability per agent.
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (std::size_t n = 0; n < agents; ++n) {
    nlohmann::ordered_json track = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t o = (t * agents + n) * width;
      if (width == 1) {
        track.push_back(data[o]);
      } else {
        track.push_back(std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(o),
                                            data.begin() + static_cast<std::ptrdiff_t>(o + width)));
      }
    }
    out.push_back(std::move(track));
  }
  return out;
}

}  // namespace

int cmd_synth(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = prepare_out(cfg, "synth");
  RunInfo info("synth", out);
  DatasetSpec spec = cfg.data;
  spec.seed = cfg.seed;
  const std::vector<SceneWindow> scenes = generate_dataset(spec);
  save_dataset(scenes, out);
  log << "[spectgnn] wrote " << scenes.size() << " scenes to " << out.string() << "\n";
  info.finish();
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& log) {
  require_path(cfg.dataset, "dataset", "train");
  const fs::path out = prepare_out(cfg, "train");
  RunInfo info("train", out);
  const std::vector<SceneWindow> scenes = select_part(load_scenes(cfg.dataset), cfg, SplitPart::train);
  const std::vector<PreparedScene> prepared = prepare_all(scenes, cfg.model, true);
  SpecTGNN model(cfg.model, cfg.seed);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  log << "[spectgnn] training on " << prepared.size() << " scenes, " << model.params().scalar_count()
      << " parameters\n";
  const std::size_t every = std::max<std::size_t>(1, tc.epochs / 10);
  const TrainLog history = fit(model, prepared, tc, [&](const EpochLoss& e) {
    if (e.epoch % every == 0 || e.epoch == tc.epochs) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "[spectgnn] epoch %5zu  L_prob %.6g  L_dist %.6g  L_total %.6g\n",
                    e.epoch, e.prob, e.dist, e.total);
      log << buf;
    }
  });
  save_checkpoint(model, out / "checkpoint.json");
  write_text(out / "loss.csv", history.to_csv());
  log << "[spectgnn] wrote " << (out / "checkpoint.json").string() << " and loss.csv\n";
  info.finish();
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& log) {
  require_path(cfg.dataset, "dataset", "eval");
  const fs::path out = prepare_out(cfg, "eval");
  RunInfo info("eval", out);
  const SpecTGNN model = load_model(cfg, "eval", log);
  const auto scenes = select_part(load_scenes(cfg.dataset), cfg, cfg.eval_split);
  const MetricsReport report = evaluate(model, prepare_all(scenes, model.config(), true), cfg.k_list, cfg.seed);
  write_text(out / "metrics.json", report.to_json() + "\n");
  log << "[spectgnn] " << scenes.size() << " " << to_string(cfg.eval_split) << " scenes\n";
  log_metrics(report, log);
  info.finish();
  return kExitOk;
}

int cmd_ksweep(const RunConfig& cfg, std::ostream& log) {
  require_path(cfg.dataset, "dataset", "ksweep");
  const fs::path out = prepare_out(cfg, "ksweep");
  RunInfo info("ksweep", out);
  const SpecTGNN model = load_model(cfg, "ksweep", log);
  const auto scenes = select_part(load_scenes(cfg.dataset), cfg, cfg.eval_split);
  std::vector<std::size_t> ks(cfg.ksweep_max);
  for (std::size_t k = 0; k < ks.size(); ++k) ks[k] = k + 1;
  const MetricsReport report = evaluate(model, prepare_all(scenes, model.config(), true), ks, cfg.seed);
  std::string csv = "K,minADE,minFDE\n";
  char buf[96];
  for (std::size_t i = 0; i < ks.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", ks[i], report.min_ade[i], report.min_fde[i]);
    csv += buf;
  }
  write_text(out / "ksweep.csv", csv);
  log_metrics(report, log);
  info.finish();
  return kExitOk;
}

int cmd_predict(const RunConfig& cfg, std::ostream& log) {
  require_path(cfg.dataset, "dataset", "predict");
  const fs::path out = prepare_out(cfg, "predict");
  RunInfo info("predict", out);
  const SpecTGNN model = load_model(cfg, "predict", log);
  const std::vector<SceneWindow> scenes = load_scenes(cfg.dataset);
  const std::vector<PreparedScene> prepared = prepare_all(scenes, model.config(), false);
  const std::size_t k = cfg.k_list.back();
  std::string lines;
  NoGradGuard no_grad;
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    const GaussianTrack track = model.forward(prepared[i]).track;
    const Hypotheses h = sample_hypotheses(track, k, derive_seed(cfg.seed, i));
    const std::size_t steps = track.steps(), agents = track.agents();
    nlohmann::ordered_json j;
    j["scene_id"] = scenes[i].scene_id;
    j["agent_ids"] = scenes[i].agent_ids;
    j["t_fut"] = steps;
    j["k"] = k;
    j["mean"] = nested(track.mean.data(), steps, agents, 2);
    j["sigma"] = nested(track.sigma.data(), steps, agents, 2);
    j["rho"] = nested(track.rho.data(), steps, agents, 1);
    nlohmann::ordered_json samples = nlohmann::ordered_json::array();
    for (std::size_t s = 0; s < k; ++s) {
      samples.push_back(nested(std::span<const double>(h.data).subspan(s * steps * agents * 2, steps * agents * 2),
                               steps, agents, 2));
    }
    j["samples"] = std::move(samples);
    lines += j.dump() + "\n";
  }
  write_text(out / "predictions.jsonl", lines);
  log << "[spectgnn] wrote " << prepared.size() << " predictions with K = " << k << "\n";
  info.finish();
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& log) {
  const std::vector<GradCheckCase> cases = gradcheck_suite(cfg.seed);
  double worst = 0.0;
  bool ok = true;
  std::string csv = "case,max_rel_error,tolerance,elements,passed\n";
  char buf[256];
  for (const GradCheckCase& c : cases) {
    worst = std::max(worst, c.max_rel_error);
    ok = ok && c.passed();
    std::snprintf(buf, sizeof buf, "[spectgnn] %-22s %.3e (tol %.0e, %zu elements) %s\n", c.name.c_str(),
                  c.max_rel_error, c.tolerance, c.elements, c.passed() ? "ok" : "FAIL");
    log << buf;
    if (!c.passed()) log << "[spectgnn]     worst at " << c.worst << "\n";
    std::snprintf(buf, sizeof buf, "%s,%.6e,%.0e,%zu,%d\n", c.name.c_str(), c.max_rel_error, c.tolerance,
                  c.elements, c.passed() ? 1 : 0);
    csv += buf;
  }
  std::snprintf(buf, sizeof buf, "[spectgnn] max relative error %.3e over %zu cases: %s\n", worst, cases.size(),
                ok ? "PASS" : "FAIL");
  log << buf;
  if (!cfg.out.empty()) {
    fs::create_directories(cfg.out);
    write_text(cfg.out / "gradcheck.csv", csv);
  }
  return ok ? kExitOk : kExitFailure;
}

int run(const std::vector<std::string>& args, std::ostream& log) {
  CLI::App app{"SpecTGNN trajectory prediction", "spectgnn"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, seed, out, dataset, checkpoint, k_list, ablate, env_grad;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "flat key = value configuration file");
  app.add_option("--seed", seed, "seed for data, initialization, shuffling, split and sampling");
  app.add_option("--out", out, "output directory");
  app.add_option("--dataset", dataset, "dataset directory or single .scene file");
  app.add_option("--checkpoint", checkpoint, "checkpoint file");
  app.add_option("--k-list", k_list, "comma-separated K values for eval");
  app.add_option("--ablate", ablate, "base | +tgconv | +image | +statt | full");
  app.add_option("--env-grad", env_grad, "broadened | blocked");
  app.add_option("--set", overrides, "key=value override, repeatable");

  using Command = int (*)(const RunConfig&, std::ostream&);
  const std::vector<std::pair<std::string, Command>> commands = {
      {"synth", cmd_synth},         {"train", cmd_train},   {"eval", cmd_eval},
      {"predict", cmd_predict},     {"gradcheck", cmd_gradcheck}, {"ksweep", cmd_ksweep},
  };
  const std::vector<std::string> help = {
      "generate a synthetic dataset directory", "train and write checkpoint.json + loss.csv",
      "write metrics.json for the configured K list", "write predictions.jsonl with K samples per scene",
      "finite-difference gradient check; nonzero exit on failure", "write ksweep.csv for K = 1..ksweep_max"};
  for (std::size_t i = 0; i < commands.size(); ++i) app.add_subcommand(commands[i].first, help[i]);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    log << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    log << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    log << "[spectgnn] usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  Command command = nullptr;
  std::string name;
  for (const auto& [n, fn] : commands) {
    if (app.got_subcommand(n)) {
      command = fn;
      name = n;
    }
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!seed.empty()) cfg.set("seed", seed);
    if (!out.empty()) cfg.set("out", out);
    if (!dataset.empty()) cfg.set("dataset", dataset);
    if (!checkpoint.empty()) cfg.set("checkpoint", checkpoint);
    if (!k_list.empty()) cfg.set("k_list", k_list);
    if (!ablate.empty()) cfg.set("ablation", ablate);
    if (!env_grad.empty()) cfg.set("env_grad", env_grad);
    cfg.validate();
  } catch (const Error& e) {
    log << "[spectgnn] configuration error: " << e.what() << "\n";
    return kExitUsage;
  }

  log << "[spectgnn] " << name << " with resolved config:\n";
  for (const auto& [k, v] : cfg.entries()) log << "  " << k << " = " << v << "\n";

  try {
    return command(cfg, log);
  } catch (const ConfigError& e) {
    log << "[spectgnn] configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    log << "[spectgnn] error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace spectgnn::cli
