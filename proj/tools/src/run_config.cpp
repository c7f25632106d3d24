#include "spectgnn_cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "spectgnn/errors.hpp"

namespace spectgnn::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) {
    throw ConfigError("'" + key + "' expects a finite number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& run_setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
      {"dataset", [](RunConfig& c, const std::string&, const std::string& v) { c.dataset = v; }},
      {"checkpoint", [](RunConfig& c, const std::string&, const std::string& v) { c.checkpoint = v; }},
      {"out", [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; }},
      // training
      {"lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr = to_double(k, v); }},
      {"epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = to_size(k, v); }},
      {"batch_size",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = to_size(k, v); }},
      {"lambda",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.loss.lambda = to_double(k, v); }},
      {"grad_clip",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.grad_clip = to_double(k, v); }},
      // synthetic data
      {"num_scenes",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.data.num_scenes = to_size(k, v); }},
      {"agents_min",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.data.agents_min = to_size(k, v); }},
      {"agents_max",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.data.agents_max = to_size(k, v); }},
      {"noise", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.noise = to_double(k, v); }},
      {"extent", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.extent = to_double(k, v); }},
      {"image_size",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.data.image_size = to_size(k, v); }},
      {"with_image",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.data.with_image = to_bool(k, v); }},
      {"kinds",
       [](RunConfig& c, const std::string&, const std::string& v) {
         std::vector<ScenarioKind> kinds;
         for (const std::string& name : split_commas(v)) kinds.push_back(parse_scenario_kind(name));
         if (kinds.empty()) throw ConfigError("'kinds' needs at least one scenario kind");
         c.data.kinds = std::move(kinds);
       }},
      // evaluation
      {"split",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const auto parts = split_commas(v);
         if (parts.size() != 3) throw ConfigError("'split' expects three comma-separated ratios");
         for (std::size_t i = 0; i < 3; ++i) c.split[i] = to_double(k, parts[i]);
       }},
      {"eval_split",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "train") c.eval_split = SplitPart::train;
         else if (v == "val") c.eval_split = SplitPart::val;
         else if (v == "test") c.eval_split = SplitPart::test;
         else if (v == "all") c.eval_split = SplitPart::all;
         else throw ConfigError("'" + k + "' must be train, val, test or all");
       }},
      {"k_list", [](RunConfig& c, const std::string&, const std::string& v) { c.k_list = parse_k_list(v); }},
      {"ksweep_max",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.ksweep_max = to_size(k, v); }},
  };
  return table;
}

}  // namespace

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_commas(text)) {
    const std::size_t k = to_size("k_list", item);
    if (k == 0) throw ConfigError("'k_list' entries must be at least 1");
    out.push_back(k);
  }
  if (out.empty()) throw ConfigError("'k_list' must not be empty");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string to_string(SplitPart part) {
  switch (part) {
    case SplitPart::train: return "train";
    case SplitPart::val: return "val";
    case SplitPart::test: return "test";
    case SplitPart::all: return "all";
  }
  return "test";
}

bool RunConfig::has_key(const std::string& key) {
  return run_setters().count(key) > 0 || ModelConfig::has_key(key);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = run_setters().find(key);
  if (it != run_setters().end()) {
    it->second(*this, key, value);
  } else if (ModelConfig::has_key(key)) {
    model.set(key, value);
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
  // Horizons are shared by the model and generated scenes.
  data.t_hist = model.t_hist;
  data.t_fut = model.t_fut;
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected key = value");
    }
    try {
      set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const Error& e) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path.string());
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  split_dataset(0, split);
  if (ksweep_max == 0) throw ConfigError("ksweep_max must be at least 1");
  if (data.agents_min == 0 || data.agents_max < data.agents_min) {
    throw ConfigError("need 1 <= agents_min <= agents_max");
  }
  if (data.agents_max > model.n_max) {
    throw ConfigError("agents_max = " + std::to_string(data.agents_max) + " exceeds n_max = " +
                      std::to_string(model.n_max));
  }
  if (!(data.noise >= 0.0)) throw ConfigError("noise must be non-negative");
  if (!(data.extent > 0.0)) throw ConfigError("extent must be positive");
  if (data.with_image && data.image_size < 2) throw ConfigError("image_size must be at least 2");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::map<std::string, std::string> all;
  for (auto& [k, v] : model.entries()) all[k] = v;
  std::string kinds;
  for (ScenarioKind kind : data.kinds) kinds += (kinds.empty() ? "" : ",") + spectgnn::to_string(kind);
  std::string ks;
  for (std::size_t k : k_list) ks += (ks.empty() ? "" : ",") + std::to_string(k);
  all["seed"] = std::to_string(seed);
  all["dataset"] = dataset.string();
  all["checkpoint"] = checkpoint.string();
  all["out"] = out.string();
  all["lr"] = fmt(train.lr);
  all["epochs"] = std::to_string(train.epochs);
  all["batch_size"] = std::to_string(train.batch_size);
  all["lambda"] = fmt(train.loss.lambda);
  all["grad_clip"] = fmt(train.grad_clip);
  all["num_scenes"] = std::to_string(data.num_scenes);
  all["agents_min"] = std::to_string(data.agents_min);
  all["agents_max"] = std::to_string(data.agents_max);
  all["noise"] = fmt(data.noise);
  all["extent"] = fmt(data.extent);
  all["image_size"] = std::to_string(data.image_size);
  all["with_image"] = data.with_image ? "true" : "false";
  all["kinds"] = kinds;
  all["split"] = fmt(split[0]) + "," + fmt(split[1]) + "," + fmt(split[2]);
  all["eval_split"] = to_string(eval_split);
  all["k_list"] = ks;
  all["ksweep_max"] = std::to_string(ksweep_max);
  return {all.begin(), all.end()};
}

std::string RunConfig::resolved_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

}  // namespace spectgnn::cli
