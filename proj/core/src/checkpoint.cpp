#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spectgnn/errors.hpp"
#include "spectgnn/training.hpp"

namespace spectgnn {

namespace {
constexpr const char* kFormat = "spectgnn-checkpoint";
constexpr int kVersion = 1;
}  // namespace

std::string checkpoint_json(const SpecTGNN& model) {
  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : model.config().entries()) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (const NamedParam& p : model.params().all()) {
    const auto d = p.value.data();
    params.push_back({{"name", p.name},
                      {"shape", p.value.shape()},
                      {"data", std::vector<double>(d.begin(), d.end())}});
  }
  j["params"] = params;
  return j.dump() + "\n";
}

void save_checkpoint(const SpecTGNN& model, const std::filesystem::path& path) {
  const std::string text = checkpoint_json(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing checkpoint '" + path.string() + "'");
}

SpecTGNN checkpoint_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != kFormat) throw DataError("not a spectgnn checkpoint");
    if (j.at("version").get<int>() != kVersion) {
      throw DataError("unsupported checkpoint version " + j.at("version").dump());
    }
    ModelConfig cfg;
    for (const auto& [k, v] : j.at("config").items()) cfg.set(k, v.get<std::string>());
    SpecTGNN model(cfg, 0);
    const auto& entries = j.at("params");
    if (entries.size() != model.params().all().size()) {
      throw DataError("checkpoint holds " + std::to_string(entries.size()) + " parameters, model expects " +
                      std::to_string(model.params().all().size()));
    }
    for (const auto& e : entries) {
      const std::string name = e.at("name").get<std::string>();
      const Tensor* target = model.params().find(name);
      if (!target) throw DataError("checkpoint parameter '" + name + "' is not part of the model");
      const Shape shape = e.at("shape").get<Shape>();
      if (shape != target->shape()) {
        throw DataError("checkpoint parameter '" + name + "' has shape " + shape_str(shape) + ", expected " +
                        shape_str(target->shape()));
      }
      const std::vector<double> data = e.at("data").get<std::vector<double>>();
      if (data.size() != target->numel()) throw DataError("checkpoint parameter '" + name + "' has wrong size");
      Tensor t = *target;
      std::copy(data.begin(), data.end(), t.data_mut().begin());
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

SpecTGNN load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace spectgnn
