#include <charconv>
#include <cstdio>
#include <functional>
#include <map>

#include "spectgnn/errors.hpp"
#include "spectgnn/model.hpp"

namespace spectgnn {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

using Setter = std::function<void(ModelConfig&, const std::string&, const std::string&)>;

Setter size_field(std::size_t ModelConfig::*field) {
  return [field](ModelConfig& c, const std::string& k, const std::string& v) { c.*field = to_size(k, v); };
}

Setter double_field(double ModelConfig::*field) {
  return [field](ModelConfig& c, const std::string& k, const std::string& v) { c.*field = to_double(k, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"t_hist", size_field(&ModelConfig::t_hist)},
      {"t_fut", size_field(&ModelConfig::t_fut)},
      {"c_in", size_field(&ModelConfig::c_in)},
      {"c_out", size_field(&ModelConfig::c_out)},
      {"n_max", size_field(&ModelConfig::n_max)},
      {"num_units", size_field(&ModelConfig::num_units)},
      {"tg_kernel", size_field(&ModelConfig::tg_kernel)},
      {"num_heads", size_field(&ModelConfig::num_heads)},
      {"d_k", size_field(&ModelConfig::d_k)},
      {"d_out", size_field(&ModelConfig::d_out)},
      {"decoder_layers", size_field(&ModelConfig::decoder_layers)},
      {"decoder_kernel", size_field(&ModelConfig::decoder_kernel)},
      {"eps_dist", double_field(&ModelConfig::eps_dist)},
      {"eps_eig", double_field(&ModelConfig::eps_eig)},
      {"prelu_init", double_field(&ModelConfig::prelu_init)},
      {"coord_scale", double_field(&ModelConfig::coord_scale)},
      {"encoder_channels",
       [](ModelConfig& c, const std::string& k, const std::string& v) {
         std::array<std::size_t, 3> ch{};
         std::size_t start = 0;
         for (std::size_t i = 0; i < 3; ++i) {
           const std::size_t comma = v.find(',', start);
           if ((i < 2) == (comma == std::string::npos)) {
             throw ConfigError("'" + k + "' expects three comma-separated integers");
           }
           ch[i] = to_size(k, v.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
           start = comma + 1;
         }
         c.encoder.channels = ch;
       }},
      {"encoder_kernel",
       [](ModelConfig& c, const std::string& k, const std::string& v) { c.encoder.kernel = to_size(k, v); }},
      {"embed_dim",
       [](ModelConfig& c, const std::string& k, const std::string& v) { c.encoder.embed_dim = to_size(k, v); }},
      {"ablation",
       [](ModelConfig& c, const std::string&, const std::string& v) { c.ablation = AblationFlags::parse(v); }},
      {"statt_mode",
       [](ModelConfig& c, const std::string& k, const std::string& v) {
         if (v == "sequential") c.statt_mode = STAttMode::sequential;
         else if (v == "parallel") c.statt_mode = STAttMode::parallel;
         else throw ConfigError("'" + k + "' must be sequential or parallel");
       }},
      {"fusion",
       [](ModelConfig& c, const std::string& k, const std::string& v) {
         if (v == "add") c.fusion_mode = FusionMode::add;
         else if (v == "concat") c.fusion_mode = FusionMode::concat;
         else throw ConfigError("'" + k + "' must be add or concat");
       }},
      {"env_grad",
       [](ModelConfig& c, const std::string& k, const std::string& v) {
         if (v == "broadened") c.env_grad = EigGradMode::broadened;
         else if (v == "blocked") c.env_grad = EigGradMode::blocked;
         else throw ConfigError("'" + k + "' must be broadened or blocked");
       }},
  };
  return table;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> ModelConfig::entries() const {
  const auto& ch = encoder.channels;
  return {
      {"t_hist", std::to_string(t_hist)},
      {"t_fut", std::to_string(t_fut)},
      {"c_in", std::to_string(c_in)},
      {"c_out", std::to_string(c_out)},
      {"n_max", std::to_string(n_max)},
      {"num_units", std::to_string(num_units)},
      {"tg_kernel", std::to_string(tg_kernel)},
      {"num_heads", std::to_string(num_heads)},
      {"d_k", std::to_string(d_k)},
      {"d_out", std::to_string(d_out)},
      {"decoder_layers", std::to_string(decoder_layers)},
      {"decoder_kernel", std::to_string(decoder_kernel)},
      {"encoder_channels",
       std::to_string(ch[0]) + "," + std::to_string(ch[1]) + "," + std::to_string(ch[2])},
      {"encoder_kernel", std::to_string(encoder.kernel)},
      {"embed_dim", std::to_string(encoder.embed_dim)},
      {"ablation", ablation.name()},
      {"statt_mode", statt_mode == STAttMode::sequential ? "sequential" : "parallel"},
      {"fusion", fusion_mode == FusionMode::add ? "add" : "concat"},
      {"env_grad", env_grad == EigGradMode::broadened ? "broadened" : "blocked"},
      {"eps_dist", fmt(eps_dist)},
      {"eps_eig", fmt(eps_eig)},
      {"prelu_init", fmt(prelu_init)},
      {"coord_scale", fmt(coord_scale)},
  };
}

void ModelConfig::set(const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown model key '" + key + "'");
  it->second(*this, key, value);
}

bool ModelConfig::has_key(const std::string& key) { return setters().count(key) > 0; }

}  // namespace spectgnn
