#include "spectgnn/model.hpp"

#include <algorithm>
#include <cmath>

#include "spectgnn/errors.hpp"
#include "spectgnn/ops.hpp"

namespace spectgnn {

AblationFlags AblationFlags::parse(const std::string& name) {
  if (name == "base") return {false, false, false};
  if (name == "full") return {true, true, true};
  // One or more of +tgconv, +image, +statt.
  AblationFlags f{false, false, false};
  std::size_t pos = 0;
  while (pos < name.size() && name[pos] == '+') {
    const std::size_t next = std::min(name.find('+', pos + 1), name.size());
    const std::string part = name.substr(pos + 1, next - pos - 1);
    if (part == "tgconv") f.tgconv = true;
    else if (part == "image") f.image = true;
    else if (part == "statt") f.statt = true;
    else break;
    pos = next;
  }
  if (pos == 0 || pos != name.size()) {
    throw ConfigError("unknown ablation variant '" + name +
                      "' (expected base, +tgconv, +image, +statt or full)");
  }
  return f;
}

std::string AblationFlags::name() const {
  if (tgconv && image && statt) return "full";
  if (!tgconv && !image && !statt) return "base";
  if (tgconv && !image && !statt) return "+tgconv";
  if (!tgconv && image && !statt) return "+image";
  if (!tgconv && !image && statt) return "+statt";
  std::string s;
  if (tgconv) s += "+tgconv";
  if (image) s += "+image";
  if (statt) s += "+statt";
  return s;
}

void ModelConfig::validate() const {
  if (t_hist == 0 || t_fut == 0) throw ConfigError("t_hist and t_fut must be positive");
  if (c_in == 0 || c_out == 0) throw ConfigError("channel counts must be positive");
  if (n_max == 0) throw ConfigError("n_max must be positive");
  if (num_units == 0) throw ConfigError("num_units must be at least 1");
  if (tg_kernel % 2 == 0) throw ConfigError("tg_kernel must be odd");
  if (decoder_kernel % 2 == 0) throw ConfigError("decoder_kernel must be odd");
  if (num_heads == 0) throw ConfigError("num_heads must be at least 1");
  if (!(eps_dist > 0.0)) throw ConfigError("eps_dist must be positive");
  if (!(eps_eig >= 0.0)) throw ConfigError("eps_eig must be non-negative");
  if (!(coord_scale > 0.0) || !std::isfinite(coord_scale)) throw ConfigError("coord_scale must be positive");
}

PreparedScene prepare_scene(const SceneWindow& scene, const ModelConfig& config) {
  scene.validate();
  if (scene.t_hist != config.t_hist) {
    throw DataError("scene '" + scene.scene_id + "' has " + std::to_string(scene.t_hist) +
                    " history steps; the model expects " + std::to_string(config.t_hist));
  }
  const std::size_t n = scene.num_agents();
  if (n > config.n_max) {
    throw CapacityError("scene '" + scene.scene_id + "' has " + std::to_string(n) +
                        " agents, above n_max = " + std::to_string(config.n_max) +
                        "; re-run with a larger n_max");
  }
  const std::size_t th = scene.t_hist;
  PreparedScene out;
  out.scene_id = scene.scene_id;
  out.num_agents = n;
  out.anchor.resize(2 * n);
  for (std::size_t a = 0; a < n; ++a) {
    out.anchor[2 * a] = scene.hist(th - 1, a).x;
    out.anchor[2 * a + 1] = scene.hist(th - 1, a).y;
  }
  std::vector<double> input(th * n * 2);
  for (std::size_t t = 0; t < th; ++t) {
    for (std::size_t a = 0; a < n; ++a) {
      input[(t * n + a) * 2] = (scene.hist(t, a).x - out.anchor[2 * a]) / config.coord_scale;
      input[(t * n + a) * 2 + 1] = (scene.hist(t, a).y - out.anchor[2 * a + 1]) / config.coord_scale;
    }
  }
  out.input = Tensor::from_data({th, n, 2}, std::move(input));

  const std::vector<WeightMatrix> graphs = build_agent_graph(scene, config.eps_dist);
  std::vector<double> vectors;
  std::vector<double> values;
  vectors.reserve(th * n * n);
  values.reserve(th * n);
  for (const WeightMatrix& w : graphs) {
    const SpectralBasis basis = eigh_sym(normalized_laplacian(w).laplacian);
    vectors.insert(vectors.end(), basis.vectors.values().begin(), basis.vectors.values().end());
    values.insert(values.end(), basis.values.begin(), basis.values.end());
  }
  pin_null_modes(values);
  out.agent_basis = {Tensor::from_data({th, n, n}, std::move(vectors)),
                     Tensor::from_data({th, n}, std::move(values))};

  if (scene.image) {
    out.image = image_tensor(*scene.image);
    out.pixels = agent_pixels(scene);
  }
  if (scene.has_future()) {
    std::vector<double> target(scene.t_fut * n * 2);
    for (std::size_t t = 0; t < scene.t_fut; ++t) {
      for (std::size_t a = 0; a < n; ++a) {
        target[(t * n + a) * 2] = scene.fut(t, a).x;
        target[(t * n + a) * 2 + 1] = scene.fut(t, a).y;
      }
    }
    out.target = Tensor::from_data({scene.t_fut, n, 2}, std::move(target));
  }
  return out;
}

SpecTGNN::SpecTGNN(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Initializer init(seed);
  const AblationFlags& ab = config_.ablation;
  if (ab.image) {
    EncoderConfig enc = config_.encoder;
    enc.prelu_init = config_.prelu_init;
    encoder_ = EncoderParams::create(enc, store_, init);
  }
  for (std::size_t u = 0; u < config_.num_units; ++u) {
    UnitShape shape;
    shape.t_hist = config_.t_hist;
    shape.n_max = config_.n_max;
    shape.c_in = u == 0 ? config_.c_in : config_.c_out;
    shape.c_out = config_.c_out;
    shape.tg_kernel = config_.tg_kernel;
    shape.tgconv = ab.tgconv;
    shape.environment = ab.image;
    units_.push_back(create_unit(shape, store_, init, "unit" + std::to_string(u)));
    if (u + 1 < config_.num_units) {
      unit_slopes_.push_back(store_.add("unit" + std::to_string(u) + ".prelu",
                                        init.constant({config_.c_out}, config_.prelu_init)));
    }
  }
  if (ab.statt) {
    attention_ = STAttParams::create(config_.c_out, config_.num_heads, config_.head_dim(),
                                     config_.head_out(), config_.statt_mode, store_, init);
  }
  DecoderShape dec;
  dec.t_hist = config_.t_hist;
  dec.t_fut = config_.t_fut;
  dec.channels = config_.c_out;
  dec.attention_width = ab.statt ? config_.num_heads * config_.head_out() : 0;
  dec.fusion = config_.fusion_mode;
  dec.residual_layers = config_.decoder_layers;
  dec.kernel = config_.decoder_kernel;
  dec.prelu_init = config_.prelu_init;
  decoder_ = DecoderParams::create(dec, store_, init);
}

ForwardPass SpecTGNN::forward(const PreparedScene& scene) const {
  if (scene.input.size(0) != config_.t_hist || scene.input.size(2) != config_.c_in) {
    throw ContractError("forward: scene input " + shape_str(scene.input.shape()) +
                        " does not match the model configuration");
  }
  ForwardPass pass;
  std::optional<BlockBasis> env_basis;
  if (encoder_) {
    if (!scene.image.defined()) {
      throw ConfigError("environment branch enabled but scene '" + scene.scene_id +
                        "' has no context image");
    }
    pass.env_weights = environment_weights(scene.image, scene.pixels, *encoder_);
    const EighTensors eig = eigh(normalized_laplacian(pass.env_weights), config_.env_grad,
                                 config_.eps_eig);
    env_basis = BlockBasis{eig.vectors, pin_null_modes(eig.values)};
  }
  Tensor v = scene.input;
  for (std::size_t u = 0; u < units_.size(); ++u) {
    v = spectgnn_unit(v, scene.agent_basis, env_basis, units_[u]);
    if (u < unit_slopes_.size()) v = prelu(v, unit_slopes_[u], 2);
  }
  pass.encoded = v;
  if (attention_) pass.attended = statt(v, *attention_);
  pass.raw = tcnn_decode(pass.encoded, pass.attended, decoder_);
  GaussianTrack local = gaussian_head(pass.raw);
  if (config_.coord_scale != 1.0) {
    local.mean = scale(local.mean, config_.coord_scale);
    local.sigma = scale(local.sigma, config_.coord_scale);
  }
  pass.track = translate(local, scene.anchor);
  return pass;
}

}  // namespace spectgnn
