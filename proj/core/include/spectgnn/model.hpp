#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spectgnn/attention.hpp"
#include "spectgnn/decoder.hpp"
#include "spectgnn/graphs.hpp"
#include "spectgnn/spectral.hpp"

namespace spectgnn {

/// Which optional components are active. All off is the Base variant
/// (agent graph, A-blocks without TGConv, decoder).
struct AblationFlags {
  bool tgconv = true;
  bool image = true;
  bool statt = true;

  /// base | +tgconv | +image | +statt | full
  static AblationFlags parse(const std::string& name);
  std::string name() const;

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct ModelConfig {
  std::size_t t_hist = 8;
  std::size_t t_fut = 12;
  std::size_t c_in = 2;
  std::size_t c_out = 5;
  std::size_t n_max = 16;
  std::size_t num_units = 2;
  std::size_t tg_kernel = 3;
  std::size_t num_heads = 2;
  /// 0 selects c_out.
  std::size_t d_k = 0;
  std::size_t d_out = 0;
  std::size_t decoder_layers = 5;
  std::size_t decoder_kernel = 3;
  EncoderConfig encoder;
  AblationFlags ablation;
  STAttMode statt_mode = STAttMode::sequential;
  FusionMode fusion_mode = FusionMode::add;
  EigGradMode env_grad = EigGradMode::broadened;
  double eps_dist = kDefaultDistanceFloor;
  double eps_eig = 1e-8;
  double prelu_init = 0.25;
  /// Scene units per network unit: inputs are divided by it, predicted
  /// offsets and scales multiplied by it.
  double coord_scale = 5.0;

  std::size_t head_dim() const { return d_k ? d_k : c_out; }
  std::size_t head_out() const { return d_out ? d_out : c_out; }
  /// ConfigError on invalid combinations.
  void validate() const;

  /// Flat key=value view used by config files and checkpoints. Doubles are
  /// written with 17 significant digits.
  std::vector<std::pair<std::string, std::string>> entries() const;
  /// ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  static bool has_key(const std::string& key);
};

/// Scene tensors that do not depend on learnable parameters.
struct PreparedScene {
  std::string scene_id;
  std::size_t num_agents = 0;
  /// [T_h, N, 2]: positions relative to each agent's last observed position,
  /// divided by coord_scale.
  Tensor input;
  /// Last observed position per agent, interleaved x, y.
  std::vector<double> anchor;
  BlockBasis agent_basis;  // [T_h, N, N], [T_h, N]
  Tensor image;            // [1, H, W]; undefined without an image
  std::vector<Point2> pixels;
  Tensor target;           // [T_f, N, 2] absolute; undefined without a future
};

PreparedScene prepare_scene(const SceneWindow& scene, const ModelConfig& config);

struct ForwardPass {
  Tensor encoded;      // Y from the final unit, [T_h, N, c_out]
  Tensor attended;     // Y_ST, undefined without attention
  Tensor env_weights;  // [N, N], undefined without the image branch
  Tensor raw;          // [T_f, N, 5]
  GaussianTrack track; // in absolute scene coordinates
};

/// Full predictor: stacked spectral-temporal units over the agent and
/// environment graphs, spatio-temporal attention and the temporal decoder.
/// Parameter tensors are shared handles, so the model is move-only.
class SpecTGNN {
 public:
  SpecTGNN(ModelConfig config, std::uint64_t seed);

  SpecTGNN(SpecTGNN&&) = default;
  SpecTGNN& operator=(SpecTGNN&&) = default;
  SpecTGNN(const SpecTGNN&) = delete;
  SpecTGNN& operator=(const SpecTGNN&) = delete;

  const ModelConfig& config() const noexcept { return config_; }
  ParamStore& params() noexcept { return store_; }
  const ParamStore& params() const noexcept { return store_; }

  ForwardPass forward(const PreparedScene& scene) const;

 private:
  ModelConfig config_;
  ParamStore store_;
  std::optional<EncoderParams> encoder_;
  std::vector<UnitParams> units_;
  std::vector<Tensor> unit_slopes_;
  std::optional<STAttParams> attention_;
  DecoderParams decoder_;
};

}  // namespace spectgnn
