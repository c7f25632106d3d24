#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "spectgnn/matrix.hpp"
#include "spectgnn/params.hpp"
#include "spectgnn/scene.hpp"

namespace spectgnn {

enum class GraphRole { agent, environment };

/// Symmetric, non-negative N x N edge weights with zero diagonal.
struct WeightMatrix {
  Matrix values;
  GraphRole role = GraphRole::agent;

  /// Throws ContractError if the invariants above are violated beyond 1e-12.
  void validate() const;
};

struct LaplacianSet {
  Matrix laplacian;
  std::vector<double> degree;
};

inline constexpr double kDefaultDistanceFloor = 1e-6;

/// One inverse-distance weight matrix per observed step:
/// w_ij = 1 / max(|p_i - p_j|, eps) for i != j.
std::vector<WeightMatrix> build_agent_graph(const SceneWindow& scene,
                                            double eps = kDefaultDistanceFloor);

/// L = I - D^{-1/2} E D^{-1/2}, with D^{-1/2}_ii = 0 for isolated nodes.
LaplacianSet normalized_laplacian(const WeightMatrix& weights);

/// Differentiable form of normalized_laplacian for an [N, N] tensor.
Tensor normalized_laplacian(const Tensor& weights);

struct EncoderConfig {
  std::array<std::size_t, 3> channels{8, 16, 16};
  std::size_t kernel = 3;
  std::size_t embed_dim = 16;
  double prelu_init = 0.25;
};

/// Image encoder standing in for a pretrained backbone: three conv+PReLU
/// layers, per-agent bilinear feature reads and a linear embedding.
struct EncoderParams {
  EncoderConfig config;
  std::array<Tensor, 3> kernels;
  std::array<Tensor, 3> biases;
  std::array<Tensor, 3> slopes;
  Tensor embed_weight;  // [C_last, embed_dim]
  Tensor embed_bias;    // [embed_dim]

  static EncoderParams create(const EncoderConfig& config, ParamStore& store,
                              Initializer& init, const std::string& prefix = "encoder");
};

/// [1, H, W] tensor of raster intensities.
Tensor image_tensor(const Raster& image);

/// Pixel coordinates of each agent's last observed position.
/// Throws DataError naming the agent when it falls outside the image.
std::vector<Point2> agent_pixels(const SceneWindow& scene);

/// Differentiable environment weights: w_ij = sigmoid(z_i . z_j / sqrt(d_e))
/// for i != j, zero diagonal. image: [1, H, W]; returns [N, N].
Tensor environment_weights(const Tensor& image, std::span<const Point2> pixels,
                           const EncoderParams& params);

/// Plain-value environment graph for a scene. ConfigError when the scene
/// carries no image.
WeightMatrix encode_environment(const SceneWindow& scene, const EncoderParams& params);

}  // namespace spectgnn
