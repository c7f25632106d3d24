#include "spectgnn/graphs.hpp"

#include <cmath>
#include <memory>

#include "spectgnn/errors.hpp"

namespace spectgnn {

void WeightMatrix::validate() const {
  const std::size_t n = values.rows();
  if (values.cols() != n) throw ContractError("weight matrix must be square");
  for (std::size_t i = 0; i < n; ++i) {
    if (values(i, i) != 0.0) throw ContractError("weight matrix diagonal must be zero");
    for (std::size_t j = 0; j < n; ++j) {
      const double w = values(i, j);
      if (!std::isfinite(w) || w < 0.0) {
        throw ContractError("weight matrix entries must be finite and non-negative");
      }
    }
  }
  if (values.asymmetry() > 1e-12) {
    throw ContractError("weight matrix is not symmetric (max deviation " +
                        std::to_string(values.asymmetry()) + ")");
  }
}

std::vector<WeightMatrix> build_agent_graph(const SceneWindow& scene, double eps) {
  if (!(eps > 0.0)) throw ConfigError("agent graph distance floor must be positive");
  const std::size_t n = scene.num_agents();
  for (std::size_t t = 0; t < scene.t_hist; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& p = scene.hist(t, i);
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw DataError("non-finite position for agent " + std::to_string(scene.agent_ids[i]) +
                        " at history step " + std::to_string(t));
      }
    }
  }
  std::vector<WeightMatrix> graphs;
  graphs.reserve(scene.t_hist);
  for (std::size_t t = 0; t < scene.t_hist; ++t) {
    WeightMatrix w{Matrix(n, n), GraphRole::agent};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = scene.hist(t, i).x - scene.hist(t, j).x;
        const double dy = scene.hist(t, i).y - scene.hist(t, j).y;
        const double d = std::sqrt(dx * dx + dy * dy);
        const double v = 1.0 / std::max(d, eps);
        w.values(i, j) = v;
        w.values(j, i) = v;
      }
    }
    graphs.push_back(std::move(w));
  }
  return graphs;
}

LaplacianSet normalized_laplacian(const WeightMatrix& weights) {
  weights.validate();
  const Matrix& e = weights.values;
  const std::size_t n = e.rows();
  LaplacianSet out{Matrix::identity(n), std::vector<double>(n, 0.0)};
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += e(i, j);
    out.degree[i] = d;
    inv_sqrt[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.laplacian(i, j) -= inv_sqrt[i] * e(i, j) * inv_sqrt[j];
    }
  }
  return out;
}

Tensor normalized_laplacian(const Tensor& weights) {
  if (weights.dim() != 2 || weights.size(0) != weights.size(1)) {
    throw DimensionError("normalized_laplacian: expected square matrix, got " +
                         shape_str(weights.shape()));
  }
  const std::size_t n = weights.size(0);
  const Matrix e = Matrix::from_tensor(weights);
  if (e.asymmetry() > 1e-12) {
    throw ContractError("normalized_laplacian: weight matrix is not symmetric (max deviation " +
                        std::to_string(e.asymmetry()) + ")");
  }
  auto inv_sqrt = std::make_shared<std::vector<double>>(n, 0.0);
  auto inv_cube = std::make_shared<std::vector<double>>(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += e(i, j);
    if (d > 0.0) {
      (*inv_sqrt)[i] = 1.0 / std::sqrt(d);
      (*inv_cube)[i] = (*inv_sqrt)[i] / d;
    }
  }
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = (i == j ? 1.0 : 0.0) - (*inv_sqrt)[i] * e(i, j) * (*inv_sqrt)[j];
    }
  }
  return make_result(
      "normalized_laplacian", {n, n}, std::move(out), {weights},
      [weights, n, inv_sqrt, inv_cube](std::span<const double>, std::span<const double> g) {
        Tensor w = weights;
        auto E = w.data();
        auto gE = w.grad_mut();
        const auto& s = *inv_sqrt;
        // Direct term plus the path through each node's degree.
        std::vector<double> g_degree(n, 0.0);
        for (std::size_t a = 0; a < n; ++a) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            acc += g[a * n + j] * E[a * n + j] * s[j];
            acc += g[j * n + a] * E[j * n + a] * s[j];
          }
          g_degree[a] = 0.5 * (*inv_cube)[a] * acc;
        }
        for (std::size_t a = 0; a < n; ++a) {
          for (std::size_t b = 0; b < n; ++b) {
            gE[a * n + b] += -g[a * n + b] * s[a] * s[b] + g_degree[a];
          }
        }
      });
}

EncoderParams EncoderParams::create(const EncoderConfig& config, ParamStore& store,
                                    Initializer& init, const std::string& prefix) {
  if (config.kernel % 2 == 0) throw ConfigError("encoder kernel size must be odd");
  EncoderParams p;
  p.config = config;
  std::size_t in = 1;
  const std::size_t k = config.kernel;
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t out = config.channels[l];
    const std::string tag = prefix + ".conv" + std::to_string(l);
    p.kernels[l] = store.add(tag + ".weight", init.uniform_fan({out, in, k, k}, in * k * k, out * k * k));
    p.biases[l] = store.add(tag + ".bias", init.constant({out}, 0.0));
    p.slopes[l] = store.add(tag + ".prelu", init.constant({out}, config.prelu_init));
    in = out;
  }
  p.embed_weight = store.add(prefix + ".embed.weight",
                             init.uniform_fan({in, config.embed_dim}, in, config.embed_dim));
  p.embed_bias = store.add(prefix + ".embed.bias", init.constant({config.embed_dim}, 0.0));
  return p;
}

Tensor image_tensor(const Raster& image) {
  if (image.width == 0 || image.height == 0 || image.pixels.size() != image.width * image.height) {
    throw DataError("image raster is empty or inconsistent");
  }
  return Tensor::from_data({1, image.height, image.width}, image.pixels);
}

std::vector<Point2> agent_pixels(const SceneWindow& scene) {
  if (!scene.image) throw ConfigError("scene '" + scene.scene_id + "' has no context image");
  const Raster& img = *scene.image;
  std::vector<Point2> pixels;
  pixels.reserve(scene.num_agents());
  for (std::size_t n = 0; n < scene.num_agents(); ++n) {
    const Point2 p = scene.image_transform.apply(scene.hist(scene.t_hist - 1, n));
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0 ||
        p.x > static_cast<double>(img.width - 1) || p.y > static_cast<double>(img.height - 1)) {
      throw DataError("agent " + std::to_string(scene.agent_ids[n]) + " maps to pixel (" +
                      std::to_string(p.x) + ", " + std::to_string(p.y) +
                      ") outside the context image of scene '" + scene.scene_id + "'");
    }
    pixels.push_back(p);
  }
  return pixels;
}

Tensor environment_weights(const Tensor& image, std::span<const Point2> pixels,
                           const EncoderParams& params) {
  Tensor x = image;
  for (std::size_t l = 0; l < 3; ++l) {
    x = prelu(conv2d(x, params.kernels[l], params.biases[l]), params.slopes[l], 0);
  }
  const Tensor features = bilinear_sample(x, pixels);
  const Tensor z = matmul(features, params.embed_weight) + params.embed_bias;
  const std::size_t n = pixels.size();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.config.embed_dim));
  const Tensor gram = scale(matmul(z, transpose(z)), inv_sqrt_d);
  std::vector<double> mask(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) mask[i * n + i] = 0.0;
  return mul(sigmoid(gram), Tensor::from_data({n, n}, std::move(mask)));
}

WeightMatrix encode_environment(const SceneWindow& scene, const EncoderParams& params) {
  if (!scene.image) {
    throw ConfigError("environment branch enabled but scene '" + scene.scene_id +
                      "' has no context image");
  }
  NoGradGuard guard;
  const std::vector<Point2> pixels = agent_pixels(scene);
  const Tensor w = environment_weights(image_tensor(*scene.image), pixels, params);
  return WeightMatrix{Matrix::from_tensor(w), GraphRole::environment};
}

}  // namespace spectgnn
