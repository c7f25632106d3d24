#include "spectgnn/attention.hpp"

#include <cmath>

#include "spectgnn/errors.hpp"
#include "spectgnn/ops.hpp"

namespace spectgnn {

AttentionParams AttentionParams::create(std::size_t in_dim, std::size_t heads, std::size_t d_k,
                                        std::size_t d_out, ParamStore& store, Initializer& init,
                                        const std::string& prefix) {
  if (heads == 0 || d_k == 0 || d_out == 0 || in_dim == 0) {
    throw ConfigError("attention: heads, d_k, d_out and input width must be positive");
  }
  AttentionParams p;
  p.heads = heads;
  p.d_k = d_k;
  p.d_out = d_out;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string tag = prefix + ".head" + std::to_string(h);
    p.query.push_back(store.add(tag + ".wq", init.uniform_fan({in_dim, d_k}, in_dim, d_k)));
    p.key.push_back(store.add(tag + ".wk", init.uniform_fan({in_dim, d_k}, in_dim, d_k)));
    p.value.push_back(store.add(tag + ".wv", init.uniform_fan({in_dim, d_out}, in_dim, d_out)));
  }
  const std::size_t width = heads * d_out;
  p.mix = store.add(prefix + ".wh", init.uniform_fan({width, width}, width, width));
  return p;
}

AttentionResult multi_head_attention(const Tensor& x, const AttentionParams& params) {
  if (x.dim() != 3 || x.size(2) != params.in_dim()) {
    throw DimensionError("attention: input " + shape_str(x.shape()) + " does not match " +
                        std::to_string(params.in_dim()) + " input channels");
  }
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(params.d_k));
  AttentionResult result;
  std::vector<Tensor> heads;
  heads.reserve(params.heads);
  for (std::size_t h = 0; h < params.heads; ++h) {
    const Tensor q = matmul(x, params.query[h]);
    const Tensor k = matmul(x, params.key[h]);
    const Tensor v = matmul(x, params.value[h]);
    const Tensor scores = softmax(scale(matmul(q, transpose(k)), inv_scale), 2);
    heads.push_back(matmul(scores, v));
    result.weights.push_back(scores);
  }
  const Tensor joined = heads.size() == 1 ? heads.front() : concat(heads, 2);
  result.output = matmul(joined, params.mix);
  return result;
}

AttentionResult temporal_attention(const Tensor& y, const AttentionParams& params) {
  if (y.dim() != 3) throw DimensionError("temporal_attention: expected [T, N, c], got " + shape_str(y.shape()));
  AttentionResult r = multi_head_attention(permute(y, {1, 0, 2}), params);
  r.output = permute(r.output, {1, 0, 2});
  return r;
}

AttentionResult spatial_attention(const Tensor& y, const AttentionParams& params) {
  if (y.dim() != 3) throw DimensionError("spatial_attention: expected [T, N, c], got " + shape_str(y.shape()));
  return multi_head_attention(y, params);
}

STAttParams STAttParams::create(std::size_t c, std::size_t heads, std::size_t d_k,
                                std::size_t d_out, STAttMode mode, ParamStore& store,
                                Initializer& init, const std::string& prefix) {
  STAttParams p;
  p.mode = mode;
  p.temporal = AttentionParams::create(c, heads, d_k, d_out, store, init, prefix + ".temporal");
  const std::size_t spatial_in = mode == STAttMode::sequential ? heads * d_out : c;
  p.spatial = AttentionParams::create(spatial_in, heads, d_k, d_out, store, init, prefix + ".spatial");
  return p;
}

Tensor statt(const Tensor& y, const STAttParams& params) {
  if (params.mode == STAttMode::sequential) {
    return spatial_attention(temporal_attention(y, params.temporal).output, params.spatial).output;
  }
  return add(temporal_attention(y, params.temporal).output,
             spatial_attention(y, params.spatial).output);
}

}  // namespace spectgnn
