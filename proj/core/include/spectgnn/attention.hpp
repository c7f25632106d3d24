#pragma once

#include <string>
#include <vector>

#include "spectgnn/params.hpp"

namespace spectgnn {

/// Per-head projections W_i^Q, W_i^K: [c, d_k], W_i^V: [c, d_out], and the
/// output mixing W^H: [heads*d_out, heads*d_out].
struct AttentionParams {
  std::vector<Tensor> query;
  std::vector<Tensor> key;
  std::vector<Tensor> value;
  Tensor mix;
  std::size_t heads = 0;
  std::size_t d_k = 0;
  std::size_t d_out = 0;

  std::size_t in_dim() const { return query.empty() ? 0 : query.front().size(0); }
  std::size_t out_dim() const { return heads * d_out; }

  static AttentionParams create(std::size_t in_dim, std::size_t heads, std::size_t d_k,
                                std::size_t d_out, ParamStore& store, Initializer& init,
                                const std::string& prefix);
};

struct AttentionResult {
  Tensor output;
  /// One score tensor per head, softmax-normalized along the last axis.
  std::vector<Tensor> weights;
};

/// Scaled dot-product multi-head attention over the middle axis of
/// x: [B, L, c]; every batch entry attends independently.
/// Returns [B, L, heads*d_out]; weights are [B, L, L].
AttentionResult multi_head_attention(const Tensor& x, const AttentionParams& params);

/// Each agent attends over its own T_h steps. y: [T, N, c] -> [T, N, heads*d_out];
/// weights are [N, T, T].
AttentionResult temporal_attention(const Tensor& y, const AttentionParams& params);

/// Agents attend to each other within a step. y: [T, N, c] -> [T, N, heads*d_out];
/// weights are [T, N, N].
AttentionResult spatial_attention(const Tensor& y, const AttentionParams& params);

enum class STAttMode { sequential, parallel };

struct STAttParams {
  STAttMode mode = STAttMode::sequential;
  AttentionParams temporal;
  AttentionParams spatial;

  /// Sequential mode feeds the temporal output (heads*d_out wide) into the
  /// spatial attention; parallel mode feeds y to both and sums.
  static STAttParams create(std::size_t c, std::size_t heads, std::size_t d_k, std::size_t d_out,
                            STAttMode mode, ParamStore& store, Initializer& init,
                            const std::string& prefix = "statt");
};

Tensor statt(const Tensor& y, const STAttParams& params);

}  // namespace spectgnn
