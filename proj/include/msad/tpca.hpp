#pragma once

#include <cstdint>
#include <vector>

#include "msad/tensor.hpp"

namespace msad {

// Token-patch cross-attention: text tokens are queries, patch features are
// keys. There is no value projection; the attention weights themselves are
// the product.
struct TpcaParams {
  Tensor wq, wk;  // D x (heads * d_k)
  std::size_t heads = 4;
  std::size_t d_k = 8;
};

TpcaParams make_tpca(std::size_t dim, std::size_t heads, std::uint64_t seed);

// [heads x N_t x N_i]; each (head, token) row is a softmax over patches.
// query_mask, when given, zeroes the rows of excluded (PAD) tokens.
Tensor cross_attention_weights(const Tensor& text_feats, const Tensor& patch_feats,
                               const TpcaParams& params, Tape* tape = nullptr,
                               const std::vector<bool>* query_mask = nullptr);

// head-mean of the attention, transposed to patch-major and appended to the
// patch features: [N_i x (D + N_t)]
Tensor fuse_features(const Tensor& patch_feats, const Tensor& attention,
                     Tape* tape = nullptr);

struct SegDecoderParams {
  Tensor w1, b1;  // in x hidden
  Tensor w2, b2;  // hidden x 2
  double leaky_slope = 0.01;
};

SegDecoderParams make_seg_decoder(std::size_t in_dim, std::size_t hidden,
                                  std::uint64_t seed);

// per-patch 2-logit decode, reshape to the patch grid, bilinear upsample to
// H x W, channel softmax, return the abnormal channel in [0,1]
Tensor decode_segmentation(const Tensor& fused, const SegDecoderParams& decoder,
                           std::size_t out_h, std::size_t out_w, Tape* tape = nullptr);

}  // namespace msad
