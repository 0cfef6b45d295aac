#include "msad/tpca.hpp"

#include <cmath>
#include <stdexcept>

#include "msad/ops.hpp"
#include "msad/rng.hpp"

namespace msad {

TpcaParams make_tpca(std::size_t dim, std::size_t heads, std::uint64_t seed) {
  if (heads == 0 || dim % heads != 0) {
    throw std::invalid_argument("make_tpca: head count must divide the feature dim");
  }
  TpcaParams p;
  p.heads = heads;
  p.d_k = dim / heads;
  p.wq = gaussian_tensor({dim, heads * p.d_k}, 0.02, seed, "tpca.wq");
  p.wk = gaussian_tensor({dim, heads * p.d_k}, 0.02, seed, "tpca.wk");
  p.wq.set_requires_grad(true);
  p.wk.set_requires_grad(true);
  return p;
}

Tensor cross_attention_weights(const Tensor& text_feats, const Tensor& patch_feats,
                               const TpcaParams& params, Tape* tape,
                               const std::vector<bool>* query_mask) {
  if (text_feats.rank() != 2 || patch_feats.rank() != 2 ||
      text_feats.shape()[1] != patch_feats.shape()[1]) {
    throw std::invalid_argument("cross_attention_weights: feature widths disagree");
  }
  if (params.wq.shape()[0] != text_feats.shape()[1] ||
      params.wq.shape()[1] != params.heads * params.d_k) {
    throw std::invalid_argument("cross_attention_weights: projection shape mismatch");
  }
  const std::size_t n_t = text_feats.shape()[0];
  const std::size_t n_i = patch_feats.shape()[0];
  if (query_mask && query_mask->size() != n_t) {
    throw std::invalid_argument("cross_attention_weights: mask length != N_t");
  }

  Tensor queries = matmul(text_feats, params.wq, tape);
  Tensor keys = matmul(patch_feats, params.wk, tape);
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.d_k));

  Tensor mask_rows;
  if (query_mask) {
    mask_rows = Tensor(Shape{n_t, n_i});
    for (std::size_t t = 0; t < n_t; ++t) {
      const double keep = (*query_mask)[t] ? 1.0 : 0.0;
      for (std::size_t i = 0; i < n_i; ++i) mask_rows.at({t, i}) = keep;
    }
  }

  Tensor stacked;
  for (std::size_t h = 0; h < params.heads; ++h) {
    Tensor qh = slice_axis(queries, 1, h * params.d_k, params.d_k, tape);
    Tensor kh = slice_axis(keys, 1, h * params.d_k, params.d_k, tape);
    Tensor scores = affine(matmul(qh, transpose2d(kh, tape), tape), scale, 0.0, tape);
    Tensor attn = softmax(scores, 1, tape);
    if (query_mask) attn = mul(attn, mask_rows, tape);
    Tensor lifted = reshape(attn, {1, n_t, n_i}, tape);
    stacked = h == 0 ? lifted : concat_axis(stacked, lifted, 0, tape);
  }
  return stacked;
}

Tensor fuse_features(const Tensor& patch_feats, const Tensor& attention, Tape* tape) {
  if (attention.rank() != 3) {
    throw std::invalid_argument("fuse_features: attention must be [h x N_t x N_i]");
  }
  if (patch_feats.rank() != 2 || patch_feats.shape()[0] != attention.shape()[2]) {
    throw std::invalid_argument("fuse_features: patch count disagrees with attention");
  }
  Tensor head_mean = mean_axis(attention, 0, tape);       // N_t x N_i
  Tensor patch_major = transpose2d(head_mean, tape);      // N_i x N_t
  return concat_axis(patch_feats, patch_major, 1, tape);  // N_i x (D + N_t)
}

SegDecoderParams make_seg_decoder(std::size_t in_dim, std::size_t hidden,
                                  std::uint64_t seed) {
  SegDecoderParams p;
  p.w1 = gaussian_tensor({in_dim, hidden}, 0.02, seed, "decoder.w1");
  p.b1 = Tensor(Shape{hidden}, 0.0);
  p.w2 = gaussian_tensor({hidden, 2}, 0.02, seed, "decoder.w2");
  p.b2 = Tensor(Shape{2}, 0.0);
  for (Tensor* t : {&p.w1, &p.b1, &p.w2, &p.b2}) t->set_requires_grad(true);
  return p;
}

Tensor decode_segmentation(const Tensor& fused, const SegDecoderParams& decoder,
                           std::size_t out_h, std::size_t out_w, Tape* tape) {
  if (fused.rank() != 2 || fused.shape()[1] != decoder.w1.shape()[0]) {
    throw std::invalid_argument("decode_segmentation: input width does not match decoder");
  }
  const std::size_t n_i = fused.shape()[0];
  const std::size_t side = static_cast<std::size_t>(std::llround(std::sqrt(
      static_cast<double>(n_i))));
  if (side * side != n_i) {
    throw std::invalid_argument("decode_segmentation: patch count is not a perfect square");
  }
  Tensor hidden = leaky_relu(add_rowvec(matmul(fused, decoder.w1, tape), decoder.b1, tape),
                             decoder.leaky_slope, tape);
  Tensor logits = add_rowvec(matmul(hidden, decoder.w2, tape), decoder.b2, tape);  // N_i x 2
  Tensor grid = reshape(logits, {side, side, 2}, tape);
  // logits are interpolated first; the pixel softmax comes after upsampling
  Tensor upsampled = bilinear_upsample(grid, out_h, out_w, tape);
  Tensor probs = softmax(upsampled, 2, tape);
  Tensor abnormal = slice_axis(probs, 2, 1, 1, tape);
  return reshape(abnormal, {out_h, out_w}, tape);
}

}  // namespace msad
