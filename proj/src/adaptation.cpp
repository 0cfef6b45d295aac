#include "msad/adaptation.hpp"

#include <stdexcept>

#include "msad/ops.hpp"
#include "msad/rng.hpp"

namespace msad {

namespace {
constexpr double kLnEps = 1e-5;
}

AdapterBranchParams make_adapter_branch(std::size_t dim, std::uint64_t seed,
                                        const std::string& name, bool use_bias) {
  AdapterBranchParams branch;
  branch.use_bias = use_bias;
  for (std::size_t k = 0; k < 4; ++k) {
    AdapterStageParams& s = branch.stages[k];
    const std::string prefix = name + ".stage" + std::to_string(k + 1);
    s.w1 = gaussian_tensor({dim, dim}, 0.02, seed, prefix + ".w1");
    s.b1 = Tensor(Shape{dim}, 0.0);
    s.ln1_gain = Tensor(Shape{dim}, 1.0);
    s.ln1_bias = Tensor(Shape{dim}, 0.0);
    s.w2 = gaussian_tensor({dim, dim}, 0.02, seed, prefix + ".w2");
    s.b2 = Tensor(Shape{dim}, 0.0);
    s.ln2_gain = Tensor(Shape{dim}, 1.0);
    s.ln2_bias = Tensor(Shape{dim}, 0.0);
    for (Tensor* t : {&s.w1, &s.b1, &s.ln1_gain, &s.ln1_bias, &s.w2, &s.b2, &s.ln2_gain,
                      &s.ln2_bias}) {
      t->set_requires_grad(true);
    }
  }
  return branch;
}

Tensor apply_adapter(const Tensor& features, const AdapterStageParams& stage, double slope,
                     bool use_bias, Tape* tape) {
  Tensor h = matmul(features, stage.w1, tape);
  if (use_bias) h = add_rowvec(h, stage.b1, tape);
  h = layer_norm(h, stage.ln1_gain, stage.ln1_bias, kLnEps, tape);
  h = leaky_relu(h, slope, tape);
  h = matmul(h, stage.w2, tape);
  if (use_bias) h = add_rowvec(h, stage.b2, tape);
  h = layer_norm(h, stage.ln2_gain, stage.ln2_bias, kLnEps, tape);
  return leaky_relu(h, slope, tape);
}

Tensor fuse_adapters(const Tensor& features, const AdapterBranchParams& branch, Tape* tape) {
  Tensor sum;
  for (std::size_t k = 0; k < branch.stages.size(); ++k) {
    Tensor out = apply_adapter(features, branch.stages[k], branch.leaky_slope,
                               branch.use_bias, tape);
    sum = k == 0 ? out : add(sum, out, tape);
  }
  return affine(sum, 1.0 / static_cast<double>(branch.stages.size()), 0.0, tape);
}

Tensor det_features(const Tensor& encoder_tokens, const AdapterBranchParams& det, Tape* tape) {
  return fuse_adapters(encoder_tokens, det, tape);
}

Tensor seg_features(const Tensor& encoder_tokens, const AdapterBranchParams& seg, Tape* tape) {
  if (encoder_tokens.rank() != 2 || encoder_tokens.shape()[0] < 2) {
    throw std::invalid_argument("seg_features: expected class token plus patch rows");
  }
  Tensor patches =
      slice_axis(encoder_tokens, 0, 1, encoder_tokens.shape()[0] - 1, tape);
  return fuse_adapters(patches, seg, tape);
}

PromptParams make_prompts(const std::string& category, std::size_t k_tokens, std::size_t n_t,
                          std::size_t dim, std::uint64_t seed) {
  PromptParams p;
  p.n_t = n_t;
  p.normal_ids = tokenize("a photo of a normal [obj]", category);
  p.abnormal_ids = tokenize("a photo of a damaged [obj]", category);
  p.learnable = gaussian_tensor({k_tokens, dim}, 0.02, seed, "prompt.learnable");
  p.learnable.set_requires_grad(true);
  return p;
}

std::pair<TokenSequence, TokenSequence> build_prompts(const PromptParams& params) {
  const std::size_t k = params.learnable.defined() ? params.learnable.shape()[0] : 0;
  const std::size_t n_len = params.normal_ids.size() + k;
  const std::size_t a_len = params.abnormal_ids.size() + k;
  if (n_len > params.n_t || a_len > params.n_t) {
    throw std::invalid_argument("build_prompts: anchors plus learnable tokens exceed N_t");
  }
  TokenSequence normal{params.normal_ids, params.learnable, params.n_t - n_len};
  TokenSequence abnormal{params.abnormal_ids, params.learnable, params.n_t - a_len};
  return {normal, abnormal};
}

}  // namespace msad
