#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "msad/encoders.hpp"
#include "msad/tensor.hpp"

namespace msad {

// One adapter stage: linear -> LN -> LeakyReLU -> linear -> LN -> LeakyReLU.
struct AdapterStageParams {
  Tensor w1, b1;            // D x D, D
  Tensor ln1_gain, ln1_bias;
  Tensor w2, b2;
  Tensor ln2_gain, ln2_bias;
};

struct AdapterBranchParams {
  std::array<AdapterStageParams, 4> stages;
  bool use_bias = true;
  double leaky_slope = 0.01;
};

AdapterBranchParams make_adapter_branch(std::size_t dim, std::uint64_t seed,
                                        const std::string& name, bool use_bias = true);

Tensor apply_adapter(const Tensor& features, const AdapterStageParams& stage, double slope,
                     bool use_bias, Tape* tape = nullptr);

// mean of the four stage outputs applied to the same input
Tensor fuse_adapters(const Tensor& features, const AdapterBranchParams& branch,
                     Tape* tape = nullptr);

// classification branch keeps all rows including the class token
Tensor det_features(const Tensor& encoder_tokens, const AdapterBranchParams& det,
                    Tape* tape = nullptr);
// segmentation branch consumes patch rows only (class token dropped)
Tensor seg_features(const Tensor& encoder_tokens, const AdapterBranchParams& seg,
                    Tape* tape = nullptr);

struct PromptParams {
  Tensor learnable;  // K x D, shared by both branches
  std::vector<std::size_t> normal_ids;
  std::vector<std::size_t> abnormal_ids;
  std::size_t n_t = 16;
};

PromptParams make_prompts(const std::string& category, std::size_t k_tokens, std::size_t n_t,
                          std::size_t dim, std::uint64_t seed);

// (normal, abnormal) sequences; anchors first, then the shared learnable rows,
// then PAD up to N_t
std::pair<TokenSequence, TokenSequence> build_prompts(const PromptParams& params);

}  // namespace msad
