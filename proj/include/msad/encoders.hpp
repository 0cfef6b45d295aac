#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msad/tensor.hpp"

namespace msad {

// Closed vocabulary: template words, the synthetic category names, UNK and PAD.
// Ids are stable; unknown words map to UNK.
class Vocabulary {
 public:
  static const std::vector<std::string>& words();
  static std::size_t id(const std::string& word);
  static std::size_t pad_id() { return 0; }
  static std::size_t unk_id() { return 1; }
  static std::size_t size();
  static bool contains(const std::string& word);
};

// Fills the [obj] slot of a template and whitespace-tokenizes the result.
std::vector<std::size_t> tokenize(const std::string& tmpl, const std::string& obj);

struct TransformerBlockParams {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, wk, wv, wo;  // D x D
  Tensor ln2_gain, ln2_bias;
  Tensor mlp_w1, mlp_b1;  // D x Dh, Dh
  Tensor mlp_w2, mlp_b2;  // Dh x D, D
};

struct VisionEncoderParams {
  std::size_t image_size = 64;
  std::size_t patch = 8;
  std::size_t dim = 32;
  std::size_t heads = 4;
  double leaky_slope = 0.01;
  Tensor patch_proj;   // (P*P*3) x D
  Tensor class_token;  // D
  Tensor pos;          // (N_i + 1) x D
  std::vector<TransformerBlockParams> blocks;
  Tensor ln_final_gain, ln_final_bias;
  bool frozen = true;

  std::size_t patches_per_side() const { return image_size / patch; }
  std::size_t patch_count() const { return patches_per_side() * patches_per_side(); }
};

struct TextEncoderParams {
  std::size_t dim = 32;
  std::size_t heads = 4;
  std::size_t n_t = 16;
  double leaky_slope = 0.01;
  Tensor table;  // V x D word embeddings
  Tensor pos;    // N_t x D
  std::vector<TransformerBlockParams> blocks;
  Tensor ln_final_gain, ln_final_bias;
  bool frozen = true;
};

// Prompt input: anchor word ids, then K continuous learnable rows, then PAD.
// Both branches hand the same learnable tensor to the encoder.
struct TokenSequence {
  std::vector<std::size_t> anchor_ids;
  Tensor learnable;  // K x D; may have zero rows
  std::size_t pad_count = 0;

  std::size_t length() const {
    return anchor_ids.size() + (learnable.defined() ? learnable.shape()[0] : 0) + pad_count;
  }
};

VisionEncoderParams make_vision_encoder(std::size_t image_size, std::size_t patch,
                                        std::size_t dim, std::size_t depth, std::size_t heads,
                                        std::uint64_t seed, bool frozen = true);

TextEncoderParams make_text_encoder(std::size_t n_t, std::size_t dim, std::size_t depth,
                                    std::size_t heads, std::uint64_t seed, bool frozen = true);

// Patch projection plus class token, before positional embeddings are added.
// Row 0 is the class token, rows 1..N_i follow patch raster order.
Tensor patch_tokens(const Tensor& image, const VisionEncoderParams& p, Tape* tape = nullptr);

// Full vision forward: [(N_i+1) x D] token embeddings.
Tensor encode_image(const Tensor& image, const VisionEncoderParams& p, Tape* tape = nullptr);

// Per-token text features [N_t x D].
Tensor encode_text(const TokenSequence& seq, const TextEncoderParams& p, Tape* tape = nullptr);

// Shared pre-LN transformer block; exposed for tests.
Tensor transformer_block(const Tensor& x, const TransformerBlockParams& blk, std::size_t heads,
                         double leaky_slope, Tape* tape = nullptr);

}  // namespace msad
