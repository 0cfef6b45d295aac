#include "msad/encoders.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "msad/ops.hpp"
#include "msad/rng.hpp"

namespace msad {

namespace {

constexpr double kLnEps = 1e-5;

const std::vector<std::string> kWords = {
    "<pad>", "<unk>", "a",     "photo",  "of",   "normal", "damaged",
    "lesionblob", "brain", "retina", "lung", "breast", "texture", "scan"};

std::unordered_map<std::string, std::size_t> build_index() {
  std::unordered_map<std::string, std::size_t> m;
  for (std::size_t i = 0; i < kWords.size(); ++i) m[kWords[i]] = i;
  return m;
}

const std::unordered_map<std::string, std::size_t>& word_index() {
  static const auto idx = build_index();
  return idx;
}

void init_block(TransformerBlockParams& blk, std::size_t dim, std::size_t hidden,
                std::uint64_t seed, const std::string& prefix, bool trainable) {
  const double std_w = 0.02;
  blk.ln1_gain = Tensor(Shape{dim}, 1.0);
  blk.ln1_bias = Tensor(Shape{dim}, 0.0);
  blk.wq = gaussian_tensor({dim, dim}, std_w, seed, prefix + ".wq");
  blk.wk = gaussian_tensor({dim, dim}, std_w, seed, prefix + ".wk");
  blk.wv = gaussian_tensor({dim, dim}, std_w, seed, prefix + ".wv");
  blk.wo = gaussian_tensor({dim, dim}, std_w, seed, prefix + ".wo");
  blk.ln2_gain = Tensor(Shape{dim}, 1.0);
  blk.ln2_bias = Tensor(Shape{dim}, 0.0);
  blk.mlp_w1 = gaussian_tensor({dim, hidden}, std_w, seed, prefix + ".mlp_w1");
  blk.mlp_b1 = Tensor(Shape{hidden}, 0.0);
  blk.mlp_w2 = gaussian_tensor({hidden, dim}, std_w, seed, prefix + ".mlp_w2");
  blk.mlp_b2 = Tensor(Shape{dim}, 0.0);
  for (Tensor* t : {&blk.ln1_gain, &blk.ln1_bias, &blk.wq, &blk.wk, &blk.wv, &blk.wo,
                    &blk.ln2_gain, &blk.ln2_bias, &blk.mlp_w1, &blk.mlp_b1, &blk.mlp_w2,
                    &blk.mlp_b2}) {
    t->set_requires_grad(trainable);
  }
}

Tensor self_attention(const Tensor& x, const TransformerBlockParams& blk, std::size_t heads,
                      Tape* tape) {
  const std::size_t dim = x.shape()[1];
  if (dim % heads != 0) {
    throw std::invalid_argument("self_attention: dim not divisible by head count");
  }
  const std::size_t dh = dim / heads;
  Tensor q = matmul(x, blk.wq, tape);
  Tensor k = matmul(x, blk.wk, tape);
  Tensor v = matmul(x, blk.wv, tape);
  Tensor merged;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice_axis(q, 1, h * dh, dh, tape);
    Tensor kh = slice_axis(k, 1, h * dh, dh, tape);
    Tensor vh = slice_axis(v, 1, h * dh, dh, tape);
    Tensor scores = affine(matmul(qh, transpose2d(kh, tape), tape), scale, 0.0, tape);
    Tensor attn = softmax(scores, 1, tape);
    Tensor oh = matmul(attn, vh, tape);
    merged = h == 0 ? oh : concat_axis(merged, oh, 1, tape);
  }
  return matmul(merged, blk.wo, tape);
}

}  // namespace

const std::vector<std::string>& Vocabulary::words() { return kWords; }

std::size_t Vocabulary::id(const std::string& word) {
  auto it = word_index().find(word);
  return it == word_index().end() ? unk_id() : it->second;
}

std::size_t Vocabulary::size() { return kWords.size(); }

bool Vocabulary::contains(const std::string& word) {
  return word_index().count(word) != 0;
}

std::vector<std::size_t> tokenize(const std::string& tmpl, const std::string& obj) {
  if (tmpl.empty()) throw std::invalid_argument("tokenize: empty template");
  std::string filled = tmpl;
  const std::string slot = "[obj]";
  for (std::size_t pos = filled.find(slot); pos != std::string::npos;
       pos = filled.find(slot)) {
    filled.replace(pos, slot.size(), obj);
  }
  std::vector<std::size_t> ids;
  std::istringstream in(filled);
  std::string word;
  while (in >> word) ids.push_back(Vocabulary::id(word));
  return ids;
}

Tensor transformer_block(const Tensor& x, const TransformerBlockParams& blk, std::size_t heads,
                         double leaky_slope, Tape* tape) {
  Tensor normed = layer_norm(x, blk.ln1_gain, blk.ln1_bias, kLnEps, tape);
  Tensor with_attn = add(x, self_attention(normed, blk, heads, tape), tape);
  Tensor normed2 = layer_norm(with_attn, blk.ln2_gain, blk.ln2_bias, kLnEps, tape);
  Tensor hidden = leaky_relu(add_rowvec(matmul(normed2, blk.mlp_w1, tape), blk.mlp_b1, tape),
                             leaky_slope, tape);
  Tensor mlp_out = add_rowvec(matmul(hidden, blk.mlp_w2, tape), blk.mlp_b2, tape);
  return add(with_attn, mlp_out, tape);
}

VisionEncoderParams make_vision_encoder(std::size_t image_size, std::size_t patch,
                                        std::size_t dim, std::size_t depth, std::size_t heads,
                                        std::uint64_t seed, bool frozen) {
  if (image_size % patch != 0) {
    throw std::invalid_argument("make_vision_encoder: image size not divisible by patch");
  }
  VisionEncoderParams p;
  p.image_size = image_size;
  p.patch = patch;
  p.dim = dim;
  p.heads = heads;
  p.frozen = frozen;
  const bool trainable = !frozen;
  const std::size_t n_tokens = p.patch_count() + 1;
  p.patch_proj = gaussian_tensor({patch * patch * 3, dim}, 0.02, seed, "vision.patch_proj");
  p.class_token = gaussian_tensor({dim}, 0.02, seed, "vision.class_token");
  p.pos = gaussian_tensor({n_tokens, dim}, 0.02, seed, "vision.pos");
  p.patch_proj.set_requires_grad(trainable);
  p.class_token.set_requires_grad(trainable);
  p.pos.set_requires_grad(trainable);
  p.blocks.resize(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    init_block(p.blocks[i], dim, 2 * dim, seed, "vision.block" + std::to_string(i), trainable);
  }
  p.ln_final_gain = Tensor(Shape{dim}, 1.0);
  p.ln_final_bias = Tensor(Shape{dim}, 0.0);
  p.ln_final_gain.set_requires_grad(trainable);
  p.ln_final_bias.set_requires_grad(trainable);
  return p;
}

TextEncoderParams make_text_encoder(std::size_t n_t, std::size_t dim, std::size_t depth,
                                    std::size_t heads, std::uint64_t seed, bool frozen) {
  TextEncoderParams p;
  p.dim = dim;
  p.heads = heads;
  p.n_t = n_t;
  p.frozen = frozen;
  const bool trainable = !frozen;
  p.table = gaussian_tensor({Vocabulary::size(), dim}, 0.02, seed, "text.table");
  p.pos = gaussian_tensor({n_t, dim}, 0.02, seed, "text.pos");
  p.table.set_requires_grad(trainable);
  p.pos.set_requires_grad(trainable);
  p.blocks.resize(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    init_block(p.blocks[i], dim, 2 * dim, seed, "text.block" + std::to_string(i), trainable);
  }
  p.ln_final_gain = Tensor(Shape{dim}, 1.0);
  p.ln_final_bias = Tensor(Shape{dim}, 0.0);
  p.ln_final_gain.set_requires_grad(trainable);
  p.ln_final_bias.set_requires_grad(trainable);
  return p;
}

Tensor patch_tokens(const Tensor& image, const VisionEncoderParams& p, Tape* tape) {
  if (image.rank() != 3 || image.shape()[2] != 3) {
    throw std::invalid_argument("patch_tokens: image must be [H x W x 3]");
  }
  const std::size_t h = image.shape()[0], w = image.shape()[1];
  if (h % p.patch != 0 || w % p.patch != 0) {
    throw std::invalid_argument("patch_tokens: image dimensions not divisible by patch size");
  }
  if (h != p.image_size || w != p.image_size) {
    throw std::invalid_argument("patch_tokens: image size differs from encoder configuration");
  }
  const double* px = image.data();
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (px[i] < 0.0 || px[i] > 1.0) {
      throw std::invalid_argument("patch_tokens: pixel values must lie in [0,1]");
    }
  }
  const std::size_t side = h / p.patch;
  const std::size_t n_patches = side * side;
  const std::size_t patch_len = p.patch * p.patch * 3;

  // raster order over patches, row-major pixels inside, channels innermost
  Tensor patches(Shape{n_patches, patch_len});
  double* out = patches.data();
  for (std::size_t py = 0; py < side; ++py) {
    for (std::size_t pxi = 0; pxi < side; ++pxi) {
      double* dst = out + (py * side + pxi) * patch_len;
      for (std::size_t y = 0; y < p.patch; ++y) {
        for (std::size_t x = 0; x < p.patch; ++x) {
          const std::size_t iy = py * p.patch + y;
          const std::size_t ix = pxi * p.patch + x;
          for (std::size_t c = 0; c < 3; ++c) {
            *dst++ = px[(iy * w + ix) * 3 + c];
          }
        }
      }
    }
  }
  Tensor embedded = matmul(patches, p.patch_proj, tape);
  Tensor cls = reshape(p.class_token, {1, p.dim}, tape);
  return concat_axis(cls, embedded, 0, tape);
}

Tensor encode_image(const Tensor& image, const VisionEncoderParams& p, Tape* tape) {
  Tensor x = patch_tokens(image, p, tape);
  if (x.shape()[0] != p.pos.shape()[0]) {
    throw std::invalid_argument("encode_image: positional table does not match patch grid");
  }
  x = add(x, p.pos, tape);
  for (const auto& blk : p.blocks) {
    x = transformer_block(x, blk, p.heads, p.leaky_slope, tape);
  }
  return layer_norm(x, p.ln_final_gain, p.ln_final_bias, kLnEps, tape);
}

Tensor encode_text(const TokenSequence& seq, const TextEncoderParams& p, Tape* tape) {
  if (seq.length() != p.n_t) {
    throw std::invalid_argument("encode_text: sequence length " +
                                std::to_string(seq.length()) + " != N_t " +
                                std::to_string(p.n_t));
  }
  Tensor x = rows_select(p.table, seq.anchor_ids, tape);
  if (seq.learnable.defined() && seq.learnable.shape()[0] > 0) {
    x = concat_axis(x, seq.learnable, 0, tape);
  }
  if (seq.pad_count > 0) {
    std::vector<std::size_t> pad_ids(seq.pad_count, Vocabulary::pad_id());
    x = concat_axis(x, rows_select(p.table, pad_ids, tape), 0, tape);
  }
  x = add(x, p.pos, tape);
  for (const auto& blk : p.blocks) {
    x = transformer_block(x, blk, p.heads, p.leaky_slope, tape);
  }
  return layer_norm(x, p.ln_final_gain, p.ln_final_bias, kLnEps, tape);
}

}  // namespace msad
