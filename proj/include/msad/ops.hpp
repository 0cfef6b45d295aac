#pragma once

#include <cstdint>
#include <vector>

#include "msad/tensor.hpp"

namespace msad {

// Dense kernels. Every op validates shapes, rejects non-finite outputs, and,
// when `tape` is given and an input carries requires_grad, records a backward
// step. With tape == nullptr the same call is a pure forward computation.

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor transpose2d(const Tensor& x, Tape* tape = nullptr);

Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
// y = scale * x + shift, elementwise with scalar constants
Tensor affine(const Tensor& x, double scale, double shift, Tape* tape = nullptr);
// [n x d] plus a length-d vector added to every row
Tensor add_rowvec(const Tensor& x, const Tensor& vec, Tape* tape = nullptr);

Tensor vlog(const Tensor& x, Tape* tape = nullptr);             // natural log, x > 0
Tensor pow_const(const Tensor& x, double p, Tape* tape = nullptr);  // x >= 0, p >= 1
Tensor clamp(const Tensor& x, double lo, double hi, Tape* tape = nullptr);
Tensor relu(const Tensor& x, Tape* tape = nullptr);             // subgradient 0 at x == 0
Tensor leaky_relu(const Tensor& x, double slope, Tape* tape = nullptr);  // slope in (0,1)

Tensor softmax(const Tensor& x, std::size_t axis, Tape* tape = nullptr);
// normalization over the last axis; gain/bias are length-(last dim)
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps,
                  Tape* tape = nullptr);

Tensor mean_axis(const Tensor& x, std::size_t axis, Tape* tape = nullptr);
Tensor sum_all(const Tensor& x, Tape* tape = nullptr);   // -> shape {1}
Tensor mean_all(const Tensor& x, Tape* tape = nullptr);  // -> shape {1}

Tensor concat_axis(const Tensor& a, const Tensor& b, std::size_t axis, Tape* tape = nullptr);
Tensor slice_axis(const Tensor& x, std::size_t axis, std::size_t start, std::size_t len,
                  Tape* tape = nullptr);
Tensor reshape(const Tensor& x, Shape new_shape, Tape* tape = nullptr);

// gathers rows of a [V x d] table; gradient scatter-adds back into the table
Tensor rows_select(const Tensor& table, const std::vector<std::size_t>& ids,
                   Tape* tape = nullptr);

Tensor dot(const Tensor& u, const Tensor& v, Tape* tape = nullptr);        // 1-D -> {1}
Tensor div_scalar(const Tensor& a, const Tensor& b, Tape* tape = nullptr);  // {1}/{1}

// dot(u,v)/(|u||v|) in [-1,1]; a zero-norm operand yields 0 (no gradient) and
// bumps the diagnostic counter below
Tensor cosine_similarity(const Tensor& u, const Tensor& v, Tape* tape = nullptr);
std::uint64_t zero_norm_cosine_count();
void reset_zero_norm_cosine_count();

// align-corners interpolation of an [h x w x c] map to [H x W x c]; H >= h, W >= w
Tensor bilinear_upsample(const Tensor& x, std::size_t out_h, std::size_t out_w,
                         Tape* tape = nullptr);

}  // namespace msad
