#include "msad/ops.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

namespace msad {

namespace {

std::atomic<std::uint64_t> g_zero_norm_cosine{0};

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

void ensure_finite(const Tensor& t, const char* op) {
  const double* d = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(d[i])) {
      throw std::runtime_error(std::string(op) + ": non-finite output at index " +
                               std::to_string(i));
    }
  }
}

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) shape_fail(op, "undefined tensor operand");
}

bool record_wanted(Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void mark_output(const Tensor& out, Tape* tape) {
  out.set_requires_grad(true);
  out.impl()->producer = tape;
}

struct AxisSpan {
  std::size_t outer, n, inner;
};

AxisSpan axis_span(const Shape& s, std::size_t axis) {
  AxisSpan sp{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) sp.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
  return sp;
}

void check_axis(const Tensor& x, std::size_t axis, const char* op) {
  if (axis >= x.rank()) {
    shape_fail(op, "axis " + std::to_string(axis) + " out of range for " +
                       shape_str(x.shape()));
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    shape_fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// shared body for elementwise y = f(x) ops with local derivative df(x)
template <typename Fwd, typename Dfn>
Tensor unary_elementwise(const Tensor& x, Tape* tape, const char* op, Fwd f, Dfn df) {
  check_defined(x, op);
  Tensor out(x.shape());
  const double* xd = x.data();
  double* od = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) od[i] = f(xd[i]);
  ensure_finite(out, op);
  if (record_wanted(tape, {&x})) {
    mark_output(out, tape);
    tape->record([x, out, df] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      std::vector<double>& gx = x.grad();
      const double* xd2 = x.data();
      for (std::size_t i = 0; i < x.size(); ++i) gx[i] += df(xd2[i]) * go[i];
    });
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2) {
    shape_fail("matmul", "expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const std::size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) {
    shape_fail("matmul", "inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
  }
  Tensor out(Shape{m, n});
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      if (av == 0.0) continue;
      const double* brow = bd + p * n;
      double* orow = od + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  ensure_finite(out, "matmul");
  if (record_wanted(tape, {&a, &b})) {
    mark_output(out, tape);
    tape->record([a, b, out, m, k, n] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      if (a.requires_grad()) {
        std::vector<double>& ga = a.grad();
        const double* bd2 = b.data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* grow = go.data() + i * n;
            const double* brow = bd2 + p * n;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            ga[i * k + p] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        std::vector<double>& gb = b.grad();
        const double* ad2 = a.data();
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = go.data() + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double av = ad2[i * k + p];
            if (av == 0.0) continue;
            double* gbrow = gb.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
          }
        }
      }
    });
  }
  return out;
}

Tensor transpose2d(const Tensor& x, Tape* tape) {
  check_defined(x, "transpose2d");
  if (x.rank() != 2) shape_fail("transpose2d", "expects rank 2, got " + shape_str(x.shape()));
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  Tensor out(Shape{n, m});
  const double* xd = x.data();
  double* od = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) od[j * m + i] = xd[i * n + j];
  if (record_wanted(tape, {&x})) {
    mark_output(out, tape);
    tape->record([x, out, m, n] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      std::vector<double>& gx = x.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += go[j * m + i];
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
  check_defined(a, "add");
  check_defined(b, "add");
  check_same_shape(a, b, "add");
  Tensor out(a.shape());
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) od[i] = ad[i] + bd[i];
  ensure_finite(out, "add");
  if (record_wanted(tape, {&a, &b})) {
    mark_output(out, tape);
    tape->record([a, b, out] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      if (a.requires_grad()) {
        std::vector<double>& ga = a.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (b.requires_grad()) {
        std::vector<double>& gb = b.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b, Tape* tape) {
  check_defined(a, "sub");
  check_defined(b, "sub");
  check_same_shape(a, b, "sub");
  Tensor out(a.shape());
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) od[i] = ad[i] - bd[i];
  ensure_finite(out, "sub");
  if (record_wanted(tape, {&a, &b})) {
    mark_output(out, tape);
    tape->record([a, b, out] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      if (a.requires_grad()) {
        std::vector<double>& ga = a.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (b.requires_grad()) {
        std::vector<double>& gb = b.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
  check_defined(a, "mul");
  check_defined(b, "mul");
  check_same_shape(a, b, "mul");
  Tensor out(a.shape());
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) od[i] = ad[i] * bd[i];
  ensure_finite(out, "mul");
  if (record_wanted(tape, {&a, &b})) {
    mark_output(out, tape);
    tape->record([a, b, out] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      if (a.requires_grad()) {
        std::vector<double>& ga = a.grad();
        const double* bd2 = b.data();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += bd2[i] * go[i];
      }
      if (b.requires_grad()) {
        std::vector<double>& gb = b.grad();
        const double* ad2 = a.data();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += ad2[i] * go[i];
      }
    });
  }
  return out;
}

Tensor affine(const Tensor& x, double scale, double shift, Tape* tape) {
  return unary_elementwise(
      x, tape, "affine", [scale, shift](double v) { return scale * v + shift; },
      [scale](double) { return scale; });
}

Tensor add_rowvec(const Tensor& x, const Tensor& vec, Tape* tape) {
  check_defined(x, "add_rowvec");
  check_defined(vec, "add_rowvec");
  if (x.rank() != 2 || vec.rank() != 1 || vec.shape()[0] != x.shape()[1]) {
    shape_fail("add_rowvec", shape_str(x.shape()) + " + " + shape_str(vec.shape()));
  }
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  Tensor out(x.shape());
  const double* xd = x.data();
  const double* vd = vec.data();
  double* od = out.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) od[i * d + j] = xd[i * d + j] + vd[j];
  ensure_finite(out, "add_rowvec");
  if (record_wanted(tape, {&x, &vec})) {
    mark_output(out, tape);
    tape->record([x, vec, out, n, d] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      if (x.requires_grad()) {
        std::vector<double>& gx = x.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
      }
      if (vec.requires_grad()) {
        std::vector<double>& gv = vec.grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) gv[j] += go[i * d + j];
      }
    });
  }
  return out;
}

Tensor vlog(const Tensor& x, Tape* tape) {
  const double* xd = x.defined() ? x.data() : nullptr;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (xd[i] <= 0.0) {
      throw std::invalid_argument("vlog: non-positive input " + std::to_string(xd[i]));
    }
  }
  return unary_elementwise(
      x, tape, "vlog", [](double v) { return std::log(v); },
      [](double v) { return 1.0 / v; });
}

Tensor pow_const(const Tensor& x, double p, Tape* tape) {
  if (p < 1.0) throw std::invalid_argument("pow_const: exponent must be >= 1");
  const double* xd = x.defined() ? x.data() : nullptr;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (xd[i] < 0.0) throw std::invalid_argument("pow_const: negative base");
  }
  return unary_elementwise(
      x, tape, "pow_const", [p](double v) { return std::pow(v, p); },
      [p](double v) { return p == 1.0 ? 1.0 : p * std::pow(v, p - 1.0); });
}

Tensor clamp(const Tensor& x, double lo, double hi, Tape* tape) {
  if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
  return unary_elementwise(
      x, tape, "clamp",
      [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](double v) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor relu(const Tensor& x, Tape* tape) {
  return unary_elementwise(
      x, tape, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope, Tape* tape) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw std::invalid_argument("leaky_relu: slope must lie in (0,1)");
  }
  return unary_elementwise(
      x, tape, "leaky_relu", [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v) { return v >= 0.0 ? 1.0 : slope; });
}

Tensor softmax(const Tensor& x, std::size_t axis, Tape* tape) {
  check_defined(x, "softmax");
  check_axis(x, axis, "softmax");
  const AxisSpan sp = axis_span(x.shape(), axis);
  Tensor out(x.shape());
  const double* xd = x.data();
  double* od = out.data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t j = 0; j < sp.inner; ++j) {
      const std::size_t base = o * sp.n * sp.inner + j;
      double mx = xd[base];
      for (std::size_t i = 1; i < sp.n; ++i) mx = std::max(mx, xd[base + i * sp.inner]);
      double sum = 0.0;
      for (std::size_t i = 0; i < sp.n; ++i) {
        const double e = std::exp(xd[base + i * sp.inner] - mx);
        od[base + i * sp.inner] = e;
        sum += e;
      }
      for (std::size_t i = 0; i < sp.n; ++i) od[base + i * sp.inner] /= sum;
    }
  }
  ensure_finite(out, "softmax");
  if (record_wanted(tape, {&x})) {
    mark_output(out, tape);
    tape->record([x, out, sp] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      std::vector<double>& gx = x.grad();
      const double* yd = out.data();
      for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t j = 0; j < sp.inner; ++j) {
          const std::size_t base = o * sp.n * sp.inner + j;
          double inner_sum = 0.0;
          for (std::size_t i = 0; i < sp.n; ++i) {
            const std::size_t k = base + i * sp.inner;
            inner_sum += go[k] * yd[k];
          }
          for (std::size_t i = 0; i < sp.n; ++i) {
            const std::size_t k = base + i * sp.inner;
            gx[k] += yd[k] * (go[k] - inner_sum);
          }
        }
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps,
                  Tape* tape) {
  check_defined(x, "layer_norm");
  check_defined(gain, "layer_norm");
  check_defined(bias, "layer_norm");
  if (x.rank() < 1) shape_fail("layer_norm", "rank must be >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be positive");
  const std::size_t n = x.shape().back();
  if (gain.rank() != 1 || gain.shape()[0] != n || bias.rank() != 1 || bias.shape()[0] != n) {
    shape_fail("layer_norm", "gain/bias must be length " + std::to_string(n));
  }
  const std::size_t rows = x.size() / n;
  Tensor out(x.shape());
  const double* xd = x.data();
  const double* gd = gain.data();
  const double* bd = bias.data();
  double* od = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xd + r * n;
    double* orow = od + r * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xr[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = xr[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) orow[j] = gd[j] * ((xr[j] - mean) * inv) + bd[j];
  }
  ensure_finite(out, "layer_norm");
  if (record_wanted(tape, {&x, &gain, &bias})) {
    mark_output(out, tape);
    tape->record([x, gain, bias, out, n, rows, eps] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      const double* xd2 = x.data();
      const double* gd2 = gain.data();
      std::vector<double> xhat(n), w(n);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xd2 + r * n;
        const double* gr = go.data() + r * n;
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += xr[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double c = xr[j] - mean;
          var += c * c;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        double w_mean = 0.0, wx_mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          xhat[j] = (xr[j] - mean) * inv;
          w[j] = gr[j] * gd2[j];
          w_mean += w[j];
          wx_mean += w[j] * xhat[j];
        }
        w_mean /= static_cast<double>(n);
        wx_mean /= static_cast<double>(n);
        if (x.requires_grad()) {
          std::vector<double>& gx = x.grad();
          double* gxr = gx.data() + r * n;
          for (std::size_t j = 0; j < n; ++j) {
            gxr[j] += inv * (w[j] - w_mean - xhat[j] * wx_mean);
          }
        }
        if (gain.requires_grad()) {
          std::vector<double>& gg = gain.grad();
          for (std::size_t j = 0; j < n; ++j) gg[j] += gr[j] * xhat[j];
        }
        if (bias.requires_grad()) {
          std::vector<double>& gb = bias.grad();
          for (std::size_t j = 0; j < n; ++j) gb[j] += gr[j];
        }
      }
    });
  }
  return out;
}

Tensor mean_axis(const Tensor& x, std::size_t axis, Tape* tape) {
  check_defined(x, "mean_axis");
  check_axis(x, axis, "mean_axis");
  const AxisSpan sp = axis_span(x.shape(), axis);
  if (sp.n == 0) throw std::invalid_argument("mean_axis: empty axis");
  Shape out_shape;
  if (x.rank() == 1) {
    out_shape = {1};
  } else {
    out_shape = x.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  Tensor out(out_shape);
  const double* xd = x.data();
  double* od = out.data();
  const double invn = 1.0 / static_cast<double>(sp.n);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t j = 0; j < sp.inner; ++j) {
      double acc = 0.0;
      const std::size_t base = o * sp.n * sp.inner + j;
      for (std::size_t i = 0; i < sp.n; ++i) acc += xd[base + i * sp.inner];
      od[o * sp.inner + j] = acc * invn;
    }
  }
  ensure_finite(out, "mean_axis");
  if (record_wanted(tape, {&x})) {
    mark_output(out, tape);
    tape->record([x, out, sp, invn] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      std::vector<double>& gx = x.grad();
      for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t j = 0; j < sp.inner; ++j) {
          const double g = go[o * sp.inner + j] * invn;
          const std::size_t base = o * sp.n * sp.inner + j;
          for (std::size_t i = 0; i < sp.n; ++i) gx[base + i * sp.inner] += g;
        }
      }
    });
  }
  return out;
}

Tensor sum_all(const Tensor& x, Tape* tape) {
  check_defined(x, "sum_all");
  double acc = 0.0;
  const double* xd = x.data();
  for (std::size_t i = 0; i < x.size(); ++i) acc += xd[i];
  Tensor out = Tensor::scalar(acc);
  ensure_finite(out, "sum_all");
  if (record_wanted(tape, {&x})) {
    mark_output(out, tape);
    tape->record([x, out] {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      std::vector<double>& gx = x.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor mean_all(const Tensor& x, Tape* tape) {
  if (x.size() == 0) throw std::invalid_argument("mean_all: empty tensor");
  Tensor s = sum_all(x, tape);
  return affine(s, 1.0 / static_cast<double>(x.size()), 0.0, tape);
}

Tensor concat_axis(const Tensor& a, const Tensor& b, std::size_t axis, Tape* tape) {
  check_defined(a, "concat_axis");
  check_defined(b, "concat_axis");
  if (a.rank() != b.rank()) shape_fail("concat_axis", "rank mismatch");
  check_axis(a, axis, "concat_axis");
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (i != axis && a.shape()[i] != b.shape()[i]) {
      shape_fail("concat_axis", "off-axis shapes disagree: " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
  }
  Shape out_shape = a.shape();
  out_shape[axis] += b.shape()[axis];
  const AxisSpan sa = axis_span(a.shape(), axis);
  const AxisSpan sb = axis_span(b.shape(), axis);
  const std::size_t n_out = sa.n + sb.n;
  Tensor out(out_shape);
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = out.data();
  for (std::size_t o = 0; o < sa.outer; ++o) {
    double* obase = od + o * n_out * sa.inner;
    const double* abase = ad + o * sa.n * sa.inner;
    const double* bbase = bd + o * sb.n * sb.inner;
    for (std::size_t i = 0; i < sa.n * sa.inner; ++i) obase[i] = abase[i];
    for (std::size_t i = 0; i < sb.n * sb.inner; ++i) obase[sa.n * sa.inner + i] = bbase[i];
  }
  if (record_wanted(tape, {&a, &b})) {
    mark_output(out, tape);
    tape->record([a, b, out, sa, sb, n_out] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      for (std::size_t o = 0; o < sa.outer; ++o) {
        const double* gbase = go.data() + o * n_out * sa.inner;
        if (a.requires_grad()) {
          std::vector<double>& ga = a.grad();
          double* abase = ga.data() + o * sa.n * sa.inner;
          for (std::size_t i = 0; i < sa.n * sa.inner; ++i) abase[i] += gbase[i];
        }
        if (b.requires_grad()) {
          std::vector<double>& gb = b.grad();
          double* bbase = gb.data() + o * sb.n * sb.inner;
          for (std::size_t i = 0; i < sb.n * sb.inner; ++i)
            bbase[i] += gbase[sa.n * sa.inner + i];
        }
      }
    });
  }
  return out;
}

Tensor slice_axis(const Tensor& x, std::size_t axis, std::size_t start, std::size_t len,
                  Tape* tape) {
  check_defined(x, "slice_axis");
  check_axis(x, axis, "slice_axis");
  if (start + len > x.shape()[axis]) {
    shape_fail("slice_axis", "range [" + std::to_string(start) + ", " +
                                 std::to_string(start + len) + ") exceeds axis size " +
                                 std::to_string(x.shape()[axis]));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  const AxisSpan sp = axis_span(x.shape(), axis);
  Tensor out(out_shape);
  const double* xd = x.data();
  double* od = out.data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    const double* xbase = xd + (o * sp.n + start) * sp.inner;
    double* obase = od + o * len * sp.inner;
    for (std::size_t i = 0; i < len * sp.inner; ++i) obase[i] = xbase[i];
  }
  if (record_wanted(tape, {&x})) {
    mark_output(out, tape);
    tape->record([x, out, sp, start, len] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      std::vector<double>& gx = x.grad();
      for (std::size_t o = 0; o < sp.outer; ++o) {
        double* xbase = gx.data() + (o * sp.n + start) * sp.inner;
        const double* gbase = go.data() + o * len * sp.inner;
        for (std::size_t i = 0; i < len * sp.inner; ++i) xbase[i] += gbase[i];
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape new_shape, Tape* tape) {
  check_defined(x, "reshape");
  if (numel(new_shape) != x.size()) {
    shape_fail("reshape", shape_str(x.shape()) + " -> " + shape_str(new_shape) +
                              " changes element count");
  }
  Tensor out(std::move(new_shape), std::vector<double>(x.data(), x.data() + x.size()));
  if (record_wanted(tape, {&x})) {
    mark_output(out, tape);
    tape->record([x, out] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      std::vector<double>& gx = x.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    });
  }
  return out;
}

Tensor rows_select(const Tensor& table, const std::vector<std::size_t>& ids, Tape* tape) {
  check_defined(table, "rows_select");
  if (table.rank() != 2) shape_fail("rows_select", "table must be rank 2");
  const std::size_t v = table.shape()[0], d = table.shape()[1];
  for (std::size_t id : ids) {
    if (id >= v) {
      shape_fail("rows_select", "id " + std::to_string(id) + " outside table of " +
                                    std::to_string(v) + " rows");
    }
  }
  Tensor out(Shape{ids.size(), d});
  const double* td = table.data();
  double* od = out.data();
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) od[i * d + j] = td[ids[i] * d + j];
  if (record_wanted(tape, {&table})) {
    mark_output(out, tape);
    tape->record([table, out, ids, d] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      std::vector<double>& gt = table.grad();
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) gt[ids[i] * d + j] += go[i * d + j];
    });
  }
  return out;
}

Tensor dot(const Tensor& u, const Tensor& v, Tape* tape) {
  check_defined(u, "dot");
  check_defined(v, "dot");
  if (u.rank() != 1 || v.rank() != 1 || u.size() != v.size()) {
    shape_fail("dot", shape_str(u.shape()) + " . " + shape_str(v.shape()));
  }
  double acc = 0.0;
  const double* ud = u.data();
  const double* vd = v.data();
  for (std::size_t i = 0; i < u.size(); ++i) acc += ud[i] * vd[i];
  Tensor out = Tensor::scalar(acc);
  ensure_finite(out, "dot");
  if (record_wanted(tape, {&u, &v})) {
    mark_output(out, tape);
    tape->record([u, v, out] {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      if (u.requires_grad()) {
        std::vector<double>& gu = u.grad();
        const double* vd2 = v.data();
        for (std::size_t i = 0; i < gu.size(); ++i) gu[i] += g * vd2[i];
      }
      if (v.requires_grad()) {
        std::vector<double>& gv = v.grad();
        const double* ud2 = u.data();
        for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += g * ud2[i];
      }
    });
  }
  return out;
}

Tensor div_scalar(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.size() != 1 || b.size() != 1) {
    shape_fail("div_scalar", "both operands must be scalars");
  }
  const double bv = b.value();
  if (bv == 0.0) throw std::invalid_argument("div_scalar: division by zero");
  Tensor out = Tensor::scalar(a.value() / bv);
  ensure_finite(out, "div_scalar");
  if (record_wanted(tape, {&a, &b})) {
    mark_output(out, tape);
    tape->record([a, b, out] {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      const double av = a.value(), bv2 = b.value();
      if (a.requires_grad()) a.grad()[0] += g / bv2;
      if (b.requires_grad()) b.grad()[0] -= g * av / (bv2 * bv2);
    });
  }
  return out;
}

std::uint64_t zero_norm_cosine_count() { return g_zero_norm_cosine.load(); }
void reset_zero_norm_cosine_count() { g_zero_norm_cosine.store(0); }

Tensor cosine_similarity(const Tensor& u, const Tensor& v, Tape* tape) {
  check_defined(u, "cosine_similarity");
  check_defined(v, "cosine_similarity");
  if (u.rank() != 1 || v.rank() != 1 || u.size() != v.size()) {
    shape_fail("cosine_similarity", shape_str(u.shape()) + " vs " + shape_str(v.shape()));
  }
  const double* ud = u.data();
  const double* vd = v.data();
  double d = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d += ud[i] * vd[i];
    uu += ud[i] * ud[i];
    vv += vd[i] * vd[i];
  }
  if (uu == 0.0 || vv == 0.0) {
    // degenerate feature: defined as 0, no gradient, counted for diagnostics
    g_zero_norm_cosine.fetch_add(1);
    return Tensor::scalar(0.0);
  }
  const double nu = std::sqrt(uu), nv = std::sqrt(vv);
  double c = d / (nu * nv);
  c = std::min(1.0, std::max(-1.0, c));
  Tensor out = Tensor::scalar(c);
  if (record_wanted(tape, {&u, &v})) {
    mark_output(out, tape);
    tape->record([u, v, out, nu, nv, c] {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      const double* ud2 = u.data();
      const double* vd2 = v.data();
      if (u.requires_grad()) {
        std::vector<double>& gu = u.grad();
        for (std::size_t i = 0; i < gu.size(); ++i) {
          gu[i] += g * (vd2[i] / (nu * nv) - c * ud2[i] / (nu * nu));
        }
      }
      if (v.requires_grad()) {
        std::vector<double>& gv = v.grad();
        for (std::size_t i = 0; i < gv.size(); ++i) {
          gv[i] += g * (ud2[i] / (nu * nv) - c * vd2[i] / (nv * nv));
        }
      }
    });
  }
  return out;
}

namespace {

struct TapWeights {
  std::size_t lo, hi;
  double t;
};

TapWeights upsample_taps(std::size_t dst, std::size_t dst_size, std::size_t src_size) {
  if (src_size == 1) return {0, 0, 0.0};
  const double s = static_cast<double>(dst) * static_cast<double>(src_size - 1) /
                   static_cast<double>(dst_size - 1);
  std::size_t lo = static_cast<std::size_t>(s);
  if (lo >= src_size - 1) lo = src_size - 2;
  return {lo, lo + 1, s - static_cast<double>(lo)};
}

}  // namespace

Tensor bilinear_upsample(const Tensor& x, std::size_t out_h, std::size_t out_w, Tape* tape) {
  check_defined(x, "bilinear_upsample");
  if (x.rank() != 3) shape_fail("bilinear_upsample", "expects [h x w x c]");
  const std::size_t h = x.shape()[0], w = x.shape()[1], c = x.shape()[2];
  if (out_h < h || out_w < w) {
    shape_fail("bilinear_upsample", "target " + std::to_string(out_h) + "x" +
                                        std::to_string(out_w) +
                                        " smaller than source; downsampling unsupported");
  }
  Tensor out(Shape{out_h, out_w, c});
  const double* xd = x.data();
  double* od = out.data();
  for (std::size_t y = 0; y < out_h; ++y) {
    const TapWeights ty = upsample_taps(y, out_h, h);
    for (std::size_t xx = 0; xx < out_w; ++xx) {
      const TapWeights tx = upsample_taps(xx, out_w, w);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v00 = xd[(ty.lo * w + tx.lo) * c + ch];
        const double v01 = xd[(ty.lo * w + tx.hi) * c + ch];
        const double v10 = xd[(ty.hi * w + tx.lo) * c + ch];
        const double v11 = xd[(ty.hi * w + tx.hi) * c + ch];
        od[(y * out_w + xx) * c + ch] = (1.0 - ty.t) * ((1.0 - tx.t) * v00 + tx.t * v01) +
                                        ty.t * ((1.0 - tx.t) * v10 + tx.t * v11);
      }
    }
  }
  ensure_finite(out, "bilinear_upsample");
  if (record_wanted(tape, {&x})) {
    mark_output(out, tape);
    tape->record([x, out, h, w, c, out_h, out_w] {
      if (!out.has_grad()) return;
      const std::vector<double>& go = out.grad();
      std::vector<double>& gx = x.grad();
      for (std::size_t y = 0; y < out_h; ++y) {
        const TapWeights ty = upsample_taps(y, out_h, h);
        for (std::size_t xx = 0; xx < out_w; ++xx) {
          const TapWeights tx = upsample_taps(xx, out_w, w);
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double g = go[(y * out_w + xx) * c + ch];
            gx[(ty.lo * w + tx.lo) * c + ch] += g * (1.0 - ty.t) * (1.0 - tx.t);
            gx[(ty.lo * w + tx.hi) * c + ch] += g * (1.0 - ty.t) * tx.t;
            gx[(ty.hi * w + tx.lo) * c + ch] += g * ty.t * (1.0 - tx.t);
            gx[(ty.hi * w + tx.hi) * c + ch] += g * ty.t * tx.t;
          }
        }
      }
    });
  }
  return out;
}

}  // namespace msad
