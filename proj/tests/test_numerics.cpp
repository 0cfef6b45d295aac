#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "msad/gradcheck.hpp"
#include "msad/ops.hpp"
#include "msad/rng.hpp"
#include "msad/tensor.hpp"

using namespace msad;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// keeps elementwise inputs away from kinks so central differences stay valid
Tensor random_tensor_away_from(Rng& rng, Shape shape, double kink, double margin) {
  Tensor t = random_tensor(rng, std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i] - kink) < margin) t[i] += 2.0 * margin;
  }
  return t;
}

constexpr double kGradTol = 1e-4;
constexpr double kFdStep = 1e-5;

}  // namespace

TEST_CASE("tensor shape and data invariants") {
  Tensor t(Shape{2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.shape() == Shape{2, 3});
  CHECK(t.at({1, 2}) == 1.5);
  CHECK_THROWS(Tensor(Shape{2, 2}, std::vector<double>{1.0}));
  Tensor empty(Shape{0, 8});
  CHECK(empty.size() == 0);
}

TEST_CASE("matmul identity, zeros and hand case") {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor id = Tensor::matrix({{1, 0}, {0, 1}});
  Tensor zero(Shape{2, 2});

  Tensor r1 = matmul(id, a);
  for (std::size_t i = 0; i < 4; ++i) CHECK(r1[i] == a[i]);

  Tensor r2 = matmul(zero, a);
  for (std::size_t i = 0; i < 4; ++i) CHECK(r2[i] == 0.0);

  Tensor b = Tensor::matrix({{5}, {6}});
  Tensor r3 = matmul(a, b);
  CHECK(r3.at({0, 0}) == 17.0);
  CHECK(r3.at({1, 0}) == 39.0);

  CHECK_THROWS_AS(matmul(a, Tensor(Shape{3, 2})), std::invalid_argument);
}

TEST_CASE("matmul associativity through identity is exact") {
  Rng rng(11);
  Tensor a = random_tensor(rng, {3, 4});
  Tensor b = random_tensor(rng, {4, 5});
  Tensor id(Shape{4, 4});
  for (std::size_t i = 0; i < 4; ++i) id.at({i, i}) = 1.0;
  Tensor left = matmul(matmul(a, id), b);
  Tensor right = matmul(a, matmul(id, b));
  Tensor plain = matmul(a, b);
  for (std::size_t i = 0; i < plain.size(); ++i) {
    CHECK(left[i] == plain[i]);
    CHECK(right[i] == plain[i]);
  }
}

TEST_CASE("softmax examples and row normalization") {
  Tensor s1 = softmax(Tensor::row({0, 0}), 0);
  CHECK(s1[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s1[1] == doctest::Approx(0.5).epsilon(1e-12));

  Tensor s2 = softmax(Tensor::row({3.7}), 0);
  CHECK(s2[0] == doctest::Approx(1.0).epsilon(1e-12));

  Tensor s3 = softmax(Tensor::row({std::log(2.0), 0.0}), 0);
  CHECK(s3[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(s3[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor(rng, {4, 7}, -30.0, 30.0);
    for (std::size_t axis = 0; axis < 2; ++axis) {
      Tensor y = softmax(x, axis);
      for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(y[i] >= 0.0);
        CHECK(y[i] <= 1.0);
      }
      // sums along the softmax axis
      if (axis == 1) {
        for (std::size_t r = 0; r < 4; ++r) {
          double sum = 0.0;
          for (std::size_t c = 0; c < 7; ++c) sum += y.at({r, c});
          CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
      } else {
        for (std::size_t c = 0; c < 7; ++c) {
          double sum = 0.0;
          for (std::size_t r = 0; r < 4; ++r) sum += y.at({r, c});
          CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("layer_norm hand cases") {
  Tensor gain = Tensor::row({1, 1});
  Tensor bias = Tensor::row({0, 0});

  Tensor c = layer_norm(Tensor::row({4.2, 4.2}), gain, bias, 1e-5);
  CHECK(c[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(0.0).epsilon(1e-12));

  Tensor n = layer_norm(Tensor::row({1, -1}), gain, bias, 1e-5);
  CHECK(n[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(n[1] == doctest::Approx(-1.0).epsilon(1e-4));

  Tensor m = layer_norm(Tensor::row({0, 2}), gain, bias, 1e-5);
  CHECK(m[0] == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(m[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("leaky_relu definition") {
  Tensor y = leaky_relu(Tensor::row({5.0, 0.0, -1.0}), 0.01);
  CHECK(y[0] == 5.0);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == doctest::Approx(-0.01).epsilon(1e-12));
  CHECK_THROWS_AS(leaky_relu(Tensor::row({1.0}), 1.5), std::invalid_argument);
}

TEST_CASE("mean_axis examples") {
  Tensor one = mean_axis(Tensor::row({2.5}), 0);
  CHECK(one.value() == 2.5);

  Tensor rows = mean_axis(Tensor::matrix({{1, 2}, {1, 2}, {1, 2}}), 0);
  CHECK(rows[0] == 1.0);
  CHECK(rows[1] == 2.0);

  Tensor m = mean_axis(Tensor::matrix({{1, 3}, {5, 7}}), 0);
  CHECK(m[0] == 3.0);
  CHECK(m[1] == 5.0);
}

TEST_CASE("concat shapes, empty operand and slice roundtrip") {
  Rng rng(17);
  Tensor a = random_tensor(rng, {4, 8});
  Tensor empty(Shape{4, 0});
  Tensor same = concat_axis(a, empty, 1);
  CHECK(same.shape() == Shape{4, 8});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(same[i] == a[i]);

  Tensor b = random_tensor(rng, {4, 3});
  Tensor cat = concat_axis(a, b, 1);
  CHECK(cat.shape() == Shape{4, 11});

  Tensor back_a = slice_axis(cat, 1, 0, 8);
  Tensor back_b = slice_axis(cat, 1, 8, 3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(back_a[i] == a[i]);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(back_b[i] == b[i]);

  CHECK_THROWS_AS(concat_axis(a, Tensor(Shape{5, 3}), 1), std::invalid_argument);

  // random-rank roundtrips stay bit-exact
  for (int trial = 0; trial < 30; ++trial) {
    Shape shape{static_cast<std::size_t>(rng.uniform_int(1, 4)),
                static_cast<std::size_t>(rng.uniform_int(1, 5)),
                static_cast<std::size_t>(rng.uniform_int(1, 3))};
    std::size_t axis = static_cast<std::size_t>(rng.uniform_int(0, 2));
    Tensor x = random_tensor(rng, shape);
    Tensor y = random_tensor(rng, shape);
    Tensor joined = concat_axis(x, y, axis);
    Tensor sx = slice_axis(joined, axis, 0, shape[axis]);
    Tensor sy = slice_axis(joined, axis, shape[axis], shape[axis]);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(sx[i] == x[i]);
      CHECK(sy[i] == y[i]);
    }
  }
}

TEST_CASE("cosine_similarity trivial geometry and zero-norm convention") {
  Tensor u = Tensor::row({3, 4});
  CHECK(cosine_similarity(u, u).value() == doctest::Approx(1.0).epsilon(1e-12));

  Tensor v = Tensor::row({-4, 3});
  CHECK(cosine_similarity(u, v).value() == doctest::Approx(0.0).epsilon(1e-12));

  Tensor neg = Tensor::row({-3, -4});
  CHECK(cosine_similarity(u, neg).value() == doctest::Approx(-1.0).epsilon(1e-12));

  reset_zero_norm_cosine_count();
  Tensor zero = Tensor::row({0, 0});
  CHECK(cosine_similarity(u, zero).value() == 0.0);
  CHECK(zero_norm_cosine_count() == 1);
  reset_zero_norm_cosine_count();
}

TEST_CASE("bilinear_upsample align-corners behaviour") {
  Tensor constant(Shape{2, 2, 1}, 0.7);
  Tensor up = bilinear_upsample(constant, 5, 9);
  for (std::size_t i = 0; i < up.size(); ++i) CHECK(up[i] == doctest::Approx(0.7).epsilon(1e-12));

  Tensor single(Shape{1, 1, 1}, 0.3);
  Tensor spread = bilinear_upsample(single, 4, 4);
  for (std::size_t i = 0; i < spread.size(); ++i) CHECK(spread[i] == 0.3);

  Tensor rowmap(Shape{1, 2, 1}, std::vector<double>{0.0, 1.0});
  Tensor wide = bilinear_upsample(rowmap, 1, 4);
  CHECK(wide[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(wide[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(wide[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(wide[3] == doctest::Approx(1.0).epsilon(1e-12));

  // corners preserved exactly
  Rng rng(23);
  Tensor src = random_tensor(rng, {3, 5, 2});
  Tensor dst = bilinear_upsample(src, 17, 29);
  CHECK(dst.at({0, 0, 0}) == src.at({0, 0, 0}));
  CHECK(dst.at({0, 28, 1}) == src.at({0, 4, 1}));
  CHECK(dst.at({16, 0, 0}) == src.at({2, 0, 0}));
  CHECK(dst.at({16, 28, 1}) == src.at({2, 4, 1}));

  CHECK_THROWS_AS(bilinear_upsample(src, 2, 5), std::invalid_argument);
}

TEST_CASE("backward populates leaves and respects reachability") {
  Tensor x = Tensor::row({3.0});
  x.set_requires_grad(true);
  Tape tape;
  Tensor loss = sum_all(mul(x, x, &tape), &tape);
  backward(loss, tape);
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));

  // loss independent of a leaf leaves its grad at zero
  Tensor unused = Tensor::row({1.0, 2.0});
  unused.set_requires_grad(true);
  CHECK(unused.grad_at(0) == 0.0);
  CHECK(unused.grad_at(1) == 0.0);

  // a second replay of the same tape is rejected
  CHECK_THROWS_AS(backward(loss, tape), std::logic_error);

  // non-scalar loss rejected
  Tape tape2;
  Tensor vec = mul(x, x, &tape2);
  Tensor stacked = concat_axis(vec, vec, 0, &tape2);
  CHECK_THROWS_AS(backward(stacked, tape2), std::invalid_argument);
}

TEST_CASE("gradients accumulate additively until zeroed") {
  Tensor x = Tensor::row({2.0});
  x.set_requires_grad(true);
  for (int pass = 0; pass < 2; ++pass) {
    Tape tape;
    Tensor loss = sum_all(mul(x, x, &tape), &tape);
    backward(loss, tape);
  }
  CHECK(x.grad()[0] == doctest::Approx(8.0).epsilon(1e-12));
  x.zero_grad();
  CHECK(x.grad_at(0) == 0.0);
}

TEST_CASE("backward rejects a loss from a different tape") {
  Tensor x = Tensor::row({1.0, 2.0});
  x.set_requires_grad(true);
  Tape produced;
  Tensor loss = sum_all(x, &produced);
  Tape other;
  CHECK_THROWS_AS(backward(loss, other), std::invalid_argument);
}

TEST_CASE("finite_diff_check on a linear function is near machine epsilon") {
  Rng rng(31);
  Tensor w = random_tensor(rng, {6});
  auto f = [w](const Tensor& x, Tape* tape) { return dot(x, w, tape); };
  Tensor x = random_tensor(rng, {6});
  CHECK(finite_diff_check(f, x, kFdStep) < 1e-8);
}

TEST_CASE("finite_diff_check confirms zero gradient of softmax mass") {
  auto f = [](const Tensor& x, Tape* tape) { return sum_all(softmax(x, 0, tape), tape); };
  Rng rng(37);
  Tensor x = random_tensor(rng, {5});
  Tape tape;
  Tensor loss = f(x.set_requires_grad(true), &tape);
  backward(loss, tape);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x.grad_at(i)) < 1e-12);
  CHECK(finite_diff_check(f, x, kFdStep) < 1e-6);
}

TEST_CASE("per-op gradient checks stay within tolerance") {
  Rng rng(41);

  SUBCASE("matmul lhs and rhs") {
    Tensor b = random_tensor(rng, {4, 3});
    auto f = [b](const Tensor& x, Tape* tape) { return sum_all(matmul(x, b, tape), tape); };
    CHECK(finite_diff_check(f, random_tensor(rng, {2, 4}), kFdStep) <= kGradTol);
    Tensor a = random_tensor(rng, {2, 4});
    auto g = [a](const Tensor& x, Tape* tape) {
      return mean_all(matmul(a, x, tape), tape);
    };
    CHECK(finite_diff_check(g, random_tensor(rng, {4, 3}), kFdStep) <= kGradTol);
  }

  SUBCASE("elementwise chain") {
    auto f = [](const Tensor& x, Tape* tape) {
      Tensor y = affine(x, 1.7, 0.3, tape);
      y = mul(y, y, tape);
      return mean_all(y, tape);
    };
    CHECK(finite_diff_check(f, random_tensor(rng, {3, 4}), kFdStep) <= kGradTol);
  }

  SUBCASE("softmax and layer_norm") {
    auto f = [](const Tensor& x, Tape* tape) {
      Tensor w(Shape{4, 1}, 0.5);
      return sum_all(matmul(softmax(x, 1, tape), w, tape), tape);
    };
    CHECK(finite_diff_check(f, random_tensor(rng, {3, 4}, -2.0, 2.0), kFdStep) <= kGradTol);

    Tensor gain = random_tensor(rng, {5}, 0.5, 1.5);
    Tensor bias = random_tensor(rng, {5});
    auto ln_x = [gain, bias](const Tensor& x, Tape* tape) {
      Tensor w(Shape{5, 1}, 0.3);
      return sum_all(matmul(layer_norm(x, gain, bias, 1e-5, tape), w, tape), tape);
    };
    CHECK(finite_diff_check(ln_x, random_tensor(rng, {4, 5}), kFdStep) <= kGradTol);

    Tensor x0 = random_tensor(rng, {4, 5});
    auto ln_gain = [x0, bias](const Tensor& g, Tape* tape) {
      Tensor w(Shape{5, 1}, 0.3);
      return sum_all(matmul(layer_norm(x0, g, bias, 1e-5, tape), w, tape), tape);
    };
    CHECK(finite_diff_check(ln_gain, gain.clone(), kFdStep) <= kGradTol);
    auto ln_bias = [x0, gain](const Tensor& b, Tape* tape) {
      Tensor w(Shape{5, 1}, 0.3);
      return sum_all(matmul(layer_norm(x0, gain, b, 1e-5, tape), w, tape), tape);
    };
    CHECK(finite_diff_check(ln_bias, bias.clone(), kFdStep) <= kGradTol);
  }

  SUBCASE("kinked and clamped ops away from boundaries") {
    auto lr = [](const Tensor& x, Tape* tape) {
      return mean_all(leaky_relu(x, 0.01, tape), tape);
    };
    CHECK(finite_diff_check(lr, random_tensor_away_from(rng, {4, 4}, 0.0, 1e-3), kFdStep) <=
          kGradTol);

    auto rl = [](const Tensor& x, Tape* tape) { return mean_all(relu(x, tape), tape); };
    CHECK(finite_diff_check(rl, random_tensor_away_from(rng, {4, 4}, 0.0, 1e-3), kFdStep) <=
          kGradTol);

    auto cl = [](const Tensor& x, Tape* tape) {
      return mean_all(clamp(x, -0.5, 0.5, tape), tape);
    };
    Tensor xc = random_tensor(rng, {4, 4});
    for (std::size_t i = 0; i < xc.size(); ++i) {
      if (std::abs(std::abs(xc[i]) - 0.5) < 1e-3) xc[i] = 0.0;
    }
    CHECK(finite_diff_check(cl, xc, kFdStep) <= kGradTol);
  }

  SUBCASE("log pow dot div cosine") {
    auto lg = [](const Tensor& x, Tape* tape) { return mean_all(vlog(x, tape), tape); };
    CHECK(finite_diff_check(lg, random_tensor(rng, {6}, 0.2, 2.0), kFdStep) <= kGradTol);

    auto pw = [](const Tensor& x, Tape* tape) {
      return mean_all(pow_const(x, 2.0, tape), tape);
    };
    CHECK(finite_diff_check(pw, random_tensor(rng, {6}, 0.1, 1.0), kFdStep) <= kGradTol);

    Tensor v = random_tensor(rng, {5});
    auto dt = [v](const Tensor& x, Tape* tape) { return dot(x, v, tape); };
    CHECK(finite_diff_check(dt, random_tensor(rng, {5}), kFdStep) <= kGradTol);

    auto dv = [](const Tensor& x, Tape* tape) {
      Tensor num = slice_axis(x, 0, 0, 1, tape);
      Tensor den = slice_axis(x, 0, 1, 1, tape);
      return div_scalar(num, den, tape);
    };
    CHECK(finite_diff_check(dv, Tensor::row({0.8, 1.7}), kFdStep) <= kGradTol);

    auto cs = [v](const Tensor& x, Tape* tape) { return cosine_similarity(x, v, tape); };
    CHECK(finite_diff_check(cs, random_tensor(rng, {5}, 0.3, 1.0), kFdStep) <= kGradTol);
  }

  SUBCASE("structure ops") {
    auto tr = [](const Tensor& x, Tape* tape) {
      Tensor w(Shape{3, 2}, 0.25);
      return sum_all(mul(transpose2d(x, tape), w, tape), tape);
    };
    CHECK(finite_diff_check(tr, random_tensor(rng, {2, 3}), kFdStep) <= kGradTol);

    Tensor other = random_tensor(rng, {2, 3});
    auto cc = [other](const Tensor& x, Tape* tape) {
      Tensor joined = concat_axis(x, other, 0, tape);
      return mean_all(slice_axis(joined, 0, 1, 2, tape), tape);
    };
    CHECK(finite_diff_check(cc, random_tensor(rng, {2, 3}), kFdStep) <= kGradTol);

    auto rs = [](const Tensor& x, Tape* tape) {
      Tensor r = reshape(x, {2, 2, 2}, tape);
      return mean_all(mean_axis(r, 1, tape), tape);
    };
    CHECK(finite_diff_check(rs, random_tensor(rng, {8}), kFdStep) <= kGradTol);

    auto up = [](const Tensor& x, Tape* tape) {
      Tensor r = reshape(x, {2, 2, 1}, tape);
      Tensor big = bilinear_upsample(r, 5, 7, tape);
      return mean_all(big, tape);
    };
    CHECK(finite_diff_check(up, random_tensor(rng, {4}), kFdStep) <= kGradTol);

    auto rv = [](const Tensor& x, Tape* tape) {
      Tensor base(Shape{3, 4}, 0.1);
      base.set_requires_grad(false);
      return mean_all(add_rowvec(base, x, tape), tape);
    };
    CHECK(finite_diff_check(rv, random_tensor(rng, {4}), kFdStep) <= kGradTol);

    Tensor table = random_tensor(rng, {6, 3});
    auto gs = [](const Tensor& t, Tape* tape) {
      Tensor rows = rows_select(t, {1, 4, 4}, tape);
      return mean_all(rows, tape);
    };
    CHECK(finite_diff_check(gs, table, kFdStep) <= kGradTol);
  }
}

TEST_CASE("kernels never emit non-finite values on finite inputs") {
  Rng rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a = random_tensor(rng, {3, 3}, -50.0, 50.0);
    Tensor b = random_tensor(rng, {3, 3}, -50.0, 50.0);
    CHECK_NOTHROW(matmul(a, b));
    CHECK_NOTHROW(softmax(a, 1));
    CHECK_NOTHROW(add(a, b));
    CHECK_NOTHROW(mul(a, b));
    Tensor g(Shape{3}, 1.0), bi(Shape{3}, 0.0);
    CHECK_NOTHROW(layer_norm(a, g, bi, 1e-5));
    CHECK_NOTHROW(leaky_relu(a, 0.01));
  }
  // a poisoned input is rejected loudly, not propagated
  Tensor bad = Tensor::row({1.0, 2.0});
  bad[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(add(bad, bad), std::runtime_error);
}
