/* Copyright 2026 The Genesis Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>
#include <functional>

#include "doctest.h"
#include "genesis/network.hpp"

using namespace genesis;
using namespace genesis::nn;

namespace {

using T = Tensor<double>;

T random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  T t(std::move(shape));
  for (double& v : t.data) v = lo + (hi - lo) * uniform01(rng);
  return t;
}

/// Network whose forward is a closure; tensors that need checking are
/// registered as parameters so grad_check can perturb them.
struct LambdaNet : Network<double> {
  std::function<Var(Tape<double>&, Var, LambdaNet&)> fn;
  Var forward(Tape<double>& t, Var x) override { return fn(t, x, *this); }
  Var p(Tape<double>& t, const std::string& name) { return t.param(*store().find(name)); }
  void add(const std::string& name, T value, Parameter<double>::Role role = Parameter<double>::Role::Weight) {
    store().add(name, value.shape, role).value = std::move(value);
  }
};

/// Contracts the output with a fixed random tensor so no gradient vanishes
/// by symmetry (e.g. batch-norm under a plain sum).
LossBuilder weighted_sum(std::uint64_t seed) {
  return [seed](Tape<double>& t, Var y) {
    Rng rng(seed);
    return sum(t, mul(t, y, t.constant(random_tensor(t.value(y).shape, rng))));
  };
}

GradCheckOptions all_scalars() {
  GradCheckOptions o;
  o.fraction = 1.0;
  return o;
}

/// Direct seven-loop convolution written independently of the library.
T reference_conv(const T& x, const T& w, const T& b, Triple s, Triple p) {
  const std::size_t N = x.dim(0), C = x.dim(1), O = w.dim(0);
  const std::size_t in[3] = {x.dim(2), x.dim(3), x.dim(4)};
  const std::size_t k[3] = {w.dim(2), w.dim(3), w.dim(4)};
  std::size_t out[3];
  for (int a = 0; a < 3; ++a) out[a] = (in[a] + 2 * p[a] - k[a]) / s[a] + 1;
  T y({N, O, out[0], out[1], out[2]});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t d = 0; d < out[0]; ++d)
        for (std::size_t h = 0; h < out[1]; ++h)
          for (std::size_t q = 0; q < out[2]; ++q) {
            double acc = b.data[o];
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t i = 0; i < k[0]; ++i)
                for (std::size_t j = 0; j < k[1]; ++j)
                  for (std::size_t l = 0; l < k[2]; ++l) {
                    const long zi = long(d * s[0] + i) - long(p[0]);
                    const long yi = long(h * s[1] + j) - long(p[1]);
                    const long xi = long(q * s[2] + l) - long(p[2]);
                    if (zi < 0 || yi < 0 || xi < 0 || zi >= long(in[0]) || yi >= long(in[1]) || xi >= long(in[2]))
                      continue;
                    acc += x.data[(((n * C + c) * in[0] + zi) * in[1] + yi) * in[2] + xi] *
                           w.data[(((o * C + c) * k[0] + i) * k[1] + j) * k[2] + l];
                  }
            y.data[(((n * O + o) * out[0] + d) * out[1] + h) * out[2] + q] = acc;
          }
  return y;
}

double dot(const T& a, const T& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

}  // namespace

TEST_CASE("tensor construction validates payload") {
  CHECK(numel({2, 3, 4}) == 24);
  CHECK_THROWS_AS(T({2, 2}, std::vector<double>(3)), ShapeError);
  T t({2, 2}, {1, 2, 3, 4});
  CHECK(t.cast<float>().data[3] == 4.0f);
}

TEST_CASE("conv3d: 1x1x1 identity kernel reproduces the input") {
  Rng rng(1);
  Tape<double> t;
  T x = random_tensor({2, 1, 3, 4, 5}, rng);
  Var y = conv3d(t, t.constant(x), t.constant(T({1, 1, 1, 1, 1}, 1.0)), t.constant(T({1}, 0.0)));
  CHECK(t.value(y) == x);
}

TEST_CASE("conv3d: all-ones 3^3 kernel on ones counts its support") {
  Tape<double> t;
  Var y = conv3d(t, t.constant(T({1, 1, 4, 5, 6}, 1.0)), t.constant(T({1, 1, 3, 3, 3}, 1.0)), t.constant(T({1})),
                 {{1, 1, 1}, {1, 1, 1}});
  const T& out = t.value(y);
  REQUIRE(out.shape == Shape{1, 1, 4, 5, 6});
  auto at = [&](std::size_t d, std::size_t h, std::size_t w) { return out.data[(d * 5 + h) * 6 + w]; };
  CHECK(at(1, 2, 3) == 27.0);
  CHECK(at(2, 1, 4) == 27.0);
  CHECK(at(0, 0, 0) == 8.0);
  CHECK(at(0, 2, 3) == 18.0);
}

TEST_CASE("conv3d matches a direct reference over random geometries") {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t C = uniform_int(rng, 1, 3), O = uniform_int(rng, 1, 3), N = uniform_int(rng, 1, 2);
    Triple k, s, p, in;
    for (int a = 0; a < 3; ++a) {
      k[a] = 2 * uniform_int(rng, 0, 1) + 1;
      s[a] = uniform_int(rng, 1, 3);
      p[a] = uniform_int(rng, 0, k[a] / 2 + 1);
      in[a] = uniform_int(rng, k[a], 7);
    }
    T x = random_tensor({N, C, in[0], in[1], in[2]}, rng);
    T w = random_tensor({O, C, k[0], k[1], k[2]}, rng);
    T b = random_tensor({O}, rng);
    Tape<double> t;
    Var y = conv3d(t, t.constant(x), t.constant(w), t.constant(b), {s, p});
    const T ref = reference_conv(x, w, b, s, p);
    REQUIRE(t.value(y).shape == ref.shape);
    for (int a = 0; a < 3; ++a) CHECK(ref.shape[2 + a] == conv_out_extent(in[a], k[a], s[a], p[a]));
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(t.value(y).data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv3d rejects mismatched shapes") {
  Tape<double> t;
  CHECK_THROWS_AS(conv3d(t, t.constant(T({1, 2, 3, 3, 3})), t.constant(T({1, 3, 3, 3, 3})), Var{}), ShapeError);
  CHECK_THROWS_AS(conv3d(t, t.constant(T({1, 1, 3, 3, 3})), t.constant(T({1, 1, 2, 2, 2})), Var{}), ShapeError);
  CHECK_THROWS_AS(conv3d(t, t.constant(T({1, 1, 3, 3, 3})), t.constant(T({2, 1, 1, 1, 1})), t.constant(T({3}))),
                  ShapeError);
  CHECK_THROWS_AS(conv3d(t, t.constant(T({1, 3, 3})), t.constant(T({1, 1, 1, 1, 1})), Var{}), ShapeError);
}

TEST_CASE("conv_transpose3d is the adjoint of conv3d") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Triple k{3, 3, 1}, s, p{1, 0, 0};
    for (int a = 0; a < 3; ++a) s[a] = uniform_int(rng, 1, 2);
    T big = random_tensor({1, 2, 7, 6, 5}, rng);
    T w = random_tensor({3, 2, k[0], k[1], k[2]}, rng);
    Tape<double> t;
    Var small = conv3d(t, t.constant(big), t.constant(w), Var{}, {s, p});
    T ys = random_tensor(t.value(small).shape, rng);
    Var back = conv_transpose3d(t, t.constant(ys), t.constant(w), Var{}, {s, p});
    const T& bt = t.value(back);
    // Output extent follows (in-1)*s - 2p + k and may fall short of the
    // original when the forward conv discarded a remainder.
    for (int a = 0; a < 3; ++a) CHECK(bt.shape[2 + a] == (ys.shape[2 + a] - 1) * s[a] - 2 * p[a] + k[a]);
    if (bt.shape == big.shape) CHECK(dot(t.value(small), ys) == doctest::Approx(dot(big, bt)).epsilon(1e-12));
  }
}

TEST_CASE("batchnorm forward contracts") {
  Tensor<double> rm({2}, 0.0), rv({2}, 1.0);
  BatchNormState<double> st{&rm, &rv, 1e-5, 0.1};

  SUBCASE("standardized input passes through") {
    T x({2, 2, 1, 1, 2}, {1, -1, 1, -1, -1, 1, -1, 1});
    Tape<double> t;
    Var y = batchnorm(t, t.constant(x), t.constant(T({2}, 1.0)), t.constant(T({2}, 0.0)), st, Mode::Train);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(t.value(y).data[i] - x.data[i]) < 1e-5);
    CHECK(rm.data[0] == doctest::Approx(0.0));
    CHECK(rv.data[0] == doctest::Approx(0.9 + 0.1 * 4.0 / 3.0));
  }
  SUBCASE("gamma 0, beta 5 is constant") {
    Rng rng(3);
    Tape<double> t;
    Var y = batchnorm(t, t.constant(random_tensor({3, 2, 2, 2, 2}, rng)), t.constant(T({2}, 0.0)),
                      t.constant(T({2}, 5.0)), st, Mode::Train);
    for (double v : t.value(y).data) CHECK(v == 5.0);
  }
  SUBCASE("batch of one in TRAIN mode is rejected") {
    Tape<double> t;
    CHECK_THROWS_AS(batchnorm(t, t.constant(T({1, 2, 2, 2, 2})), t.constant(T({2}, 1.0)), t.constant(T({2})), st,
                              Mode::Train),
                    ShapeError);
  }
  SUBCASE("EVAL uses running statistics and leaves them alone") {
    rm.data = {1.0, -2.0};
    rv.data = {4.0, 0.25};
    Tape<double> t;
    Var y = batchnorm(t, t.constant(T({1, 2, 1, 1, 1}, {3.0, -1.0})), t.constant(T({2}, 1.0)),
                      t.constant(T({2}, 0.0)), st, Mode::Eval);
    CHECK(t.value(y).data[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(t.value(y).data[1] == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(rm.data[0] == 1.0);
    CHECK(rv.data[1] == 0.25);
  }
}

TEST_CASE("elementwise and pooling closed forms") {
  Tape<double> t;
  SUBCASE("relu") {
    Var y = relu(t, t.constant(T({4}, {-2, -0.0, 0.5, 3})));
    CHECK(t.value(y).data == std::vector<double>{0, 0, 0.5, 3});
    T pos({3}, {0.1, 2, 5});
    CHECK(t.value(relu(t, t.constant(pos))) == pos);
  }
  SUBCASE("sigmoid") {
    Var y = sigmoid(t, t.constant(T({3}, {0.0, std::log(3.0), -std::log(3.0)})));
    CHECK(t.value(y).data[0] == 0.5);
    CHECK(t.value(y).data[1] == doctest::Approx(0.75));
    CHECK(t.value(y).data[2] == doctest::Approx(0.25));
    Var big = sigmoid(t, t.constant(T({2}, {-800.0, 800.0})));
    CHECK(t.value(big).data[0] == 0.0);
    CHECK(t.value(big).data[1] == 1.0);
  }
  SUBCASE("maxpool") {
    T x({1, 1, 2, 2, 4}, {1, 5, 2, 0, 3, 4, 9, 1, 0, 0, 8, 7, 6, 2, 1, 1});
    Var y = maxpool3d(t, t.constant(x));
    CHECK(t.value(y).shape == Shape{1, 1, 1, 1, 2});
    CHECK(t.value(y).data == std::vector<double>{6, 9});
    CHECK(t.value(maxpool3d(t, t.constant(x), {1, 1, 1})) == x);
  }
  SUBCASE("upsample") {
    T x({1, 1, 1, 1, 2}, {3, 4});
    Var y = upsample3d(t, t.constant(x), {1, 2, 2});
    CHECK(t.value(y).shape == Shape{1, 1, 1, 2, 4});
    CHECK(t.value(y).data == std::vector<double>{3, 3, 4, 4, 3, 3, 4, 4});
    CHECK(t.value(upsample3d(t, t.constant(x), {1, 1, 1})) == x);
  }
  SUBCASE("concat") {
    T a({2, 1, 1, 1, 2}, {1, 2, 3, 4});
    T b({2, 2, 1, 1, 2}, {5, 6, 7, 8, 9, 10, 11, 12});
    Var y = concat_channels(t, t.constant(a), t.constant(b));
    CHECK(t.value(y).shape == Shape{2, 3, 1, 1, 2});
    CHECK(t.value(y).data == std::vector<double>{1, 2, 5, 6, 7, 8, 3, 4, 9, 10, 11, 12});
    CHECK_THROWS_AS(concat_channels(t, t.constant(a), t.constant(T({2, 1, 1, 2, 2}))), ShapeError);
  }
  SUBCASE("dense") {
    Var y = dense(t, t.constant(T({1, 2}, {1, 2})), t.constant(T({2, 2}, {1, 0, 3, -1})),
                  t.constant(T({2}, {0.5, 0})));
    CHECK(t.value(y).data == std::vector<double>{1.5, 1});
    Var id = dense(t, t.constant(T({1, 2}, {7, 8})), t.constant(T({2, 2}, {1, 0, 0, 1})), t.constant(T({2})));
    CHECK(t.value(id).data == std::vector<double>{7, 8});
  }
  SUBCASE("global average pool") {
    Var y = global_avg_pool(t, t.constant(T({1, 2, 1, 1, 2}, {1, 3, 10, 20})));
    CHECK(t.value(y).data == std::vector<double>{2, 15});
  }
  SUBCASE("losses") {
    Var m = mse_loss(t, t.constant(T({2}, {1, 3})), t.constant(T({2}, {0, 1})));
    CHECK(t.value(m).data[0] == 2.5);
    Var b = bce_loss(t, t.constant(T({2}, {0.5, 0.5})), t.constant(T({2}, {0, 1})));
    CHECK(t.value(b).data[0] == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("bce keeps a gradient on saturated predictions") {
    Var p = t.leaf(T({2}, {0.0, 1e-9}));
    Var b = bce_loss(t, p, t.constant(T({2}, {1, 1})));
    CHECK(t.value(b).data[0] == doctest::Approx((100.0 - std::log(1e-9)) / 2));
    t.backward(b);
    CHECK(t.grad(p).data[0] < -1e6);
    CHECK(t.grad(p).data[1] < -1e6);
  }
}

TEST_CASE("backward basics") {
  Rng rng(5);
  T x = random_tensor({3, 4}, rng);
  SUBCASE("sum(x) gives all ones") {
    Tape<double> t;
    Var v = t.leaf(x);
    t.backward(sum(t, v));
    for (double g : t.grad(v).data) CHECK(g == 1.0);
  }
  SUBCASE("sum(x^2)/2 gives x") {
    Tape<double> t;
    Var v = t.leaf(x);
    t.backward(scale(t, sum(t, mul(t, v, v)), 0.5));
    CHECK(t.grad(v) == x);
  }
  SUBCASE("non-scalar loss is rejected") {
    Tape<double> t;
    Var v = t.leaf(x);
    CHECK_THROWS_AS(t.backward(relu(t, v)), ShapeError);
  }
  SUBCASE("gradients accumulate and zero_grad resets") {
    ParameterStore<double> store;
    auto& p = store.add("w", {3, 4}, Parameter<double>::Role::Weight);
    p.value = x;
    for (int pass = 1; pass <= 2; ++pass) {
      Tape<double> t;
      Var v = t.param(p);
      t.backward(scale(t, sum(t, mul(t, v, v)), 0.5));
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(p.grad.data[i] == pass * x.data[i]);
    }
    store.zero_grad();
    for (double g : p.grad.data) CHECK(g == 0.0);
  }
  SUBCASE("frozen parameters receive nothing") {
    ParameterStore<double> store;
    auto& p = store.add("w", {3, 4}, Parameter<double>::Role::Weight);
    p.value = x;
    p.requires_grad = false;
    Tape<double> t;
    t.backward(sum(t, t.param(p)));
    for (double g : p.grad.data) CHECK(g == 0.0);
  }
}

TEST_CASE("finite-difference checks per layer") {
  Rng rng(2024);
  LambdaNet net;
  GradCheckReport r;

  SUBCASE("conv3d strided and padded") {
    net.add("x", random_tensor({2, 2, 5, 4, 6}, rng));
    net.add("w", random_tensor({3, 2, 3, 3, 3}, rng));
    net.add("b", random_tensor({3}, rng), Parameter<double>::Role::Bias);
    net.fn = [](Tape<double>& t, Var, LambdaNet& n) {
      return conv3d(t, n.p(t, "x"), n.p(t, "w"), n.p(t, "b"), {{2, 1, 2}, {1, 1, 0}});
    };
    r = grad_check(net, T(), weighted_sum(1), all_scalars());
  }
  SUBCASE("conv3d weight under loss = sum(out)") {
    net.add("w", random_tensor({2, 2, 3, 3, 3}, rng));
    T x = random_tensor({1, 2, 4, 4, 4}, rng);
    net.fn = [x](Tape<double>& t, Var, LambdaNet& n) {
      return conv3d(t, t.constant(x), n.p(t, "w"), Var{}, {{1, 1, 1}, {1, 1, 1}});
    };
    r = grad_check(net, T(), [](Tape<double>& t, Var y) { return sum(t, y); }, all_scalars());
  }
  SUBCASE("conv_transpose3d") {
    net.add("x", random_tensor({1, 2, 3, 2, 3}, rng));
    net.add("w", random_tensor({2, 3, 3, 3, 3}, rng));
    net.add("b", random_tensor({3}, rng), Parameter<double>::Role::Bias);
    net.fn = [](Tape<double>& t, Var, LambdaNet& n) {
      return conv_transpose3d(t, n.p(t, "x"), n.p(t, "w"), n.p(t, "b"), {{2, 2, 1}, {1, 0, 1}});
    };
    r = grad_check(net, T(), weighted_sum(2), all_scalars());
  }
  SUBCASE("batchnorm TRAIN") {
    Tensor<double> rm({3}, 0.0), rv({3}, 1.0);
    net.add("x", random_tensor({2, 3, 2, 3, 2}, rng));
    net.add("g", random_tensor({3}, rng, 0.5, 1.5), Parameter<double>::Role::Scale);
    net.add("b", random_tensor({3}, rng), Parameter<double>::Role::Shift);
    net.fn = [&rm, &rv](Tape<double>& t, Var, LambdaNet& n) {
      return batchnorm(t, n.p(t, "x"), n.p(t, "g"), n.p(t, "b"), BatchNormState<double>{&rm, &rv}, Mode::Train);
    };
    r = grad_check(net, T(), weighted_sum(3), all_scalars());
  }
  SUBCASE("batchnorm EVAL") {
    Tensor<double> rm({2}, {0.3, -0.2}), rv({2}, {0.5, 2.0});
    net.add("x", random_tensor({1, 2, 2, 2, 2}, rng));
    net.add("g", random_tensor({2}, rng, 0.5, 1.5), Parameter<double>::Role::Scale);
    net.add("b", random_tensor({2}, rng), Parameter<double>::Role::Shift);
    net.fn = [&rm, &rv](Tape<double>& t, Var, LambdaNet& n) {
      return batchnorm(t, n.p(t, "x"), n.p(t, "g"), n.p(t, "b"), BatchNormState<double>{&rm, &rv}, Mode::Eval);
    };
    r = grad_check(net, T(), weighted_sum(4), all_scalars());
  }
  SUBCASE("relu") {
    net.add("x", random_tensor({2, 3, 2, 2, 2}, rng));
    net.fn = [](Tape<double>& t, Var, LambdaNet& n) { return relu(t, n.p(t, "x")); };
    r = grad_check(net, T(), weighted_sum(5), all_scalars());
  }
  SUBCASE("sigmoid") {
    net.add("x", random_tensor({2, 3, 2, 2, 2}, rng, -4, 4));
    net.fn = [](Tape<double>& t, Var, LambdaNet& n) { return sigmoid(t, n.p(t, "x")); };
    r = grad_check(net, T(), weighted_sum(6), all_scalars());
  }
  SUBCASE("maxpool3d") {
    net.add("x", random_tensor({2, 2, 4, 4, 2}, rng));
    net.fn = [](Tape<double>& t, Var, LambdaNet& n) { return maxpool3d(t, n.p(t, "x"), {2, 2, 2}); };
    r = grad_check(net, T(), weighted_sum(7), all_scalars());
  }
  SUBCASE("upsample3d") {
    net.add("x", random_tensor({1, 2, 2, 3, 2}, rng));
    net.fn = [](Tape<double>& t, Var, LambdaNet& n) { return upsample3d(t, n.p(t, "x"), {2, 1, 3}); };
    r = grad_check(net, T(), weighted_sum(8), all_scalars());
  }
  SUBCASE("concat_channels") {
    net.add("a", random_tensor({2, 1, 2, 2, 2}, rng));
    net.add("b", random_tensor({2, 3, 2, 2, 2}, rng));
    net.fn = [](Tape<double>& t, Var, LambdaNet& n) { return concat_channels(t, n.p(t, "a"), n.p(t, "b")); };
    r = grad_check(net, T(), weighted_sum(9), all_scalars());
  }
  SUBCASE("dense and global average pool") {
    net.add("x", random_tensor({3, 4, 2, 2, 1}, rng));
    net.add("w", random_tensor({5, 4}, rng));
    net.add("b", random_tensor({5}, rng), Parameter<double>::Role::Bias);
    net.fn = [](Tape<double>& t, Var, LambdaNet& n) {
      return dense(t, global_avg_pool(t, n.p(t, "x")), n.p(t, "w"), n.p(t, "b"));
    };
    r = grad_check(net, T(), weighted_sum(10), all_scalars());
  }
  SUBCASE("mse loss") {
    net.add("p", random_tensor({2, 7}, rng));
    T target = random_tensor({2, 7}, rng);
    net.fn = [](Tape<double>& t, Var, LambdaNet& n) { return n.p(t, "p"); };
    r = grad_check(net, T(), [target](Tape<double>& t, Var y) { return mse_loss(t, y, t.constant(target)); },
                   all_scalars());
  }
  SUBCASE("bce loss") {
    net.add("p", random_tensor({2, 7}, rng, 0.05, 0.95));
    T target = random_tensor({2, 7}, rng, 0.0, 1.0);
    net.fn = [](Tape<double>& t, Var, LambdaNet& n) { return n.p(t, "p"); };
    r = grad_check(net, T(), [target](Tape<double>& t, Var y) { return bce_loss(t, y, t.constant(target)); },
                   all_scalars());
  }
  SUBCASE("soft dice loss") {
    net.add("p", random_tensor({2, 1, 2, 3, 2}, rng, 0.05, 0.95));
    T target({2, 1, 2, 3, 2});
    for (double& v : target.data) v = bernoulli(rng, 0.3) ? 1.0 : 0.0;
    net.fn = [](Tape<double>& t, Var, LambdaNet& n) { return n.p(t, "p"); };
    r = grad_check(net, T(), [target](Tape<double>& t, Var y) { return dice_loss(t, y, t.constant(target)); },
                   all_scalars());
  }
  SUBCASE("add") {
    net.add("a", random_tensor({2, 5}, rng));
    net.add("b", random_tensor({2, 5}, rng));
    net.fn = [](Tape<double>& t, Var, LambdaNet& n) { return add(t, n.p(t, "a"), n.p(t, "b")); };
    r = grad_check(net, T(), weighted_sum(11), all_scalars());
  }
  INFO("worst: " << r.worst_parameter << "[" << r.worst_index << "] analytic " << r.worst_analytic << " numeric "
                 << r.worst_numeric);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("soft dice loss values") {
  Tape<double> t;
  const T p({4}, {1, 1, 0, 0}), y({4}, {1, 0, 1, 0});
  // 2*1 + 1 over 2 + 2 + 1
  CHECK(t.value(dice_loss(t, t.constant(p), t.constant(y))).data[0] == doctest::Approx(1.0 - 3.0 / 5.0));
  CHECK(t.value(dice_loss(t, t.constant(y), t.constant(y))).data[0] == doctest::Approx(0.0));
  const T z({4}, 0.0);
  CHECK(t.value(dice_loss(t, t.constant(z), t.constant(z))).data[0] == 0.0);
  CHECK_THROWS(dice_loss(t, t.constant(z), t.constant(T({3}, 0.0))));
}

TEST_CASE("composite conv-bn-relu-dense graph") {
  Rng rng(99);
  LambdaNet net;
  net.add("c.w", random_tensor({3, 1, 3, 3, 3}, rng));
  net.add("c.b", random_tensor({3}, rng), Parameter<double>::Role::Bias);
  BatchNormLayer<double> bn(net.store(), "bn", 3);
  net.store().find("bn.gamma")->value = random_tensor({3}, rng, 0.5, 1.5);
  net.store().find("bn.beta")->value = random_tensor({3}, rng);
  net.add("fc.w", random_tensor({2, 3}, rng));
  net.add("fc.b", random_tensor({2}, rng), Parameter<double>::Role::Bias);
  net.fn = [&bn](Tape<double>& t, Var x, LambdaNet& n) {
    Var h = conv3d(t, x, n.p(t, "c.w"), n.p(t, "c.b"), {{1, 1, 1}, {1, 1, 1}});
    h = relu(t, bn(t, h, Mode::Train));
    return dense(t, global_avg_pool(t, h), n.p(t, "fc.w"), n.p(t, "fc.b"));
  };
  const T input = random_tensor({2, 1, 4, 4, 4}, rng);
  const GradCheckReport r = grad_check(net, input, weighted_sum(12), all_scalars());
  CHECK(r.checked == net.store().parameter_count());
  CHECK(r.max_rel_error < 1e-4);
  // grad_check leaves the running statistics as it found them.
  CHECK(net.store().find_buffer("bn.running_mean")->data == std::vector<double>(3, 0.0));
}

TEST_CASE("linear single layer is checked to near machine precision") {
  Rng rng(4);
  LambdaNet net;
  net.add("w", random_tensor({4, 6}, rng));
  net.add("b", random_tensor({4}, rng), Parameter<double>::Role::Bias);
  net.fn = [](Tape<double>& t, Var x, LambdaNet& n) { return dense(t, x, n.p(t, "w"), n.p(t, "b")); };
  const GradCheckReport r = grad_check(net, random_tensor({3, 6}, rng), weighted_sum(13), all_scalars());
  CHECK(r.max_rel_error < 1e-8);
}

TEST_CASE("grad_check samples a fraction of the parameters") {
  Rng rng(8);
  LambdaNet net;
  net.add("w", random_tensor({50, 60}, rng));
  net.fn = [](Tape<double>& t, Var x, LambdaNet& n) { return dense(t, x, n.p(t, "w"), Var{}); };
  GradCheckOptions o;
  o.min_checks = 4;
  const GradCheckReport r = grad_check(net, random_tensor({2, 60}, rng), weighted_sum(14), o);
  CHECK(r.checked == 30);
}

namespace {

/// Doubling op whose backward rule is wrong by 10%.
Var broken_double(Tape<double>& t, Var x) {
  T y = t.value(x);
  for (double& v : y.data) v *= 2.0;
  return t.record(std::move(y), {x}, [x](Tape<double>& tp, std::size_t self) {
    auto& gx = tp.grad(x);
    const auto& gy = tp.grad(self);
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += 2.2 * gy.data[i];
  });
}

}  // namespace

TEST_CASE("negative control: a corrupted backward rule is caught") {
  Rng rng(21);
  LambdaNet net;
  net.add("w", random_tensor({2, 3}, rng));
  net.fn = [](Tape<double>& t, Var x, LambdaNet& n) { return broken_double(t, dense(t, x, n.p(t, "w"), Var{})); };
  const GradCheckReport r = grad_check(net, random_tensor({2, 3}, rng), weighted_sum(15), all_scalars());
  CHECK_FALSE(r.passed(1e-4));
  CHECK(r.max_rel_error == doctest::Approx(0.2 / 2.2));
}

TEST_CASE("initializers") {
  struct Dense : Network<double> {
    DenseLayer<double> fc;
    Conv3dLayer<double> conv;
    BatchNormLayer<double> bn;
    Dense(std::size_t in, std::size_t out)
        : fc(store_, "fc", in, out), conv(store_, "conv", 2, 4, {3, 3, 3}, {}), bn(store_, "bn", 4) {}
    Var forward(Tape<double>& t, Var x) override { return fc(t, x); }
  };

  SUBCASE("xavier bound for a 3x3 dense layer is 1") {
    CHECK(init_bound(InitKind::Xavier, {3, 3}) == doctest::Approx(1.0));
    CHECK(init_bound(InitKind::Msra, {4, 2, 3, 3, 3}) == doctest::Approx(std::sqrt(6.0 / 54.0)));
    CHECK(init_bound(InitKind::Uniform, {7, 7}) == 0.05);
    CHECK(fans({4, 2, 3, 3, 3}) == std::pair<double, double>{54.0, 108.0});
  }
  SUBCASE("every draw lies within the bound") {
    for (InitKind kind : {InitKind::Uniform, InitKind::Xavier, InitKind::Msra}) {
      Dense net(400, 250);
      init_weights(net, {kind, 17});
      const auto* w = net.store().find("fc.weight");
      REQUIRE(w->value.size() == 100000);
      const double bound = init_bound(kind, w->value.shape);
      double lo = 1e9, hi = -1e9;
      for (double v : w->value.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      CHECK(lo >= -bound);
      CHECK(hi <= bound);
      // The range is actually used, not just respected.
      CHECK(hi > 0.99 * bound);
      CHECK(lo < -0.99 * bound);
      for (double v : net.store().find("fc.bias")->value.data) CHECK(v == 0.0);
      for (double v : net.store().find("bn.gamma")->value.data) CHECK(v == 1.0);
    }
  }
  SUBCASE("determinism in the seed") {
    Dense a(10, 5), b(10, 5), c(10, 5);
    init_weights(a, {InitKind::Msra, 3});
    init_weights(b, {InitKind::Msra, 3});
    init_weights(c, {InitKind::Msra, 4});
    CHECK(a.store().find("fc.weight")->value == b.store().find("fc.weight")->value);
    CHECK(a.store().find("conv.weight")->value == b.store().find("conv.weight")->value);
    CHECK_FALSE(a.store().find("fc.weight")->value == c.store().find("fc.weight")->value);
    CHECK(parse_init_kind("xavier") == InitKind::Xavier);
    CHECK_THROWS_AS(parse_init_kind("glorot"), ConfigError);
  }
}

TEST_CASE("EVAL forward is a pure function") {
  struct Net : Network<float> {
    Conv3dLayer<float> conv;
    BatchNormLayer<float> bn;
    Net() : conv(store_, "c", 1, 2, {3, 3, 3}, {{1, 1, 1}, {1, 1, 1}}), bn(store_, "bn", 2) {}
    Var forward(Tape<float>& t, Var x) override { return relu(t, bn(t, conv(t, x), mode_)); }
  };
  Net net;
  init_weights(net, {InitKind::Msra, 1});
  Rng rng(2);
  Tensor<float> x({2, 1, 4, 4, 4});
  for (float& v : x.data) v = static_cast<float>(uniform01(rng));
  net.predict(x);  // one TRAIN pass moves the running statistics
  net.set_mode(Mode::Eval);
  const auto a = net.predict(x);
  const auto b = net.predict(x);
  CHECK(a == b);
  CHECK(net.store().find_buffer("bn.running_mean")->data[0] != 0.0f);
}
