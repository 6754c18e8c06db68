#include <cmath>

#include "chaosot/autodiff.hpp"
#include "chaosot/error.hpp"
#include "chaosot/rng.hpp"
#include "doctest.h"

using namespace chaosot;
using namespace chaosot::ad;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.normal();
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("product rule on a scalar expression") {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({2.0, -3.0}));
  Var y = sum(mul(x, square(x)));  // sum x^3
  tape.backward(y);
  Tensor g = tape.grad(x);
  CHECK(g[0] == doctest::Approx(12.0));
  CHECK(g[1] == doctest::Approx(27.0));
}

TEST_CASE("constants receive no gradient and unreachable leaves are zero") {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1.0, 2.0}));
  Var c = tape.constant(Tensor::vector({5.0, 7.0}));
  Var unused = tape.leaf(Tensor::vector({3.0}));
  Var y = sum(mul(x, c));
  CHECK_FALSE(tape.requires_grad(c));
  tape.backward(y);
  CHECK(tape.grad(x)[0] == 5.0);
  CHECK(tape.grad(x)[1] == 7.0);
  CHECK(tape.grad(unused)[0] == 0.0);
}

TEST_CASE("fan-out accumulates gradients") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3.0));
  Var y = add(mul(x, x), scale(x, 4.0));
  tape.backward(y);
  CHECK(tape.grad(x).item() == doctest::Approx(10.0));
}

TEST_CASE("vector-Jacobian product with an explicit seed") {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1.0, 2.0, 3.0}));
  Var y = scale(square(x), 0.5);
  tape.backward(y, Tensor::vector({1.0, 0.0, 2.0}));
  Tensor g = tape.grad(x);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 6.0);
}

TEST_CASE("shape mismatches raise DimensionError") {
  Tape tape;
  Var a = tape.leaf(Tensor::vector({1.0, 2.0}));
  Var b = tape.leaf(Tensor::vector({1.0, 2.0, 3.0}));
  CHECK_THROWS_AS(add(a, b), DimensionError);
  CHECK_THROWS_AS(reshape(a, {3}), DimensionError);
}

TEST_CASE("affine matches a hand-computed matrix product") {
  Tape tape;
  Var w = tape.leaf(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  Var b = tape.leaf(Tensor::vector({0.5, -0.5}));
  Var x = tape.leaf(Tensor::vector({1, 0, -1}));
  Var y = affine(x, w, b);
  CHECK(y.value()[0] == doctest::Approx(-1.5));
  CHECK(y.value()[1] == doctest::Approx(-2.5));
  tape.backward(sum(y));
  Tensor gw = tape.grad(w);
  CHECK(gw.at(0, 0) == 1.0);
  CHECK(gw.at(1, 2) == -1.0);
  CHECK(tape.grad(x)[1] == doctest::Approx(7.0));
}

TEST_CASE("softplus is overflow safe") {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({-800.0, 0.0, 800.0}));
  Var y = softplus(x, 1.0);
  CHECK(y.value()[0] == doctest::Approx(0.0));
  CHECK(y.value()[1] == doctest::Approx(std::log(2.0)));
  CHECK(y.value()[2] == doctest::Approx(800.0));
  tape.backward(sum(y));
  CHECK(tape.grad(x)[1] == doctest::Approx(0.5));
}

TEST_CASE("roll shifts cyclically") {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({0, 1, 2, 3}));
  Var y = roll(x, 1);
  CHECK(y.value()[0] == 1.0);
  CHECK(y.value()[3] == 0.0);
  Var z = roll(x, -1);
  CHECK(z.value()[0] == 3.0);
}

TEST_CASE("grad_check agrees on smooth primitives") {
  const Tensor x0 = random_tensor({3, 5}, 1);
  const Tensor w0 = random_tensor({4, 5}, 2);
  const Tensor b0 = random_tensor({4}, 3);
  ScalarFn f = [&](Tape& t, Var x) {
    Var w = t.constant(w0);
    Var b = t.constant(b0);
    Var h = activation(affine(x, w, b), Activation::gelu);
    Var s = activation(h, Activation::tanh);
    return add(mean(square(s)), sum(softplus(h, 3.0)));
  };
  GradCheckResult r = grad_check(f, x0);
  CHECK(r.checked == 15);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("grad_check on circular convolutions") {
  const Tensor x0 = random_tensor({2, 2, 9}, 4);
  const Tensor k0 = random_tensor({3, 2, 5}, 5);
  const Tensor b0 = random_tensor({3}, 6);
  ScalarFn wrt_x = [&](Tape& t, Var x) {
    return sum(square(circular_conv1d(x, t.constant(k0), t.constant(b0))));
  };
  ScalarFn wrt_k = [&](Tape& t, Var k) {
    return sum(square(circular_conv1d(t.constant(x0), k, t.constant(b0))));
  };
  CHECK(grad_check(wrt_x, x0).max_rel_error < 1e-6);
  CHECK(grad_check(wrt_k, k0).max_rel_error < 1e-6);
}

TEST_CASE("grad_check on gather, concat and feature stacking") {
  const Tensor x0 = random_tensor({4, 3}, 7);
  const std::vector<std::size_t> rows{3, 0, 3};
  ScalarFn f = [&](Tape&, Var x) {
    Var g = gather_rows(x, rows);
    Var c = concat_rows(g, x);
    Var feats[2] = {roll(x, 1), x};
    Var s = stack_features(feats);
    return add(sum(square(c)), sum(mul(s, s)));
  };
  CHECK(grad_check(f, x0).max_rel_error < 1e-6);
}

TEST_CASE("kink skipping drops only stencils across a relu corner") {
  // One coordinate sits closer to zero than the step.
  const Tensor x0 = Tensor::vector({0.3, 2e-6, -0.7});
  ScalarFn f = [](Tape&, Var x) { return sum(activation(x, Activation::relu)); };
  GradCheckOptions opt;
  opt.skip_kinks = true;
  GradCheckResult r = grad_check(f, x0, opt);
  CHECK(r.skipped == 1);
  CHECK(r.checked == 2);
  CHECK(r.max_rel_error < 1e-9);
  GradCheckResult raw = grad_check(f, x0);
  CHECK(raw.max_rel_error > 0.1);
}

TEST_CASE("activation derivatives match finite differences") {
  for (Activation a : {Activation::relu, Activation::gelu, Activation::tanh, Activation::identity}) {
    for (double x : {-2.1, -0.4, 0.3, 1.7}) {
      const double h = 1e-6;
      const double fd = (activate(a, x + h) - activate(a, x - h)) / (2 * h);
      CHECK(activate_derivative(a, x) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}
