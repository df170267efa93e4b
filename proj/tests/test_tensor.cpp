#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mopred/tensor.hpp"

using namespace mopred;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = false) {
  std::vector<double> d(static_cast<size_t>(shape_size(shape)));
  for (double& x : d) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(d), requires_grad);
}

}  // namespace

TEST_CASE("matmul with identity returns the input") {
  Rng rng(1);
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor a = random_tensor({3, 5}, rng);
  Tensor r = matmul(eye, a);
  for (int64_t i = 0; i < a.size(); ++i)
    CHECK(r.data()[i] == doctest::Approx(a.data()[i]).epsilon(1e-15));
}

TEST_CASE("tanh of zeros is zeros") {
  Tensor z = Tensor::zeros({2});
  Tensor r = tanh_op(z);
  CHECK(r.data()[0] == 0.0);
  CHECK(r.data()[1] == 0.0);
}

TEST_CASE("squared norm of [3,4] is 25") {
  Tensor x({2}, {3, 4});
  CHECK(squared_norm(x).value() == doctest::Approx(25.0));
}

TEST_CASE("log rejects non-positive input") {
  Tensor x({2}, {1.0, -2.0});
  CHECK_THROWS(log_op(x));
}

TEST_CASE("matmul shape mismatch names the op") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_WITH_AS(matmul(a, b),
                       doctest::Contains("matmul"), std::runtime_error);
}

TEST_CASE("backward of sum yields all-ones gradient") {
  Tensor w({2, 3}, {0.3, -1, 2, 5, 0.1, -0.7}, true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor loss = sum(w);
  GradientMap g = tape.backward(loss);
  for (double x : g.at(w).data()) CHECK(x == 1.0);
}

TEST_CASE("backward of squared norm is 2w") {
  Tensor w({2}, {3, 4}, true);
  Tape tape;
  Tape::Scope scope(tape);
  GradientMap g = tape.backward(squared_norm(w));
  CHECK(g.at(w).data()[0] == doctest::Approx(6.0));
  CHECK(g.at(w).data()[1] == doctest::Approx(8.0));
}

TEST_CASE("backward rejects non-scalar loss") {
  Tensor w({2}, {1, 2}, true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor y = tanh_op(w);
  CHECK_THROWS(tape.backward(y));
}

TEST_CASE("mean(tanh(w x)) gradient matches finite differences") {
  Rng rng(7);
  Tensor x = random_tensor({4, 1}, rng);
  Tensor w0 = random_tensor({4, 4}, rng);
  auto f = [&](const Tensor& w) { return mean(tanh_op(matmul(w, x))); };
  CHECK(finite_difference_check(f, w0, 1e-5) < 1e-4);
}

TEST_CASE("finite differences on exactly linear and quadratic functions") {
  Rng rng(3);
  Tensor p = random_tensor({5}, rng);
  CHECK(finite_difference_check([](const Tensor& t) { return sum(t); }, p, 1e-5) <
        1e-10);
  Tensor q({2}, {1, 2});
  CHECK(finite_difference_check([](const Tensor& t) { return squared_norm(t); }, q,
                                1e-5) < 1e-9);
}

TEST_CASE("two-layer tanh network gradient error below 1e-4") {
  Rng rng(11);
  Tensor x = random_tensor({6, 1}, rng);
  Tensor w2 = random_tensor({1, 8}, rng);
  auto f = [&](const Tensor& w1) {
    Tensor h = tanh_op(matmul(w1, x));
    return sum(tanh_op(matmul(w2, h)));
  };
  Tensor w1 = random_tensor({8, 6}, rng);
  CHECK(finite_difference_check(f, w1, 1e-5) < 1e-4);
}

TEST_CASE("per-primitive gradients match finite differences on random instances") {
  Rng rng(1234);
  for (int it = 0; it < 100; ++it) {
    const int pick = it % 14;
    double worst = 0.0;
    switch (pick) {
      case 0: {
        Tensor b = random_tensor({3, 2}, rng);
        worst = finite_difference_check(
            [&](const Tensor& a) { return sum(matmul(a, b)); },
            random_tensor({2, 3}, rng), 1e-5);
        break;
      }
      case 1: {
        Tensor b = random_tensor({4}, rng);
        worst = finite_difference_check(
            [&](const Tensor& a) { return squared_norm(add(a, b)); },
            random_tensor({4}, rng), 1e-5);
        break;
      }
      case 2: {
        Tensor b = random_tensor({4}, rng);
        worst = finite_difference_check(
            [&](const Tensor& a) { return squared_norm(sub(a, b)); },
            random_tensor({4}, rng), 1e-5);
        break;
      }
      case 3: {
        Tensor b = random_tensor({4}, rng);
        worst = finite_difference_check(
            [&](const Tensor& a) { return sum(mul(a, b)); },
            random_tensor({4}, rng), 1e-5);
        break;
      }
      case 4: {
        worst = finite_difference_check(
            [&](const Tensor& a) { return sum(tanh_op(a)); },
            random_tensor({5}, rng), 1e-5);
        break;
      }
      case 5: {
        worst = finite_difference_check(
            [&](const Tensor& a) { return sum(sigmoid_op(a)); },
            random_tensor({5}, rng), 1e-5);
        break;
      }
      case 6: {
        // keep relu inputs away from the kink
        Tensor p = random_tensor({5}, rng);
        for (double& v : p.mutable_data()) v += (v >= 0 ? 0.1 : -0.1);
        worst = finite_difference_check(
            [&](const Tensor& a) { return sum(relu_op(a)); }, p, 1e-5);
        break;
      }
      case 7: {
        worst = finite_difference_check(
            [&](const Tensor& a) { return sum(exp_op(a)); },
            random_tensor({5}, rng), 1e-5);
        break;
      }
      case 8: {
        worst = finite_difference_check(
            [&](const Tensor& a) { return sum(log_op(a)); },
            random_tensor({5}, rng, 0.2, 2.0), 1e-6);
        break;
      }
      case 9: {
        Tensor w = random_tensor({3}, rng);
        worst = finite_difference_check(
            [&](const Tensor& a) { return sum(mul(softmax_last_axis(a), w)); },
            random_tensor({3}, rng), 1e-5);
        break;
      }
      case 10: {
        Tensor b = random_tensor({2, 3}, rng);
        worst = finite_difference_check(
            [&](const Tensor& a) {
              const Tensor parts[2] = {a, b};
              return squared_norm(concat(parts, 1));
            },
            random_tensor({2, 2}, rng), 1e-5);
        break;
      }
      case 11: {
        worst = finite_difference_check(
            [&](const Tensor& a) { return squared_norm(slice(a, 0, 1, 2)); },
            random_tensor({4, 2}, rng), 1e-5);
        break;
      }
      case 12: {
        worst = finite_difference_check(
            [&](const Tensor& a) { return mean(a); },
            random_tensor({6}, rng), 1e-5);
        break;
      }
      case 13: {
        // keep the norm away from zero
        worst = finite_difference_check(
            [&](const Tensor& a) { return norm(a); },
            random_tensor({4}, rng, 0.5, 1.5), 1e-6);
        break;
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("apply is deterministic bit for bit") {
  Rng rng(5);
  Tensor a = random_tensor({4, 4}, rng);
  Tensor b = random_tensor({4, 4}, rng);
  Tensor r1 = matmul(tanh_op(a), sigmoid_op(b));
  Tensor r2 = matmul(tanh_op(a), sigmoid_op(b));
  for (int64_t i = 0; i < r1.size(); ++i) CHECK(r1.data()[i] == r2.data()[i]);
}

TEST_CASE("slice inverting a concat is the identity on gradients") {
  Rng rng(9);
  Tensor a = random_tensor({3, 2}, rng, -1, 1, true);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor weights = random_tensor({3, 2}, rng);

  auto run = [&](bool through_concat) {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor x = a;
    if (through_concat) {
      const Tensor parts[2] = {a, b};
      x = slice(concat(parts, 1), 1, 0, 2);
    }
    Tensor loss = sum(mul(x, weights));
    return tape.backward(loss).at(a).detached_copy();
  };

  Tensor g_direct = run(false);
  Tensor g_roundtrip = run(true);
  for (int64_t i = 0; i < g_direct.size(); ++i)
    CHECK(g_direct.data()[i] == g_roundtrip.data()[i]);
}

TEST_CASE("norm subgradient at the origin is zero") {
  Tensor z = Tensor::zeros({3}, true);
  Tape tape;
  Tape::Scope scope(tape);
  GradientMap g = tape.backward(norm(z));
  for (double x : g.at(z).data()) CHECK(x == 0.0);
}

TEST_CASE("adam leaves parameters unchanged under zero gradients") {
  ParamMap params;
  params["w"] = Tensor({3}, {1.0, -2.0, 0.5}, true);
  GradValueMap grads;
  grads["w"] = {0.0, 0.0, 0.0};
  AdamState st;
  st.cfg.lr = 0.1;
  adam_step(params, grads, st);
  CHECK(params["w"].data()[0] == 1.0);
  CHECK(params["w"].data()[1] == -2.0);
  CHECK(params["w"].data()[2] == 0.5);
  CHECK(st.t == 1);
}

TEST_CASE("adam first step with unit gradient moves by about -lr") {
  ParamMap params;
  params["w"] = Tensor({1}, {0.0}, true);
  GradValueMap grads;
  grads["w"] = {1.0};
  AdamState st;
  st.cfg.lr = 0.1;
  adam_step(params, grads, st);
  CHECK(params["w"].data()[0] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam under a constant gradient decreases the parameter monotonically") {
  ParamMap params;
  params["w"] = Tensor({1}, {1.0}, true);
  GradValueMap grads;
  grads["w"] = {0.7};
  AdamState st;
  st.cfg.lr = 0.05;
  double prev = 1.0;
  for (int i = 0; i < 5; ++i) {
    adam_step(params, grads, st);
    CHECK(params["w"].data()[0] < prev);
    prev = params["w"].data()[0];
  }
}

TEST_CASE("adam rejects a missing gradient") {
  ParamMap params;
  params["w"] = Tensor({1}, {1.0}, true);
  GradValueMap grads;
  AdamState st;
  CHECK_THROWS_WITH_AS(adam_step(params, grads, st), doctest::Contains("w"),
                       std::runtime_error);
}

TEST_CASE("f32 compute precision rounds primitive results") {
  set_compute_precision(Precision::kF32);
  Tensor a({1}, {1.0000000001});
  Tensor b({1}, {1e-12});
  Tensor r = add(a, b);
  CHECK(r.data()[0] == static_cast<double>(static_cast<float>(1.0000000001 + 1e-12)));
  set_compute_precision(Precision::kF64);
}
