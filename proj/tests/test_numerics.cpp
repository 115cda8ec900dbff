#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "skh/gradcheck.hpp"
#include "skh/params.hpp"
#include "skh/tape.hpp"
#include "skh/tensor.hpp"

using namespace skh;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, RngStream& rng) {
  Tensor t = Tensor::zeros(r, c);
  for (double& x : t.data) x = rng.uniform() * 2.0 - 1.0;
  return t;
}

// Gradient-checks `build` applied to the given inputs. The output is
// reduced to a scalar through a fixed random weighting so that every output
// element influences the loss with a distinct coefficient.
GradCheckReport check_op(std::vector<Tensor> inputs,
                         const std::function<Var(Tape&, std::vector<Var>&)>& build,
                         double eps = 1e-5) {
  ParamRegistry reg;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    reg.add("x" + std::to_string(i), inputs[i]);

  Tensor weights;
  {
    Tape t;
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < inputs.size(); ++i)
      leaves.push_back(t.leaf(&reg.get("x" + std::to_string(i))));
    Var out = build(t, leaves);
    RngStream wrng(987654321);
    weights = random_tensor(t.value(out).rows(), t.value(out).cols(), wrng);
    for (double& w : weights.data) w += 2.0;  // keep coefficients away from 0
  }

  Objective f = [&](ParamRegistry& r, bool with_grad) {
    Tape t;
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < inputs.size(); ++i)
      leaves.push_back(t.leaf(&r.get("x" + std::to_string(i))));
    Var out = build(t, leaves);
    Var loss = ops::sum_all(ops::mul(out, t.constant(weights)));
    if (with_grad) t.backward(loss);
    return t.value(loss).item();
  };
  return grad_check(f, reg, eps);
}

}  // namespace

TEST_CASE("rng stream is deterministic and forkable") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42);
  RngStream f1 = c.fork(1);
  RngStream f2 = c.fork(2);
  CHECK(f1.next_u64() != f2.next_u64());
  // forking does not advance the parent
  RngStream d(42);
  for (int i = 0; i < 100; ++i) (void)d.next_u64();
  RngStream e(42);
  (void)e.fork(7);
  for (int i = 0; i < 100; ++i) (void)e.next_u64();
  CHECK(d.state() == e.state());

  RngStream u(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  RngStream n(7);
  double mean = 0.0;
  for (int i = 0; i < 2000; ++i) mean += n.normal();
  mean /= 2000.0;
  CHECK(std::abs(mean) < 0.1);
}

TEST_CASE("fisher-yates shuffle is seed-stable") {
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  RngStream r(123);
  r.shuffle(v);
  std::vector<int> v2{0, 1, 2, 3, 4, 5, 6, 7};
  RngStream r2(123);
  r2.shuffle(v2);
  CHECK(v == v2);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("tensor shape validation") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DimensionError);
  Tensor t = Tensor::zeros(2, 3);
  CHECK(t.numel() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  t.at(1, 2) = 5.0;
  CHECK(t.data[5] == 5.0);
  CHECK_THROWS_AS(Tensor::zeros(2, 2).item(), DimensionError);
  CHECK(Tensor::scalar(3.5).item() == 3.5);
}

TEST_CASE("matmul identity and scalar cases") {
  Tape t;
  Var I = t.constant(Tensor({2, 2}, {1, 0, 0, 1}));
  Var v = t.constant(Tensor({2, 1}, {3, 4}));
  Var out = ops::matmul(I, v);
  CHECK(t.value(out).at(0, 0) == 3.0);
  CHECK(t.value(out).at(1, 0) == 4.0);

  Var a = t.constant(Tensor::scalar(2.0));
  Var b = t.constant(Tensor::scalar(3.0));
  CHECK(t.value(ops::matmul(a, b)).item() == 6.0);

  CHECK_THROWS_AS(ops::matmul(I, t.constant(Tensor::zeros(3, 1))), DimensionError);
}

TEST_CASE("matmul matches triple-loop oracle") {
  RngStream rng(11);
  Tensor A = random_tensor(3, 4, rng);
  Tensor B = random_tensor(4, 2, rng);
  Tape t;
  const Tensor& C = t.value(ops::matmul(t.constant(A), t.constant(B)));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += A.at(i, k) * B.at(k, j);
      CHECK(std::abs(C.at(i, j) - s) < 1e-12);
    }
}

TEST_CASE("masked softmax basics") {
  Tape t;
  {
    Var out = ops::masked_softmax(t.constant(Tensor::row({0, 0, 0})),
                                  Tensor::row({0, 0, 0}));
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(t.value(out).at(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  {
    Var out = ops::masked_softmax(t.constant(Tensor::row({5, 1})),
                                  Tensor::row({0, kBlock}));
    CHECK(t.value(out).at(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(t.value(out).at(0, 1) < 1e-12);
  }
  {
    Var out = ops::masked_softmax(t.constant(Tensor::row({1, 2, 3})),
                                  Tensor::row({0, 0, 0}));
    const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
    const double z = e1 + e2 + e3;
    CHECK(t.value(out).at(0, 0) == doctest::Approx(e1 / z).epsilon(1e-9));
    CHECK(t.value(out).at(0, 1) == doctest::Approx(e2 / z).epsilon(1e-9));
    CHECK(t.value(out).at(0, 2) == doctest::Approx(e3 / z).epsilon(1e-9));
  }
  CHECK_THROWS_AS(ops::masked_softmax(t.constant(Tensor::row({1, 2})),
                                      Tensor::row({kBlock, kBlock})),
                  NumericError);
}

TEST_CASE("masked softmax rows sum to one and blocked mass vanishes") {
  RngStream r(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = random_tensor(4, 6, r);
    for (double& x : logits.data) x *= 5.0;
    Tensor mask = Tensor::zeros(4, 6);
    for (std::size_t i = 0; i < mask.numel(); ++i)
      if (r.uniform() < 0.3) mask.data[i] = kBlock;
    for (std::size_t i = 0; i < 4; ++i) mask.at(i, i) = 0.0;  // keep rows alive
    Tape t;
    const Tensor& P = t.value(ops::masked_softmax(t.constant(logits), mask));
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 6; ++j) {
        s += P.at(i, j);
        if (mask.at(i, j) <= kBlockThreshold) CHECK(P.at(i, j) < 1e-12);
      }
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("quadratic gradient is exact") {
  ParamRegistry reg;
  reg.add("w", Tensor({2, 2}, {1, 2, 3, 4}));
  Objective f = [](ParamRegistry& r, bool with_grad) {
    Tape t;
    Var w = t.leaf(&r.get("w"));
    Var loss = ops::sum_all(ops::mul(w, w));
    if (with_grad) t.backward(loss);
    return t.value(loss).item();
  };
  GradCheckReport rep = grad_check(f, reg, 1e-3);
  CHECK(rep.loss == doctest::Approx(30.0));
  CHECK(rep.max_rel_err < 1e-8);
  const std::vector<double> expect{2, 4, 6, 8};
  reg.zero_grads();
  f(reg, true);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(reg.get("w").grad[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("constant objective has exactly zero gradient") {
  ParamRegistry reg;
  reg.add("w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Objective f = [](ParamRegistry& r, bool with_grad) {
    Tape t;
    Var w = t.leaf(&r.get("w"));
    (void)w;
    Var c = t.constant(Tensor::scalar(7.0));
    if (with_grad) t.backward(c);
    return 7.0;
  };
  GradCheckReport rep = grad_check(f, reg, 1e-5);
  CHECK(rep.max_rel_err == 0.0);
  for (double g : reg.get("w").grad) CHECK(g == 0.0);
}

TEST_CASE("primitive gradients match finite differences") {
  RngStream rng(2024);
  const double tol = 1e-4;

  SUBCASE("matmul") {
    auto rep = check_op({random_tensor(3, 4, rng), random_tensor(4, 2, rng)},
                        [](Tape&, std::vector<Var>& v) { return ops::matmul(v[0], v[1]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("transpose") {
    auto rep = check_op({random_tensor(3, 4, rng)},
                        [](Tape&, std::vector<Var>& v) { return ops::transpose(v[0]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("add same shape") {
    auto rep = check_op({random_tensor(3, 4, rng), random_tensor(3, 4, rng)},
                        [](Tape&, std::vector<Var>& v) { return ops::add(v[0], v[1]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("add row broadcast") {
    auto rep = check_op({random_tensor(3, 4, rng), random_tensor(1, 4, rng)},
                        [](Tape&, std::vector<Var>& v) { return ops::add(v[0], v[1]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("add scalar broadcast") {
    auto rep = check_op({random_tensor(3, 4, rng), random_tensor(1, 1, rng)},
                        [](Tape&, std::vector<Var>& v) { return ops::add(v[0], v[1]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("sub row broadcast") {
    auto rep = check_op({random_tensor(3, 4, rng), random_tensor(1, 4, rng)},
                        [](Tape&, std::vector<Var>& v) { return ops::sub(v[0], v[1]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("mul same shape") {
    auto rep = check_op({random_tensor(3, 4, rng), random_tensor(3, 4, rng)},
                        [](Tape&, std::vector<Var>& v) { return ops::mul(v[0], v[1]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("mul row broadcast") {
    auto rep = check_op({random_tensor(3, 4, rng), random_tensor(1, 4, rng)},
                        [](Tape&, std::vector<Var>& v) { return ops::mul(v[0], v[1]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("mul scalar broadcast") {
    auto rep = check_op({random_tensor(3, 4, rng), random_tensor(1, 1, rng)},
                        [](Tape&, std::vector<Var>& v) { return ops::mul(v[0], v[1]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("scale and add_scalar") {
    auto rep = check_op({random_tensor(3, 4, rng)}, [](Tape&, std::vector<Var>& v) {
      return ops::add_scalar(ops::scale(v[0], -1.7), 0.3);
    });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("sigmoid") {
    auto rep = check_op({random_tensor(3, 4, rng)},
                        [](Tape&, std::vector<Var>& v) { return ops::sigmoid(v[0]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("tanh") {
    auto rep = check_op({random_tensor(3, 4, rng)},
                        [](Tape&, std::vector<Var>& v) { return ops::tanh_op(v[0]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("relu") {
    Tensor x = random_tensor(3, 4, rng);
    // keep samples away from the kink, where finite differences are invalid
    for (double& v : x.data)
      if (std::abs(v) < 1e-3) v = v < 0 ? -1e-3 : 1e-3;
    auto rep =
        check_op({x}, [](Tape&, std::vector<Var>& v) { return ops::relu(v[0]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("concat_cols") {
    auto rep = check_op({random_tensor(3, 2, rng), random_tensor(3, 4, rng)},
                        [](Tape&, std::vector<Var>& v) {
                          return ops::concat_cols({v[0], v[1]});
                        });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("vstack") {
    auto rep = check_op({random_tensor(2, 3, rng), random_tensor(4, 3, rng)},
                        [](Tape&, std::vector<Var>& v) { return ops::vstack({v[0], v[1]}); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("slice_cols") {
    auto rep = check_op({random_tensor(4, 6, rng)}, [](Tape&, std::vector<Var>& v) {
      return ops::slice_cols(v[0], 1, 3);
    });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("slice_rows") {
    auto rep = check_op({random_tensor(4, 6, rng)}, [](Tape&, std::vector<Var>& v) {
      return ops::slice_rows(v[0], 2, 2);
    });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("gather_rows") {
    auto rep = check_op({random_tensor(5, 3, rng)}, [](Tape&, std::vector<Var>& v) {
      return ops::gather_rows(v[0], {0, 2, 2, 4});
    });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("layer_norm") {
    auto rep = check_op(
        {random_tensor(3, 5, rng), random_tensor(1, 5, rng), random_tensor(1, 5, rng)},
        [](Tape&, std::vector<Var>& v) { return ops::layer_norm(v[0], v[1], v[2]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("dropout with fixed mask") {
    RngStream mr(55);
    Tensor keep = ops::make_keep_mask(3, 4, 0.4, mr);
    auto rep = check_op({random_tensor(3, 4, rng)}, [keep](Tape&, std::vector<Var>& v) {
      return ops::dropout_mask(v[0], keep);
    });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("masked_softmax") {
    Tensor mask = Tensor::zeros(3, 5);
    mask.at(0, 3) = kBlock;
    mask.at(2, 0) = kBlock;
    mask.at(2, 1) = kBlock;
    auto rep = check_op({random_tensor(3, 5, rng)}, [mask](Tape&, std::vector<Var>& v) {
      return ops::masked_softmax(v[0], mask);
    });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("log_softmax with nll") {
    Tensor mask = Tensor::zeros(3, 5);
    mask.at(1, 4) = kBlock;
    auto rep = check_op({random_tensor(3, 5, rng)}, [mask](Tape&, std::vector<Var>& v) {
      return ops::nll_from_log_probs(ops::log_softmax(v[0], mask), {2, 0, 3});
    });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("gated_fusion") {
    auto rep = check_op({random_tensor(3, 4, rng), random_tensor(3, 4, rng)},
                        [](Tape&, std::vector<Var>& v) { return ops::gated_fusion(v[0], v[1]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("additive_scores") {
    auto rep = check_op(
        {random_tensor(5, 3, rng), random_tensor(2, 3, rng), random_tensor(3, 1, rng)},
        [](Tape&, std::vector<Var>& v) { return ops::additive_scores(v[0], v[1], v[2]); });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("pick sum mean") {
    auto rep = check_op({random_tensor(3, 4, rng)}, [](Tape&, std::vector<Var>& v) {
      Var a = ops::pick(v[0], 1, 2);
      Var b = ops::mean_all(v[0]);
      return ops::add(a, b);
    });
    CHECK(rep.max_rel_err < tol);
  }
  SUBCASE("linear composition") {
    auto rep = check_op(
        {random_tensor(3, 4, rng), random_tensor(4, 2, rng), random_tensor(1, 2, rng)},
        [](Tape&, std::vector<Var>& v) {
          return ops::tanh_op(ops::linear(v[0], v[1], v[2]));
        });
    CHECK(rep.max_rel_err < tol);
  }
}

TEST_CASE("gated fusion stays inside the local/global envelope") {
  RngStream rng(31);
  Tensor L = random_tensor(6, 8, rng);
  Tensor G = random_tensor(6, 8, rng);
  for (double& x : L.data) x *= 10.0;
  for (double& x : G.data) x *= 10.0;
  Tape t;
  const Tensor& H = t.value(ops::gated_fusion(t.constant(L), t.constant(G)));
  for (std::size_t i = 0; i < H.numel(); ++i) {
    CHECK(H.data[i] >= std::min(L.data[i], G.data[i]));
    CHECK(H.data[i] <= std::max(L.data[i], G.data[i]));
  }
  // identical inputs pass through bit-exactly
  Tape t2;
  const Tensor& H2 = t2.value(ops::gated_fusion(t2.constant(L), t2.constant(L)));
  for (std::size_t i = 0; i < H2.numel(); ++i) CHECK(H2.data[i] == L.data[i]);
}

TEST_CASE("tape rejects non-scalar backward and accumulates into leaves") {
  ParamRegistry reg;
  reg.add("w", Tensor({2, 2}, {1, 2, 3, 4}));
  Tape t;
  Var w = t.leaf(&reg.get("w"));
  CHECK_THROWS_AS(t.backward(w), DimensionError);

  reg.zero_grads();
  Var loss = ops::sum_all(ops::mul(w, w));
  t.backward(loss);
  t.backward(loss);  // second sweep accumulates again
  CHECK(reg.get("w").grad[0] == doctest::Approx(4.0));
  CHECK(reg.get("w").grad[3] == doctest::Approx(16.0));
}
