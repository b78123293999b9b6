#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "vlab/gradcheck.hpp"
#include "vlab/ops.hpp"

using namespace vlab;

namespace {

template <typename T>
std::vector<T> run_backward(TensorT<T> loss_src, const std::function<TensorT<T>(TensorT<T>&)>& fn) {
  TapeT<T> tape;
  typename TapeT<T>::Scope scope(tape);
  loss_src.set_requires_grad(true);
  TensorT<T> loss = fn(loss_src);
  backward(loss);
  loss_src.ensure_grad();
  return loss_src.grad();
}

}  // namespace

TEST_CASE("construction invariants") {
  Tensor z = zeros<float>({2, 3});
  CHECK(z.numel() == 6);
  for (int64_t i = 0; i < 6; ++i) CHECK(z.data()[i] == 0.0f);

  Tensor c = full<float>({4}, 0.4f);
  for (int64_t i = 0; i < 4; ++i) CHECK(c.data()[i] == 0.4f);

  CHECK_THROWS_AS((void)zeros<float>({2, 0, 3}), Error);
  CHECK_THROWS_AS((void)zeros<float>({-1}), Error);
}

TEST_CASE("uniform fill matches the scalar generator and the expected mean") {
  Rng stream = Rng(7).split(0);
  Tensor t = uniform<float>({1000}, stream, 0.0f, 1.0f);
  double sum = 0;
  for (int64_t i = 0; i < 1000; ++i) {
    CHECK(t.data()[i] == stream.uniform_at(uint64_t(i), 0.0f, 1.0f));
    sum += t.data()[i];
  }
  CHECK(std::abs(sum / 1000.0 - 0.5) < 0.05);
}

TEST_CASE("kaiming bound") {
  Rng stream(3);
  const int64_t fan_in = 27;
  Tensor t = kaiming_uniform<float>({64, 27}, stream, fan_in);
  const float bound = std::sqrt(6.0f / float(fan_in));
  float mx = 0;
  for (int64_t i = 0; i < t.numel(); ++i) mx = std::max(mx, std::abs(t.data()[i]));
  CHECK(mx <= bound);
  CHECK(mx > bound * 0.9f);  // the bound is actually approached
}

TEST_CASE("elementwise basics") {
  Tensor a = from_values<float>({3}, {-1, 0, 2});
  Tensor r = relu(a);
  CHECK(r.data()[0] == 0.0f);
  CHECK(r.data()[1] == 0.0f);
  CHECK(r.data()[2] == 2.0f);

  Tensor s = sigmoid(zeros<float>({1}));
  CHECK(s.data()[0] == doctest::Approx(0.5f));

  Tensor b = from_values<float>({3}, {10, 20, 30});
  Tensor sum = add(a, b);
  CHECK(sum.data()[0] == 9.0f);
  Tensor prod = mul(a, b);
  CHECK(prod.data()[2] == 60.0f);
  Tensor d = sub(b, a);
  CHECK(d.data()[0] == 11.0f);
}

TEST_CASE("broadcast rules") {
  Tensor x = ones<float>({2, 3, 4});
  Tensor g = from_values<float>({2, 3, 1}, {1, 2, 3, 4, 5, 6});
  Tensor y = mul(x, g);
  CHECK(y.shape() == Shape{2, 3, 4});
  CHECK(y.at({0, 1, 3}) == 2.0f);
  CHECK(y.at({1, 2, 0}) == 6.0f);

  Tensor bias = from_values<float>({4}, {1, 2, 3, 4});
  Tensor z = add(x, bias);  // trailing-axis broadcast
  CHECK(z.at({1, 2, 1}) == 3.0f);

  CHECK_THROWS_AS((void)add(ones<float>({2, 3}), ones<float>({2, 4})), Error);
}

TEST_CASE("broadcast gradient reduces over expanded axes") {
  TapeT<float> tape;
  Tape::Scope scope(tape);
  Tensor x = ones<float>({2, 3});
  x.set_requires_grad(true);
  Tensor g = from_values<float>({1, 3}, {1, 2, 3});
  g.set_requires_grad(true);
  Tensor loss = reduce_sum(mul(x, g), {0, 1});
  backward(loss);
  CHECK(g.grad()[0] == 2.0f);  // summed over the broadcast batch axis
  CHECK(g.grad()[1] == 2.0f);
  CHECK(x.grad()[0] == 1.0f);
  CHECK(x.grad()[5] == 3.0f);
}

TEST_CASE("add gradient is ones (finite-difference check)") {
  Rng rng(5);
  TensorT<double> a = uniform<double>({6}, rng.split(0), -1.0, 1.0);
  TensorT<double> b = uniform<double>({6}, rng.split(1), -1.0, 1.0);
  auto res = grad_check<double>(
      [&](const TensorT<double>& t) { return reduce_sum(add(t, b), {0}); }, a, 1e-3);
  CHECK(res.max_rel_err < 1e-8);
}

TEST_CASE("matmul identity and hand contraction") {
  Tensor I = from_values<float>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Rng rng(11);
  Tensor M = uniform<float>({3, 3}, rng, -2.0f, 2.0f);
  Tensor P = matmul(I, M);
  for (int64_t i = 0; i < 9; ++i) CHECK(P.data()[i] == doctest::Approx(M.data()[i]));

  Tensor A = from_values<float>({2, 2}, {1, 2, 3, 4});
  Tensor B = from_values<float>({2, 1}, {5, 6});
  Tensor C = matmul(A, B);
  CHECK(C.at({0, 0}) == doctest::Approx(17.0f));
  CHECK(C.at({1, 0}) == doctest::Approx(39.0f));

  CHECK_THROWS_AS((void)matmul(ones<float>({2, 3}), ones<float>({4, 2})), Error);
  CHECK_THROWS_AS((void)matmul(ones<float>({2, 2, 3}), ones<float>({3, 3, 2})), Error);
}

TEST_CASE("matmul gradient vs central differences") {
  Rng rng(17);
  TensorT<double> A = uniform<double>({4, 5}, rng.split(0), -1.0, 1.0);
  TensorT<double> B = uniform<double>({5, 6}, rng.split(1), -1.0, 1.0);
  auto resA = grad_check<double>(
      [&](const TensorT<double>& t) { return reduce_sum(mul(matmul(t, B), matmul(t, B)), {0, 1}); }, A,
      1e-4);
  CHECK(resA.max_rel_err < 1e-6);
  auto resB = grad_check<double>(
      [&](const TensorT<double>& t) { return reduce_sum(matmul(A, t), {0, 1}); }, B, 1e-4);
  CHECK(resB.max_rel_err < 1e-8);
}

TEST_CASE("reduce mean / sum / max") {
  Tensor t = from_values<float>({2}, {2, 4});
  Tensor m = reduce_mean(t, {0});
  CHECK(m.rank() == 0);
  CHECK(m.item() == 3.0f);

  Tensor x = from_values<float>({2, 3}, {1, 5, 2, 7, 0, 7});
  Tensor mx = reduce_max(x, {1});
  CHECK(mx.at({0}) == 5.0f);
  CHECK(mx.at({1}) == 7.0f);

  CHECK_THROWS_AS((void)reduce_sum(x, {2}), Error);
  CHECK_THROWS_AS((void)reduce_sum(x, {0, 0}), Error);

  // keepdims variant
  Tensor k = reduce_sum(x, {1}, true);
  CHECK(k.shape() == Shape{2, 1});
}

TEST_CASE("max backward routes to the first maximal element") {
  auto grads = run_backward<float>(from_values<float>({3}, {1, 3, 3}),
                                   [](Tensor& t) { return reduce_max(t, {0}); });
  CHECK(grads[0] == 0.0f);
  CHECK(grads[1] == 1.0f);  // lowest flat index wins the tie
  CHECK(grads[2] == 0.0f);
}

TEST_CASE("mean equals sum over count exactly in 64-bit mode") {
  Rng rng(23);
  TensorT<double> x = uniform<double>({7, 5}, rng, -3.0, 3.0);
  TensorT<double> m = reduce_mean(x, {0, 1});
  TensorT<double> s = reduce_sum(x, {0, 1});
  CHECK(m.item() == s.item() / 35.0);
}

TEST_CASE("softmax values, shift invariance, normalization") {
  Tensor u = softmax(zeros<float>({3}), 0);
  for (int i = 0; i < 3; ++i) CHECK(u.data()[i] == doctest::Approx(1.0f / 3.0f));

  Tensor x = from_values<float>({3}, {1, 2, 3});
  Tensor y = softmax(x, 0);
  CHECK(y.data()[0] == doctest::Approx(0.09003).epsilon(1e-4));
  CHECK(y.data()[1] == doctest::Approx(0.24473).epsilon(1e-4));
  CHECK(y.data()[2] == doctest::Approx(0.66524).epsilon(1e-4));

  Tensor shifted = softmax(from_values<float>({3}, {1 + 7.5f, 2 + 7.5f, 3 + 7.5f}), 0);
  for (int i = 0; i < 3; ++i) CHECK(shifted.data()[i] == doctest::Approx(y.data()[i]).epsilon(1e-6));

  Rng rng(31);
  Tensor r = uniform<float>({4, 9}, rng, -5.0f, 5.0f);
  Tensor sm = softmax(r, 1);
  for (int64_t i = 0; i < 4; ++i) {
    double sum = 0;
    for (int64_t j = 0; j < 9; ++j) sum += sm.at({i, j});
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("backward basics and errors") {
  {
    auto grads = run_backward<float>(zeros<float>({5}), [](Tensor& w) { return reduce_sum(w, {0}); });
    for (float g : grads) CHECK(g == 1.0f);
  }
  {
    auto grads = run_backward<float>(from_values<float>({2}, {1, 2}),
                                     [](Tensor& w) { return reduce_sum(mul(w, w), {0}); });
    CHECK(grads[0] == doctest::Approx(2.0f));
    CHECK(grads[1] == doctest::Approx(4.0f));
  }
  {
    // non-scalar loss
    Tape tape;
    Tape::Scope scope(tape);
    Tensor w = ones<float>({3});
    w.set_requires_grad(true);
    Tensor y = mul(w, w);
    CHECK_THROWS_AS(backward(y), Error);
  }
  {
    // detached loss: never recorded
    Tape tape;
    Tape::Scope scope(tape);
    Tensor loss = zeros<float>({});
    CHECK_THROWS_AS(backward(loss), Error);
  }
}

TEST_CASE("gradients accumulate only along the path to the loss") {
  Tape tape;
  Tape::Scope scope(tape);
  Tensor used = ones<float>({3});
  used.set_requires_grad(true);
  Tensor unused = ones<float>({3});
  unused.set_requires_grad(true);
  Tensor side = mul(unused, unused);  // recorded but not part of the loss
  (void)side;
  Tensor loss = reduce_sum(used, {0});
  backward(loss);
  CHECK(used.has_grad());
  bool unused_clean = !unused.has_grad();
  if (!unused_clean) {
    unused_clean = true;
    for (float g : unused.grad()) unused_clean = unused_clean && g == 0.0f;
  }
  CHECK(unused_clean);
}

TEST_CASE("reshape permute concat round trips with gradients") {
  Rng rng(41);
  TensorT<double> x = uniform<double>({2, 3, 4}, rng, -1.0, 1.0);
  auto res = grad_check<double>(
      [](const TensorT<double>& t) {
        auto p = permute(t, {2, 0, 1});
        auto r = reshape(p, {4, 6});
        return reduce_sum(mul(r, r), {0, 1});
      },
      x, 1e-4);
  CHECK(res.max_rel_err < 1e-7);

  Tensor a = from_values<float>({2, 2}, {1, 2, 3, 4});
  Tensor b = from_values<float>({2, 1}, {9, 8});
  Tensor c = concat(a, b, 1);
  CHECK(c.shape() == Shape{2, 3});
  CHECK(c.at({0, 2}) == 9.0f);
  CHECK(c.at({1, 0}) == 3.0f);

  TensorT<double> ca = uniform<double>({2, 3}, rng.split(1), -1.0, 1.0);
  TensorT<double> cb = uniform<double>({2, 2}, rng.split(2), -1.0, 1.0);
  auto cres = grad_check<double>(
      [&](const TensorT<double>& t) {
        auto m = concat(t, cb, 1);
        return reduce_sum(mul(m, m), {0, 1});
      },
      ca, 1e-4);
  CHECK(cres.max_rel_err < 1e-7);
}

TEST_CASE("bit-identical results for identical seeds") {
  auto make = [] {
    Rng rng(99);
    Tensor x = uniform<float>({64}, rng.split(0), -1.0f, 1.0f);
    Tensor y = sigmoid(scale(x, 3.0f));
    return y;
  };
  Tensor a = make(), b = make();
  CHECK(std::memcmp(a.data(), b.data(), size_t(a.numel()) * sizeof(float)) == 0);
}
