#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include "oracles/scalar_cells.hpp"
#include "sememe_rnn/autodiff.hpp"

using namespace sememe::ad;

namespace {

Tensor random_tensor(Index rows, Index cols, std::mt19937_64& rng, bool grad = true) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return Tensor(std::move(m), grad);
}

}  // namespace

TEST_CASE("forward examples") {
  const Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor col = Tensor::matrix({{3}, {4}});
  const Tensor out = matmul(eye, col);
  CHECK(out.shape() == Shape{2, 1});
  CHECK(out(0, 0) == 3.0);
  CHECK(out(1, 0) == 4.0);

  const Tensor s = sigmoid(Tensor::vector({0, 0}));
  CHECK(s(0, 0) == 0.5);
  CHECK(s(0, 1) == 0.5);

  const Tensor c = concat({Tensor::vector({1, 2}), Tensor::vector({3})});
  CHECK(c.shape() == Shape{3});
  CHECK(c(0, 0) == 1.0);
  CHECK(c(0, 1) == 2.0);
  CHECK(c(0, 2) == 3.0);
}

TEST_CASE("backward examples") {
  SUBCASE("sum of squares") {
    Tensor x = Tensor::vector({1, 2, 3}, true);
    backward(sum(mul(x, x)));
    CHECK(x.grad()(0, 0) == 2.0);
    CHECK(x.grad()(0, 1) == 4.0);
    CHECK(x.grad()(0, 2) == 6.0);
  }
  SUBCASE("linear map") {
    Tensor w = Tensor::matrix({{1, 0}, {0, 1}});
    Tensor x = Tensor::vector({5, 7}, true);
    backward(sum(matmul(w, x)));
    CHECK(x.grad()(0, 0) == 1.0);
    CHECK(x.grad()(0, 1) == 1.0);
  }
  SUBCASE("tanh") {
    Tensor x = Tensor::vector({0.3}, true);
    backward(sum(tanh(x)));
    CHECK(x.grad()(0, 0) == doctest::Approx(oracle::kTanhGrad03).epsilon(1e-15));
  }
  SUBCASE("a tensor used twice accumulates both paths") {
    Tensor x = Tensor::vector({1, -2, 3, 4}, true);
    backward(add(sum(x), sum(x)));
    for (Index i = 0; i < 4; ++i) CHECK(x.grad()(0, i) == 2.0);
  }
}

TEST_CASE("backward contract") {
  SUBCASE("non-scalar loss") {
    Tensor x = Tensor::vector({1, 2}, true);
    Tensor y = tanh(x);
    CHECK_THROWS_AS(backward(y), TapeError);
    Tape::active().clear();
  }
  SUBCASE("second backward without a new forward") {
    Tensor x = Tensor::vector({1, 2}, true);
    Tensor loss = sum(mul(x, x));
    backward(loss);
    CHECK_THROWS_AS(backward(loss), TapeError);
  }
  SUBCASE("tape is cleared") {
    Tensor x = Tensor::vector({1, 2}, true);
    backward(sum(tanh(x)));
    CHECK(Tape::active().size() == 0);
  }
  SUBCASE("no recording without grad or under NoGradGuard") {
    Tensor a = Tensor::vector({1, 2});
    (void)tanh(a);
    CHECK(Tape::active().size() == 0);
    Tensor b = Tensor::vector({1, 2}, true);
    {
      NoGradGuard guard;
      (void)tanh(b);
    }
    CHECK(Tape::active().size() == 0);
  }
}

TEST_CASE("errors") {
  const Tensor a = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  const Tensor b = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(mul(a, b), ShapeError);
  try {
    (void)matmul(a, b);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
  }
  const Tensor bad = Tensor::vector({1.0, std::nan("")});
  CHECK_THROWS_AS(tanh(bad), NonFiniteError);
  const Tensor inf = Tensor::vector({1.0, INFINITY});
  CHECK_THROWS_AS(add(inf, inf), NonFiniteError);
}

TEST_CASE("grad_check examples") {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor(1, 8, rng);
  CHECK(grad_check([&] { return sum(mul(x, x)); }, x, 1e-5) < 1e-7);

  Tensor y = random_tensor(1, 3, rng);
  const Tensor k = Tensor::scalar(4.0);
  CHECK(grad_check([&] { return mul(k, k); }, y, 1e-5) == 0.0);
}

TEST_CASE("every primitive passes grad_check below 1e-6") {
  std::mt19937_64 rng(5);
  Tensor a = random_tensor(3, 4, rng);
  Tensor b = random_tensor(3, 4, rng);
  Tensor w = random_tensor(4, 2, rng);
  Tensor row = random_tensor(1, 4, rng);
  Tensor probe = random_tensor(3, 4, rng, false);
  const std::vector<Index> ids{2, 0, 2, 1};
  const std::vector<Index> targets{1, 0, 3};
  auto weigh = [&](const Tensor& t) { return sum(mul(t, probe)); };

  const double eps = 1e-5;
  CHECK(grad_check([&] { return sum(matmul(a, w)); }, a, eps) < 1e-6);
  CHECK(grad_check([&] { return sum(tanh(matmul(a, w))); }, w, eps) < 1e-6);
  CHECK(grad_check([&] { return weigh(add(a, b)); }, b, eps) < 1e-6);
  CHECK(grad_check([&] { return weigh(add(a, row)); }, row, eps) < 1e-6);
  CHECK(grad_check([&] { return weigh(sub(a, b)); }, b, eps) < 1e-6);
  CHECK(grad_check([&] { return weigh(mul(a, b)); }, a, eps) < 1e-6);
  CHECK(grad_check([&] { return weigh(scale(a, -1.7)); }, a, eps) < 1e-6);
  CHECK(grad_check([&] { return weigh(one_minus(a)); }, a, eps) < 1e-6);
  CHECK(grad_check([&] { return weigh(sigmoid(a)); }, a, eps) < 1e-6);
  CHECK(grad_check([&] { return weigh(tanh(a)); }, a, eps) < 1e-6);
  CHECK(grad_check([&] { return weigh(abs(a)); }, a, eps) < 1e-6);
  CHECK(grad_check([&] { return sum(mul(concat({a, b}), concat({probe, probe}))); }, b, eps) <
        1e-6);
  CHECK(grad_check([&] { return sum(tanh(slice_cols(a, 1, 2))); }, a, eps) < 1e-6);
  CHECK(grad_check([&] { return sum(tanh(slice_rows(a, 1, 2))); }, a, eps) < 1e-6);
  CHECK(grad_check([&] { return sum(tanh(mean_rows(a))); }, a, eps) < 1e-6);
  CHECK(grad_check([&] { return sum(tanh(gather_rows(a, ids))); }, a, eps) < 1e-6);
  CHECK(grad_check([&] { return softmax_cross_entropy(a, targets); }, a, eps) < 1e-6);
  const std::vector<Tensor> parts{a, b};
  CHECK(grad_check([&] { return sum(tanh(concat_rows(parts))); }, a, eps) < 1e-6);
}

TEST_CASE("softmax cross-entropy of uniform logits is log V") {
  const Tensor logits = Tensor::zeros({2, 5});
  const std::vector<Index> targets{0, 4};
  CHECK(softmax_cross_entropy(logits, targets).item() == doctest::Approx(std::log(5.0)));
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(1);
  const Tensor x = Tensor(Matrix::Ones(200, 50));
  SUBCASE("eval mode is identity") {
    const Tensor y = dropout(x, 0.5, false, rng);
    CHECK(y.value() == x.value());
  }
  SUBCASE("train mode keeps the mean and scales survivors") {
    const Tensor y = dropout(x, 0.25, true, rng);
    const double mean = y.value().mean();
    CHECK(mean == doctest::Approx(1.0).epsilon(0.03));
    for (Index i = 0; i < y.size(); ++i) {
      const double v = y.value().data()[i];
      CHECK((v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15));
    }
  }
  SUBCASE("same stream, same mask") {
    std::mt19937_64 r1(9), r2(9);
    CHECK(dropout(x, 0.5, true, r1).value() == dropout(x, 0.5, true, r2).value());
  }
}

TEST_CASE("determinism and thread confinement") {
  auto run = [] {
    std::mt19937_64 rng(42);
    Tensor a = random_tensor(4, 4, rng);
    Tensor w = random_tensor(4, 4, rng);
    backward(sum(tanh(matmul(a, w))));
    return std::make_pair(a.grad(), w.grad());
  };
  const auto first = run();
  std::pair<Matrix, Matrix> second;
  std::thread worker([&] { second = run(); });
  worker.join();
  CHECK(first.first == second.first);
  CHECK(first.second == second.second);
}
