#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "xespred/nn.hpp"

using namespace xespred;
using xespred::testing::error_kind;

namespace {

Matrix row(std::initializer_list<double> values) {
  Matrix m(1, values.size());
  std::size_t i = 0;
  for (const double v : values) m(0, i++) = v;
  return m;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Scalar cell: weights and biases in gate order i, f, o, g.
struct ScalarCell {
  double w[4];
  double u[4];
  double b[4];

  std::pair<double, double> step(double x, double h, double c) const {
    const double i = sigmoid(w[0] * x + u[0] * h + b[0]);
    const double f = sigmoid(w[1] * x + u[1] * h + b[1]);
    const double o = sigmoid(w[2] * x + u[2] * h + b[2]);
    const double g = std::tanh(w[3] * x + u[3] * h + b[3]);
    const double c2 = f * c + i * g;
    return {o * std::tanh(c2), c2};
  }

  LstmLayerParams layer() const {
    LstmLayerParams p = make_lstm_layer(1, 1);
    for (std::size_t k = 0; k < 4; ++k) {
      p.W(0, k) = w[k];
      p.U(0, k) = u[k];
      p.bias(0, k) = b[k];
    }
    return p;
  }
};

}  // namespace

TEST_CASE("softmax rows") {
  const Matrix a = softmax_rows(row({0.0, 0.0}));
  CHECK(a(0, 0) == doctest::Approx(0.5));
  const Matrix b = softmax_rows(row({0.0, std::log(3.0)}));
  CHECK(b(0, 0) == doctest::Approx(0.25));
  CHECK(b(0, 1) == doctest::Approx(0.75));
  const Matrix c = softmax_rows(row({1000.0, 0.0}));
  CHECK(c.all_finite());
  CHECK(c(0, 0) == doctest::Approx(1.0));
  CHECK(c(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("cross entropy") {
  const std::int32_t id = 1;
  CHECK(cross_entropy(row({0.0, 1.0}), {&id, 1}) == 0.0);
  CHECK(cross_entropy(row({0.25, 0.25, 0.25, 0.25}), {&id, 1}) ==
        doctest::Approx(std::log(4.0)));
  const double clamped = cross_entropy(row({1.0, 0.0}), {&id, 1});
  CHECK(std::isfinite(clamped));
  CHECK(clamped <= -std::log(1e-12) + 1e-9);
  CHECK(clamped == doctest::Approx(27.631).epsilon(1e-4));
}

TEST_CASE("regression losses") {
  Matrix out(2, 1);
  out(0, 0) = 1.0;
  out(1, 0) = 2.0;
  const Matrix target(2, 1);
  const Matrix mask(2, 1, 1.0);
  CHECK(regression_loss(LossKind::mse, out, target, mask) == doctest::Approx(2.5));
  CHECK(regression_loss(LossKind::rmse, out, target, mask) == doctest::Approx(std::sqrt(2.5)));
  out(1, 0) = -2.0;
  CHECK(regression_loss(LossKind::mae, out, target, mask) == doctest::Approx(1.5));
  Matrix half = mask;
  half(1, 0) = 0.0;
  CHECK(regression_loss(LossKind::mse, out, target, half) == doctest::Approx(1.0));
  CHECK(error_kind([&] { regression_loss(LossKind::mse, out, target, Matrix(2, 1)); }) ==
        ErrorKind::no_signal);
}

TEST_CASE("embedding lookup and scatter") {
  Matrix e(3, 2);
  for (std::size_t i = 0; i < 6; ++i) e.values()[i] = static_cast<double>(i + 1);
  const std::int32_t one = 1;
  const Matrix r = embedding_forward(e, {&one, 1});
  CHECK(r(0, 0) == 3.0);
  CHECK(r(0, 1) == 4.0);

  const std::int32_t ids[] = {1, 1};
  Matrix grad(2, 2, 1.0);
  Matrix de(3, 2);
  embedding_backward(grad, ids, de);
  CHECK(de(1, 0) == 2.0);
  CHECK(de(1, 1) == 2.0);
  CHECK(de(0, 0) == 0.0);
  CHECK(de(2, 1) == 0.0);

  const std::int32_t last = 2;
  CHECK(embedding_forward(e, {&last, 1})(0, 1) == 6.0);
  const std::int32_t past = 3;
  CHECK(error_kind([&] { embedding_forward(e, {&past, 1}); }) == ErrorKind::range);
}

TEST_CASE("zero cell stays at zero") {
  const LstmLayerParams p = make_lstm_layer(3, 2);
  Matrix x(2, 3, 0.7);
  const LstmState s = lstm_cell_forward(x, LstmState::zeros(2, 2), p);
  CHECK(s.h == Matrix(2, 2));
  CHECK(s.c == Matrix(2, 2));
}

TEST_CASE("scalar cell matches an independent evaluation") {
  const ScalarCell cell{{0.3, -0.2, 0.5, 0.9}, {0.1, 0.4, -0.3, 0.2}, {0.05, 1.0, -0.1, 0.0}};
  const auto [h, c] = cell.step(0.8, 0.25, -0.4);
  LstmState state{Matrix(1, 1, 0.25), Matrix(1, 1, -0.4)};
  const LstmState next = lstm_cell_forward(Matrix(1, 1, 0.8), state, cell.layer());
  CHECK(next.h(0, 0) == doctest::Approx(h).epsilon(1e-14));
  CHECK(next.c(0, 0) == doctest::Approx(c).epsilon(1e-14));
}

TEST_CASE("two steps compose") {
  const ScalarCell cell{{1.0, 1.0, 1.0, 1.0}, {1.0, 1.0, 1.0, 1.0}, {0.0, 0.0, 0.0, 0.0}};
  auto [h1, c1] = cell.step(0.5, 0.0, 0.0);
  auto [h2, c2] = cell.step(-0.3, h1, c1);
  LstmState state = LstmState::zeros(1, 1);
  state = lstm_cell_forward(Matrix(1, 1, 0.5), state, cell.layer());
  state = lstm_cell_forward(Matrix(1, 1, -0.3), state, cell.layer());
  CHECK(state.h(0, 0) == doctest::Approx(h2).epsilon(1e-14));
  CHECK(state.c(0, 0) == doctest::Approx(c2).epsilon(1e-14));
}

TEST_CASE("global norm clipping") {
  Matrix a = row({6.0, 8.0});
  Matrix* grads[] = {&a};
  CHECK(clip_by_global_norm(grads, 5.0) == doctest::Approx(10.0));
  CHECK(a(0, 0) == doctest::Approx(3.0));
  CHECK(a(0, 1) == doctest::Approx(4.0));

  Matrix b = row({0.0, 3.0});
  Matrix* small[] = {&b};
  clip_by_global_norm(small, 5.0);
  CHECK(b == row({0.0, 3.0}));

  Matrix z(2, 2);
  Matrix* zero[] = {&z};
  CHECK(clip_by_global_norm(zero, 5.0) == 0.0);
  CHECK(z == Matrix(2, 2));
}

TEST_CASE("optimizer updates") {
  SUBCASE("sgd") {
    Matrix p(1, 1, 1.0);
    Matrix g(1, 1, 0.5);
    Optimizer opt({OptimizerKind::sgd, 0.1});
    const ParamRef refs[] = {{"p", &p}};
    const Matrix* grads[] = {&g};
    opt.step(refs, grads);
    CHECK(p(0, 0) == doctest::Approx(0.95));
  }
  SUBCASE("adam with zero gradient") {
    Matrix p(1, 1, 1.0);
    Matrix g(1, 1, 0.0);
    Optimizer opt({OptimizerKind::adam, 0.1});
    const ParamRef refs[] = {{"p", &p}};
    const Matrix* grads[] = {&g};
    opt.step(refs, grads);
    CHECK(p(0, 0) == 1.0);
  }
  SUBCASE("momentum") {
    Matrix p(1, 1, 1.0);
    Matrix g(1, 1, 1.0);
    OptimizerConfig config;
    config.kind = OptimizerKind::momentum;
    config.learning_rate = 0.1;
    config.momentum = 0.9;
    Optimizer opt(config);
    const ParamRef refs[] = {{"p", &p}};
    const Matrix* grads[] = {&g};
    opt.step(refs, grads);
    CHECK(1.0 - p(0, 0) == doctest::Approx(0.1));
    const double before = p(0, 0);
    opt.step(refs, grads);
    CHECK(before - p(0, 0) == doctest::Approx(0.19));
  }
  SUBCASE("rmsprop first step") {
    Matrix p(1, 1, 1.0);
    Matrix g(1, 1, 2.0);
    OptimizerConfig config;
    config.kind = OptimizerKind::rmsprop;
    config.learning_rate = 0.01;
    config.decay = 0.9;
    config.epsilon = 1e-8;
    Optimizer opt(config);
    const ParamRef refs[] = {{"p", &p}};
    const Matrix* grads[] = {&g};
    opt.step(refs, grads);
    // cache = 0.1 * 4, step = lr * g / (sqrt(cache) + eps)
    CHECK(p(0, 0) == doctest::Approx(1.0 - 0.01 * 2.0 / (std::sqrt(0.4) + 1e-8)));
  }
}

TEST_CASE("layer initialization") {
  LstmLayerParams a = make_lstm_layer(3, 4);
  LstmLayerParams b = make_lstm_layer(3, 4);
  Xoshiro256 ra(11);
  Xoshiro256 rb(11);
  init_lstm_layer(a, ra);
  init_lstm_layer(b, rb);
  CHECK(a == b);
  for (std::size_t k = 0; k < 4 * 4; ++k) {
    const double expected = k >= 4 && k < 8 ? 1.0 : 0.0;
    CHECK(a.bias(0, k) == expected);
  }
  for (const double v : a.W.values()) CHECK(std::fabs(v) <= kInitRange);
  for (const double v : a.U.values()) CHECK(std::fabs(v) <= kInitRange);
}
