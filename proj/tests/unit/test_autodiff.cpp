#include "smplgan/autodiff.hpp"

#include "test_support.hpp"

#include <vector>

using namespace smplgan;
using namespace smplgan::ad;
using smplgan::testing::numeric_gradient;
using smplgan::testing::random_matrix;

namespace {

using Builder = std::function<Var(Graph&, const std::vector<Var>&)>;

// Compares reverse-mode gradients of a scalar builder against central
// differences for every input.
void check_gradients(const std::vector<Matrix>& inputs, const Builder& build, double tol = 1e-6) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(g.input(m));
  Var out = build(g, vars);
  ASSERT_EQ(out.rows(), 1);
  ASSERT_EQ(out.cols(), 1);
  g.backward(out);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto f = [&](const Matrix& xi) {
      Graph h;
      std::vector<Var> vs;
      for (std::size_t j = 0; j < inputs.size(); ++j) vs.push_back(h.input(j == i ? xi : inputs[j]));
      return build(h, vs).item();
    };
    const Matrix numeric = numeric_gradient(f, inputs[i]);
    const Matrix analytic = g.grad(vars[i]);
    ASSERT_EQ(analytic.rows(), numeric.rows());
    for (Index k = 0; k < numeric.size(); ++k)
      EXPECT_NEAR(analytic.data()[k], numeric.data()[k], tol * std::max(1.0, std::abs(numeric.data()[k])))
          << "input " << i << " coordinate " << k;
  }
}

// Weighted sum so that every output entry matters.
Var project(Graph& g, Var v, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(v, g.constant(random_matrix(rng, v.rows(), v.cols()))));
}

// Checks jvp values against finite differences of the forward pass and
// checks that the jvp is itself differentiable with respect to `w`.
void check_jvp(const Matrix& x0, const Matrix& w0, const Builder& build) {
  Rng rng(5);
  const Matrix dir = random_matrix(rng, x0.rows(), x0.cols());
  auto forward = [&](const Matrix& x, const Matrix& w) {
    Graph h;
    return build(h, {h.input(x), h.input(w)}).item();
  };
  auto tangent = [&](const Matrix& w) {
    Graph h;
    Var x = h.input(x0);
    Var wv = h.input(w);
    Var out = build(h, {x, wv});
    std::vector<std::pair<Var, Matrix>> d{{x, dir}};
    return h.jvp(out, d).item();
  };
  const double eps = 1e-6;
  const double fd = (forward(x0 + eps * dir, w0) - forward(x0 - eps * dir, w0)) / (2 * eps);
  EXPECT_NEAR(tangent(w0), fd, 1e-6 * std::max(1.0, std::abs(fd)));

  Graph h;
  Var x = h.input(x0);
  Var wv = h.input(w0);
  Var out = build(h, {x, wv});
  std::vector<std::pair<Var, Matrix>> d{{x, dir}};
  Var t = h.jvp(out, d);
  h.backward(t);
  const Matrix analytic = h.grad(wv);
  const Matrix numeric = numeric_gradient(tangent, w0, 1e-5);
  for (Index k = 0; k < numeric.size(); ++k)
    EXPECT_NEAR(analytic.data()[k], numeric.data()[k], 1e-5 * std::max(1.0, std::abs(numeric.data()[k])));
}

}  // namespace

TEST(Autodiff, MatmulAddSubMul) {
  Rng rng(1);
  check_gradients({random_matrix(rng, 3, 4), random_matrix(rng, 4, 2)},
                  [](Graph& g, const std::vector<Var>& v) { return project(g, matmul(v[0], v[1])); });
  check_gradients({random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)}, [](Graph& g, const std::vector<Var>& v) {
    return project(g, mul(add(v[0], v[1]), sub(v[0], v[1])));
  });
}

TEST(Autodiff, ElementwiseNonlinearities) {
  Rng rng(2);
  check_gradients({random_matrix(rng, 2, 5)}, [](Graph& g, const std::vector<Var>& v) {
    return project(g, add(sigmoid(v[0]), add(tanh(v[0]), leaky_relu(v[0], 0.2))));
  });
  check_gradients({random_matrix(rng, 2, 5)},
                  [](Graph& g, const std::vector<Var>& v) { return project(g, affine(scale(v[0], 3.0), -0.5, 2.0)); });
}

TEST(Autodiff, StructuralOps) {
  Rng rng(3);
  check_gradients({random_matrix(rng, 4, 6), random_matrix(rng, 1, 6)}, [](Graph& g, const std::vector<Var>& v) {
    Var a = add_bias(v[0], v[1]);
    Var c = concat_cols({slice_cols(a, 1, 3), slice_cols(a, 0, 2)});
    Var r = concat_rows({slice_rows(c, 2, 2), slice_rows(c, 0, 1)});
    return project(g, add(reshape(transpose(r), 5, 3), scale(repeat_rows(slice_rows(reshape(r, 5, 3), 0, 1), 5), 0.5)));
  });
  check_gradients({random_matrix(rng, 3, 3)},
                  [](Graph& g, const std::vector<Var>& v) { return add(mean(v[0]), scale(sum(v[0]), 0.1)); });
}

TEST(Autodiff, AttentionOps) {
  Rng rng(4);
  Matrix mask(2, 4);
  mask << 1, 1, 1, 0, 1, 1, 0, 0;
  check_gradients({random_matrix(rng, 2, 4), random_matrix(rng, 8, 3)}, [&](Graph& g, const std::vector<Var>& v) {
    return project(g, weighted_row_sum(masked_softmax_rows(v[0], mask), v[1]));
  });
  Graph g;
  Var w = masked_softmax_rows(g.input(random_matrix(rng, 2, 4)), mask);
  EXPECT_EQ(w.value()(0, 3), 0.0);
  EXPECT_EQ(w.value()(1, 2), 0.0);
  EXPECT_EQ(w.value()(1, 3), 0.0);
  EXPECT_NEAR(w.value().row(0).sum(), 1.0, 1e-12);
  EXPECT_NEAR(w.value().row(1).sum(), 1.0, 1e-12);
}

TEST(Autodiff, TileSpatialAndConv) {
  Rng rng(6);
  check_gradients({random_matrix(rng, 2, 3)},
                  [](Graph& g, const std::vector<Var>& v) { return project(g, tile_spatial(v[0], 2, 3)); });
  ConvGeometry geo{2, 5, 5, 3, 2, 1};
  check_gradients({random_matrix(rng, 2, 50), random_matrix(rng, 3, 18), random_matrix(rng, 1, 3)},
                  [&](Graph& g, const std::vector<Var>& v) { return project(g, conv2d(v[0], v[1], v[2], geo)); });
  EXPECT_EQ(geo.out_height(), 3);
}

TEST(Autodiff, ConvMatchesDirectSum) {
  // 1 channel, 3x3 input, identity-centre kernel plus a shift.
  ConvGeometry geo{1, 3, 3, 3, 1, 1};
  Matrix x(1, 9);
  x << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  Matrix w = Matrix::Zero(1, 9);
  w(0, 4) = 1.0;  // centre tap
  w(0, 5) = 2.0;  // right neighbour
  Graph g;
  Var y = conv2d(g.constant(x), g.constant(w), Var(), geo);
  // out(i, j) = x(i, j) + 2 x(i, j + 1) with zero padding.
  Matrix expect(1, 9);
  expect << 1 + 4, 2 + 6, 3, 4 + 10, 5 + 12, 6, 7 + 16, 8 + 18, 9;
  EXPECT_EQ(y.value(), expect);
}

TEST(Autodiff, SoftmaxCrossEntropy) {
  Rng rng(7);
  check_gradients({random_matrix(rng, 3, 4)},
                  [](Graph&, const std::vector<Var>& v) { return softmax_cross_entropy(v[0], {0, 3, 1}); });
  Graph g;
  Matrix zeros = Matrix::Zero(2, 4);
  EXPECT_NEAR(softmax_cross_entropy(g.constant(zeros), {1, 2}).item(), std::log(4.0), 1e-12);
}

TEST(Autodiff, StraightThroughRoutesGradient) {
  Graph g;
  Var x = g.input(Matrix::Constant(1, 1, 2.0));
  Matrix shown = Matrix::Constant(1, 1, 42.0);
  Var y = straight_through(scale(x, 3.0), shown);
  EXPECT_EQ(y.item(), 42.0);
  g.backward(y);
  EXPECT_EQ(g.grad(x)(0, 0), 3.0);
}

TEST(Autodiff, ParamNodesAreCachedAndFreezable) {
  Parameter p{"w", Matrix::Constant(2, 2, 1.5), Matrix::Zero(2, 2)};
  Graph g;
  Var a = g.param(p);
  Var b = g.param(p);
  EXPECT_EQ(a.id(), b.id());
  g.backward(sum(add(a, b)));
  g.accumulate_into_parameters();
  EXPECT_EQ(p.grad, Matrix::Constant(2, 2, 2.0));

  Graph h;
  h.freeze(p);
  Var c = h.param(p);
  EXPECT_FALSE(h.requires_grad(c));
  p.zero_grad();
  Var x = h.input(Matrix::Constant(2, 2, 1.0));
  h.backward(sum(mul(c, x)));
  h.accumulate_into_parameters();
  EXPECT_EQ(p.grad, Matrix::Zero(2, 2));
  EXPECT_EQ(h.grad(x), p.value);
}

TEST(Autodiff, JvpOfSmoothNetworkIsDifferentiable) {
  Rng rng(8);
  // x: 3 x 4, w: 4 x 4; a two-layer net with every op that carries a tangent rule.
  check_jvp(random_matrix(rng, 3, 4), random_matrix(rng, 4, 4), [](Graph& g, const std::vector<Var>& v) {
    Var h = leaky_relu(matmul(v[0], v[1]), 0.2);
    Var s = mul(sigmoid(h), tanh(add_bias(h, slice_rows(v[1], 0, 1))));
    Var c = concat_cols({slice_cols(s, 0, 2), scale(slice_cols(s, 2, 2), 2.0)});
    return sum(affine(reshape(transpose(c), 2, 6), 0.5, 1.0));
  });
}

TEST(Autodiff, JvpThroughConvolution) {
  Rng rng(9);
  ConvGeometry geo{1, 4, 4, 3, 2, 1};
  check_jvp(random_matrix(rng, 2, 16), random_matrix(rng, 2, 9), [&](Graph& g, const std::vector<Var>& v) {
    Var y = leaky_relu(conv2d(v[0], v[1], Var(), geo), 0.2);
    return sum(mul(y, y));
  });
}

TEST(Autodiff, BackwardWithSeedAndGradOfUnreachedNode) {
  Graph g;
  Var x = g.input(Matrix::Constant(2, 1, 1.0));
  Var unused = g.input(Matrix::Constant(1, 1, 1.0));
  Var y = scale(x, 4.0);
  Matrix seed(2, 1);
  seed << 1.0, -2.0;
  g.backward(y, seed);
  EXPECT_EQ(g.grad(x), 4.0 * seed);
  EXPECT_EQ(g.grad(unused), Matrix::Zero(1, 1));
  g.clear_grads();
  EXPECT_EQ(g.grad(x), Matrix::Zero(2, 1));
}
