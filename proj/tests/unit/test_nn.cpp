#include "smplgan/nn.hpp"

#include "test_support.hpp"

#include <cmath>

using namespace smplgan;
using namespace smplgan::nn;
using smplgan::testing::numeric_gradient;
using smplgan::testing::random_matrix;

TEST(Linear, ComputesAffineMap) {
  ParameterSet set;
  Rng rng(1);
  Linear fc = Linear::create(set, "fc", 3, 2, rng);
  fc.bias->value << 0.5, -1.0;
  Matrix x(2, 3);
  x << 1, 2, 3, -1, 0, 4;
  Graph g;
  Var y = fc(g, g.constant(x));
  Matrix expect = x * fc.weight->value;
  expect.rowwise() += fc.bias->value.row(0);
  EXPECT_TRUE(y.value().isApprox(expect, 1e-14));
}

TEST(Glorot, RespectsBound) {
  ParameterSet set;
  Parameter& p = set.create("w", 20, 30);
  Rng rng(2);
  glorot_uniform(p, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  EXPECT_LE(p.value.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(p.value.cwiseAbs().maxCoeff(), 0.5 * bound);
}

TEST(Lstm, SingleStepMatchesClosedForm) {
  ParameterSet set;
  Rng rng(3);
  LstmStack lstm(set, "lstm", 2, 1, 1, rng);
  // Zero weights; only the cell-candidate bias is set, so i = f = o = 1/2.
  for (const auto& p : set.params()) p->value.setZero();
  const double a = 0.7;
  for (const auto& p : set.params())
    if (p->value.rows() == 1) p->value(0, 2) = a;
  Graph g;
  LstmState s = lstm.zero_state(g, 1);
  Var h = lstm.step(g, g.constant(Matrix::Constant(1, 2, 3.0)), s);
  const double c = 0.5 * std::tanh(a);
  EXPECT_NEAR(s.c[0].item(), c, 1e-15);
  EXPECT_NEAR(h.item(), 0.5 * std::tanh(c), 1e-15);
}

TEST(Lstm, GradientMatchesFiniteDifference) {
  ParameterSet set;
  Rng rng(4);
  LstmStack lstm(set, "lstm", 3, 4, 2, rng);
  const Matrix x = random_matrix(rng, 2, 3);
  const Matrix w = random_matrix(rng, 2, 4);
  Parameter& p = *set.params().front();
  auto run = [&](Graph& g) {
    LstmState s = lstm.zero_state(g, 2);
    Var h;
    for (int t = 0; t < 3; ++t) h = lstm.step(g, g.constant(x * (t + 1)), s);
    return ad::sum(ad::mul(h, g.constant(w)));
  };
  Graph g;
  set.zero_grad();
  g.backward(run(g));
  g.accumulate_into_parameters();
  const Matrix keep = p.value;
  const Matrix numeric = numeric_gradient(
      [&](const Matrix& v) {
        p.value = v;
        Graph h;
        return run(h).item();
      },
      keep);
  p.value = keep;
  EXPECT_TRUE(p.grad.isApprox(numeric, 1e-6)) << p.grad << "\n\n" << numeric;
}

TEST(ConvLstm, ShapesChainAndHalve) {
  ParameterSet set;
  Rng rng(5);
  ConvLstmStack stack(set, "cl", {{3, 8, 4}, {4, 4, 2}}, rng);
  EXPECT_EQ(stack.output_size(), 2 * 2 * 2);
  Graph g;
  LstmState s = stack.zero_state(g, 3);
  Var h = stack.step(g, g.constant(random_matrix(rng, 3, 3 * 64)), s);
  EXPECT_EQ(h.rows(), 3);
  EXPECT_EQ(h.cols(), 8);
}

TEST(RmsProp, FirstStepIsScaledSign) {
  ParameterSet set;
  Parameter& p = set.create("w", 1, 3);
  p.value << 1.0, 1.0, 1.0;
  p.grad << 2.0, -0.5, 0.0;
  RmsProp opt(set, 0.01, 0.99, 1e-8);
  opt.step();
  // mean square = 0.01 g^2, so the step is lr * g / (0.1 |g| + eps).
  EXPECT_NEAR(p.value(0, 0), 1.0 - 0.01 * 2.0 / (0.2 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value(0, 1), 1.0 + 0.01 * 0.5 / (0.05 + 1e-8), 1e-15);
  EXPECT_EQ(p.value(0, 2), 1.0);
}

TEST(RmsProp, ClippingScalesGlobalNorm) {
  ParameterSet a, b;
  a.create("w", 1, 2).grad << 3.0, 4.0;
  b.create("w", 1, 2).grad << 0.6, 0.8;
  RmsProp oa(a, 0.1), ob(b, 0.1);
  oa.step(1.0);
  ob.step();
  EXPECT_TRUE(a.params()[0]->value.isApprox(b.params()[0]->value, 1e-12));
}

TEST(ParameterSet, SnapshotRestoreAndDigest) {
  ParameterSet set;
  Rng rng(6);
  Linear::create(set, "fc", 3, 2, rng);
  const auto snap = set.snapshot();
  const std::string digest = set.digest();
  set.params()[0]->value(0, 0) += 1.0;
  EXPECT_NE(set.digest(), digest);
  set.restore(snap);
  EXPECT_EQ(set.digest(), digest);
  EXPECT_EQ(set.scalar_count(), 8u);

  auto bad = snap;
  bad.begin()->second = Matrix::Zero(5, 5);
  EXPECT_ERROR_KIND(set.restore(bad), ErrorKind::MalformedAsset);
  EXPECT_ERROR_KIND(set.restore({}), ErrorKind::MalformedAsset);
}

TEST(ParameterSet, FreezeInMakesConstants) {
  ParameterSet set;
  Rng rng(7);
  Linear fc = Linear::create(set, "fc", 2, 2, rng);
  Graph g;
  set.freeze_in(g);
  set.zero_grad();
  g.backward(ad::sum(fc(g, g.constant(Matrix::Ones(1, 2)))));
  g.accumulate_into_parameters();
  EXPECT_EQ(set.grad_norm(), 0.0);
}
