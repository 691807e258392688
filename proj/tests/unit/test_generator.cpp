#include "smplgan/generator.hpp"

#include "test_support.hpp"

using namespace smplgan;
using smplgan::testing::random_matrix;

namespace {

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.max_words = 6;
  c.embed_dim = 8;
  c.latent_dim = 5;
  c.feature_dim = 7;
  c.hidden = 9;
  c.layers = 3;
  c.attention_hidden = 6;
  c.k_max = 3;
  return c;
}

EmbedderSpec embedder() {
  EmbedderSpec e;
  e.max_words = 6;
  e.dim = 8;
  return e;
}

}  // namespace

TEST(Generator, EncodeConditionIsRowWise) {
  Generator gen(small_config(), 1);
  const auto a = encode_caption({"two", "people", "sitting"}, embedder());
  const auto b = encode_caption({"two", "dogs", "sitting", "down"}, embedder());
  Rng rng(2);
  const Matrix z = random_matrix(rng, 1, 5);
  ad::Graph g;
  ad::Var fa = gen.encode_condition(g, g.constant(a.values), g.constant(z));
  ad::Var fb = gen.encode_condition(g, g.constant(b.values), g.constant(z));
  EXPECT_EQ(fa.rows(), 6);
  EXPECT_EQ(fa.cols(), 7);
  EXPECT_EQ(fa.value().row(0), fb.value().row(0));
  EXPECT_EQ(fa.value().row(2), fb.value().row(2));
  EXPECT_NE(fa.value().row(1), fb.value().row(1));
  // Padding rows are all-zero inputs and give one fixed feature vector.
  EXPECT_EQ(fa.value().row(4), fb.value().row(4));
  EXPECT_EQ(fa.value().row(3), fa.value().row(5));
}

TEST(Generator, DefaultFeatureShapeUsesSeventeenWords) {
  GeneratorConfig c;
  c.hidden = 16;
  c.feature_dim = 8;
  c.attention_hidden = 4;
  Generator gen(c, 0);
  EmbedderSpec e;
  const auto x = encode_caption({"one", "person"}, e);
  ad::Graph g;
  ad::Var f = gen.encode_condition(g, g.constant(x.values), g.constant(Matrix::Zero(1, 120)));
  EXPECT_EQ(f.rows(), 17);
}

TEST(Generator, AttentionWeightsEqualWhenLogitsAreFlat) {
  Generator gen(small_config(), 3);
  nn::ParameterSet& ps = gen.parameters();
  ps.find("gen.att3.weight")->value.setZero();
  const auto x = encode_caption({"a", "b", "c", "d"}, embedder());
  Rng rng(4);
  ad::Graph g;
  ad::Var feats = gen.encode_condition(g, g.constant(x.values), g.constant(random_matrix(rng, 1, 5)));
  ad::Var h = g.constant(random_matrix(rng, 1, 9));
  const Matrix w = gen.attention_step(g, feats, h, x.mask()).value();
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(w(0, i), 0.25, 1e-15);
  EXPECT_EQ(w(0, 4), 0.0);
  EXPECT_EQ(w(0, 5), 0.0);

  // A constant shift of every logit leaves the weights unchanged.
  // Parameter nodes are cached per graph, so each evaluation uses a new one.
  ps.find("gen.att3.weight")->value = random_matrix(rng, 6, 1);
  auto weights = [&] {
    ad::Graph h2;
    return Matrix(gen.attention_step(h2, h2.constant(feats.value()), h2.constant(h.value()), x.mask()).value());
  };
  const Matrix before = weights();
  ps.find("gen.att3.bias")->value(0, 0) += 3.7;
  const Matrix after = weights();
  EXPECT_FALSE(before.isApprox(Matrix(w), 1e-3));
  EXPECT_TRUE(before.isApprox(after, 1e-12));
}

TEST(Generator, DominantLogitTakesTheWeight) {
  ad::Graph g;
  Matrix logits = Matrix::Zero(1, 5);
  logits(0, 2) = 20.0;
  const Matrix w = ad::masked_softmax_rows(g.constant(logits), Matrix::Ones(1, 5)).value();
  // e^20 / (e^20 + 4) = 1 - 8.2e-9
  EXPECT_GT(w(0, 2), 0.999);
  EXPECT_NEAR(w(0, 2), std::exp(20.0) / (std::exp(20.0) + 4.0), 1e-15);
}

TEST(Generator, GenerateSetShapesAndDeterminism) {
  Generator gen(small_config(), 5);
  const auto x = encode_caption({"three", "people", "standing"}, embedder());
  Rng rng(6);
  const RowVector z = sample_latent(rng, 5);
  const auto a = gen.generate_set(z, x, 3);
  const auto b = gen.generate_set(z, x, 3);
  ASSERT_EQ(a.set.size(), 3u);
  EXPECT_EQ(a.set, b.set);
  ASSERT_EQ(a.attention.size(), 3u);
  for (const auto& w : a.attention) {
    EXPECT_NEAR(w.sum(), 1.0, 1e-6);
    EXPECT_GE(w.minCoeff(), 0.0);
    EXPECT_EQ(w.tail(3).sum(), 0.0);
  }
  for (const auto& s : a.set) EXPECT_EQ(s.flatten().size(), 85u);
  EXPECT_ERROR_KIND(gen.generate_set(z, x, 0), ErrorKind::InvalidCount);
  EXPECT_ERROR_KIND(gen.generate_set(z, x, 4), ErrorKind::InvalidCount);
  EXPECT_ERROR_KIND(gen.generate_set(RowVector::Zero(4), x, 1), ErrorKind::ShapeMismatch);
}

TEST(Generator, PrefixOfLongerRolloutMatchesShorterRollout) {
  Generator gen(small_config(), 7);
  const auto x = encode_caption({"two", "people"}, embedder());
  Rng rng(8);
  const RowVector z = sample_latent(rng, 5);
  const auto two = gen.generate_set(z, x, 2);
  const auto three = gen.generate_set(z, x, 3);
  EXPECT_EQ(two.set[0], three.set[0]);
  EXPECT_EQ(two.set[1], three.set[1]);
}

TEST(Generator, FirstStepStartsFromZeroState) {
  Generator gen(small_config(), 9);
  const auto x = encode_caption({"one", "person", "waving"}, embedder());
  Rng rng(10);
  ad::Graph g;
  GeneratorTrace trace;
  const Rollout r = gen.unroll(g, x.flat(), x.mask(), g.constant(random_matrix(rng, 1, 5)), 3, &trace);
  ASSERT_EQ(trace.hidden_in.size(), 3u);
  for (const auto& h : trace.hidden_in[0]) EXPECT_TRUE(h.isZero(0.0));
  EXPECT_TRUE(trace.output_in[0].isZero(0.0));
  EXPECT_EQ(trace.output_in[1], r.steps[0].value());
  EXPECT_EQ(trace.output_in[2], r.steps[1].value());
  EXPECT_FALSE(trace.hidden_in[1][0].isZero(0.0));
}

TEST(Generator, LatentChangesTheOutput) {
  Generator gen(small_config(), 11);
  const auto x = encode_caption({"two", "people", "walking"}, embedder());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto a = gen.generate_set(sample_latent(rng, 5), x, 2);
    const auto b = gen.generate_set(sample_latent(rng, 5), x, 2);
    double diff = 0.0;
    for (int t = 0; t < 2; ++t)
      diff = std::max(diff, (a.set[t].as_row() - b.set[t].as_row()).cwiseAbs().maxCoeff());
    EXPECT_GT(diff, 1e-6) << "seed " << seed;
  }
}

TEST(Generator, EveryParameterReceivesGradient) {
  Generator gen(small_config(), 12);
  const auto a = encode_caption({"two", "people", "walking"}, embedder());
  const auto b = encode_caption({"three", "people", "sitting", "down"}, embedder());
  Matrix x(2, a.flat().cols()), mask(2, 6);
  x << a.flat(), b.flat();
  mask << a.mask(), b.mask();
  Rng rng(13);
  ad::Graph g;
  gen.parameters().zero_grad();
  const Rollout r = gen.unroll(g, x, mask, g.constant(random_matrix(rng, 2, 5)), 3);
  std::vector<ad::Var> terms;
  for (const auto& s : r.steps) terms.push_back(ad::sum(ad::mul(s, g.constant(s.value().cwiseSign()))));
  ad::Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  g.backward(total);
  g.accumulate_into_parameters();
  for (const auto& p : gen.parameters().params()) EXPECT_GT(p->grad.cwiseAbs().maxCoeff(), 0.0) << p->name;
}

TEST(Generator, BatchedUnrollMatchesSingleCaptions) {
  Generator gen(small_config(), 14);
  const auto a = encode_caption({"two", "people", "walking"}, embedder());
  const auto b = encode_caption({"one", "person"}, embedder());
  Rng rng(15);
  const Matrix z = random_matrix(rng, 2, 5);
  Matrix x(2, a.flat().cols()), mask(2, 6);
  x << a.flat(), b.flat();
  mask << a.mask(), b.mask();
  ad::Graph g;
  const Rollout r = gen.unroll(g, x, mask, g.constant(z), 2);
  const auto sb = gen.generate_set(z.row(1), b, 2);
  EXPECT_TRUE(r.steps[1].value().row(1).isApprox(sb.set[1].as_row(), 1e-12));
  EXPECT_TRUE(r.attention[0].value().row(1).isApprox(sb.attention[0], 1e-12));
}

TEST(Generator, CameraScaleStartsVisible) {
  Generator gen(small_config(), 16);
  EXPECT_EQ(gen.parameters().find("gen.head.bias")->value(0, kPoseDim + kShapeDim), 0.5);
}
