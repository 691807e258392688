#include "smplgan/losses.hpp"

#include "smplgan/errors.hpp"

#include <cmath>

namespace smplgan {

ShapeSet interpolate_sets(const ShapeSet& real, const ShapeSet& fake, double eps) {
  check(real.size() == fake.size(), ErrorKind::CardinalityMismatch,
        "interpolated sets differ in size (" + std::to_string(real.size()) + " vs " + std::to_string(fake.size()) + ")");
  ShapeSet out;
  for (std::size_t t = 0; t < real.size(); ++t) {
    const auto a = real[t].flatten(), b = fake[t].flatten();
    std::array<double, kParamDim> m{};
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = eps * a[i] + (1.0 - eps) * b[i];
    out.push_back(SmplParams::from_flat(m));
  }
  return out;
}

std::vector<Matrix> interpolate_steps(const std::vector<Matrix>& real, const std::vector<Matrix>& fake,
                                      const Eigen::VectorXd& eps) {
  check(real.size() == fake.size(), ErrorKind::CardinalityMismatch, "interpolated sets differ in size");
  std::vector<Matrix> out;
  for (std::size_t t = 0; t < real.size(); ++t) {
    check(real[t].rows() == eps.size() && fake[t].rows() == eps.size() && real[t].cols() == fake[t].cols(),
          ErrorKind::ShapeMismatch, "interpolation inputs disagree in shape");
    out.push_back(eps.asDiagonal() * real[t] + (1.0 - eps.array()).matrix().asDiagonal() * fake[t]);
  }
  return out;
}

PenaltyResult lipschitz_penalty(ad::Graph& g, const Critic& critic, const std::vector<Matrix>& steps, const Matrix& x) {
  check(!steps.empty(), ErrorKind::EmptySet, "penalty needs at least one set element");
  const Index batch = x.rows();
  std::vector<ad::Var> inputs;
  for (const Matrix& s : steps) inputs.push_back(g.input(s));
  ad::Var xi = g.input(x);
  ad::Var d = critic.score(g, inputs, xi);
  g.backward(d, Matrix::Ones(batch, 1));

  std::vector<Matrix> grads;
  for (const auto& v : inputs) grads.push_back(g.grad(v));
  grads.push_back(g.grad(xi));
  g.clear_grads();

  Eigen::VectorXd norms = Eigen::VectorXd::Zero(batch);
  for (const Matrix& gr : grads) norms += gr.rowwise().squaredNorm();
  norms = norms.cwiseSqrt();
  check(norms.allFinite(), ErrorKind::NonFiniteResult, "critic input gradient is non-finite");

  // Unit directions v = grad / |grad|: the directional derivative of D along v
  // equals |grad| and, with v held fixed, has the same parameter gradient.
  Eigen::VectorXd inv(batch);
  for (Index b = 0; b < batch; ++b) inv(b) = norms(b) > 0.0 ? 1.0 / norms(b) : 0.0;
  std::vector<std::pair<ad::Var, Matrix>> directions;
  for (std::size_t i = 0; i < inputs.size(); ++i) directions.emplace_back(inputs[i], inv.asDiagonal() * grads[i]);
  directions.emplace_back(xi, inv.asDiagonal() * grads.back());
  ad::Var slope = g.jvp(d, directions);

  PenaltyResult r;
  r.grad_norms = norms;
  r.value = (norms.array() - 1.0).square().mean();
  const Matrix coeff = (2.0 * (norms.array() - 1.0) / static_cast<double>(batch)).matrix();
  ad::Var surrogate = ad::sum(ad::mul(slope, g.constant(coeff)));
  r.loss = ad::straight_through(surrogate, Matrix::Constant(1, 1, r.value));
  return r;
}

namespace {

double penalty_value(const Critic& critic, std::vector<Matrix> steps, const Matrix& x) {
  ad::Graph g;
  return lipschitz_penalty(g, critic, steps, x).value;
}

Matrix single_row(const WordEmbeddings& x) { return x.flat(); }

}  // namespace

double lipschitz_penalty(const Critic& critic, const ShapeSet& s, const WordEmbeddings& x) {
  std::vector<Matrix> steps;
  for (const auto& p : s) steps.push_back(p.as_row());
  return penalty_value(critic, std::move(steps), single_row(x));
}

double lipschitz_penalty(const Critic& critic, const std::vector<RenderedMap>& maps, const WordEmbeddings& x) {
  std::vector<Matrix> steps;
  for (const auto& m : maps) steps.push_back(m.pixels);
  return penalty_value(critic, std::move(steps), single_row(x));
}

CriticLossTerms critic_loss(ad::Graph& g, const Critic& critic, const std::vector<Matrix>& real,
                            const std::vector<Matrix>& fake, const Matrix& x, const Matrix& x_bar,
                            const Eigen::VectorXd& eps, const LossConfig& cfg) {
  check(real.size() == fake.size(), ErrorKind::CardinalityMismatch, "real and fake sets differ in size");
  check(!real.empty(), ErrorKind::EmptySet, "critic loss needs non-empty sets");
  check(x.rows() == x_bar.rows() && x.cols() == x_bar.cols(), ErrorKind::ShapeMismatch,
        "captions and mismatched captions differ in shape");
  const Index batch = x.rows();

  CriticLossTerms terms;
  std::optional<PenaltyResult> penalty;
  if (cfg.lambda != 0.0) {
    penalty = lipschitz_penalty(g, critic, interpolate_steps(real, fake, eps), x);
    terms.penalty = penalty->value;
  }

  // One critic pass over [real | fake | real with mismatched caption].
  std::vector<ad::Var> steps;
  for (std::size_t t = 0; t < real.size(); ++t) {
    Matrix stacked(3 * batch, real[t].cols());
    stacked << real[t], fake[t], real[t];
    steps.push_back(g.constant(std::move(stacked)));
  }
  Matrix captions(3 * batch, x.cols());
  captions << x, x, x_bar;
  ad::Var d = critic.score(g, steps, g.constant(std::move(captions)));
  ad::Var d_real = ad::mean(ad::slice_rows(d, 0, batch));
  ad::Var d_fake = ad::mean(ad::slice_rows(d, batch, batch));
  ad::Var d_mismatch = ad::mean(ad::slice_rows(d, 2 * batch, batch));

  ad::Var real_fake = ad::sub(d_fake, d_real);
  ad::Var mismatch = ad::sub(d_mismatch, d_real);
  terms.real_fake = real_fake.item();
  terms.mismatch = mismatch.item();
  terms.total = ad::add(real_fake, mismatch);
  if (penalty) terms.total = ad::add(terms.total, ad::scale(penalty->loss, cfg.lambda));
  return terms;
}

double critic_loss_d1(const Critic& d1, const ShapeSet& fake, const ShapeSet& real, const WordEmbeddings& x,
                      const WordEmbeddings& x_bar, double eps, const LossConfig& cfg) {
  check(real.size() == fake.size(), ErrorKind::CardinalityMismatch, "real and fake sets differ in size");
  std::vector<Matrix> r, f;
  for (const auto& p : real) r.push_back(p.as_row());
  for (const auto& p : fake) f.push_back(p.as_row());
  ad::Graph g;
  return critic_loss(g, d1, r, f, x.flat(), x_bar.flat(), Eigen::VectorXd::Constant(1, eps), cfg).value();
}

double critic_loss_d2(const Critic& d2, const std::vector<RenderedMap>& fake, const std::vector<RenderedMap>& real,
                      const WordEmbeddings& x, const WordEmbeddings& x_bar, double eps, const LossConfig& cfg) {
  check(real.size() == fake.size(), ErrorKind::CardinalityMismatch, "real and fake sets differ in size");
  std::vector<Matrix> r, f;
  for (const auto& m : real) r.push_back(m.pixels);
  for (const auto& m : fake) f.push_back(m.pixels);
  ad::Graph g;
  return critic_loss(g, d2, r, f, x.flat(), x_bar.flat(), Eigen::VectorXd::Constant(1, eps), cfg).value();
}

DiscriminatorLoss discriminator_total(ad::Graph&, CriticLossTerms d1, std::optional<CriticLossTerms> d2) {
  DiscriminatorLoss out{d1, d2, d1.total};
  if (d2) out.total = ad::add(d1.total, d2->total);
  return out;
}

GeneratorLossTerms generator_loss(ad::Graph& g, const Critic& d1, const Critic* d2,
                                  const std::vector<ad::Var>& fake_steps, const std::vector<ad::Var>& fake_maps,
                                  ad::Var x) {
  GeneratorLossTerms out;
  out.g1 = ad::scale(ad::mean(d1.score(g, fake_steps, x)), -1.0);
  out.total = out.g1;
  if (d2 != nullptr) {
    out.g2 = ad::scale(ad::mean(d2->score(g, fake_maps, x)), -1.0);
    out.total = ad::add(out.g1, *out.g2);
  }
  return out;
}

GeneratorLossValues generator_loss(const Critic& d1, const Critic* d2, const ShapeSet& fake, const WordEmbeddings& x,
                                   const BodyModelAssets& assets, const RenderConfig& render) {
  check(!fake.empty(), ErrorKind::EmptySet, "generator loss needs a non-empty set");
  ad::Graph g;
  std::vector<ad::Var> steps, maps;
  for (const auto& p : fake) {
    steps.push_back(g.constant(p.as_row()));
    if (d2 != nullptr) maps.push_back(render_param_rows(g, steps.back(), assets, render));
  }
  const auto terms = generator_loss(g, d1, d2, steps, maps, g.constant(x.flat()));
  GeneratorLossValues v;
  v.g1 = terms.g1.item();
  v.g2 = terms.g2 ? terms.g2->item() : 0.0;
  v.total = terms.total.item();
  return v;
}

}  // namespace smplgan
