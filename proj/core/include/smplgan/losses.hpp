#pragma once

#include "smplgan/autodiff.hpp"
#include "smplgan/body_model.hpp"
#include "smplgan/critics.hpp"
#include "smplgan/renderer.hpp"
#include "smplgan/text_encoder.hpp"

#include <vector>

namespace smplgan {

struct LossConfig {
  double lambda = 10.0;
  int critic_steps = 5;
};

// s_t = eps * real_t + (1 - eps) * fake_t; throws CardinalityMismatch.
ShapeSet interpolate_sets(const ShapeSet& real, const ShapeSet& fake, double eps);
// Batched form: one eps per row, shared across steps.
std::vector<Matrix> interpolate_steps(const std::vector<Matrix>& real, const std::vector<Matrix>& fake,
                                      const Eigen::VectorXd& eps);

struct PenaltyResult {
  ad::Var loss;                 // scalar, value = mean penalty, exact parameter gradients
  Eigen::VectorXd grad_norms;   // per-sample joint gradient norm
  double value = 0.0;
};

// Mean over rows of (|grad_{s,x} D(s, x)| - 1)^2 with the gradient taken
// jointly with respect to every step input and the caption.
PenaltyResult lipschitz_penalty(ad::Graph& g, const Critic& critic, const std::vector<Matrix>& steps,
                                const Matrix& x);
double lipschitz_penalty(const Critic& critic, const ShapeSet& s, const WordEmbeddings& x);
double lipschitz_penalty(const Critic& critic, const std::vector<RenderedMap>& maps, const WordEmbeddings& x);

struct CriticLossTerms {
  ad::Var total;
  double real_fake = 0.0;  // -(D(real, x) - D(fake, x))
  double mismatch = 0.0;   // -(D(real, x) - D(real, x_bar))
  double penalty = 0.0;    // before the lambda weight
  double value() const { return total.item(); }
};

// Batched critic objective; every row of `x_bar` must be a caption other than
// the matching row of `x`. `eps` holds one interpolation weight per row.
CriticLossTerms critic_loss(ad::Graph& g, const Critic& critic, const std::vector<Matrix>& real,
                            const std::vector<Matrix>& fake, const Matrix& x, const Matrix& x_bar,
                            const Eigen::VectorXd& eps, const LossConfig& cfg);

double critic_loss_d1(const Critic& d1, const ShapeSet& fake, const ShapeSet& real, const WordEmbeddings& x,
                      const WordEmbeddings& x_bar, double eps, const LossConfig& cfg);
double critic_loss_d2(const Critic& d2, const std::vector<RenderedMap>& fake, const std::vector<RenderedMap>& real,
                      const WordEmbeddings& x, const WordEmbeddings& x_bar, double eps, const LossConfig& cfg);

struct DiscriminatorLoss {
  CriticLossTerms d1;
  std::optional<CriticLossTerms> d2;
  ad::Var total;  // L_D1 + L_D2
};

DiscriminatorLoss discriminator_total(ad::Graph& g, CriticLossTerms d1, std::optional<CriticLossTerms> d2);

struct GeneratorLossTerms {
  ad::Var g1;                 // -mean D1(G(z, x), x)
  std::optional<ad::Var> g2;  // -mean D2(R(M(G(z, x))), x)
  ad::Var total;              // L_G1 + L_G2
};

// fake_maps may be empty when d2 is null.
GeneratorLossTerms generator_loss(ad::Graph& g, const Critic& d1, const Critic* d2,
                                  const std::vector<ad::Var>& fake_steps, const std::vector<ad::Var>& fake_maps,
                                  ad::Var x);

struct GeneratorLossValues {
  double g1 = 0.0, g2 = 0.0, total = 0.0;
};

GeneratorLossValues generator_loss(const Critic& d1, const Critic* d2, const ShapeSet& fake, const WordEmbeddings& x,
                                   const BodyModelAssets& assets, const RenderConfig& render);

}  // namespace smplgan
