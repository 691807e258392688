#pragma once

#include "smplgan/autodiff.hpp"
#include "smplgan/body_model.hpp"
#include "smplgan/nn.hpp"
#include "smplgan/renderer.hpp"
#include "smplgan/text_encoder.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <vector>

namespace smplgan {

// Per-step inputs (k entries, each B x d) and flattened captions (B x n*L)
// mapped to one score per row (B x 1).
class Critic {
 public:
  virtual ~Critic() = default;
  virtual ad::Var score(ad::Graph& g, std::span<const ad::Var> steps, ad::Var x) const = 0;
  virtual nn::ParameterSet& parameters() = 0;
  virtual const nn::ParameterSet& parameters() const = 0;
};

struct ParamCriticConfig {
  int max_words = 17;
  int embed_dim = 256;
  int encoder_hidden = 512;
  int hidden = 512;
  int layers = 3;
  double leaky_slope = 0.2;
};

class ParamCritic final : public Critic {
 public:
  ParamCritic(const ParamCriticConfig& cfg, std::uint64_t seed);

  ad::Var score(ad::Graph& g, std::span<const ad::Var> steps, ad::Var x) const override;
  // Throws EmptySet for k = 0.
  double score_param_set(const ShapeSet& s, const WordEmbeddings& x) const;

  const ParamCriticConfig& config() const { return cfg_; }
  nn::ParameterSet& parameters() override { return params_; }
  const nn::ParameterSet& parameters() const override { return params_; }

 private:
  ParamCriticConfig cfg_;
  nn::ParameterSet params_;
  nn::Linear enc1_, enc2_;
  nn::LstmStack core_;
  nn::Linear head_;
};

struct RenderCriticConfig {
  int max_words = 17;
  int embed_dim = 256;
  int resolution = 224;
  std::vector<int> stage_channels = {32, 64, 128, 256};  // stride-2 stages
  int final_channels = 256;                               // stride-1 stage
  int text_channels = 32;
  std::vector<int> lstm_channels = {64, 64, 64};
  double leaky_slope = 0.2;

  // Spatial extent after the stride-2 stages (14 at resolution 224).
  int feature_size() const;
};

class RenderCritic final : public Critic {
 public:
  RenderCritic(const RenderCriticConfig& cfg, std::uint64_t seed);

  ad::Var score(ad::Graph& g, std::span<const ad::Var> steps, ad::Var x) const override;
  // Convolutional encoder of one map batch (B x 3*R*R) -> B x C*S*S, S = feature_size().
  ad::Var encode_map(ad::Graph& g, ad::Var maps) const;
  // Throws EmptySet for no maps, ShapeMismatch for a wrong resolution.
  double score_render_set(const std::vector<RenderedMap>& maps, const WordEmbeddings& x) const;

  const RenderCriticConfig& config() const { return cfg_; }
  nn::ParameterSet& parameters() override { return params_; }
  const nn::ParameterSet& parameters() const override { return params_; }

 private:
  RenderCriticConfig cfg_;
  nn::ParameterSet params_;
  std::vector<nn::Conv2d> stages_;
  nn::Linear text_proj_;
  nn::ConvLstmStack core_;
  nn::Linear head_;
};

nlohmann::json to_json(const ParamCriticConfig& cfg);
nlohmann::json to_json(const RenderCriticConfig& cfg);

}  // namespace smplgan
