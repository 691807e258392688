#pragma once

#include "smplgan/autodiff.hpp"
#include "smplgan/body_model.hpp"
#include "smplgan/nn.hpp"
#include "smplgan/text_encoder.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace smplgan {

struct GeneratorConfig {
  int max_words = 17;
  int embed_dim = 256;
  int latent_dim = 120;
  int feature_dim = 128;
  int hidden = 512;
  int layers = 3;
  int attention_hidden = 128;
  int k_max = 3;
  double leaky_slope = 0.2;
  // Initial bias of the emitted camera scale, so untrained renders are visible.
  double camera_scale_init = 0.5;
};

// Captures the recurrent state entering each step; filled when requested.
struct GeneratorTrace {
  std::vector<std::vector<Matrix>> hidden_in;  // per step, per layer (B x H)
  std::vector<Matrix> output_in;               // per step, previous emission (B x 85)
  std::vector<Matrix> attention;               // per step (B x n)
};

struct Rollout {
  std::vector<ad::Var> steps;      // k entries, each B x 85
  std::vector<ad::Var> attention;  // k entries, each B x n
};

struct GeneratedSet {
  ShapeSet set;
  std::vector<RowVector> attention;
};

class Generator {
 public:
  Generator(const GeneratorConfig& cfg, std::uint64_t seed);

  const GeneratorConfig& config() const { return cfg_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }

  // x_rows: (B*n) x L word rows, z: B x latent -> (B*n) x F features.
  ad::Var encode_condition(ad::Graph& g, ad::Var x_rows, ad::Var z) const;
  // features: (B*n) x F, h_top: B x H, mask: B x n -> B x n attention weights.
  ad::Var attention_step(ad::Graph& g, ad::Var features, ad::Var h_top, const Matrix& mask) const;

  // x: B x (n*L) flattened captions, mask: B x n, z: B x latent.
  Rollout unroll(ad::Graph& g, const Matrix& x, const Matrix& mask, ad::Var z, int k,
                 GeneratorTrace* trace = nullptr) const;

  // Throws InvalidCount when k is outside [1, k_max].
  GeneratedSet generate_set(const RowVector& z, const WordEmbeddings& x, int k) const;

 private:
  void check_count(int k) const;

  GeneratorConfig cfg_;
  nn::ParameterSet params_;
  nn::Linear enc1_, enc2_;
  nn::Linear att_feat_, att_hidden_, att2_, att3_;
  nn::LstmStack core_;
  nn::Linear head_;
};

RowVector sample_latent(Rng& rng, int dim);

nlohmann::json to_json(const GeneratorConfig& cfg);

}  // namespace smplgan
