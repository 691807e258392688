#pragma once

#include "smplgan/autodiff.hpp"
#include "smplgan/nn.hpp"
#include "smplgan/text_encoder.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <vector>

namespace smplgan {

struct CountPredictorConfig {
  int embed_dim = 256;
  int hidden = 64;
  int k_max = 3;
  double leaky_slope = 0.2;
};

enum class CountMode { Argmax, Expected };

CountMode parse_count_mode(const std::string& s);
std::string to_string(CountMode m);

// p[i] is the probability of count i + 1.
using CountDistribution = RowVector;

class CountPredictor {
 public:
  CountPredictor(const CountPredictorConfig& cfg, std::uint64_t seed);

  // Mean of the real (unpadded) word rows, 1 x L.
  static RowVector pool(const WordEmbeddings& x);
  // pooled: B x L -> logits B x k_max.
  ad::Var logits(ad::Graph& g, ad::Var pooled) const;
  CountDistribution predict_count_distribution(const WordEmbeddings& x) const;

  const CountPredictorConfig& config() const { return cfg_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }

 private:
  CountPredictorConfig cfg_;
  nn::ParameterSet params_;
  nn::Linear fc1_, fc2_;
};

// Argmax picks the smallest maximizing count; expected rounds sum(i * p_i)
// half up and clamps to [1, k_max].
int select_count(std::span<const double> p, CountMode mode);
int select_count(const CountDistribution& p, CountMode mode);

nlohmann::json to_json(const CountPredictorConfig& cfg);
CountPredictorConfig counter_config_from_json(const nlohmann::json& j);

}  // namespace smplgan
