#include "smplgan/count_predictor.hpp"

#include "smplgan/errors.hpp"

#include <cmath>

namespace smplgan {

CountMode parse_count_mode(const std::string& s) {
  if (s == "argmax") return CountMode::Argmax;
  if (s == "expected") return CountMode::Expected;
  fail(ErrorKind::ConfigError, "count mode must be 'argmax' or 'expected', got '" + s + "'");
}

std::string to_string(CountMode m) { return m == CountMode::Argmax ? "argmax" : "expected"; }

CountPredictor::CountPredictor(const CountPredictorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  check(cfg.embed_dim > 0 && cfg.hidden > 0 && cfg.k_max > 0, ErrorKind::ConfigError,
        "count predictor dimensions must be positive");
  Rng rng(seed);
  fc1_ = nn::Linear::create(params_, "count.fc1", cfg.embed_dim, cfg.hidden, rng);
  fc2_ = nn::Linear::create(params_, "count.fc2", cfg.hidden, cfg.k_max, rng);
}

RowVector CountPredictor::pool(const WordEmbeddings& x) {
  check(x.word_count > 0, ErrorKind::EmptyCaption, "caption has no words");
  return x.values.topRows(x.word_count).colwise().mean();
}

ad::Var CountPredictor::logits(ad::Graph& g, ad::Var pooled) const {
  return fc2_(g, ad::leaky_relu(fc1_(g, pooled), cfg_.leaky_slope));
}

CountDistribution CountPredictor::predict_count_distribution(const WordEmbeddings& x) const {
  check(x.dim() == cfg_.embed_dim, ErrorKind::ShapeMismatch, "caption embedding width disagrees with the predictor");
  ad::Graph g;
  const Matrix l = logits(g, g.constant(pool(x))).value();
  const RowVector e = (l.array() - l.maxCoeff()).exp().matrix();
  return e / e.sum();
}

int select_count(std::span<const double> p, CountMode mode) {
  check(!p.empty(), ErrorKind::InvalidCount, "empty count distribution");
  const int k_max = static_cast<int>(p.size());
  if (mode == CountMode::Argmax) {
    int best = 0;
    for (int i = 1; i < k_max; ++i)
      if (p[static_cast<std::size_t>(i)] > p[static_cast<std::size_t>(best)]) best = i;
    return best + 1;
  }
  double expected = 0.0;
  for (int i = 0; i < k_max; ++i) expected += (i + 1) * p[static_cast<std::size_t>(i)];
  const int rounded = static_cast<int>(std::floor(expected + 0.5));
  return std::clamp(rounded, 1, k_max);
}

int select_count(const CountDistribution& p, CountMode mode) {
  return select_count(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), mode);
}

nlohmann::json to_json(const CountPredictorConfig& c) {
  return {{"embed_dim", c.embed_dim}, {"hidden", c.hidden}, {"k_max", c.k_max}, {"leaky_slope", c.leaky_slope}};
}

CountPredictorConfig counter_config_from_json(const nlohmann::json& j) {
  CountPredictorConfig c;
  c.embed_dim = j.at("embed_dim").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.k_max = j.at("k_max").get<int>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  return c;
}

}  // namespace smplgan
