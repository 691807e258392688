#include "smplgan/generator.hpp"

#include "smplgan/errors.hpp"

namespace smplgan {

Generator::Generator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  check(cfg.max_words > 0 && cfg.embed_dim > 0 && cfg.latent_dim > 0 && cfg.feature_dim > 0 && cfg.hidden > 0 &&
            cfg.layers > 0 && cfg.attention_hidden > 0 && cfg.k_max > 0,
        ErrorKind::ConfigError, "generator dimensions must be positive");
  Rng rng(seed);
  enc1_ = nn::Linear::create(params_, "gen.enc1", cfg.embed_dim + cfg.latent_dim, cfg.feature_dim, rng);
  enc2_ = nn::Linear::create(params_, "gen.enc2", cfg.feature_dim, cfg.feature_dim, rng);
  att_feat_ = nn::Linear::create(params_, "gen.att1.feat", cfg.feature_dim, cfg.attention_hidden, rng);
  att_hidden_ = nn::Linear::create(params_, "gen.att1.hidden", cfg.hidden, cfg.attention_hidden, rng);
  att2_ = nn::Linear::create(params_, "gen.att2", cfg.attention_hidden, cfg.attention_hidden, rng);
  att3_ = nn::Linear::create(params_, "gen.att3", cfg.attention_hidden, 1, rng);
  core_ = nn::LstmStack(params_, "gen.core", cfg.feature_dim + cfg.hidden + kParamDim, cfg.hidden, cfg.layers, rng);
  head_ = nn::Linear::create(params_, "gen.head", cfg.hidden, kParamDim, rng);
  head_.bias->value(0, kPoseDim + kShapeDim) = cfg.camera_scale_init;
}

ad::Var Generator::encode_condition(ad::Graph& g, ad::Var x_rows, ad::Var z) const {
  ad::Var in = ad::concat_cols({x_rows, ad::repeat_rows(z, cfg_.max_words)});
  ad::Var h = ad::leaky_relu(enc1_(g, in), cfg_.leaky_slope);
  return ad::leaky_relu(enc2_(g, h), cfg_.leaky_slope);
}

ad::Var Generator::attention_step(ad::Graph& g, ad::Var features, ad::Var h_top, const Matrix& mask) const {
  // First layer over [feature row, h_top] split into its two column blocks.
  ad::Var hidden_part = ad::matmul(h_top, g.param(*att_hidden_.weight));
  hidden_part = ad::add_bias(hidden_part, g.param(*att_hidden_.bias));
  ad::Var a = ad::add(att_feat_(g, features), ad::repeat_rows(hidden_part, cfg_.max_words));
  a = ad::leaky_relu(a, cfg_.leaky_slope);
  a = ad::leaky_relu(att2_(g, a), cfg_.leaky_slope);
  ad::Var logits = ad::reshape(att3_(g, a), mask.rows(), cfg_.max_words);
  return ad::masked_softmax_rows(logits, mask);
}

void Generator::check_count(int k) const {
  check(k >= 1 && k <= cfg_.k_max, ErrorKind::InvalidCount,
        "set size " + std::to_string(k) + " outside [1, " + std::to_string(cfg_.k_max) + "]");
}

Rollout Generator::unroll(ad::Graph& g, const Matrix& x, const Matrix& mask, ad::Var z, int k,
                          GeneratorTrace* trace) const {
  check_count(k);
  const Index batch = x.rows();
  check(x.cols() == static_cast<Index>(cfg_.max_words) * cfg_.embed_dim && mask.rows() == batch &&
            mask.cols() == cfg_.max_words && z.rows() == batch && z.cols() == cfg_.latent_dim,
        ErrorKind::ShapeMismatch, "generator input shapes disagree with its configuration");

  ad::Var x_rows = g.constant(Eigen::Map<const Matrix>(x.data(), batch * cfg_.max_words, cfg_.embed_dim));
  ad::Var features = encode_condition(g, x_rows, z);

  nn::LstmState state = core_.zero_state(g, batch);
  ad::Var prev = g.constant(Matrix::Zero(batch, kParamDim));
  Rollout out;
  for (int t = 0; t < k; ++t) {
    if (trace) {
      std::vector<Matrix> hs;
      for (const auto& h : state.h) hs.push_back(h.value());
      trace->hidden_in.push_back(std::move(hs));
      trace->output_in.push_back(prev.value());
    }
    ad::Var w = attention_step(g, features, state.h.back(), mask);
    ad::Var mixed = ad::weighted_row_sum(w, features);
    ad::Var top = core_.step(g, ad::concat_cols({mixed, state.h.front(), prev}), state);
    ad::Var s = head_(g, top);
    out.steps.push_back(s);
    out.attention.push_back(w);
    if (trace) trace->attention.push_back(w.value());
    prev = s;
  }
  return out;
}

GeneratedSet Generator::generate_set(const RowVector& z, const WordEmbeddings& x, int k) const {
  check_count(k);
  check(x.max_words() == cfg_.max_words && x.dim() == cfg_.embed_dim, ErrorKind::ShapeMismatch,
        "caption embedding shape disagrees with the generator");
  check(z.size() == cfg_.latent_dim, ErrorKind::ShapeMismatch, "latent vector has the wrong length");
  ad::Graph g;
  const Rollout r = unroll(g, x.flat(), x.mask(), g.constant(z), k);
  GeneratedSet out;
  for (int t = 0; t < k; ++t) {
    const Matrix& s = r.steps[static_cast<std::size_t>(t)].value();
    check(s.allFinite(), ErrorKind::NonFiniteResult, "generator produced non-finite parameters");
    out.set.push_back(SmplParams::from_flat(std::span<const double>(s.data(), kParamDim)));
    out.attention.push_back(r.attention[static_cast<std::size_t>(t)].value());
  }
  return out;
}

RowVector sample_latent(Rng& rng, int dim) {
  RowVector z(dim);
  for (int i = 0; i < dim; ++i) z(i) = rng.normal();
  return z;
}

nlohmann::json to_json(const GeneratorConfig& c) {
  return {{"max_words", c.max_words},       {"embed_dim", c.embed_dim}, {"latent_dim", c.latent_dim},
          {"feature_dim", c.feature_dim},   {"hidden", c.hidden},       {"layers", c.layers},
          {"attention_hidden", c.attention_hidden}, {"k_max", c.k_max}, {"leaky_slope", c.leaky_slope},
          {"camera_scale_init", c.camera_scale_init}};
}

}  // namespace smplgan
