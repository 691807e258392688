#include "smplgan/critics.hpp"

#include "smplgan/errors.hpp"

namespace smplgan {

ParamCritic::ParamCritic(const ParamCriticConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  check(cfg.max_words > 0 && cfg.embed_dim > 0 && cfg.encoder_hidden > 0 && cfg.hidden > 0 && cfg.layers > 0,
        ErrorKind::ConfigError, "critic dimensions must be positive");
  Rng rng(seed);
  const Index text = static_cast<Index>(cfg.max_words) * cfg.embed_dim;
  enc1_ = nn::Linear::create(params_, "d1.enc1", kParamDim + text + cfg.hidden, cfg.encoder_hidden, rng);
  enc2_ = nn::Linear::create(params_, "d1.enc2", cfg.encoder_hidden, cfg.encoder_hidden, rng);
  core_ = nn::LstmStack(params_, "d1.core", cfg.encoder_hidden, cfg.hidden, cfg.layers, rng);
  head_ = nn::Linear::create(params_, "d1.head", cfg.hidden, 1, rng);
}

ad::Var ParamCritic::score(ad::Graph& g, std::span<const ad::Var> steps, ad::Var x) const {
  check(!steps.empty(), ErrorKind::EmptySet, "critic needs at least one set element");
  check(x.cols() == static_cast<Index>(cfg_.max_words) * cfg_.embed_dim, ErrorKind::ShapeMismatch,
        "caption embedding width disagrees with the critic");
  nn::LstmState state = core_.zero_state(g, x.rows());
  ad::Var top = state.h.back();
  // enc1 acts on [s, x, top]; the caption block is the same at every step, so project it once.
  ad::Var w = g.param(*enc1_.weight);
  const Index text = x.cols();
  ad::Var w_s = ad::slice_rows(w, 0, kParamDim);
  ad::Var w_top = ad::slice_rows(w, kParamDim + text, w.rows() - kParamDim - text);
  ad::Var x_part = ad::add_bias(ad::matmul(x, ad::slice_rows(w, kParamDim, text)), g.param(*enc1_.bias));
  for (const ad::Var& s : steps) {
    ad::Var pre = ad::add(ad::add(ad::matmul(s, w_s), x_part), ad::matmul(top, w_top));
    ad::Var e = ad::leaky_relu(pre, cfg_.leaky_slope);
    e = ad::leaky_relu(enc2_(g, e), cfg_.leaky_slope);
    top = core_.step(g, e, state);
  }
  return head_(g, top);
}

double ParamCritic::score_param_set(const ShapeSet& s, const WordEmbeddings& x) const {
  check(!s.empty(), ErrorKind::EmptySet, "critic needs at least one set element");
  check(x.max_words() == cfg_.max_words && x.dim() == cfg_.embed_dim, ErrorKind::ShapeMismatch,
        "caption embedding shape disagrees with the critic");
  ad::Graph g;
  std::vector<ad::Var> steps;
  for (const auto& p : s) steps.push_back(g.constant(p.as_row()));
  const double v = score(g, steps, g.constant(x.flat())).item();
  check(std::isfinite(v), ErrorKind::NonFiniteResult, "critic score is non-finite");
  return v;
}

int RenderCriticConfig::feature_size() const {
  int s = resolution;
  for (std::size_t i = 0; i < stage_channels.size(); ++i) s = (s + 1) / 2;
  return s;
}

RenderCritic::RenderCritic(const RenderCriticConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  check(cfg.resolution >= 8 && !cfg.stage_channels.empty() && !cfg.lstm_channels.empty() && cfg.text_channels > 0 &&
            cfg.final_channels > 0,
        ErrorKind::ConfigError, "render critic configuration is incomplete");
  Rng rng(seed);
  Index channels = 3, size = cfg.resolution;
  for (std::size_t i = 0; i < cfg.stage_channels.size(); ++i) {
    ad::ConvGeometry geo{channels, size, size, 3, 2, 1};
    stages_.push_back(nn::Conv2d::create(params_, "d2.stage" + std::to_string(i), geo, cfg.stage_channels[i], true, rng));
    channels = cfg.stage_channels[i];
    size = geo.out_height();
  }
  ad::ConvGeometry last{channels, size, size, 3, 1, 1};
  stages_.push_back(nn::Conv2d::create(params_, "d2.stage_final", last, cfg.final_channels, true, rng));
  const Index text = static_cast<Index>(cfg.max_words) * cfg.embed_dim;
  text_proj_ = nn::Linear::create(params_, "d2.text", text, cfg.text_channels, rng);

  std::vector<nn::ConvLstmLayerShape> shapes;
  Index in_channels = cfg.final_channels + cfg.text_channels;
  for (int h : cfg.lstm_channels) {
    shapes.push_back({in_channels, size, h});
    in_channels = h;
    size = shapes.back().out_size();
  }
  core_ = nn::ConvLstmStack(params_, "d2.core", shapes, rng);
  head_ = nn::Linear::create(params_, "d2.head", core_.output_size(), 1, rng);
}

ad::Var RenderCritic::encode_map(ad::Graph& g, ad::Var maps) const {
  ad::Var h = maps;
  for (const auto& stage : stages_) h = ad::leaky_relu(stage(g, h), cfg_.leaky_slope);
  return h;
}

ad::Var RenderCritic::score(ad::Graph& g, std::span<const ad::Var> steps, ad::Var x) const {
  check(!steps.empty(), ErrorKind::EmptySet, "critic needs at least one rendered map");
  const Index size = cfg_.feature_size();
  // The caption projection is a 1x1 convolution over the spatially repeated
  // caption, which equals projecting once and tiling.
  ad::Var text = ad::tile_spatial(text_proj_(g, x), size, size);
  nn::LstmState state = core_.zero_state(g, x.rows());
  ad::Var top;
  for (const ad::Var& m : steps) {
    check(m.cols() == 3 * static_cast<Index>(cfg_.resolution) * cfg_.resolution, ErrorKind::ShapeMismatch,
          "rendered map resolution disagrees with the critic");
    top = core_.step(g, ad::concat_cols({encode_map(g, m), text}), state);
  }
  return head_(g, top);
}

double RenderCritic::score_render_set(const std::vector<RenderedMap>& maps, const WordEmbeddings& x) const {
  check(!maps.empty(), ErrorKind::EmptySet, "critic needs at least one rendered map");
  check(x.max_words() == cfg_.max_words && x.dim() == cfg_.embed_dim, ErrorKind::ShapeMismatch,
        "caption embedding shape disagrees with the critic");
  ad::Graph g;
  std::vector<ad::Var> steps;
  for (const auto& m : maps) {
    check(m.resolution == cfg_.resolution, ErrorKind::ShapeMismatch, "rendered map resolution disagrees with the critic");
    steps.push_back(g.constant(m.pixels));
  }
  const double v = score(g, steps, g.constant(x.flat())).item();
  check(std::isfinite(v), ErrorKind::NonFiniteResult, "critic score is non-finite");
  return v;
}

nlohmann::json to_json(const ParamCriticConfig& c) {
  return {{"max_words", c.max_words}, {"embed_dim", c.embed_dim}, {"encoder_hidden", c.encoder_hidden},
          {"hidden", c.hidden},       {"layers", c.layers},       {"leaky_slope", c.leaky_slope}};
}

nlohmann::json to_json(const RenderCriticConfig& c) {
  return {{"max_words", c.max_words},           {"embed_dim", c.embed_dim},
          {"resolution", c.resolution},         {"stage_channels", c.stage_channels},
          {"final_channels", c.final_channels}, {"text_channels", c.text_channels},
          {"lstm_channels", c.lstm_channels},   {"leaky_slope", c.leaky_slope}};
}

}  // namespace smplgan
