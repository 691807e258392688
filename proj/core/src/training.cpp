#include "smplgan/training.hpp"

#include "smplgan/errors.hpp"
#include "smplgan/hashing.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

namespace smplgan {

BodyModelAssets load_body(const RunConfig& cfg) {
  if (!cfg.body.assets.empty()) return load_body_assets(cfg.body.assets);
  return make_toy_body(cfg.body.toy_vertices, cfg.body.toy_joints, cfg.body.toy_seed);
}

std::uint64_t effective_word_order_seed(const TrainConfig& t) {
  return t.word_order_seed != 0 ? t.word_order_seed : derive_seed(t.seed, "word_order");
}

WordEmbeddings perturb_word_order(const WordEmbeddings& x, const std::string& mode, std::uint64_t seed,
                                  const std::string& caption_id) {
  if (mode == "normal") return x;
  std::vector<int> perm(static_cast<std::size_t>(x.word_count));
  std::iota(perm.begin(), perm.end(), 0);
  if (mode == "reversed") {
    std::reverse(perm.begin(), perm.end());
  } else if (mode == "shuffled") {
    Rng rng(derive_seed(seed, caption_id));
    rng.shuffle(perm.begin(), perm.end());
  } else {
    fail(ErrorKind::ConfigError, "unknown word order '" + mode + "'");
  }
  WordEmbeddings out = x;
  for (int i = 0; i < x.word_count; ++i) out.values.row(i) = x.values.row(perm[static_cast<std::size_t>(i)]);
  const auto kept = std::min(x.tokens.size(), perm.size());
  for (std::size_t i = 0; i < kept; ++i)
    if (static_cast<std::size_t>(perm[i]) < x.tokens.size()) out.tokens[i] = x.tokens[static_cast<std::size_t>(perm[i])];
  return out;
}

namespace {

void check_embedder(const RunConfig& cfg, const DatasetManifest& manifest) {
  check(cfg.embedder == manifest.embedder, ErrorKind::ConfigError,
        "embedder spec of the run " + cfg.embedder.to_json().dump() + " differs from the manifest's " +
            manifest.embedder.to_json().dump());
}

Matrix stack_rows(const std::vector<const Matrix*>& rows) {
  Matrix out(static_cast<Index>(rows.size()), rows.front()->cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = rows[i]->row(0);
  return out;
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

// ---- trainer -------------------------------------------------------------------

struct Trainer::Impl {
  struct Item {
    const Sample* sample = nullptr;
    Matrix x;     // 1 x n*L
    Matrix mask;  // 1 x n
    std::vector<Matrix> gt;    // k entries, 1 x 85
    std::vector<Matrix> maps;  // k entries, 1 x 3*R*R, filled lazily
    int k = 0;
  };

  struct Assembled {
    Matrix x, mask, x_bar, z;
    std::vector<Matrix> real;
    Eigen::VectorXd eps;
  };

  Impl(const RunConfig& cfg, const BodyModelAssets& a) : assets(a), rng(derive_seed(cfg.train.seed, "train")) {}

  const BodyModelAssets& assets;
  std::vector<Item> items;
  std::map<int, std::vector<std::size_t>> by_k;
  Rng rng;
  std::unique_ptr<nn::RmsProp> opt_g, opt_d1, opt_d2;
  long generator_steps = 0;
  long critic_steps = 0;
  bool cache_maps = true;

  const std::vector<Matrix>& real_maps(Item& item, const RenderConfig& render) {
    if (!item.maps.empty()) return item.maps;
    std::vector<Matrix> maps;
    for (const auto& p : item.sample->gt) maps.push_back(render_params(p, assets, render).pixels);
    if (!cache_maps) {
      scratch = std::move(maps);
      return scratch;
    }
    item.maps = std::move(maps);
    return item.maps;
  }
  std::vector<Matrix> scratch;

  Assembled assemble(const Batch& b, Rng& r, int latent_dim, bool with_noise) {
    Assembled a;
    std::vector<const Matrix*> xs, masks;
    for (std::size_t i : b.items) {
      xs.push_back(&items[i].x);
      masks.push_back(&items[i].mask);
    }
    a.x = stack_rows(xs);
    a.mask = stack_rows(masks);
    for (int t = 0; t < b.k; ++t) {
      std::vector<const Matrix*> rows;
      for (std::size_t i : b.items) rows.push_back(&items[i].gt[static_cast<std::size_t>(t)]);
      a.real.push_back(stack_rows(rows));
    }
    const auto batch = static_cast<Index>(b.items.size());
    a.z.resize(batch, latent_dim);
    for (Index i = 0; i < a.z.size(); ++i) a.z.data()[i] = r.normal();
    if (!with_noise) return a;
    a.eps.resize(batch);
    for (Index i = 0; i < batch; ++i) a.eps(i) = r.uniform();
    a.x_bar.resize(batch, a.x.cols());
    for (Index bi = 0; bi < batch; ++bi) {
      const Item& self = items[b.items[static_cast<std::size_t>(bi)]];
      std::vector<std::size_t> others;
      for (std::size_t i : b.items)
        if (items[i].sample->caption != self.sample->caption) others.push_back(i);
      if (others.empty()) {
        for (std::size_t i = 0; i < items.size(); ++i)
          if (items[i].sample->caption != self.sample->caption) others.push_back(i);
      }
      if (others.empty()) {
        a.x_bar.row(bi).setZero();
      } else {
        a.x_bar.row(bi) = items[others[r.below(others.size())]].x.row(0);
      }
    }
    return a;
  }

  DiscriminatorLoss critic_pass(ad::Graph& g, const Models& m, const Batch& b, Rng& r);
};

Trainer::Trainer(const RunConfig& cfg, const DatasetManifest& manifest, const BodyModelAssets& assets)
    : impl_(std::make_unique<Impl>(cfg, assets)), models_(make_models(cfg)) {
  check_embedder(cfg, manifest);
  check(manifest.k_max <= cfg.train.k_max, ErrorKind::ConfigError,
        "manifest k_max " + std::to_string(manifest.k_max) + " exceeds train.k_max " + std::to_string(cfg.train.k_max));
  const std::uint64_t order_seed = effective_word_order_seed(cfg.train);
  for (const Sample* s : manifest.split("train")) {
    Impl::Item item;
    item.sample = s;
    const WordEmbeddings x = perturb_word_order(s->embedding, cfg.train.word_order, order_seed, s->caption_id);
    item.x = x.flat();
    item.mask = x.mask();
    for (const auto& p : s->gt) item.gt.push_back(p.as_row());
    item.k = static_cast<int>(s->gt.size());
    impl_->by_k[item.k].push_back(impl_->items.size());
    impl_->items.push_back(std::move(item));
  }
  check(!impl_->items.empty(), ErrorKind::ConfigError, "manifest has no training samples");
  std::size_t persons = 0;
  for (const auto& it : impl_->items) persons += static_cast<std::size_t>(it.k);
  const double bytes = static_cast<double>(persons) * 3.0 * cfg.render.resolution * cfg.render.resolution * 8.0;
  impl_->cache_maps = bytes < 512.0 * 1024 * 1024;

  const auto& t = cfg.train;
  impl_->opt_g = std::make_unique<nn::RmsProp>(models_.generator->parameters(), t.learning_rate, t.rms_decay, t.rms_epsilon);
  impl_->opt_d1 = std::make_unique<nn::RmsProp>(models_.critic1->parameters(), t.learning_rate, t.rms_decay, t.rms_epsilon);
  impl_->opt_d2 = std::make_unique<nn::RmsProp>(models_.critic2->parameters(), t.learning_rate, t.rms_decay, t.rms_epsilon);
}

Trainer::~Trainer() = default;

std::size_t Trainer::num_items() const { return impl_->items.size(); }

const Sample& Trainer::item_sample(std::size_t i) const { return *impl_->items.at(i).sample; }

std::vector<Batch> Trainer::epoch_batches() {
  std::vector<std::size_t> order(impl_->items.size());
  std::iota(order.begin(), order.end(), 0);
  impl_->rng.shuffle(order.begin(), order.end());
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i : order) groups[impl_->items[i].k].push_back(i);
  const auto size = static_cast<std::size_t>(config().train.batch_size);
  std::vector<Batch> batches;
  for (const auto& [k, members] : groups) {
    for (std::size_t start = 0; start < members.size(); start += size) {
      Batch b;
      b.k = k;
      b.items.assign(members.begin() + static_cast<std::ptrdiff_t>(start),
                     members.begin() + static_cast<std::ptrdiff_t>(std::min(members.size(), start + size)));
      batches.push_back(std::move(b));
    }
  }
  impl_->rng.shuffle(batches.begin(), batches.end());
  return batches;
}

Batch Trainer::sample_critic_batch() {
  Rng& rng = impl_->rng;
  const int k = impl_->items[rng.below(impl_->items.size())].k;
  std::vector<std::size_t> group = impl_->by_k[k];
  rng.shuffle(group.begin(), group.end());
  group.resize(std::min(group.size(), static_cast<std::size_t>(config().train.batch_size)));
  return {group, k};
}

static nlohmann::json critic_terms_json(const DiscriminatorLoss& loss) {
  nlohmann::json j = {{"L_D1", loss.d1.value()}, {"W_D1", loss.d1.real_fake}, {"mismatch_D1", loss.d1.mismatch},
                      {"penalty_D1", loss.d1.penalty}, {"L_D", loss.total.item()}};
  if (loss.d2) {
    j["L_D2"] = loss.d2->value();
    j["W_D2"] = loss.d2->real_fake;
    j["mismatch_D2"] = loss.d2->mismatch;
    j["penalty_D2"] = loss.d2->penalty;
  }
  return j;
}

DiscriminatorLoss Trainer::Impl::critic_pass(ad::Graph& g, const Models& m, const Batch& batch, Rng& r) {
  const RunConfig& cfg = m.config;
  Assembled a = assemble(batch, r, cfg.generator.latent_dim, true);
  std::vector<Matrix> fake;
  {
    ad::Graph gen;
    m.generator->parameters().freeze_in(gen);
    for (const auto& v : m.generator->unroll(gen, a.x, a.mask, gen.constant(a.z), batch.k).steps)
      fake.push_back(v.value());
  }
  const LossConfig lc{cfg.train.lambda, cfg.train.critic_steps};
  CriticLossTerms t1 = critic_loss(g, *m.critic1, a.real, fake, a.x, a.x_bar, a.eps, lc);
  std::optional<CriticLossTerms> t2;
  if (!cfg.train.disable_critic2) {
    // critic 2 sees fixed renders of the fakes; no gradient flows back into the generator here
    const auto rows = static_cast<Index>(batch.items.size());
    const Index width = 3 * static_cast<Index>(cfg.render.resolution) * cfg.render.resolution;
    std::vector<Matrix> fake_maps, real;
    for (int t = 0; t < batch.k; ++t) {
      const Matrix& step = fake[static_cast<std::size_t>(t)];
      Matrix fm(rows, width), rm(rows, width);
      for (Index b = 0; b < rows; ++b) {
        const SmplParams p = SmplParams::from_flat(std::span<const double>(&step(b, 0), kParamDim));
        fm.row(b) = render_params(p, assets, cfg.render).pixels.row(0);
        rm.row(b) = real_maps(items[batch.items[static_cast<std::size_t>(b)]], cfg.render)[static_cast<std::size_t>(t)].row(0);
      }
      fake_maps.push_back(std::move(fm));
      real.push_back(std::move(rm));
    }
    t2 = critic_loss(g, *m.critic2, real, fake_maps, a.x, a.x_bar, a.eps, lc);
  }
  return discriminator_total(g, t1, t2);
}

nlohmann::json Trainer::evaluate_critics(const Batch& batch, std::uint64_t noise) {
  Rng r(noise);
  ad::Graph g;
  return critic_terms_json(impl_->critic_pass(g, models_, batch, r));
}

nlohmann::json Trainer::critic_step(const Batch& batch, std::optional<std::uint64_t> noise) {
  const RunConfig& cfg = config();
  std::optional<Rng> local;
  if (noise) local.emplace(*noise);
  Rng& r = noise ? *local : impl_->rng;
  const bool use_d2 = !cfg.train.disable_critic2;
  ad::Graph g;
  DiscriminatorLoss loss = impl_->critic_pass(g, models_, batch, r);
  check(finite(loss.total.item()), ErrorKind::DivergenceDetected, "critic loss became non-finite");

  models_.critic1->parameters().zero_grad();
  models_.critic2->parameters().zero_grad();
  g.backward(loss.total);
  g.accumulate_into_parameters();
  const double gn1 = models_.critic1->parameters().grad_norm();
  check(finite(gn1), ErrorKind::DivergenceDetected, "critic 1 gradient became non-finite");
  impl_->opt_d1->step(cfg.train.clip_norm);
  nlohmann::json rec = critic_terms_json(loss);
  rec["grad_norm_D1"] = gn1;
  if (use_d2) {
    const double gn2 = models_.critic2->parameters().grad_norm();
    check(finite(gn2), ErrorKind::DivergenceDetected, "critic 2 gradient became non-finite");
    impl_->opt_d2->step(cfg.train.clip_norm);
    rec["grad_norm_D2"] = gn2;
  }
  ++impl_->critic_steps;
  rec["kind"] = "critic";
  rec["critic_step"] = impl_->critic_steps;
  rec["generator_step"] = impl_->generator_steps;
  rec["k"] = batch.k;
  return rec;
}

nlohmann::json Trainer::generator_step(const Batch& batch) {
  const RunConfig& cfg = config();
  Impl::Assembled a = impl_->assemble(batch, impl_->rng, cfg.generator.latent_dim, false);
  const bool use_d2 = !cfg.train.disable_critic2;

  ad::Graph g;
  models_.critic1->parameters().freeze_in(g);
  models_.critic2->parameters().freeze_in(g);
  const Rollout r = models_.generator->unroll(g, a.x, a.mask, g.constant(a.z), batch.k);
  std::vector<ad::Var> maps;
  if (use_d2)
    for (const auto& s : r.steps) maps.push_back(render_param_rows(g, s, impl_->assets, cfg.render));
  const GeneratorLossTerms terms =
      generator_loss(g, *models_.critic1, use_d2 ? models_.critic2.get() : nullptr, r.steps, maps, g.constant(a.x));
  check(finite(terms.total.item()), ErrorKind::DivergenceDetected, "generator loss became non-finite");

  models_.generator->parameters().zero_grad();
  g.backward(terms.total);
  g.accumulate_into_parameters();
  const double gn = models_.generator->parameters().grad_norm();
  check(finite(gn), ErrorKind::DivergenceDetected, "generator gradient became non-finite");
  impl_->opt_g->step(cfg.train.clip_norm);
  ++impl_->generator_steps;

  nlohmann::json rec = {{"kind", "generator"},      {"generator_step", impl_->generator_steps},
                        {"k", batch.k},             {"L_G1", terms.g1.item()},
                        {"L_G", terms.total.item()}, {"grad_norm_G", gn}};
  if (terms.g2) rec["L_G2"] = terms.g2->item();
  return rec;
}

TrainResult Trainer::run(const TrainOutputs& out) {
  const RunConfig& cfg = config();
  TrainResult result;
  std::ofstream log;
  if (!out.dir.empty()) {
    std::filesystem::create_directories(out.dir / "checkpoints");
    result.log = out.dir / "train_log.jsonl";
    log.open(result.log, std::ios::trunc);
    check(log.good(), ErrorKind::MissingFile, "cannot open " + result.log.string());
  }
  const auto start = std::chrono::steady_clock::now();
  const nlohmann::json extra = {{"word_order", cfg.train.word_order},
                                {"word_order_seed", effective_word_order_seed(cfg.train)}};
  auto emit = [&](nlohmann::json rec, int epoch) {
    rec["epoch"] = epoch;
    rec["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (log.is_open()) log << rec.dump() << '\n';
    if (out.on_record) out.on_record(rec);
  };
  auto save = [&](const std::string& name, int epoch) {
    if (out.dir.empty()) return;
    const auto path = out.dir / "checkpoints" / name;
    save_checkpoint(path, models_, {epoch, impl_->generator_steps, config_hash(cfg), extra});
    result.checkpoints.push_back(path);
  };
  auto limit_reached = [&] {
    return cfg.train.max_generator_steps > 0 && impl_->generator_steps >= cfg.train.max_generator_steps;
  };

  try {
    for (int epoch = 1; epoch <= cfg.train.epochs && !limit_reached(); ++epoch) {
      for (const Batch& b : epoch_batches()) {
        if (limit_reached()) break;
        for (int c = 0; c < cfg.train.critic_steps; ++c) emit(critic_step(sample_critic_batch()), epoch);
        emit(generator_step(b), epoch);
      }
      result.epochs = epoch;
      if (epoch % cfg.train.checkpoint_every == 0) {
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%04d.ckpt", epoch);
        save(name, epoch);
      }
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DivergenceDetected && e.kind() != ErrorKind::NonFiniteResult) throw;
    const std::string last = result.checkpoints.empty() ? "none" : result.checkpoints.back().string();
    fail(ErrorKind::DivergenceDetected, std::string(e.what()) + " at generator step " +
                                            std::to_string(impl_->generator_steps) + "; last good checkpoint: " + last);
  }
  save("final.ckpt", result.epochs);
  result.generator_steps = impl_->generator_steps;
  result.critic_steps = impl_->critic_steps;
  result.digests = model_digests(models_);
  return result;
}

// ---- count predictor -------------------------------------------------------------

CounterTrainResult train_count_predictor(const RunConfig& cfg, const DatasetManifest& manifest) {
  check_embedder(cfg, manifest);
  const auto train = manifest.split("train");
  check(!train.empty(), ErrorKind::ConfigError, "manifest has no training samples");
  auto val = manifest.split("val");
  if (val.empty()) val = train;
  auto prepare = [&](const std::vector<const Sample*>& samples, Matrix& pooled, std::vector<int>& labels) {
    pooled.resize(static_cast<Index>(samples.size()), cfg.embedder.dim);
    labels.clear();
    for (std::size_t i = 0; i < samples.size(); ++i) {
      pooled.row(static_cast<Index>(i)) = CountPredictor::pool(samples[i]->embedding);
      const int k = static_cast<int>(samples[i]->gt.size());
      check(k <= cfg.train.k_max, ErrorKind::ConfigError, "sample cardinality exceeds train.k_max");
      labels.push_back(k - 1);
    }
  };
  Matrix train_x, val_x;
  std::vector<int> train_y, val_y;
  prepare(train, train_x, train_y);
  prepare(val, val_x, val_y);

  CounterTrainResult result;
  result.predictor = std::make_unique<CountPredictor>(cfg.counter, derive_seed(cfg.train.seed, "counter"));
  CountPredictor& p = *result.predictor;
  nn::RmsProp opt(p.parameters(), cfg.train.counter_learning_rate, cfg.train.rms_decay, cfg.train.rms_epsilon);
  Rng rng(derive_seed(cfg.train.seed, "counter-data"));
  std::vector<std::size_t> order(train_y.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(cfg.train.counter_batch_size);
  for (int epoch = 0; epoch < cfg.train.counter_epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      Matrix xb(static_cast<Index>(end - start), train_x.cols());
      std::vector<int> yb;
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Index>(i - start)) = train_x.row(static_cast<Index>(order[i]));
        yb.push_back(train_y[order[i]]);
      }
      ad::Graph g;
      ad::Var loss = ad::softmax_cross_entropy(p.logits(g, g.constant(xb)), yb);
      check(finite(loss.item()), ErrorKind::DivergenceDetected, "count predictor loss became non-finite");
      p.parameters().zero_grad();
      g.backward(loss);
      g.accumulate_into_parameters();
      opt.step(cfg.train.clip_norm);
    }
  }
  auto accuracy = [&](const Matrix& x, const std::vector<int>& y) {
    ad::Graph g;
    const Matrix logits = p.logits(g, g.constant(x)).value();
    int correct = 0;
    for (Index i = 0; i < logits.rows(); ++i) {
      Index best = 0;
      for (Index c = 1; c < logits.cols(); ++c)
        if (logits(i, c) > logits(i, best)) best = c;
      if (best == y[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(y.size());
  };
  result.train_accuracy = accuracy(train_x, train_y);
  result.val_accuracy = accuracy(val_x, val_y);
  return result;
}

// ---- inference ------------------------------------------------------------------

GenerationResult generate_from_caption(const Models& m, const CountPredictor* counter, const std::string& caption,
                                       CountMode mode, std::uint64_t seed, int count) {
  const RunConfig& cfg = m.config;
  GenerationResult out;
  out.tokens = tokenize(caption);
  WordEmbeddings x = encode_caption(out.tokens, cfg.embedder);
  x = perturb_word_order(x, cfg.train.word_order, effective_word_order_seed(cfg.train), caption);
  if (count > 0) {
    out.count = count;
  } else {
    check(counter != nullptr, ErrorKind::ConfigError, "no count predictor available; pass an explicit count");
    out.distribution = counter->predict_count_distribution(x);
    out.count = select_count(out.distribution, mode);
  }
  Rng rng(seed);
  out.generated = m.generator->generate_set(sample_latent(rng, cfg.generator.latent_dim), x, out.count);
  return out;
}

EvaluationOutput evaluate_models(const Models& m, const DatasetManifest& manifest, const BodyModelAssets& assets,
                                 const EvalConfig& eval, const CountPredictor* counter) {
  const RunConfig& cfg = m.config;
  check_embedder(cfg, manifest);
  const auto val = manifest.split("val");
  check(!val.empty(), ErrorKind::EmptySet, "manifest has no validation samples");
  EvaluationOutput out;
  out.pool = subsample(val, eval.sample_n, eval.seed);
  const CountMode mode = parse_count_mode(eval.count_mode);
  const std::uint64_t order_seed = effective_word_order_seed(cfg.train);
  int matched = 0;
  for (const Sample* s : out.pool) {
    const WordEmbeddings x = perturb_word_order(s->embedding, cfg.train.word_order, order_seed, s->caption_id);
    int k = static_cast<int>(s->gt.size());
    if (counter != nullptr) k = select_count(counter->predict_count_distribution(x), mode);
    k = std::clamp(k, 1, cfg.generator.k_max);
    Rng rng(derive_seed(eval.seed, s->caption_id));
    out.generated.push_back(m.generator->generate_set(sample_latent(rng, cfg.generator.latent_dim), x, k).set);
    out.counts.push_back(k);
    const int stated = stated_count(s->tokens);
    if (stated > 0) {
      ++out.stated_captions;
      if (stated == k) ++matched;
    }
  }
  out.count_accuracy = out.stated_captions == 0 ? 0.0 : static_cast<double>(matched) / out.stated_captions;
  RenderContext ctx{&assets, cfg.render};
  out.metrics = eval_metrics(out.generated, out.pool, eval.uv ? &ctx : nullptr);
  return out;
}

nlohmann::json metrics_report(const EvaluationOutput& e, const EvalConfig& eval, const std::string& hash,
                              const nlohmann::json& extra) {
  nlohmann::json counts = nlohmann::json::array();
  for (std::size_t i = 0; i < e.pool.size(); ++i)
    counts.push_back({{"caption_id", e.pool[i]->caption_id}, {"count", e.counts[i]}});
  return {{"metrics", to_json(e.metrics, true)},
          {"sample_n", eval.sample_n},
          {"evaluated", e.metrics.sample_n},
          {"seed", eval.seed},
          {"count_mode", eval.count_mode},
          {"count_accuracy", e.count_accuracy},
          {"stated_captions", e.stated_captions},
          {"counts", counts},
          {"config_hash", hash},
          {"extra", extra}};
}

// ---- ablation -------------------------------------------------------------------

nlohmann::json AblationReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"label", r.label},
                         {"ablation", r.ablation},
                         {"config_hash", r.config_hash},
                         {"base_hash", r.base_hash},
                         {"word_order_seed", r.word_order_seed},
                         {"generator_steps", r.generator_steps},
                         {"metrics", smplgan::to_json(r.metrics)}});
  }
  return {{"rows", rows_json}};
}

std::string AblationReport::table() const {
  std::vector<std::pair<std::string, SetMetrics>> labelled;
  for (const auto& r : rows) labelled.emplace_back(r.label, r.metrics);
  return format_metrics_tables(labelled);
}

AblationReport run_ablation(const RunConfig& base, const DatasetManifest& manifest, const BodyModelAssets& assets,
                            const std::filesystem::path& out_dir, const CountPredictor* counter) {
  RunConfig reset = base;
  reset.train.disable_critic2 = false;
  reset.train.word_order = "normal";
  const std::string base_hash = config_hash(reset);

  struct Variant {
    const char* label;
    const char* slug;
    const char* ablation;
    RunConfig cfg;
  };
  std::vector<Variant> variants = {{"both critics", "both_critics", "none", reset},
                                   {"wo critic2", "wo_critic2", "train.disable_critic2=true", reset},
                                   {"shuffled words", "shuffled_words", "train.word_order=shuffled", reset}};
  variants[1].cfg.train.disable_critic2 = true;
  variants[2].cfg.train.word_order = "shuffled";

  AblationReport report;
  for (auto& v : variants) {
    v.cfg.finalize();
    Trainer trainer(v.cfg, manifest, assets);
    const TrainResult tr = trainer.run({out_dir.empty() ? std::filesystem::path() : out_dir / v.slug, {}});
    const EvaluationOutput ev = evaluate_models(trainer.models(), manifest, assets, v.cfg.eval, counter);
    AblationRow row;
    row.label = v.label;
    row.ablation = v.ablation;
    row.config_hash = config_hash(v.cfg);
    row.base_hash = base_hash;
    row.word_order_seed = effective_word_order_seed(v.cfg.train);
    row.generator_steps = tr.generator_steps;
    row.metrics = ev.metrics;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace smplgan
