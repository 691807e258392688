#include "smplgan/training.hpp"

#include "smplgan/array_file.hpp"
#include "test_support.hpp"

#include <set>

using namespace smplgan;
using smplgan::testing::TempDir;
using smplgan::testing::tiny_config;

namespace {

DatasetManifest dataset(const RunConfig& cfg, int size = 48, std::uint64_t seed = 7) {
  auto spec = default_synthetic_spec(3, cfg.embedder);
  spec.k_max = cfg.train.k_max;
  spec.counts.clear();
  for (int c = 1; c <= cfg.train.k_max; ++c) spec.counts.push_back(c);
  return generate_synthetic_dataset(spec, seed, size);
}

struct Fixture {
  RunConfig cfg;
  DatasetManifest manifest;
  BodyModelAssets assets;
  explicit Fixture(RunConfig c) : cfg(std::move(c)), manifest(dataset(cfg)), assets(load_body(cfg)) {}
};

}  // namespace

TEST(Training, CriticStepsBetweenGeneratorSteps) {
  for (int ratio : {5, 2}) {
    RunConfig cfg = tiny_config();
    cfg.train.critic_steps = ratio;
    cfg.train.max_generator_steps = 4;
    cfg.train.disable_critic2 = true;
    Fixture f(cfg);
    Trainer t(f.cfg, f.manifest, f.assets);
    std::vector<std::string> kinds;
    const TrainResult r = t.run({{}, [&](const nlohmann::json& rec) { kinds.push_back(rec["kind"]); }});
    EXPECT_EQ(r.generator_steps, 4);
    EXPECT_EQ(r.critic_steps, 4L * ratio);
    ASSERT_EQ(kinds.size(), static_cast<std::size_t>(4 * (ratio + 1)));
    for (std::size_t i = 0; i < kinds.size(); ++i)
      EXPECT_EQ(kinds[i], (i + 1) % static_cast<std::size_t>(ratio + 1) == 0 ? "generator" : "critic") << i;
  }
}

TEST(Training, LogRecordsLossesAndNorms) {
  TempDir dir;
  RunConfig cfg = tiny_config();
  cfg.train.max_generator_steps = 3;
  Fixture f(cfg);
  Trainer t(f.cfg, f.manifest, f.assets);
  const TrainResult r = t.run({dir.path(), {}});
  const std::string text = read_file_bytes(r.log, ErrorKind::MissingFile);
  int lines = 0;
  for (std::size_t start = 0, end; (end = text.find('\n', start)) != std::string::npos; start = end + 1) {
    const auto rec = nlohmann::json::parse(text.substr(start, end - start));
    ++lines;
    for (const char* key : {"kind", "epoch", "wall_time", "generator_step"}) EXPECT_TRUE(rec.contains(key)) << key;
    if (rec["kind"] == "critic") {
      for (const char* key : {"L_D", "L_D1", "L_D2", "penalty_D1", "penalty_D2", "grad_norm_D1", "grad_norm_D2"}) {
        ASSERT_TRUE(rec.contains(key)) << key;
        EXPECT_TRUE(std::isfinite(rec[key].get<double>())) << key;
      }
      EXPECT_NEAR(rec["L_D"].get<double>(), rec["L_D1"].get<double>() + rec["L_D2"].get<double>(), 1e-9);
    } else {
      for (const char* key : {"L_G", "L_G1", "L_G2", "grad_norm_G"}) {
        ASSERT_TRUE(rec.contains(key)) << key;
        EXPECT_TRUE(std::isfinite(rec[key].get<double>())) << key;
      }
      EXPECT_NEAR(rec["L_G"].get<double>(), rec["L_G1"].get<double>() + rec["L_G2"].get<double>(), 1e-9);
    }
  }
  EXPECT_EQ(lines, 3 * (cfg.train.critic_steps + 1));
  ASSERT_FALSE(r.checkpoints.empty());
  EXPECT_EQ(r.checkpoints.back().filename(), "final.ckpt");
}

TEST(Training, DisablingCriticTwoLeavesItUntouched) {
  RunConfig cfg = tiny_config();
  cfg.train.max_generator_steps = 3;
  cfg.train.disable_critic2 = true;
  Fixture f(cfg);
  Trainer t(f.cfg, f.manifest, f.assets);
  const nlohmann::json before = model_digests(t.models());
  bool saw_d2 = false;
  const TrainResult r = t.run({{}, [&](const nlohmann::json& rec) {
                                 saw_d2 = saw_d2 || rec.contains("L_D2") || rec.contains("L_G2") ||
                                          rec.contains("grad_norm_D2");
                               }});
  EXPECT_FALSE(saw_d2);
  EXPECT_EQ(r.digests["critic2"], before["critic2"]);
  EXPECT_NE(r.digests["critic1"], before["critic1"]);
  EXPECT_NE(r.digests["generator"], before["generator"]);
}

TEST(Training, UpdatesAreIsolated) {
  RunConfig cfg = tiny_config();
  Fixture f(cfg);
  Trainer t(f.cfg, f.manifest, f.assets);
  for (int i = 0; i < 3; ++i) {
    nlohmann::json before = model_digests(t.models());
    t.critic_step(t.sample_critic_batch());
    nlohmann::json after = model_digests(t.models());
    EXPECT_EQ(after["generator"], before["generator"]);
    EXPECT_NE(after["critic1"], before["critic1"]);
    EXPECT_NE(after["critic2"], before["critic2"]);

    before = after;
    t.generator_step(t.epoch_batches().front());
    after = model_digests(t.models());
    EXPECT_NE(after["generator"], before["generator"]);
    EXPECT_EQ(after["critic1"], before["critic1"]);
    EXPECT_EQ(after["critic2"], before["critic2"]);
  }
}

TEST(Training, CriticStepsWidenTheRealFakeGap) {
  for (bool disable_d2 : {true, false}) {
    RunConfig cfg = tiny_config();
    cfg.train.lambda = 0.0;
    cfg.train.disable_critic2 = disable_d2;
    cfg.train.learning_rate = 1e-4;
    Fixture f(cfg);
    Trainer t(f.cfg, f.manifest, f.assets);
    const Batch batch = t.sample_critic_batch();
    const std::string gen = model_digests(t.models())["generator"];
    auto gaps = [&] {
      const auto terms = t.evaluate_critics(batch, 3);
      // D(real) - D(fake) is the negated first loss term.
      return std::make_pair(-terms["W_D1"].get<double>(), disable_d2 ? 0.0 : -terms["W_D2"].get<double>());
    };
    auto prev = gaps();
    for (int step = 0; step < 20; ++step) {
      t.critic_step(batch, 3);
      const auto next = gaps();
      EXPECT_GT(next.first, prev.first) << "critic 1, step " << step;
      if (!disable_d2) EXPECT_GT(next.second, prev.second) << "critic 2, step " << step;
      prev = next;
    }
    EXPECT_EQ(model_digests(t.models())["generator"], gen);
  }
}

TEST(Training, BatchesAreTeacherForced) {
  RunConfig cfg = tiny_config();
  Fixture f(cfg);
  Trainer t(f.cfg, f.manifest, f.assets);
  std::set<std::size_t> covered;
  for (const Batch& b : t.epoch_batches()) {
    EXPECT_LE(b.items.size(), static_cast<std::size_t>(cfg.train.batch_size));
    for (std::size_t i : b.items) {
      EXPECT_EQ(static_cast<int>(t.item_sample(i).gt.size()), b.k);
      EXPECT_TRUE(covered.insert(i).second) << "item repeated within an epoch";
    }
  }
  EXPECT_EQ(covered.size(), t.num_items());
  for (int i = 0; i < 10; ++i) {
    const Batch b = t.sample_critic_batch();
    for (std::size_t item : b.items) EXPECT_EQ(static_cast<int>(t.item_sample(item).gt.size()), b.k);
  }
  const auto rec = t.generator_step(t.epoch_batches().front());
  EXPECT_GE(rec["k"].get<int>(), 1);
}

TEST(Training, SameSeedGivesIdenticalCheckpoints) {
  RunConfig cfg = tiny_config();
  cfg.train.max_generator_steps = 5;
  Fixture f(cfg);
  TempDir a, b;
  TrainResult ra, rb;
  {
    Trainer t(f.cfg, f.manifest, f.assets);
    ra = t.run({a.path(), {}});
  }
  {
    Trainer t(f.cfg, f.manifest, f.assets);
    rb = t.run({b.path(), {}});
  }
  ASSERT_EQ(ra.checkpoints.size(), rb.checkpoints.size());
  EXPECT_EQ(ra.digests, rb.digests);
  for (std::size_t i = 0; i < ra.checkpoints.size(); ++i) {
    EXPECT_EQ(read_file_bytes(ra.checkpoints[i], ErrorKind::MissingFile),
              read_file_bytes(rb.checkpoints[i], ErrorKind::MissingFile));
  }
  RunConfig other = cfg;
  other.train.seed = 1;
  Trainer t(other, f.manifest, f.assets);
  EXPECT_NE(t.run({}).digests, ra.digests);
}

TEST(Training, EpochCheckpointsAreWritten) {
  RunConfig cfg = tiny_config();
  cfg.train.epochs = 2;
  Fixture f(cfg);
  TempDir dir;
  Trainer t(f.cfg, f.manifest, f.assets);
  const TrainResult r = t.run({dir.path(), {}});
  ASSERT_EQ(r.checkpoints.size(), 3u);
  EXPECT_EQ(r.checkpoints[0].filename(), "epoch_0001.ckpt");
  EXPECT_EQ(r.checkpoints[1].filename(), "epoch_0002.ckpt");
  CheckpointMeta meta;
  const Models m = load_checkpoint(r.checkpoints[1], &meta);
  EXPECT_EQ(meta.epoch, 2);
  EXPECT_EQ(meta.generator_steps, r.generator_steps);
  EXPECT_EQ(meta.config_hash, config_hash(cfg));
  EXPECT_EQ(model_digests(m), r.digests);
}

TEST(Training, DivergenceIsReported) {
  RunConfig cfg = tiny_config();
  cfg.train.learning_rate = 1e300;
  cfg.train.disable_critic2 = true;
  Fixture f(cfg);
  Trainer t(f.cfg, f.manifest, f.assets);
  try {
    t.run({});
    ADD_FAILURE() << "no divergence detected";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DivergenceDetected) << e.what();
    EXPECT_NE(std::string(e.what()).find("last good checkpoint"), std::string::npos);
  }
}

TEST(Training, RejectsMismatchedManifests) {
  RunConfig cfg = tiny_config();
  Fixture f(cfg);
  RunConfig wide = cfg;
  wide.embedder.dim = 9;
  wide.finalize();
  EXPECT_ERROR_KIND(Trainer(wide, f.manifest, f.assets), ErrorKind::ConfigError);
  RunConfig small = cfg;
  small.train.k_max = 2;
  small.data.counts = {1, 2};
  small.finalize();
  EXPECT_ERROR_KIND(Trainer(small, f.manifest, f.assets), ErrorKind::ConfigError);
}

TEST(WordOrder, ReversedShuffledAndNormal) {
  EmbedderSpec e;
  e.max_words = 6;
  e.dim = 8;
  const auto x = encode_caption({"three", "people", "standing", "near", "trees"}, e);
  EXPECT_EQ(perturb_word_order(x, "normal", 1, "c").values, x.values);
  const auto r = perturb_word_order(x, "reversed", 1, "c");
  for (int i = 0; i < 5; ++i) EXPECT_EQ(r.values.row(i), x.values.row(4 - i));
  EXPECT_TRUE(r.values.row(5).isZero());
  EXPECT_EQ(r.tokens.front(), "trees");

  const auto s1 = perturb_word_order(x, "shuffled", 11, "c"), s2 = perturb_word_order(x, "shuffled", 11, "c");
  EXPECT_EQ(s1.values, s2.values);
  EXPECT_TRUE(s1.values.row(5).isZero());
  // Rows are a permutation of the original rows.
  std::multiset<std::string> orig(x.tokens.begin(), x.tokens.end()), shuf(s1.tokens.begin(), s1.tokens.end());
  EXPECT_EQ(orig, shuf);
  for (int i = 0; i < 5; ++i) {
    const auto it = std::find(x.tokens.begin(), x.tokens.end(), s1.tokens[static_cast<std::size_t>(i)]);
    EXPECT_EQ(s1.values.row(i), x.values.row(static_cast<Index>(it - x.tokens.begin())));
  }
  bool differs = false;
  for (std::uint64_t seed = 1; seed < 10 && !differs; ++seed)
    differs = perturb_word_order(x, "shuffled", seed, "c").values != s1.values;
  EXPECT_TRUE(differs);
  EXPECT_ERROR_KIND(perturb_word_order(x, "sideways", 1, "c"), ErrorKind::ConfigError);

  TrainConfig t;
  t.seed = 4;
  EXPECT_EQ(effective_word_order_seed(t), derive_seed(4, "word_order"));
  t.word_order_seed = 77;
  EXPECT_EQ(effective_word_order_seed(t), 77u);
}

TEST(CountTraining, SeparableDatasetIsLearned) {
  RunConfig cfg = make_profile("toy");
  const DatasetManifest m = dataset(cfg, 300);
  const CounterTrainResult r = train_count_predictor(cfg, m);
  EXPECT_GE(r.val_accuracy, 0.9);
  EXPECT_GE(r.train_accuracy, 0.9);
  const CounterTrainResult again = train_count_predictor(cfg, m);
  EXPECT_EQ(again.predictor->parameters().digest(), r.predictor->parameters().digest());
}

TEST(CountTraining, SingleClassIsAlwaysRight) {
  RunConfig cfg = tiny_config();
  cfg.train.k_max = 1;
  cfg.data.counts = {1};
  cfg.finalize();
  const CounterTrainResult r = train_count_predictor(cfg, dataset(cfg, 40));
  EXPECT_EQ(r.val_accuracy, 1.0);
  EXPECT_EQ(r.train_accuracy, 1.0);
}

TEST(Generation, CountFromPredictorOrExplicit) {
  RunConfig cfg = tiny_config();
  const Models m = make_models(cfg);
  const CountPredictor counter(cfg.counter, 3);
  const GenerationResult g = generate_from_caption(m, &counter, "two people standing", CountMode::Argmax, 5);
  EXPECT_EQ(g.count, select_count(g.distribution, CountMode::Argmax));
  EXPECT_EQ(static_cast<int>(g.generated.set.size()), g.count);
  const GenerationResult fixed = generate_from_caption(m, nullptr, "two people standing", CountMode::Argmax, 5, 3);
  EXPECT_EQ(fixed.generated.set.size(), 3u);
  EXPECT_EQ(fixed.distribution.size(), 0);
  const GenerationResult again = generate_from_caption(m, nullptr, "two people standing", CountMode::Argmax, 5, 3);
  EXPECT_EQ(again.generated.set, fixed.generated.set);
  EXPECT_ERROR_KIND(generate_from_caption(m, nullptr, "two people", CountMode::Argmax, 5), ErrorKind::ConfigError);
  EXPECT_ERROR_KIND(generate_from_caption(m, nullptr, "", CountMode::Argmax, 5, 1), ErrorKind::EmptyCaption);
}

TEST(Evaluation, ModelsOnValidationPool) {
  RunConfig cfg = tiny_config();
  Fixture f(cfg);
  const Models m = make_models(cfg);
  EvalConfig ev = cfg.eval;
  const EvaluationOutput a = evaluate_models(m, f.manifest, f.assets, ev, nullptr);
  EXPECT_EQ(a.metrics.sample_n, std::min<int>(ev.sample_n, static_cast<int>(f.manifest.split("val").size())));
  EXPECT_TRUE(a.metrics.has_uv);
  EXPECT_EQ(a.count_accuracy, 1.0);  // GT cardinalities are used without a predictor
  for (std::size_t i = 0; i < a.pool.size(); ++i) EXPECT_EQ(a.generated[i].size(), a.pool[i]->gt.size());
  const EvaluationOutput b = evaluate_models(m, f.manifest, f.assets, ev, nullptr);
  EXPECT_EQ(to_json(a.metrics, true), to_json(b.metrics, true));
  const auto report = metrics_report(a, ev, config_hash(cfg));
  EXPECT_EQ(report["sample_n"], ev.sample_n);
  EXPECT_EQ(report["config_hash"], config_hash(cfg));
}

TEST(Ablation, ThreeRowsSharingABaseConfig) {
  RunConfig cfg = tiny_config();
  cfg.train.max_generator_steps = 2;
  cfg.eval.uv = false;
  Fixture f(cfg);
  const AblationReport rep = run_ablation(cfg, f.manifest, f.assets, {}, nullptr);
  ASSERT_EQ(rep.rows.size(), 3u);
  EXPECT_EQ(rep.rows[0].label, "both critics");
  EXPECT_EQ(rep.rows[1].label, "wo critic2");
  EXPECT_EQ(rep.rows[2].label, "shuffled words");
  std::set<std::string> hashes;
  for (const auto& r : rep.rows) {
    EXPECT_EQ(r.base_hash, rep.rows[0].base_hash);
    EXPECT_EQ(r.generator_steps, 2);
    hashes.insert(r.config_hash);
  }
  EXPECT_EQ(hashes.size(), 3u);
  EXPECT_EQ(rep.rows[0].config_hash, rep.rows[0].base_hash);
  EXPECT_EQ(rep.rows[2].word_order_seed, effective_word_order_seed(cfg.train));
  const auto j = rep.to_json();
  EXPECT_EQ(j["rows"].size(), 3u);
  EXPECT_NE(rep.table().find("wo critic2"), std::string::npos);
}
