#pragma once

#include "smplgan/checkpoint.hpp"
#include "smplgan/config.hpp"
#include "smplgan/dataset.hpp"
#include "smplgan/evaluation.hpp"
#include "smplgan/losses.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace smplgan {

// Body assets named by the config, or the procedural toy body.
BodyModelAssets load_body(const RunConfig& cfg);

// Reorders the real word rows (and tokens): "reversed", or "shuffled" with a
// permutation drawn from (seed, caption_id). "normal" returns x unchanged.
WordEmbeddings perturb_word_order(const WordEmbeddings& x, const std::string& mode, std::uint64_t seed,
                                  const std::string& caption_id);

// Seed of the shuffled-word permutation actually used by a config.
std::uint64_t effective_word_order_seed(const TrainConfig& t);

struct Batch {
  std::vector<std::size_t> items;  // indices into the trainer's training items
  int k = 0;                       // shared cardinality (teacher-forced length)
};

struct TrainOutputs {
  std::filesystem::path dir;  // empty: no files are written
  std::function<void(const nlohmann::json&)> on_record;
};

struct TrainResult {
  long generator_steps = 0;
  long critic_steps = 0;
  int epochs = 0;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path log;
  nlohmann::json digests;
};

class Trainer {
 public:
  Trainer(const RunConfig& cfg, const DatasetManifest& manifest, const BodyModelAssets& assets);
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  Models& models() { return models_; }
  const RunConfig& config() const { return models_.config; }
  std::size_t num_items() const;
  const Sample& item_sample(std::size_t i) const;

  // Generator-step batches of one epoch: shuffled, grouped by cardinality.
  std::vector<Batch> epoch_batches();
  // Random same-cardinality batch for a critic update.
  Batch sample_critic_batch();

  // One update of the critics (both unless critic 2 is disabled). With
  // `noise` set, latents, interpolation weights and mismatched captions come
  // from that seed instead of the training stream.
  nlohmann::json critic_step(const Batch& batch, std::optional<std::uint64_t> noise = {});
  // One generator update through both critics (critic 1 only when disabled).
  nlohmann::json generator_step(const Batch& batch);
  // Critic loss terms on a batch without updating anything.
  nlohmann::json evaluate_critics(const Batch& batch, std::uint64_t noise);

  TrainResult run(const TrainOutputs& out);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Models models_;
};

struct CounterTrainResult {
  std::unique_ptr<CountPredictor> predictor;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

CounterTrainResult train_count_predictor(const RunConfig& cfg, const DatasetManifest& manifest);

struct GenerationResult {
  std::vector<std::string> tokens;
  int count = 0;
  CountDistribution distribution;  // empty when the count was given
  GeneratedSet generated;
};

// count <= 0 selects the count with the predictor (required then). The latent
// vector is drawn from `seed`.
GenerationResult generate_from_caption(const Models& m, const CountPredictor* counter, const std::string& caption,
                                       CountMode mode, std::uint64_t seed, int count = 0);

struct EvaluationOutput {
  SetMetrics metrics;
  std::vector<const Sample*> pool;
  std::vector<ShapeSet> generated;
  std::vector<int> counts;
  // Fraction of pool captions stating a count whose selected count matches it.
  double count_accuracy = 0.0;
  int stated_captions = 0;
};

// Samples the validation pool, generates one set per caption (count from the
// predictor, or the GT cardinality when it is null) and computes metrics.
EvaluationOutput evaluate_models(const Models& m, const DatasetManifest& manifest, const BodyModelAssets& assets,
                                 const EvalConfig& eval, const CountPredictor* counter);

nlohmann::json metrics_report(const EvaluationOutput& e, const EvalConfig& eval, const std::string& config_hash,
                              const nlohmann::json& extra = nlohmann::json::object());

struct AblationRow {
  std::string label;
  std::string ablation;  // the varied field and value
  std::string config_hash;
  std::string base_hash;  // hash with the ablation fields reset
  std::uint64_t word_order_seed = 0;
  long generator_steps = 0;
  SetMetrics metrics;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  nlohmann::json to_json() const;
  std::string table() const;
};

// Trains "both critics", "wo critic2" and "shuffled words" from a shared seed
// and evaluates each; checkpoints go under out_dir/<variant> when non-empty.
AblationReport run_ablation(const RunConfig& base, const DatasetManifest& manifest, const BodyModelAssets& assets,
                            const std::filesystem::path& out_dir, const CountPredictor* counter);

}  // namespace smplgan
