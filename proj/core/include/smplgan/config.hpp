#pragma once

#include "smplgan/count_predictor.hpp"
#include "smplgan/critics.hpp"
#include "smplgan/generator.hpp"
#include "smplgan/renderer.hpp"
#include "smplgan/text_encoder.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace smplgan {

struct BodyConfig {
  std::string assets;  // asset file; empty selects the procedural toy body
  int toy_vertices = 6890;
  int toy_joints = 24;
  std::uint64_t toy_seed = 0;
};

struct DataConfig {
  int num_classes = 3;
  int size = 600;
  std::vector<int> counts = {1, 2, 3};
  std::uint64_t seed = 7;
};

struct TrainConfig {
  double learning_rate = 1e-5;
  double rms_decay = 0.99;
  double rms_epsilon = 1e-8;
  int critic_steps = 5;
  int epochs = 30;
  int batch_size = 16;
  double lambda = 10.0;
  std::uint64_t seed = 0;
  bool disable_critic2 = false;
  std::string word_order = "normal";  // normal | reversed | shuffled
  std::uint64_t word_order_seed = 0;
  int k_max = 3;
  int max_generator_steps = 0;  // 0: bounded by epochs only
  double clip_norm = 0.0;       // 0: no clipping
  int checkpoint_every = 1;     // epochs
  std::uint64_t critic2_seed = 0;  // 0: derived from seed
  // Count predictor pretraining.
  double counter_learning_rate = 1e-3;
  int counter_epochs = 30;
  int counter_batch_size = 32;
};

struct EvalConfig {
  int sample_n = 400;
  std::uint64_t seed = 0;
  bool uv = true;
  std::string count_mode = "argmax";
};

struct RunConfig {
  std::string profile = "paper";
  EmbedderSpec embedder;
  BodyConfig body;
  RenderConfig render;
  DataConfig data;
  GeneratorConfig generator;
  ParamCriticConfig critic1;
  RenderCriticConfig critic2;
  CountPredictorConfig counter;
  TrainConfig train;
  EvalConfig eval;

  // Copies shared dimensions (words, embedding width, k_max, resolution) into
  // the sub-configurations and checks ranges. Throws ConfigError.
  void finalize();
};

// "paper": full-size defaults; "toy": small widths and resolution for desk runs.
RunConfig make_profile(const std::string& name);

nlohmann::json to_json(const RunConfig& cfg);
// Starts from the profile named in j["profile"] (default "paper") and applies
// every other key; unknown keys and type errors raise ConfigError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

// FNV-1a over the canonical JSON dump.
std::string config_hash(const RunConfig& cfg);

}  // namespace smplgan
