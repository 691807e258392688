#pragma once

#include "smplgan/config.hpp"
#include "smplgan/count_predictor.hpp"
#include "smplgan/critics.hpp"
#include "smplgan/generator.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <string>

namespace smplgan {

inline constexpr int kCheckpointVersion = 1;

// Everything a run trains. The count predictor is optional.
struct Models {
  RunConfig config;
  std::unique_ptr<Generator> generator;
  std::unique_ptr<ParamCritic> critic1;
  std::unique_ptr<RenderCritic> critic2;
  std::unique_ptr<CountPredictor> counter;
};

// Deterministic per-purpose seed derived from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& purpose);

// Freshly initialized generator and critics from config.train seeds.
Models make_models(const RunConfig& cfg);

struct CheckpointMeta {
  int epoch = 0;
  long generator_steps = 0;
  std::string config_hash;
  nlohmann::json extra = nlohmann::json::object();
};

// Parameter digests of every present model, keyed generator/critic1/critic2/counter.
nlohmann::json model_digests(const Models& m);

void save_checkpoint(const std::filesystem::path& path, const Models& m, const CheckpointMeta& meta);
// Rebuilds the models from the embedded config and restores every array.
// Throws MissingFile or MalformedAsset.
Models load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

void save_count_predictor(const std::filesystem::path& path, const CountPredictor& p, const RunConfig& cfg,
                          const nlohmann::json& extra = nlohmann::json::object());
std::unique_ptr<CountPredictor> load_count_predictor(const std::filesystem::path& path,
                                                     nlohmann::json* extra = nullptr);

}  // namespace smplgan
