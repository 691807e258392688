#pragma once

#include "smplgan/body_model.hpp"
#include "smplgan/text_encoder.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace smplgan {

inline constexpr int kManifestVersion = 1;

struct ActivityClass {
  std::string name;
  SmplParams prototype;  // camera entries are ignored; cameras come from the layout
};

struct SyntheticSpec {
  std::vector<ActivityClass> classes;
  std::vector<int> counts = {1, 2, 3};
  int k_max = 3;
  double pose_noise = 0.05;
  double shape_noise = 0.3;
  double camera_scale = 0.5;
  double scale_noise = 0.02;
  double translation_noise = 0.02;
  // Every `val_every`-th sample (1-based) goes to the validation split.
  int val_every = 10;
  EmbedderSpec embedder;

  nlohmann::json to_json() const;
  // Classes are either builtin names or {"name", "prototype": [85 numbers]}.
  static SyntheticSpec from_json(const nlohmann::json& j);
};

// Builtin activity names: standing, walking, sitting, waving, crouching.
ActivityClass builtin_activity(const std::string& name);
SyntheticSpec default_synthetic_spec(int num_classes, const EmbedderSpec& embedder);

struct Sample {
  std::string caption_id;
  std::string image_id;
  std::string caption;
  std::vector<std::string> tokens;
  WordEmbeddings embedding;
  ShapeSet gt;
  std::string split;  // "train" or "val"
};

struct DatasetManifest {
  int version = kManifestVersion;
  int k_max = 3;
  EmbedderSpec embedder;
  std::string config_hash;
  std::vector<Sample> samples;

  std::vector<const Sample*> split(const std::string& name) const;
};

// Number word for counts 1..10 ("one" ... "ten").
std::string count_word(int count);
// Parses a leading count word or digit string; 0 if the caption states none.
int stated_count(const std::vector<std::string>& tokens);

// Captions "<count> <person|people> <activity>"; GT sets of count perturbed
// prototypes laid out left to right. Throws InvalidSpec.
DatasetManifest generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed, int size);

nlohmann::json manifest_to_json(const DatasetManifest& m);
std::string manifest_checksum(const nlohmann::json& records);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);
std::string serialize_manifest(const DatasetManifest& m);
// Validates checksum and every record; GT sets are put in canonical order.
// Throws MissingFile, ChecksumMismatch, MalformedRecord (naming the record index).
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(const std::string& text);

// Stable sort by camera t_x, then t_y, then lexicographic flattened vector.
ShapeSet canonical_order(const ShapeSet& set);

}  // namespace smplgan
