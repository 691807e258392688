#include "smplgan/config.hpp"

#include "smplgan/array_file.hpp"
#include "smplgan/errors.hpp"
#include "smplgan/hashing.hpp"

#include <functional>
#include <map>
#include <type_traits>

namespace smplgan {

namespace {

// Visits every user-facing field with its dotted key. Dimensions shared
// between sub-configurations are listed once and copied by finalize().
template <typename Cfg, typename F>
void visit_fields(Cfg& c, F&& f) {
  f("profile", c.profile);
  f("embedder.kind", c.embedder.kind);
  f("embedder.seed", c.embedder.seed);
  f("embedder.max_words", c.embedder.max_words);
  f("embedder.dim", c.embedder.dim);
  f("body.assets", c.body.assets);
  f("body.toy_vertices", c.body.toy_vertices);
  f("body.toy_joints", c.body.toy_joints);
  f("body.toy_seed", c.body.toy_seed);
  f("render.resolution", c.render.resolution);
  f("render.tau", c.render.tau);
  f("render.gamma", c.render.gamma);
  f("render.cutoff", c.render.cutoff);
  f("data.num_classes", c.data.num_classes);
  f("data.size", c.data.size);
  f("data.counts", c.data.counts);
  f("data.seed", c.data.seed);
  f("generator.latent_dim", c.generator.latent_dim);
  f("generator.feature_dim", c.generator.feature_dim);
  f("generator.hidden", c.generator.hidden);
  f("generator.layers", c.generator.layers);
  f("generator.attention_hidden", c.generator.attention_hidden);
  f("generator.leaky_slope", c.generator.leaky_slope);
  f("generator.camera_scale_init", c.generator.camera_scale_init);
  f("critic1.encoder_hidden", c.critic1.encoder_hidden);
  f("critic1.hidden", c.critic1.hidden);
  f("critic1.layers", c.critic1.layers);
  f("critic1.leaky_slope", c.critic1.leaky_slope);
  f("critic2.stage_channels", c.critic2.stage_channels);
  f("critic2.final_channels", c.critic2.final_channels);
  f("critic2.text_channels", c.critic2.text_channels);
  f("critic2.lstm_channels", c.critic2.lstm_channels);
  f("critic2.leaky_slope", c.critic2.leaky_slope);
  f("counter.hidden", c.counter.hidden);
  f("counter.leaky_slope", c.counter.leaky_slope);
  f("train.learning_rate", c.train.learning_rate);
  f("train.rms_decay", c.train.rms_decay);
  f("train.rms_epsilon", c.train.rms_epsilon);
  f("train.critic_steps", c.train.critic_steps);
  f("train.epochs", c.train.epochs);
  f("train.batch_size", c.train.batch_size);
  f("train.lambda", c.train.lambda);
  f("train.seed", c.train.seed);
  f("train.disable_critic2", c.train.disable_critic2);
  f("train.word_order", c.train.word_order);
  f("train.word_order_seed", c.train.word_order_seed);
  f("train.k_max", c.train.k_max);
  f("train.max_generator_steps", c.train.max_generator_steps);
  f("train.clip_norm", c.train.clip_norm);
  f("train.checkpoint_every", c.train.checkpoint_every);
  f("train.critic2_seed", c.train.critic2_seed);
  f("train.counter_learning_rate", c.train.counter_learning_rate);
  f("train.counter_epochs", c.train.counter_epochs);
  f("train.counter_batch_size", c.train.counter_batch_size);
  f("eval.sample_n", c.eval.sample_n);
  f("eval.seed", c.eval.seed);
  f("eval.uv", c.eval.uv);
  f("eval.count_mode", c.eval.count_mode);
}

nlohmann::json* slot(nlohmann::json& root, const std::string& dotted) {
  nlohmann::json* cur = &root;
  std::size_t start = 0;
  for (std::size_t dot; (dot = dotted.find('.', start)) != std::string::npos; start = dot + 1) {
    cur = &(*cur)[dotted.substr(start, dot - start)];
  }
  return &(*cur)[dotted.substr(start)];
}

void flatten(const nlohmann::json& j, const std::string& prefix, std::map<std::string, nlohmann::json>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      flatten(value, name, out);
    } else {
      out[name] = value;
    }
  }
}

template <typename T>
void assign(const std::string& key, const nlohmann::json& value, T& field) {
  const bool ok = [&] {
    if constexpr (std::is_same_v<T, bool>) return value.is_boolean();
    else if constexpr (std::is_same_v<T, std::string>) return value.is_string();
    else if constexpr (std::is_same_v<T, std::uint64_t>) return value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0);
    else if constexpr (std::is_integral_v<T>) return value.is_number_integer();
    else if constexpr (std::is_floating_point_v<T>) return value.is_number();
    else return value.is_array() && std::all_of(value.begin(), value.end(), [](const auto& v) { return v.is_number_integer(); });
  }();
  check(ok, ErrorKind::ConfigError, "config key '" + key + "' has the wrong type: " + value.dump());
  field = value.get<T>();
}

void require(bool condition, const std::string& what) { check(condition, ErrorKind::ConfigError, what); }

}  // namespace

void RunConfig::finalize() {
  require(profile == "paper" || profile == "toy", "profile must be 'paper' or 'toy'");
  require(embedder.kind == "toy" || embedder.kind == "imported", "embedder.kind must be 'toy' or 'imported'");
  require(embedder.max_words > 0 && embedder.dim > 0, "embedder dimensions must be positive");
  require(body.toy_joints >= 2 && body.toy_joints <= kMaxJoints, "body.toy_joints must be in [2, 24]");
  require(body.toy_vertices >= 4 * body.toy_joints, "body.toy_vertices must be at least 4 * toy_joints");
  require(render.resolution >= 8, "render.resolution must be at least 8");
  require(render.tau > 0 && render.gamma > 0 && render.cutoff > 0, "render sharpness parameters must be positive");
  require(data.num_classes >= 2 && data.size >= 1 && !data.counts.empty(), "data needs >= 2 classes and >= 1 sample");
  require(train.learning_rate > 0 && train.rms_decay > 0 && train.rms_decay < 1 && train.rms_epsilon > 0,
          "optimizer settings out of range");
  require(train.critic_steps >= 1, "train.critic_steps must be >= 1");
  require(train.epochs >= 1 && train.batch_size >= 1, "train.epochs and train.batch_size must be positive");
  require(train.lambda >= 0, "train.lambda must be >= 0");
  require(train.word_order == "normal" || train.word_order == "reversed" || train.word_order == "shuffled",
          "train.word_order must be normal, reversed or shuffled");
  require(train.k_max >= 1, "train.k_max must be >= 1");
  for (int c : data.counts) require(c >= 1 && c <= train.k_max, "data.counts must lie in [1, train.k_max]");
  require(train.max_generator_steps >= 0 && train.clip_norm >= 0 && train.checkpoint_every >= 1,
          "train step limits out of range");
  require(train.counter_learning_rate > 0 && train.counter_epochs >= 1 && train.counter_batch_size >= 1,
          "count predictor training settings out of range");
  require(eval.sample_n >= 1, "eval.sample_n must be positive");
  require(eval.count_mode == "argmax" || eval.count_mode == "expected", "eval.count_mode must be argmax or expected");

  generator.max_words = embedder.max_words;
  generator.embed_dim = embedder.dim;
  generator.k_max = train.k_max;
  critic1.max_words = embedder.max_words;
  critic1.embed_dim = embedder.dim;
  critic2.max_words = embedder.max_words;
  critic2.embed_dim = embedder.dim;
  critic2.resolution = render.resolution;
  counter.embed_dim = embedder.dim;
  counter.k_max = train.k_max;
}

RunConfig make_profile(const std::string& name) {
  RunConfig c;
  c.profile = name;
  if (name == "paper") {
  } else if (name == "toy") {
    c.embedder.dim = 32;
    c.body.toy_vertices = 120;
    c.body.toy_joints = 10;
    c.render.resolution = 16;
    c.render.cutoff = 10.0;
    c.generator.feature_dim = 32;
    c.generator.hidden = 32;
    c.generator.attention_hidden = 16;
    c.critic1.encoder_hidden = 64;
    c.critic1.hidden = 32;
    c.critic2.stage_channels = {4, 8, 8, 16};
    c.critic2.final_channels = 16;
    c.critic2.text_channels = 8;
    c.critic2.lstm_channels = {8, 8, 8};
    c.counter.hidden = 32;
    c.eval.sample_n = 60;
  } else {
    fail(ErrorKind::ConfigError, "unknown profile '" + name + "'");
  }
  c.finalize();
  return c;
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  visit_fields(cfg, [&](const char* key, const auto& field) { *slot(j, key) = field; });
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  require(j.is_object(), "config must be a JSON object");
  std::map<std::string, nlohmann::json> flat;
  flatten(j, "", flat);
  std::string profile = "paper";
  if (auto it = flat.find("profile"); it != flat.end()) {
    require(it->second.is_string(), "config key 'profile' must be a string");
    profile = it->second.get<std::string>();
  }
  RunConfig c = make_profile(profile);
  std::map<std::string, bool> seen;
  visit_fields(c, [&](const char* key, auto& field) {
    if (auto it = flat.find(key); it != flat.end()) {
      assign(key, it->second, field);
      seen[key] = true;
    }
  });
  for (const auto& [key, _] : flat) require(seen.count(key) > 0, "unknown config key '" + key + "'");
  c.finalize();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file_bytes(path, ErrorKind::MissingFile);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigError, "config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

std::string config_hash(const RunConfig& cfg) { return fnv1a_hex(to_json(cfg).dump()); }

}  // namespace smplgan
