#include "smplgan/checkpoint.hpp"

#include "smplgan/array_file.hpp"
#include "smplgan/errors.hpp"
#include "smplgan/hashing.hpp"

namespace smplgan {

std::uint64_t derive_seed(std::uint64_t seed, const std::string& purpose) {
  Fnv1a h;
  h.update_pod(seed);
  h.update(purpose);
  return h.digest();
}

Models make_models(const RunConfig& cfg) {
  Models m;
  m.config = cfg;
  const std::uint64_t seed = cfg.train.seed;
  m.generator = std::make_unique<Generator>(cfg.generator, derive_seed(seed, "generator"));
  m.critic1 = std::make_unique<ParamCritic>(cfg.critic1, derive_seed(seed, "critic1"));
  const std::uint64_t c2 = cfg.train.critic2_seed != 0 ? cfg.train.critic2_seed : derive_seed(seed, "critic2");
  m.critic2 = std::make_unique<RenderCritic>(cfg.critic2, c2);
  return m;
}

nlohmann::json model_digests(const Models& m) {
  nlohmann::json j = nlohmann::json::object();
  if (m.generator) j["generator"] = m.generator->parameters().digest();
  if (m.critic1) j["critic1"] = m.critic1->parameters().digest();
  if (m.critic2) j["critic2"] = m.critic2->parameters().digest();
  if (m.counter) j["counter"] = m.counter->parameters().digest();
  return j;
}

namespace {

void add_params(ArrayFile& file, const nn::ParameterSet& set) {
  for (const auto& [name, value] : set.snapshot()) file.reals[name] = value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Models& m, const CheckpointMeta& meta) {
  ArrayFile file;
  file.kind = "gan-checkpoint";
  file.meta = {{"version", kCheckpointVersion},
               {"config", to_json(m.config)},
               {"config_hash", config_hash(m.config)},
               {"epoch", meta.epoch},
               {"generator_steps", meta.generator_steps},
               {"digests", model_digests(m)},
               {"has_counter", m.counter != nullptr},
               {"extra", meta.extra}};
  add_params(file, m.generator->parameters());
  add_params(file, m.critic1->parameters());
  add_params(file, m.critic2->parameters());
  if (m.counter) {
    add_params(file, m.counter->parameters());
    file.meta["counter_config"] = to_json(m.counter->config());
  }
  write_array_file(path, file);
}

Models load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
  const ArrayFile file = read_array_file(path, "gan-checkpoint", ErrorKind::MissingFile, ErrorKind::MalformedAsset);
  try {
    check(file.meta.at("version").get<int>() == kCheckpointVersion, ErrorKind::MalformedAsset,
          "unsupported checkpoint version");
    RunConfig cfg;
    try {
      cfg = config_from_json(file.meta.at("config"));
    } catch (const Error& e) {
      fail(ErrorKind::MalformedAsset, std::string("checkpoint config: ") + e.what());
    }
    Models m = make_models(cfg);
    m.generator->parameters().restore(file.reals);
    m.critic1->parameters().restore(file.reals);
    m.critic2->parameters().restore(file.reals);
    if (file.meta.at("has_counter").get<bool>()) {
      m.counter = std::make_unique<CountPredictor>(counter_config_from_json(file.meta.at("counter_config")), 0);
      m.counter->parameters().restore(file.reals);
    }
    if (meta) {
      meta->epoch = file.meta.at("epoch").get<int>();
      meta->generator_steps = file.meta.at("generator_steps").get<long>();
      meta->config_hash = file.meta.at("config_hash").get<std::string>();
      meta->extra = file.meta.value("extra", nlohmann::json::object());
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedAsset, path.string() + ": " + e.what());
  }
}

void save_count_predictor(const std::filesystem::path& path, const CountPredictor& p, const RunConfig& cfg,
                          const nlohmann::json& extra) {
  ArrayFile file;
  file.kind = "count-predictor";
  file.meta = {{"version", kCheckpointVersion},
               {"counter_config", to_json(p.config())},
               {"embedder", cfg.embedder.to_json()},
               {"config_hash", config_hash(cfg)},
               {"digest", p.parameters().digest()},
               {"extra", extra}};
  add_params(file, p.parameters());
  write_array_file(path, file);
}

std::unique_ptr<CountPredictor> load_count_predictor(const std::filesystem::path& path, nlohmann::json* extra) {
  const ArrayFile file = read_array_file(path, "count-predictor", ErrorKind::MissingFile, ErrorKind::MalformedAsset);
  try {
    auto p = std::make_unique<CountPredictor>(counter_config_from_json(file.meta.at("counter_config")), 0);
    p->parameters().restore(file.reals);
    if (extra) *extra = file.meta;
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedAsset, path.string() + ": " + e.what());
  }
}

}  // namespace smplgan
