#include "smplgan/cli.hpp"

#include "smplgan/array_file.hpp"
#include "smplgan/image_io.hpp"
#include "smplgan/training.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <ostream>

namespace smplgan::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kShapeSetVersion = 1;

// Relative paths are taken from --workdir; the data and checkpoint roots can
// be moved with SMPLGAN_DATA_DIR and SMPLGAN_CKPT_DIR.
struct Paths {
  fs::path workdir = ".";

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : workdir / path;
  }
  fs::path env_dir(const char* var, const char* fallback) const {
    const char* v = std::getenv(var);
    return resolve(v != nullptr && *v != '\0' ? v : fallback);
  }
  fs::path data_dir() const { return env_dir("SMPLGAN_DATA_DIR", "data"); }
  fs::path ckpt_dir() const { return env_dir("SMPLGAN_CKPT_DIR", "checkpoints"); }
  fs::path or_default(const std::string& given, const fs::path& fallback) const {
    return given.empty() ? resolve(fallback.string()) : resolve(given);
  }
};

struct ConfigOptions {
  std::string file;
  std::string profile = "paper";
  std::vector<std::string> sets;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", file, "Run configuration (JSON)");
    cmd->add_option("--profile", profile, "Profile used when no config file is given")
        ->check(CLI::IsMember({"paper", "toy"}));
    cmd->add_option("--set", sets, "Override a config key, e.g. --set train.seed=3")->allow_extra_args(false);
  }
};

void set_dotted(nlohmann::json& root, const std::string& dotted, nlohmann::json value) {
  nlohmann::json* cur = &root;
  std::size_t start = 0;
  for (std::size_t dot; (dot = dotted.find('.', start)) != std::string::npos; start = dot + 1) {
    cur = &(*cur)[dotted.substr(start, dot - start)];
    check(cur->is_null() || cur->is_object(), ErrorKind::ConfigError, "config key '" + dotted + "' is not a section");
  }
  (*cur)[dotted.substr(start)] = std::move(value);
}

nlohmann::json read_json(const fs::path& path, ErrorKind malformed) {
  const std::string text = read_file_bytes(path, ErrorKind::MissingFile);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(malformed, path.string() + " is not valid JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file_bytes(path, j.dump(2) + "\n"); }

RunConfig build_config(const ConfigOptions& o, const Paths& paths) {
  nlohmann::json j = o.file.empty() ? nlohmann::json{{"profile", o.profile}}
                                    : read_json(paths.resolve(o.file), ErrorKind::ConfigError);
  check(j.is_object(), ErrorKind::ConfigError, "config must be a JSON object");
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    check(eq != std::string::npos && eq > 0, ErrorKind::ConfigError, "--set expects key=value, got '" + s + "'");
    const std::string value = s.substr(eq + 1);
    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;
    set_dotted(j, s.substr(0, eq), std::move(parsed));
  }
  return config_from_json(j);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::unique_ptr<CountPredictor> load_counter_for(const fs::path& path, const RunConfig& cfg) {
  nlohmann::json meta;
  auto p = load_count_predictor(path, &meta);
  check(EmbedderSpec::from_json(meta.at("embedder")) == cfg.embedder, ErrorKind::ConfigError,
        "count predictor " + path.string() + " was trained with a different embedder");
  check(p->config().k_max <= cfg.generator.k_max, ErrorKind::ConfigError,
        "count predictor k_max exceeds the generator's");
  return p;
}

void export_people(const ShapeSet& set, const RunConfig& cfg, const fs::path& dir, std::ostream& out) {
  const BodyModelAssets assets = load_body(cfg);
  fs::create_directories(dir);
  std::vector<RenderedMap> maps;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::string stem = "person_" + std::to_string(i);
    maps.push_back(render_params(set[i], assets, cfg.render));
    write_png(dir / (stem + ".png"), maps.back());
    write_obj(dir / (stem + ".obj"), smpl_forward(set[i], assets));
  }
  write_png(dir / "composite.png", composite_by_depth(maps));
  out << "wrote " << set.size() << " person renders and meshes plus composite.png to " << dir.string() << "\n";
}

nlohmann::json shape_rows(const ShapeSet& set) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : set) {
    const auto f = p.flatten();
    rows.push_back(std::vector<double>(f.begin(), f.end()));
  }
  return rows;
}

ShapeSet parse_shape_rows(const nlohmann::json& rows) {
  ShapeSet set;
  for (const auto& r : rows) {
    const auto flat = r.get<std::vector<double>>();
    check(flat.size() == static_cast<std::size_t>(kParamDim), ErrorKind::MalformedRecord,
          "shape entries must hold 85 numbers");
    set.push_back(SmplParams::from_flat(flat));
  }
  check(!set.empty(), ErrorKind::MalformedRecord, "shape-set file holds no shapes");
  return set;
}

// ---- subcommands ----------------------------------------------------------------

struct SynthOptions {
  ConfigOptions config;
  std::string spec, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> size;
};

int cmd_synth(const SynthOptions& o, const Paths& paths, std::ostream& out) {
  const RunConfig cfg = build_config(o.config, paths);
  SyntheticSpec spec;
  if (o.spec.empty()) {
    spec = default_synthetic_spec(cfg.data.num_classes, cfg.embedder);
    spec.counts = cfg.data.counts;
    spec.k_max = cfg.train.k_max;
  } else {
    const nlohmann::json j = read_json(paths.resolve(o.spec), ErrorKind::InvalidSpec);
    spec = SyntheticSpec::from_json(j);
    if (!j.contains("embedder")) spec.embedder = cfg.embedder;
  }
  const DatasetManifest m = generate_synthetic_dataset(spec, o.seed.value_or(cfg.data.seed), o.size.value_or(cfg.data.size));
  const fs::path path = paths.or_default(o.out, paths.data_dir() / "manifest.json");
  const std::string text = serialize_manifest(m);
  write_file_bytes(path, text);
  out << "wrote " << path.string() << ": " << m.samples.size() << " samples (" << m.split("train").size() << " train, "
      << m.split("val").size() << " val), checksum " << nlohmann::json::parse(text)["checksum"].get<std::string>()
      << "\n";
  return 0;
}

struct TrainOptions {
  ConfigOptions config;
  std::string manifest, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_steps;
  int log_every = 50;
};

int cmd_train(const TrainOptions& o, const Paths& paths, std::ostream& out) {
  RunConfig cfg = build_config(o.config, paths);
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.max_steps) cfg.train.max_generator_steps = *o.max_steps;
  cfg.finalize();
  const DatasetManifest manifest = load_manifest(paths.or_default(o.manifest, paths.data_dir() / "manifest.json"));
  const BodyModelAssets assets = load_body(cfg);
  const fs::path dir = paths.or_default(o.out, paths.ckpt_dir() / "run");
  fs::create_directories(dir);
  write_json(dir / "config.json", to_json(cfg));

  Trainer trainer(cfg, manifest, assets);
  const TrainResult r = trainer.run({dir, [&](const nlohmann::json& rec) {
                                       if (rec["kind"] != "generator" || o.log_every <= 0) return;
                                       const long step = rec["generator_step"].get<long>();
                                       if (step % o.log_every != 0) return;
                                       out << "step " << step << " epoch " << rec["epoch"].get<int>() << " L_G "
                                           << fmt(rec["L_G"].get<double>()) << "\n";
                                     }});
  nlohmann::json ckpts = nlohmann::json::array();
  for (const auto& c : r.checkpoints) ckpts.push_back(fs::relative(c, dir).generic_string());
  write_json(dir / "run.json", {{"config_hash", config_hash(cfg)},
                                {"manifest_config_hash", manifest.config_hash},
                                {"generator_steps", r.generator_steps},
                                {"critic_steps", r.critic_steps},
                                {"epochs", r.epochs},
                                {"digests", r.digests},
                                {"checkpoints", ckpts}});
  out << "trained " << r.generator_steps << " generator steps (" << r.critic_steps << " critic steps); final checkpoint "
      << r.checkpoints.back().string() << "\n";
  return 0;
}

struct CounterOptions {
  ConfigOptions config;
  std::string manifest, out;
};

int cmd_train_counter(const CounterOptions& o, const Paths& paths, std::ostream& out) {
  const RunConfig cfg = build_config(o.config, paths);
  const DatasetManifest manifest = load_manifest(paths.or_default(o.manifest, paths.data_dir() / "manifest.json"));
  const CounterTrainResult r = train_count_predictor(cfg, manifest);
  const fs::path path = paths.or_default(o.out, paths.ckpt_dir() / "counter.ckpt");
  save_count_predictor(path, *r.predictor, cfg,
                       {{"train_accuracy", r.train_accuracy},
                        {"val_accuracy", r.val_accuracy},
                        {"manifest_config_hash", manifest.config_hash}});
  out << "count predictor: train accuracy " << fmt(r.train_accuracy) << ", validation accuracy " << fmt(r.val_accuracy)
      << "; wrote " << path.string() << "\n";
  return 0;
}

struct GenerateOptions {
  std::string checkpoint, counter, caption, count_mode = "argmax", out, export_dir;
  int count = 0;
  std::uint64_t seed = 0;
};

int cmd_generate(const GenerateOptions& o, const Paths& paths, std::ostream& out) {
  const Models m = load_checkpoint(paths.or_default(o.checkpoint, paths.ckpt_dir() / "run" / "checkpoints" / "final.ckpt"));
  const CountMode mode = parse_count_mode(o.count_mode);
  std::unique_ptr<CountPredictor> counter;
  if (o.count <= 0) {
    const fs::path cpath = paths.or_default(o.counter, paths.ckpt_dir() / "counter.ckpt");
    check(!o.counter.empty() || fs::exists(cpath), ErrorKind::ConfigError,
          "no count predictor at " + cpath.string() + "; pass --counter or --count");
    counter = load_counter_for(cpath, m.config);
  }
  const GenerationResult g = generate_from_caption(m, counter.get(), o.caption, mode, o.seed, o.count);

  nlohmann::json attention = nlohmann::json::array();
  for (const auto& a : g.generated.attention) attention.push_back(std::vector<double>(a.data(), a.data() + a.size()));
  nlohmann::json j = {{"format", "smplgan-shapeset"},
                      {"version", kShapeSetVersion},
                      {"config_hash", config_hash(m.config)},
                      {"config", to_json(m.config)},
                      {"caption", o.caption},
                      {"tokens", g.tokens},
                      {"seed", o.seed},
                      {"count", g.count},
                      {"count_source", o.count > 0 ? "explicit" : "predictor"},
                      {"count_mode", to_string(mode)},
                      {"shapes", shape_rows(g.generated.set)},
                      {"attention", attention}};
  if (g.distribution.size() > 0)
    j["distribution"] = std::vector<double>(g.distribution.data(), g.distribution.data() + g.distribution.size());
  const fs::path path = paths.or_default(o.out, "generated.json");
  write_json(path, j);
  out << "wrote " << path.string() << ": " << g.count << (g.count == 1 ? " person" : " people") << " for \""
      << o.caption << "\"\n";
  if (!o.export_dir.empty()) export_people(g.generated.set, m.config, paths.resolve(o.export_dir), out);
  return 0;
}

struct RenderOptions {
  std::string shapes, out;
  int resolution = 0;
};

int cmd_render(const RenderOptions& o, const Paths& paths, std::ostream& out) {
  const nlohmann::json j = read_json(paths.resolve(o.shapes), ErrorKind::MalformedRecord);
  RunConfig cfg;
  ShapeSet set;
  try {
    check(j.at("format") == "smplgan-shapeset", ErrorKind::MalformedRecord, "not a shape-set file");
    check(j.at("version").get<int>() == kShapeSetVersion, ErrorKind::MalformedRecord, "unsupported shape-set version");
    cfg = config_from_json(j.at("config"));
    set = parse_shape_rows(j.at("shapes"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedRecord, std::string("shape-set file: ") + e.what());
  }
  if (o.resolution > 0) {
    cfg.render.resolution = o.resolution;
    cfg.finalize();
  }
  export_people(set, cfg, paths.or_default(o.out, "render"), out);
  return 0;
}

struct EvaluateOptions {
  std::string checkpoint, manifest, counter, out;
  std::optional<int> sample_n;
  std::optional<std::uint64_t> seed;
  std::string count_mode;
  bool no_uv = false;
};

int cmd_evaluate(const EvaluateOptions& o, const Paths& paths, std::ostream& out) {
  const fs::path ckpt = paths.or_default(o.checkpoint, paths.ckpt_dir() / "run" / "checkpoints" / "final.ckpt");
  const Models m = load_checkpoint(ckpt);
  const DatasetManifest manifest = load_manifest(paths.or_default(o.manifest, paths.data_dir() / "manifest.json"));
  check(manifest.embedder == m.config.embedder, ErrorKind::ConfigError,
        "checkpoint and manifest use different embedder specs");
  EvalConfig ev = m.config.eval;
  if (o.sample_n) ev.sample_n = *o.sample_n;
  if (o.seed) ev.seed = *o.seed;
  if (!o.count_mode.empty()) ev.count_mode = o.count_mode;
  if (o.no_uv) ev.uv = false;
  check(ev.sample_n >= 1, ErrorKind::ConfigError, "--sample-n must be positive");
  std::unique_ptr<CountPredictor> counter;
  if (!o.counter.empty()) counter = load_counter_for(paths.resolve(o.counter), m.config);

  const BodyModelAssets assets = load_body(m.config);
  const EvaluationOutput e = evaluate_models(m, manifest, assets, ev, counter.get());
  const std::string table = format_metrics_tables({{"model", e.metrics}});
  nlohmann::json report = metrics_report(e, ev, config_hash(m.config),
                                         {{"manifest_config_hash", manifest.config_hash},
                                          {"count_source", counter ? "predictor" : "ground truth"}});
  report["table"] = table;
  const fs::path path = paths.or_default(o.out, "metrics.json");
  write_json(path, report);
  out << table;
  if (counter) out << "count accuracy on captions stating a count: " << fmt(e.count_accuracy) << "\n";
  out << "wrote " << path.string() << "\n";
  return 0;
}

struct AblateOptions {
  ConfigOptions config;
  std::string manifest, counter, out;
};

int cmd_ablate(const AblateOptions& o, const Paths& paths, std::ostream& out) {
  const RunConfig cfg = build_config(o.config, paths);
  const DatasetManifest manifest = load_manifest(paths.or_default(o.manifest, paths.data_dir() / "manifest.json"));
  std::unique_ptr<CountPredictor> counter;
  if (!o.counter.empty()) counter = load_counter_for(paths.resolve(o.counter), cfg);
  const fs::path dir = paths.or_default(o.out, paths.ckpt_dir() / "ablation");
  const BodyModelAssets assets = load_body(cfg);
  const AblationReport rep = run_ablation(cfg, manifest, assets, dir, counter.get());
  nlohmann::json j = rep.to_json();
  j["config_hash"] = config_hash(cfg);
  j["table"] = rep.table();
  write_json(dir / "ablation.json", j);
  out << rep.table() << "wrote " << (dir / "ablation.json").string() << "\n";
  return 0;
}

int report_error(std::ostream& err, const std::string& what, int code) {
  err << "error: " << what << "\n";
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Text-conditioned multi-person body generation", "smplgan"};
  app.require_subcommand(1);
  std::string workdir = ".";
  app.add_option("--workdir", workdir, "Root for relative paths");

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth-data", "Write a synthetic caption/body-set manifest");
  synth.config.add_to(c_synth);
  c_synth->add_option("--spec", synth.spec, "Synthetic data spec (JSON)");
  c_synth->add_option("--seed", synth.seed, "Data seed");
  c_synth->add_option("--size", synth.size, "Number of samples")->check(CLI::PositiveNumber);
  c_synth->add_option("--out", synth.out, "Manifest path");

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Adversarial training");
  train.config.add_to(c_train);
  c_train->add_option("--manifest", train.manifest, "Dataset manifest");
  c_train->add_option("--out", train.out, "Run directory");
  c_train->add_option("--seed", train.seed, "Training seed");
  c_train->add_option("--max-steps", train.max_steps, "Stop after this many generator steps")->check(CLI::NonNegativeNumber);
  c_train->add_option("--log-every", train.log_every, "Progress line every N generator steps (0: quiet)");

  CounterOptions counter;
  auto* c_counter = app.add_subcommand("train-counter", "Pretrain the count predictor");
  counter.config.add_to(c_counter);
  c_counter->add_option("--manifest", counter.manifest, "Dataset manifest");
  c_counter->add_option("--out", counter.out, "Count predictor checkpoint path");

  GenerateOptions gen;
  auto* c_gen = app.add_subcommand("generate", "Generate a body set for a caption");
  c_gen->add_option("--checkpoint", gen.checkpoint, "GAN checkpoint");
  c_gen->add_option("--counter", gen.counter, "Count predictor checkpoint");
  c_gen->add_option("--caption", gen.caption, "Caption text")->required();
  c_gen->add_option("--count-mode", gen.count_mode, "argmax or expected")->check(CLI::IsMember({"argmax", "expected"}));
  c_gen->add_option("--count", gen.count, "Explicit number of people (skips the predictor)")->check(CLI::PositiveNumber);
  c_gen->add_option("--seed", gen.seed, "Latent seed");
  c_gen->add_option("--out", gen.out, "Shape-set file");
  c_gen->add_option("--export-dir", gen.export_dir, "Also write per-person PNG/OBJ files here");

  RenderOptions render;
  auto* c_render = app.add_subcommand("render", "Render a shape-set file to PNG and OBJ");
  c_render->add_option("--shapes", render.shapes, "Shape-set file")->required();
  c_render->add_option("--out", render.out, "Output directory");
  c_render->add_option("--resolution", render.resolution, "Override the render resolution")->check(CLI::Range(8, 4096));

  EvaluateOptions eval;
  auto* c_eval = app.add_subcommand("evaluate", "Set-matching metrics on the validation split");
  c_eval->add_option("--checkpoint", eval.checkpoint, "GAN checkpoint");
  c_eval->add_option("--manifest", eval.manifest, "Dataset manifest");
  c_eval->add_option("--counter", eval.counter, "Count predictor (default: ground-truth counts)");
  c_eval->add_option("--sample-n", eval.sample_n, "Number of validation captions");
  c_eval->add_option("--seed", eval.seed, "Subsampling and latent seed");
  c_eval->add_option("--count-mode", eval.count_mode, "argmax or expected")->check(CLI::IsMember({"argmax", "expected"}));
  c_eval->add_flag("--no-uv", eval.no_uv, "Skip rendered-map distances");
  c_eval->add_option("--out", eval.out, "Report path");

  AblateOptions ablate;
  auto* c_ablate = app.add_subcommand("ablate", "Train and compare the ablation variants");
  ablate.config.add_to(c_ablate);
  c_ablate->add_option("--manifest", ablate.manifest, "Dataset manifest");
  c_ablate->add_option("--counter", ablate.counter, "Count predictor (default: ground-truth counts)");
  c_ablate->add_option("--out", ablate.out, "Output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  Paths paths;
  paths.workdir = fs::absolute(workdir).lexically_normal();
  try {
    if (c_synth->parsed()) return cmd_synth(synth, paths, out);
    if (c_train->parsed()) return cmd_train(train, paths, out);
    if (c_counter->parsed()) return cmd_train_counter(counter, paths, out);
    if (c_gen->parsed()) return cmd_generate(gen, paths, out);
    if (c_render->parsed()) return cmd_render(render, paths, out);
    if (c_eval->parsed()) return cmd_evaluate(eval, paths, out);
    if (c_ablate->parsed()) return cmd_ablate(ablate, paths, out);
  } catch (const Error& e) {
    return report_error(err, e.what(), is_validation_error(e.kind()) ? 1 : 2);
  } catch (const nlohmann::json::exception& e) {
    return report_error(err, std::string("malformed input: ") + e.what(), 1);
  } catch (const std::exception& e) {
    return report_error(err, e.what(), 2);
  }
  return report_error(err, "no subcommand given", 1);
}

}  // namespace smplgan::cli
