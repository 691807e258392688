#include "smplgan/dataset.hpp"

#include "smplgan/array_file.hpp"
#include "smplgan/errors.hpp"
#include "smplgan/hashing.hpp"
#include "smplgan/rng.hpp"

#include <algorithm>
#include <cstdio>

namespace smplgan {

namespace {

void set_joint(SmplParams& p, int joint, double x, double y, double z) {
  p.pose[static_cast<std::size_t>(3 * joint)] = x;
  p.pose[static_cast<std::size_t>(3 * joint + 1)] = y;
  p.pose[static_cast<std::size_t>(3 * joint + 2)] = z;
}

const char* const kBuiltins[] = {"standing", "walking", "sitting", "waving", "crouching"};

// Normal draw truncated to +-3 standard deviations.
double truncated_normal(Rng& rng) {
  for (;;) {
    const double v = rng.normal();
    if (std::abs(v) <= 3.0) return v;
  }
}

}  // namespace

ActivityClass builtin_activity(const std::string& name) {
  ActivityClass c{name, {}};
  SmplParams& p = c.prototype;
  // Arms hang down unless the activity says otherwise.
  set_joint(p, 16, 0, 0, -1.2);
  set_joint(p, 17, 0, 0, 1.2);
  if (name == "standing") {
  } else if (name == "walking") {
    set_joint(p, 1, -0.45, 0, 0);
    set_joint(p, 2, 0.35, 0, 0);
    set_joint(p, 4, 0.2, 0, 0);
    set_joint(p, 5, 0.5, 0, 0);
    set_joint(p, 16, 0, 0.3, -1.2);
    set_joint(p, 17, 0, 0.3, 1.2);
  } else if (name == "sitting") {
    set_joint(p, 1, -1.4, 0, 0.1);
    set_joint(p, 2, -1.4, 0, -0.1);
    set_joint(p, 4, 1.4, 0, 0);
    set_joint(p, 5, 1.4, 0, 0);
  } else if (name == "waving") {
    set_joint(p, 16, 0, 0, 0.6);
    set_joint(p, 18, 0, -1.2, 0);
  } else if (name == "crouching") {
    set_joint(p, 1, -0.9, 0, 0.15);
    set_joint(p, 2, -0.9, 0, -0.15);
    set_joint(p, 4, 1.7, 0, 0);
    set_joint(p, 5, 1.7, 0, 0);
    set_joint(p, 7, -0.6, 0, 0);
    set_joint(p, 8, -0.6, 0, 0);
    set_joint(p, 3, 0.4, 0, 0);
  } else {
    fail(ErrorKind::InvalidSpec, "unknown builtin activity '" + name + "'");
  }
  return c;
}

SyntheticSpec default_synthetic_spec(int num_classes, const EmbedderSpec& embedder) {
  check(num_classes >= 2 && num_classes <= 5, ErrorKind::InvalidSpec,
        "default spec supports 2 to 5 activity classes, got " + std::to_string(num_classes));
  SyntheticSpec s;
  for (int i = 0; i < num_classes; ++i) s.classes.push_back(builtin_activity(kBuiltins[i]));
  s.embedder = embedder;
  return s;
}

nlohmann::json SyntheticSpec::to_json() const {
  nlohmann::json cls = nlohmann::json::array();
  for (const auto& c : classes) {
    const auto flat = c.prototype.flatten();
    cls.push_back({{"name", c.name}, {"prototype", std::vector<double>(flat.begin(), flat.end())}});
  }
  return {{"classes", cls},
          {"counts", counts},
          {"k_max", k_max},
          {"pose_noise", pose_noise},
          {"shape_noise", shape_noise},
          {"camera_scale", camera_scale},
          {"scale_noise", scale_noise},
          {"translation_noise", translation_noise},
          {"val_every", val_every},
          {"embedder", embedder.to_json()}};
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  static const char* const known[] = {"classes", "counts", "k_max", "pose_noise", "shape_noise", "camera_scale",
                                      "scale_noise", "translation_noise", "val_every", "embedder"};
  check(j.is_object(), ErrorKind::InvalidSpec, "synthetic spec must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    check(std::find(std::begin(known), std::end(known), key) != std::end(known), ErrorKind::InvalidSpec,
          "unknown synthetic spec key '" + key + "'");
  }
  SyntheticSpec s;
  try {
    for (const auto& c : j.at("classes")) {
      if (c.is_string()) {
        s.classes.push_back(builtin_activity(c.get<std::string>()));
      } else {
        const auto flat = c.at("prototype").get<std::vector<double>>();
        s.classes.push_back({c.at("name").get<std::string>(), SmplParams::from_flat(flat)});
      }
    }
    if (j.contains("counts")) s.counts = j["counts"].get<std::vector<int>>();
    if (j.contains("k_max")) s.k_max = j["k_max"].get<int>();
    if (j.contains("pose_noise")) s.pose_noise = j["pose_noise"].get<double>();
    if (j.contains("shape_noise")) s.shape_noise = j["shape_noise"].get<double>();
    if (j.contains("camera_scale")) s.camera_scale = j["camera_scale"].get<double>();
    if (j.contains("scale_noise")) s.scale_noise = j["scale_noise"].get<double>();
    if (j.contains("translation_noise")) s.translation_noise = j["translation_noise"].get<double>();
    if (j.contains("val_every")) s.val_every = j["val_every"].get<int>();
    if (j.contains("embedder")) s.embedder = EmbedderSpec::from_json(j["embedder"]);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidSpec, std::string("synthetic spec: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::InvalidSpec, std::string("synthetic spec: ") + e.what());
  }
  return s;
}

std::vector<const Sample*> DatasetManifest::split(const std::string& name) const {
  std::vector<const Sample*> out;
  for (const auto& s : samples)
    if (s.split == name) out.push_back(&s);
  return out;
}

std::string count_word(int count) {
  static const char* const words[] = {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"};
  check(count >= 1 && count <= 10, ErrorKind::InvalidSpec, "count words cover 1..10");
  return words[count - 1];
}

int stated_count(const std::vector<std::string>& tokens) {
  if (tokens.empty()) return 0;
  for (int c = 1; c <= 10; ++c)
    if (tokens.front() == count_word(c) || tokens.front() == std::to_string(c)) return c;
  if (tokens.front() == "a" || tokens.front() == "an") return tokens.size() > 1 && tokens[1] == "person" ? 1 : 0;
  return 0;
}

DatasetManifest generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed, int size) {
  check(spec.classes.size() >= 2, ErrorKind::InvalidSpec, "synthetic spec needs at least two activity classes");
  check(size >= 1, ErrorKind::InvalidSpec, "dataset size must be positive");
  check(!spec.counts.empty(), ErrorKind::InvalidSpec, "synthetic spec needs at least one count");
  for (int c : spec.counts) {
    check(c >= 1 && c <= spec.k_max && c <= 10, ErrorKind::InvalidSpec,
          "counts must lie in [1, k_max] and at most 10, got " + std::to_string(c));
  }
  check(spec.camera_scale > 0.0 && spec.pose_noise >= 0.0 && spec.shape_noise >= 0.0 && spec.scale_noise >= 0.0 &&
            spec.translation_noise >= 0.0 && spec.val_every >= 1,
        ErrorKind::InvalidSpec, "synthetic noise levels must be nonnegative and the camera scale positive");
  check(spec.embedder.kind == "toy", ErrorKind::InvalidSpec, "synthetic data uses the toy embedder");

  Rng rng(seed);
  DatasetManifest m;
  m.k_max = spec.k_max;
  m.embedder = spec.embedder;
  m.config_hash = fnv1a_hex(spec.to_json().dump() + "|" + std::to_string(seed) + "|" + std::to_string(size));
  const auto num_classes = static_cast<int>(spec.classes.size());
  const auto num_counts = static_cast<int>(spec.counts.size());
  for (int i = 0; i < size; ++i) {
    const ActivityClass& cls = spec.classes[static_cast<std::size_t>(i % num_classes)];
    const int count = spec.counts[static_cast<std::size_t>((i / num_classes) % num_counts)];
    Sample s;
    char id[32];
    std::snprintf(id, sizeof id, "syn%06d", i);
    s.caption_id = id;
    s.image_id = id;
    s.caption = count_word(count) + (count == 1 ? " person " : " people ") + cls.name;
    s.tokens = tokenize(s.caption);
    s.embedding = encode_caption(s.tokens, spec.embedder);
    s.split = (i + 1) % spec.val_every == 0 ? "val" : "train";
    for (int j = 0; j < count; ++j) {
      SmplParams p = cls.prototype;
      for (auto& v : p.pose) v += spec.pose_noise * truncated_normal(rng);
      for (auto& v : p.shape) v += spec.shape_noise * truncated_normal(rng);
      const double scale = spec.camera_scale + spec.scale_noise * truncated_normal(rng);
      const double u = (j + 0.5) / count * 1.6 - 0.8;
      p.camera = {scale, u / scale + spec.translation_noise * truncated_normal(rng),
                  spec.translation_noise * truncated_normal(rng)};
      s.gt.push_back(p);
    }
    s.gt = canonical_order(s.gt);
    m.samples.push_back(std::move(s));
  }
  return m;
}

ShapeSet canonical_order(const ShapeSet& set) {
  ShapeSet out = set;
  std::stable_sort(out.begin(), out.end(), [](const SmplParams& a, const SmplParams& b) {
    if (a.tx() != b.tx()) return a.tx() < b.tx();
    if (a.ty() != b.ty()) return a.ty() < b.ty();
    const auto fa = a.flatten(), fb = b.flatten();
    return std::lexicographical_compare(fa.begin(), fa.end(), fb.begin(), fb.end());
  });
  return out;
}

// ---- manifest file -----------------------------------------------------------

std::string manifest_checksum(const nlohmann::json& records) { return fnv1a_hex(records.dump()); }

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& s : m.samples) {
    std::vector<double> flat;
    for (const auto& p : s.gt) {
      const auto f = p.flatten();
      flat.insert(flat.end(), f.begin(), f.end());
    }
    nlohmann::json r = {{"caption_id", s.caption_id}, {"image_id", s.image_id}, {"caption", s.caption},
                        {"split", s.split},           {"k", s.gt.size()},       {"params", encode_f64(flat.data(), flat.size())}};
    if (m.embedder.kind == "imported") {
      std::vector<float> values(static_cast<std::size_t>(s.embedding.values.size()));
      for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<float>(s.embedding.values.data()[i]);
      r["embedding"] = {{"word_count", s.embedding.word_count}, {"values", encode_f32(values.data(), values.size())}};
    }
    records.push_back(std::move(r));
  }
  return {{"format", "smplgan-manifest"}, {"version", m.version},      {"k_max", m.k_max},
          {"embedder", m.embedder.to_json()}, {"config_hash", m.config_hash}, {"checksum", manifest_checksum(records)},
          {"records", std::move(records)}};
}

std::string serialize_manifest(const DatasetManifest& m) { return manifest_to_json(m).dump(1) + "\n"; }

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  write_file_bytes(path, serialize_manifest(m));
}

DatasetManifest parse_manifest(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedRecord, std::string("manifest is not valid JSON: ") + e.what());
  }
  DatasetManifest m;
  try {
    check(j.at("format") == "smplgan-manifest", ErrorKind::MalformedRecord, "not a manifest file");
    m.version = j.at("version").get<int>();
    check(m.version == kManifestVersion, ErrorKind::MalformedRecord, "unsupported manifest version");
    m.k_max = j.at("k_max").get<int>();
    check(m.k_max >= 1, ErrorKind::MalformedRecord, "manifest k_max must be positive");
    m.embedder = EmbedderSpec::from_json(j.at("embedder"));
    m.config_hash = j.at("config_hash").get<std::string>();
    const auto& records = j.at("records");
    check(manifest_checksum(records) == j.at("checksum").get<std::string>(), ErrorKind::ChecksumMismatch,
          "manifest checksum does not match its records");
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      const std::string where = "record " + std::to_string(i) + ": ";
      try {
        Sample s;
        s.caption_id = r.at("caption_id").get<std::string>();
        s.image_id = r.value("image_id", s.caption_id);
        s.caption = r.at("caption").get<std::string>();
        s.split = r.at("split").get<std::string>();
        check(s.split == "train" || s.split == "val", ErrorKind::MalformedRecord, "split must be train or val");
        const int k = r.at("k").get<int>();
        check(k >= 1 && k <= m.k_max, ErrorKind::MalformedRecord,
              "set size " + std::to_string(k) + " outside [1, " + std::to_string(m.k_max) + "]");
        const auto flat = decode_f64(r.at("params").get<std::string>());
        check(flat.size() == static_cast<std::size_t>(k) * kParamDim, ErrorKind::MalformedRecord,
              "parameter array length disagrees with k");
        for (int t = 0; t < k; ++t) {
          SmplParams p = SmplParams::from_flat(std::span<const double>(flat.data() + t * kParamDim, kParamDim));
          check(p.all_finite(), ErrorKind::MalformedRecord, "non-finite SMPL parameters");
          s.gt.push_back(p);
        }
        s.gt = canonical_order(s.gt);
        s.tokens = tokenize(s.caption);
        if (m.embedder.kind == "toy") {
          s.embedding = encode_caption(s.tokens, m.embedder);
        } else {
          const auto& e = r.at("embedding");
          const auto values = decode_f32(e.at("values").get<std::string>());
          check(values.size() == static_cast<std::size_t>(m.embedder.max_words) * m.embedder.dim,
                ErrorKind::MalformedRecord, "embedding size disagrees with the embedder spec");
          Matrix mat(m.embedder.max_words, m.embedder.dim);
          for (std::size_t v = 0; v < values.size(); ++v) mat.data()[v] = values[v];
          s.embedding = make_embeddings(std::move(mat), e.at("word_count").get<int>(), s.tokens);
        }
        m.samples.push_back(std::move(s));
      } catch (const Error& e) {
        fail(ErrorKind::MalformedRecord, where + e.what());
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::MalformedRecord, where + e.what());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedRecord, std::string("manifest header: ") + e.what());
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file_bytes(path, ErrorKind::MissingFile));
}

}  // namespace smplgan
