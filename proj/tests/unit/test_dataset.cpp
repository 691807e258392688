#include "smplgan/dataset.hpp"

#include "smplgan/array_file.hpp"
#include "test_support.hpp"

#include <fstream>

using namespace smplgan;
using smplgan::testing::TempDir;

namespace {

EmbedderSpec embedder() {
  EmbedderSpec e;
  e.max_words = 6;
  e.dim = 8;
  return e;
}

SmplParams with_camera(double s, double tx, double ty, double pose0 = 0.0) {
  SmplParams p;
  p.camera = {s, tx, ty};
  p.pose[0] = pose0;
  return p;
}

}  // namespace

TEST(SyntheticData, SameSeedGivesSameChecksum) {
  const auto spec = default_synthetic_spec(2, embedder());
  const auto a = manifest_to_json(generate_synthetic_dataset(spec, 7, 100));
  const auto b = manifest_to_json(generate_synthetic_dataset(spec, 7, 100));
  EXPECT_EQ(a["checksum"], b["checksum"]);
  const auto c = manifest_to_json(generate_synthetic_dataset(spec, 8, 100));
  EXPECT_NE(a["checksum"], c["checksum"]);
}

TEST(SyntheticData, StandingSamplesStayWithinThreeSigma) {
  const auto spec = default_synthetic_spec(3, embedder());
  const auto proto = builtin_activity("standing").prototype;
  const auto m = generate_synthetic_dataset(spec, 3, 90);
  int checked = 0;
  for (const auto& s : m.samples) {
    if (s.caption.find("standing") == std::string::npos) continue;
    for (const auto& p : s.gt) {
      for (int i = 0; i < kPoseDim; ++i)
        EXPECT_LE(std::abs(p.pose[i] - proto.pose[i]), 3 * spec.pose_noise + 1e-12);
      for (int i = 0; i < kShapeDim; ++i) EXPECT_LE(std::abs(p.shape[i] - proto.shape[i]), 3 * spec.shape_noise + 1e-12);
      EXPECT_LE(std::abs(p.scale() - spec.camera_scale), 3 * spec.scale_noise + 1e-12);
      ++checked;
    }
  }
  EXPECT_GT(checked, 30);
}

TEST(SyntheticData, CaptionsStateTheSetSize) {
  const auto m = generate_synthetic_dataset(default_synthetic_spec(3, embedder()), 1, 60);
  bool saw_three_standing = false;
  for (const auto& s : m.samples) {
    EXPECT_EQ(stated_count(s.tokens), static_cast<int>(s.gt.size())) << s.caption;
    EXPECT_EQ(s.embedding.word_count, 3);
    if (s.caption == "three people standing") {
      saw_three_standing = true;
      EXPECT_EQ(s.gt.size(), 3u);
    }
    EXPECT_EQ(canonical_order(s.gt), s.gt);
  }
  EXPECT_TRUE(saw_three_standing);
  EXPECT_EQ(m.split("val").size(), 6u);
  EXPECT_EQ(m.split("train").size(), 54u);
}

TEST(SyntheticData, PeopleAreLaidOutLeftToRight) {
  const auto m = generate_synthetic_dataset(default_synthetic_spec(2, embedder()), 5, 40);
  for (const auto& s : m.samples) {
    const double n = static_cast<double>(s.gt.size());
    for (std::size_t j = 0; j < s.gt.size(); ++j) {
      const double u = (static_cast<double>(j) + 0.5) / n * 1.6 - 0.8;
      EXPECT_NEAR(s.gt[j].tx() * s.gt[j].scale(), u, 0.1);
    }
  }
}

TEST(SyntheticData, InvalidSpecsAreRejected) {
  auto spec = default_synthetic_spec(2, embedder());
  EXPECT_ERROR_KIND(default_synthetic_spec(1, embedder()), ErrorKind::InvalidSpec);
  EXPECT_ERROR_KIND(generate_synthetic_dataset(spec, 1, 0), ErrorKind::InvalidSpec);
  spec.counts = {4};
  EXPECT_ERROR_KIND(generate_synthetic_dataset(spec, 1, 10), ErrorKind::InvalidSpec);
  EXPECT_ERROR_KIND(builtin_activity("juggling"), ErrorKind::InvalidSpec);
}

TEST(SyntheticData, SpecJsonRoundTrip) {
  auto spec = default_synthetic_spec(3, embedder());
  spec.pose_noise = 0.07;
  const auto back = SyntheticSpec::from_json(spec.to_json());
  EXPECT_EQ(back.to_json(), spec.to_json());
  auto j = spec.to_json();
  j["classes"] = {"standing", "waving"};
  EXPECT_EQ(SyntheticSpec::from_json(j).classes[1].prototype, builtin_activity("waving").prototype);
  j["colour"] = 1;
  EXPECT_ERROR_KIND(SyntheticSpec::from_json(j), ErrorKind::InvalidSpec);
}

TEST(StatedCount, WordsDigitsAndArticles) {
  EXPECT_EQ(stated_count(tokenize("three people standing")), 3);
  EXPECT_EQ(stated_count(tokenize("2 people walking")), 2);
  EXPECT_EQ(stated_count(tokenize("a person sitting")), 1);
  EXPECT_EQ(stated_count(tokenize("a group of people")), 0);
  EXPECT_EQ(stated_count(tokenize("people dancing")), 0);
  EXPECT_EQ(stated_count({}), 0);
}

TEST(Manifest, RoundTripPreservesSamples) {
  TempDir dir;
  const auto m = generate_synthetic_dataset(default_synthetic_spec(3, embedder()), 9, 30);
  save_manifest(dir / "m.json", m);
  const auto back = load_manifest(dir / "m.json");
  ASSERT_EQ(back.samples.size(), m.samples.size());
  EXPECT_EQ(back.k_max, m.k_max);
  EXPECT_EQ(back.embedder, m.embedder);
  EXPECT_EQ(back.config_hash, m.config_hash);
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].caption, m.samples[i].caption);
    EXPECT_EQ(back.samples[i].split, m.samples[i].split);
    EXPECT_EQ(back.samples[i].gt, m.samples[i].gt);
    EXPECT_EQ(back.samples[i].embedding.values, m.samples[i].embedding.values);
  }
  EXPECT_EQ(serialize_manifest(back), serialize_manifest(m));
}

TEST(Manifest, CorruptedChecksumIsDetected) {
  const auto m = generate_synthetic_dataset(default_synthetic_spec(2, embedder()), 9, 10);
  auto j = manifest_to_json(m);
  j["checksum"] = "0000000000000000";
  EXPECT_ERROR_KIND(parse_manifest(j.dump()), ErrorKind::ChecksumMismatch);
  j = manifest_to_json(m);
  j["records"][2]["caption"] = "two people sitting";
  EXPECT_ERROR_KIND(parse_manifest(j.dump()), ErrorKind::ChecksumMismatch);
}

TEST(Manifest, BadRecordsAreMalformed) {
  const auto m = generate_synthetic_dataset(default_synthetic_spec(2, embedder()), 9, 10);
  auto resealed = [](nlohmann::json j) {
    j["checksum"] = manifest_checksum(j["records"]);
    return j.dump();
  };
  auto j = manifest_to_json(m);
  j["records"][3]["k"] = 0;
  try {
    parse_manifest(resealed(j));
    ADD_FAILURE() << "k = 0 accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MalformedRecord);
    EXPECT_NE(std::string(e.what()).find("record 3"), std::string::npos) << e.what();
  }
  j = manifest_to_json(m);
  j["records"][0]["k"] = 2;  // params still hold one person
  EXPECT_ERROR_KIND(parse_manifest(resealed(j)), ErrorKind::MalformedRecord);
  j = manifest_to_json(m);
  j["records"][0]["split"] = "test";
  EXPECT_ERROR_KIND(parse_manifest(resealed(j)), ErrorKind::MalformedRecord);
  j = manifest_to_json(m);
  j["records"][0].erase("caption");
  EXPECT_ERROR_KIND(parse_manifest(resealed(j)), ErrorKind::MalformedRecord);
  EXPECT_ERROR_KIND(parse_manifest("{not json"), ErrorKind::MalformedRecord);
}

TEST(Manifest, MissingFile) {
  TempDir dir;
  EXPECT_ERROR_KIND(load_manifest(dir / "absent.json"), ErrorKind::MissingFile);
}

TEST(CanonicalOrder, Examples) {
  const ShapeSet sorted = {with_camera(1, -0.5, 0), with_camera(1, 0.1, 0), with_camera(1, 0.7, 0)};
  EXPECT_EQ(canonical_order(sorted), sorted);

  const ShapeSet pair = {with_camera(1, 0.5, 0), with_camera(1, -0.5, 0)};
  const ShapeSet swapped = canonical_order(pair);
  EXPECT_EQ(swapped[0], pair[1]);
  EXPECT_EQ(swapped[1], pair[0]);

  const ShapeSet ties = {with_camera(1, 0.2, 0.3), with_camera(1, 0.2, -0.3), with_camera(1, 0.2, -0.3, -1.0)};
  const ShapeSet by_ty = canonical_order(ties);
  EXPECT_EQ(by_ty[0], ties[2]);  // same t, smaller flattened vector
  EXPECT_EQ(by_ty[1], ties[1]);
  EXPECT_EQ(by_ty[2], ties[0]);

  const ShapeSet dupes = {with_camera(1, 0.4, 0), with_camera(1, 0.4, 0)};
  EXPECT_EQ(canonical_order(dupes), dupes);
}

TEST(CanonicalOrder, IdempotentAndPermutationInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    ShapeSet s;
    for (int i = 0; i < 5; ++i) s.push_back(with_camera(1, std::round(rng.uniform() * 4) / 4, rng.uniform(), rng.uniform()));
    const ShapeSet c = canonical_order(s);
    EXPECT_EQ(canonical_order(c), c);
    ShapeSet shuffled = s;
    rng.shuffle(shuffled.begin(), shuffled.end());
    EXPECT_EQ(canonical_order(shuffled), c);
    EXPECT_TRUE(std::is_permutation(c.begin(), c.end(), s.begin()));
  }
}
