#include "smplgan/text_encoder.hpp"

#include "smplgan/array_file.hpp"
#include "smplgan/errors.hpp"
#include "smplgan/hashing.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>

namespace smplgan {

std::vector<std::string> tokenize(std::string_view caption) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : caption) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      flush();
    } else if (u < 128 && std::ispunct(u)) {
      continue;
    } else {
      cur.push_back(u < 128 ? static_cast<char>(std::tolower(u)) : ch);
    }
  }
  flush();
  return tokens;
}

nlohmann::json EmbedderSpec::to_json() const {
  return {{"kind", kind}, {"seed", seed}, {"max_words", max_words}, {"dim", dim}};
}

EmbedderSpec EmbedderSpec::from_json(const nlohmann::json& j) {
  EmbedderSpec s;
  try {
    s.kind = j.at("kind").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.max_words = j.at("max_words").get<int>();
    s.dim = j.at("dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedRecord, std::string("embedder spec: ") + e.what());
  }
  check(s.kind == "toy" || s.kind == "imported", ErrorKind::MalformedRecord, "unknown embedder kind '" + s.kind + "'");
  check(s.max_words > 0 && s.dim > 0, ErrorKind::MalformedRecord, "embedder dimensions must be positive");
  return s;
}

Matrix WordEmbeddings::mask() const {
  Matrix m = Matrix::Zero(1, values.rows());
  m.leftCols(word_count).setOnes();
  return m;
}

Matrix WordEmbeddings::flat() const { return Eigen::Map<const Matrix>(values.data(), 1, values.size()); }

namespace {

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

RowVector toy_token_embedding(std::string_view token, std::uint64_t seed, int dim) {
  Fnv1a h;
  h.update(token);
  std::uint64_t state = h.digest() ^ splitmix(seed);
  RowVector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = static_cast<double>(splitmix(state) >> 11) * 0x1.0p-52 - 1.0;
  return v / v.norm();
}

WordEmbeddings encode_caption(const std::vector<std::string>& tokens, const EmbedderSpec& spec) {
  check(!tokens.empty(), ErrorKind::EmptyCaption, "caption has no tokens");
  check(spec.kind == "toy", ErrorKind::InvalidSpec, "only the toy embedder encodes raw tokens; got '" + spec.kind + "'");
  WordEmbeddings e;
  e.word_count = std::min(static_cast<int>(tokens.size()), spec.max_words);
  e.values = Matrix::Zero(spec.max_words, spec.dim);
  for (int i = 0; i < e.word_count; ++i) e.values.row(i) = toy_token_embedding(tokens[static_cast<std::size_t>(i)], spec.seed, spec.dim);
  e.tokens.assign(tokens.begin(), tokens.begin() + e.word_count);
  return e;
}

WordEmbeddings make_embeddings(Matrix values, int word_count, std::vector<std::string> tokens) {
  check(word_count >= 1, ErrorKind::EmptyCaption, "embedding has no words");
  check(word_count <= values.rows(), ErrorKind::ShapeMismatch, "word count exceeds embedding rows");
  check(values.allFinite(), ErrorKind::MalformedRecord, "embedding contains non-finite values");
  check(values.bottomRows(values.rows() - word_count).isZero(0.0), ErrorKind::MalformedRecord,
        "embedding padding rows must be zero");
  return {std::move(values), word_count, std::move(tokens)};
}

double text_distance(const WordEmbeddings& a, const WordEmbeddings& b) {
  check(a.values.rows() == b.values.rows() && a.values.cols() == b.values.cols(), ErrorKind::ShapeMismatch,
        "text_distance needs equal (n, L)");
  return (a.values - b.values).norm();
}

// ---- embedding import file --------------------------------------------------
//
// "SMPLGANE" | u32 version=1 | u32 n | u32 L | u64 count | records...
// record: u64 id length | id bytes | u32 word_count | n*L float32, row-major.
// All integers and floats little-endian.

namespace {

constexpr char kEmbMagic[8] = {'S', 'M', 'P', 'L', 'G', 'A', 'N', 'E'};

template <typename T>
void put(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  check(pos + sizeof(T) <= in.size(), ErrorKind::MalformedRecord, "embedding file truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(T);
  return static_cast<T>(v);
}

}  // namespace

void write_embedding_file(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records) {
  check(!records.empty(), ErrorKind::EmptySet, "no embedding records to write");
  const Index n = records.front().values.rows(), l = records.front().values.cols();
  std::string out(kEmbMagic, sizeof kEmbMagic);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(l));
  put<std::uint64_t>(out, records.size());
  for (const auto& r : records) {
    check(r.values.rows() == n && r.values.cols() == l, ErrorKind::ShapeMismatch, "embedding records differ in shape");
    put<std::uint64_t>(out, r.caption_id.size());
    out += r.caption_id;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.word_count));
    for (Index i = 0; i < r.values.size(); ++i) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(r.values.data()[i])));
  }
  write_file_bytes(path, out);
}

std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path) {
  const std::string in = read_file_bytes(path, ErrorKind::MissingFile);
  check(in.size() >= sizeof kEmbMagic && std::memcmp(in.data(), kEmbMagic, sizeof kEmbMagic) == 0,
        ErrorKind::MalformedRecord, "not an embedding file: " + path.string());
  std::size_t pos = sizeof kEmbMagic;
  check(take<std::uint32_t>(in, pos) == 1, ErrorKind::MalformedRecord, "unsupported embedding file version");
  const auto n = take<std::uint32_t>(in, pos);
  const auto l = take<std::uint32_t>(in, pos);
  const auto count = take<std::uint64_t>(in, pos);
  std::vector<EmbeddingRecord> records;
  for (std::uint64_t k = 0; k < count; ++k) {
    EmbeddingRecord r;
    const auto len = take<std::uint64_t>(in, pos);
    check(pos + len <= in.size(), ErrorKind::MalformedRecord, "embedding file truncated");
    r.caption_id = in.substr(pos, len);
    pos += len;
    r.word_count = static_cast<int>(take<std::uint32_t>(in, pos));
    r.values.resize(n, l);
    for (Index i = 0; i < r.values.size(); ++i) r.values.data()[i] = std::bit_cast<float>(take<std::uint32_t>(in, pos));
    make_embeddings(r.values, r.word_count, {});
    records.push_back(std::move(r));
  }
  check(pos == in.size(), ErrorKind::MalformedRecord, "trailing bytes in embedding file");
  return records;
}

}  // namespace smplgan
