#pragma once

#include "smplgan/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace smplgan {

// Whitespace split, ASCII lowercase, ASCII punctuation removed; tokens that
// become empty are dropped.
std::vector<std::string> tokenize(std::string_view caption);

// Identifies how word embeddings are produced. "toy" embeddings are computed
// from tokens; "imported" embeddings come from an embedding file and are
// carried verbatim by manifests.
struct EmbedderSpec {
  std::string kind = "toy";
  std::uint64_t seed = 0;
  int max_words = 17;
  int dim = 256;

  nlohmann::json to_json() const;
  static EmbedderSpec from_json(const nlohmann::json& j);
  bool operator==(const EmbedderSpec&) const = default;
};

struct WordEmbeddings {
  Matrix values;  // max_words x dim; rows >= word_count are zero
  int word_count = 0;
  std::vector<std::string> tokens;

  int max_words() const { return static_cast<int>(values.rows()); }
  int dim() const { return static_cast<int>(values.cols()); }
  // 1 x max_words, 1 for real words and 0 for padding.
  Matrix mask() const;
  // 1 x (max_words * dim), row-major.
  Matrix flat() const;
};

// Unit-norm pseudo-random vector derived from (token, seed) by integer hashing.
RowVector toy_token_embedding(std::string_view token, std::uint64_t seed, int dim);

// Embeds the first max_words tokens with the toy embedder. Throws EmptyCaption
// for an empty token list and InvalidSpec for a non-toy spec.
WordEmbeddings encode_caption(const std::vector<std::string>& tokens, const EmbedderSpec& spec);

// Wraps a precomputed matrix, enforcing shape and the padding invariant.
WordEmbeddings make_embeddings(Matrix values, int word_count, std::vector<std::string> tokens);

// Frobenius norm of the difference; throws ShapeMismatch on differing (n, L).
double text_distance(const WordEmbeddings& a, const WordEmbeddings& b);

// Embedding import file: one record per caption.
struct EmbeddingRecord {
  std::string caption_id;
  int word_count = 0;
  Matrix values;  // n x L, stored as float32
};

void write_embedding_file(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path);

}  // namespace smplgan
