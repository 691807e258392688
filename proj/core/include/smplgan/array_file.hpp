#pragma once

// Binary container of named arrays plus a JSON metadata block. Shared by body
// assets, checkpoints and embedding imports. Byte layout is in docs/FORMATS.md.

#include "smplgan/errors.hpp"
#include "smplgan/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>

namespace smplgan {

struct ArrayFile {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Matrix> reals;
  std::map<std::string, IndexMatrix> ints;
};

inline constexpr std::uint32_t kArrayFileVersion = 1;

std::string serialize_array_file(const ArrayFile& file);
ArrayFile parse_array_file(const std::string& bytes, ErrorKind malformed);

void write_array_file(const std::filesystem::path& path, const ArrayFile& file);
// `missing` is raised when the file does not exist, `malformed` on any parse
// failure or when the stored kind differs from `expected_kind` (if non-empty).
ArrayFile read_array_file(const std::filesystem::path& path, const std::string& expected_kind,
                          ErrorKind missing, ErrorKind malformed);

std::string read_file_bytes(const std::filesystem::path& path, ErrorKind missing);
void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);

// Little-endian float64 encoding helpers for text containers.
std::string encode_f64(const double* data, std::size_t count);
std::vector<double> decode_f64(const std::string& base64);
std::string encode_f32(const float* data, std::size_t count);
std::vector<float> decode_f32(const std::string& base64);

}  // namespace smplgan
