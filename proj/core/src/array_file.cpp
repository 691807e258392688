#include "smplgan/array_file.hpp"

#include "smplgan/base64.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace smplgan {
namespace {

constexpr char kMagic[8] = {'S', 'M', 'P', 'L', 'G', 'A', 'N', 'A'};
constexpr std::uint8_t kDtypeF64 = 1;
constexpr std::uint8_t kDtypeI64 = 2;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_string(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out += s;
}

class Reader {
 public:
  Reader(const std::string& bytes, ErrorKind malformed) : bytes_(bytes), malformed_(malformed) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) fail(malformed_, "array file truncated");
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  ErrorKind malformed_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_array_file(const ArrayFile& file) {
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kArrayFileVersion);
  put_string(out, file.kind);
  put_string(out, file.meta.dump());
  put_u32(out, static_cast<std::uint32_t>(file.reals.size() + file.ints.size()));
  for (const auto& [name, m] : file.reals) {
    put_string(out, name);
    out.push_back(static_cast<char>(kDtypeF64));
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(m.data()[i]));
  }
  for (const auto& [name, m] : file.ints) {
    put_string(out, name);
    out.push_back(static_cast<char>(kDtypeI64));
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.size(); ++i) put_u64(out, static_cast<std::uint64_t>(m.data()[i]));
  }
  return out;
}

ArrayFile parse_array_file(const std::string& bytes, ErrorKind malformed) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    fail(malformed, "bad magic; not an smplgan array file");
  }
  const std::string body = bytes.substr(sizeof(kMagic));
  Reader r(body, malformed);
  const auto version = r.u32();
  check(version == kArrayFileVersion, malformed, "unsupported array file version " + std::to_string(version));
  ArrayFile file;
  file.kind = r.str();
  try {
    file.meta = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    fail(malformed, std::string("metadata is not valid JSON: ") + e.what());
  }
  const auto count = r.u32();
  for (std::uint32_t a = 0; a < count; ++a) {
    std::string name = r.str();
    const auto dtype = r.u8();
    const auto rows = r.u64();
    const auto cols = r.u64();
    check(rows < (1ull << 32) && cols < (1ull << 32), malformed, "array '" + name + "' has absurd dimensions");
    r.need(rows * cols * 8);
    if (dtype == kDtypeF64) {
      Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(r.u64());
      file.reals.emplace(std::move(name), std::move(m));
    } else if (dtype == kDtypeI64) {
      IndexMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<std::int64_t>(r.u64());
      file.ints.emplace(std::move(name), std::move(m));
    } else {
      fail(malformed, "array '" + name + "' has unknown dtype " + std::to_string(dtype));
    }
  }
  check(r.done(), malformed, "trailing bytes after last array");
  return file;
}

std::string read_file_bytes(const std::filesystem::path& path, ErrorKind missing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(missing, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::MissingFile, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::MissingFile, "write failed for " + path.string());
}

void write_array_file(const std::filesystem::path& path, const ArrayFile& file) {
  write_file_bytes(path, serialize_array_file(file));
}

ArrayFile read_array_file(const std::filesystem::path& path, const std::string& expected_kind, ErrorKind missing,
                          ErrorKind malformed) {
  if (!std::filesystem::exists(path)) fail(missing, "file not found: " + path.string());
  ArrayFile file = parse_array_file(read_file_bytes(path, missing), malformed);
  if (!expected_kind.empty() && file.kind != expected_kind) {
    fail(malformed, path.string() + " holds '" + file.kind + "', expected '" + expected_kind + "'");
  }
  return file;
}

std::string encode_f64(const double* data, std::size_t count) {
  std::string raw;
  raw.reserve(count * 8);
  for (std::size_t i = 0; i < count; ++i) put_u64(raw, std::bit_cast<std::uint64_t>(data[i]));
  return base64_encode(std::as_bytes(std::span(raw.data(), raw.size())));
}

std::vector<double> decode_f64(const std::string& text) {
  const auto bytes = base64_decode(text);
  check(bytes.size() % 8 == 0, ErrorKind::MalformedRecord, "float64 payload length not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= std::uint64_t(std::to_integer<unsigned>(bytes[8 * i + b])) << (8 * b);
    out[i] = std::bit_cast<double>(v);
  }
  return out;
}

std::string encode_f32(const float* data, std::size_t count) {
  std::string raw;
  raw.reserve(count * 4);
  for (std::size_t i = 0; i < count; ++i) put_u32(raw, std::bit_cast<std::uint32_t>(data[i]));
  return base64_encode(std::as_bytes(std::span(raw.data(), raw.size())));
}

std::vector<float> decode_f32(const std::string& text) {
  const auto bytes = base64_decode(text);
  check(bytes.size() % 4 == 0, ErrorKind::MalformedRecord, "float32 payload length not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= std::uint32_t(std::to_integer<unsigned>(bytes[4 * i + b])) << (8 * b);
    out[i] = std::bit_cast<float>(v);
  }
  return out;
}

}  // namespace smplgan
