#include "smplgan/image_io.hpp"

#include "smplgan/errors.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace smplgan {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  check(f != nullptr, ErrorKind::MissingFile, "cannot open " + path.string());
  return f;
}

}  // namespace

void write_png(const std::filesystem::path& path, const RenderedMap& map) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const int res = map.resolution;
  std::vector<png_byte> rows(static_cast<std::size_t>(res) * res * 3);
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(map.at(c, i, j), 0.0, 1.0);
        rows[(static_cast<std::size_t>(i) * res + j) * 3 + c] = static_cast<png_byte>(std::lround(255.0 * v));
      }

  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::MissingFile, "failed to write PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(res), static_cast<png_uint_32>(res), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int i = 0; i < res; ++i) png_write_row(png, &rows[static_cast<std::size_t>(i) * res * 3]);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RenderedMap read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::MalformedRecord, "failed to read PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  if (width != height || png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::MalformedRecord, "expected a square 8-bit RGB PNG: " + path.string());
  }
  const int res = static_cast<int>(width);
  std::vector<png_byte> row(static_cast<std::size_t>(res) * 3);
  RenderedMap map = background_map(res);
  for (int i = 0; i < res; ++i) {
    png_read_row(png, row.data(), nullptr);
    for (int j = 0; j < res; ++j)
      for (int c = 0; c < 3; ++c)
        map.pixels(0, (static_cast<Index>(c) * res + i) * res + j) = row[static_cast<std::size_t>(j) * 3 + c] / 255.0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return map;
}

void write_obj(const std::filesystem::path& path, const BodyMesh& mesh) {
  check(mesh.faces != nullptr, ErrorKind::InvalidSpec, "mesh has no topology");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  check(out.good(), ErrorKind::MissingFile, "cannot open " + path.string());
  char buf[128];
  for (Index v = 0; v < mesh.vertices.rows(); ++v) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", mesh.vertices(v, 0), mesh.vertices(v, 1), mesh.vertices(v, 2));
    out << buf;
  }
  const IndexMatrix& f = *mesh.faces;
  for (Index i = 0; i < f.rows(); ++i) out << "f " << f(i, 0) + 1 << ' ' << f(i, 1) + 1 << ' ' << f(i, 2) + 1 << '\n';
}

}  // namespace smplgan
