#pragma once

#include "smplgan/body_model.hpp"
#include "smplgan/renderer.hpp"

#include <filesystem>

namespace smplgan {

// 8-bit RGB PNG, channel values quantized as round(255 * v).
void write_png(const std::filesystem::path& path, const RenderedMap& map);
// Reads back an 8-bit RGB PNG written by write_png (values v / 255).
RenderedMap read_png(const std::filesystem::path& path);

// ASCII Wavefront OBJ with v and f records (1-based indices).
void write_obj(const std::filesystem::path& path, const BodyMesh& mesh);

}  // namespace smplgan
