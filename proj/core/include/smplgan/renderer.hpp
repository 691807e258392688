#pragma once

#include "smplgan/autodiff.hpp"
#include "smplgan/body_model.hpp"
#include "smplgan/types.hpp"

#include <vector>

namespace smplgan {

struct RenderConfig {
  int resolution = 224;
  double tau = 30.0;      // coverage sharpness, per normalized image unit
  double gamma = 0.01;    // depth softmax temperature
  double cutoff = 18.0;   // faces with tau * signed_distance below -cutoff are skipped
};

inline constexpr double kBackground[3] = {0.0, 0.5, 0.5};

struct CameraParams {
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  static CameraParams of(const SmplParams& p) { return {p.camera[0], p.camera[1], p.camera[2]}; }
};

// Channels: silhouette occupancy, normalized depth, normalized vertical body
// coordinate. Stored channel-major in a single row (1 x 3*R*R) so that a map is
// directly one critic input row; row 0 of the image is the top (v = +1).
struct RenderedMap {
  int resolution = 0;
  Matrix pixels;

  double at(int channel, int row, int col) const {
    return pixels(0, (static_cast<Index>(channel) * resolution + row) * resolution + col);
  }
  Index size() const { return pixels.size(); }
};

RenderedMap background_map(int resolution);
Matrix background_row(int resolution);

struct Projection {
  Matrix points;  // N x 2 normalized image coordinates
  Matrix depth;   // N x 1, model z passed through
};

Projection project_weak_perspective(const Matrix& vertices, const CameraParams& camera);

RenderedMap render_map(const BodyMesh& mesh, const CameraParams& camera, const RenderConfig& cfg);
RenderedMap render_map(const BodyMesh& mesh, const CameraParams& camera, int resolution);
// smpl_forward followed by render_map with the params' own camera.
RenderedMap render_params(const SmplParams& params, const BodyModelAssets& assets, const RenderConfig& cfg);

// Differentiable variants. vertices: N x 3, camera: 1 x 3 (scale, tx, ty).
ad::Var project_weak_perspective(ad::Var vertices, ad::Var camera);
// screen: N x 2 projected points; vertices supply depth and vertical channels.
ad::Var rasterize(ad::Var screen, ad::Var vertices, const IndexMatrix& faces, const RenderConfig& cfg);
// Full map; a non-positive scale yields the constant background.
ad::Var render_map(ad::Var vertices, ad::Var camera, const IndexMatrix& faces, const RenderConfig& cfg);

// Rows of SMPL parameters (B x 85) -> rendered maps (B x 3*R*R), each person
// posed by the body model and drawn with its own camera.
ad::Var render_param_rows(ad::Graph& g, ad::Var params, const BodyModelAssets& assets, const RenderConfig& cfg);

// Display-only composite: each pixel takes the covering person nearest the
// viewer (largest depth channel among silhouettes above one half).
RenderedMap composite_by_depth(const std::vector<RenderedMap>& maps);

}  // namespace smplgan
