#pragma once

#include "smplgan/autodiff.hpp"
#include "smplgan/types.hpp"

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace smplgan {

inline constexpr int kPoseDim = 72;
inline constexpr int kShapeDim = 10;
inline constexpr int kCameraDim = 3;
inline constexpr int kParamDim = kPoseDim + kShapeDim + kCameraDim;
inline constexpr int kMaxJoints = 24;

// One person: axis-angle pose per joint (radians), shape coefficients, and a
// weak-perspective camera (scale, tx, ty). Flattened order is pose, shape,
// camera.
struct SmplParams {
  std::array<double, kPoseDim> pose{};
  std::array<double, kShapeDim> shape{};
  std::array<double, kCameraDim> camera{};

  std::array<double, kParamDim> flatten() const;
  RowVector as_row() const;
  static SmplParams from_flat(std::span<const double> flat);

  double scale() const { return camera[0]; }
  double tx() const { return camera[1]; }
  double ty() const { return camera[2]; }

  bool all_finite() const;
  // Joints whose axis-angle magnitude exceeds 2*pi; legal but suspicious.
  std::vector<int> oversized_rotations() const;

  bool operator==(const SmplParams&) const = default;
};

using ShapeSet = std::vector<SmplParams>;

// Throws NonFiniteResult when any entry is NaN or infinite.
void validate_params(const SmplParams& params);

struct BodyModelAssets {
  Matrix template_vertices;  // N x 3, meters
  IndexMatrix faces;         // F x 3
  Matrix joint_regressor;    // J x N
  Matrix skin_weights;       // N x J
  Matrix shape_basis;        // 10 x 3N, row k = flattened offsets of blend shape k
  Matrix pose_basis;         // 9(J-1) x 3N, or empty
  std::vector<int> parents;  // J entries, -1 marks the root

  Index num_vertices() const { return template_vertices.rows(); }
  int num_joints() const { return static_cast<int>(parents.size()); }
  Index num_faces() const { return faces.rows(); }
};

struct BodyMesh {
  Matrix vertices;                       // N x 3
  const IndexMatrix* faces = nullptr;    // topology of the producing assets
};

// Throws MalformedAsset naming the violated invariant.
void validate_assets(const BodyModelAssets& assets);

BodyModelAssets load_body_assets(const std::filesystem::path& path);
void save_body_assets(const std::filesystem::path& path, const BodyModelAssets& assets);

// Procedural capsule-limb figure using the first `num_joints` joints of the
// standard 24-joint skeleton. Requires 2 <= num_joints <= 24 and
// num_vertices >= 4 * num_joints; pose entries of joints >= num_joints are
// ignored by smpl_forward. Deterministic in (arguments, seed).
BodyModelAssets make_toy_body(Index num_vertices, int num_joints, std::uint64_t seed);

// Linear blend skinning of the shaped (and pose-corrected) template. Camera
// parameters are ignored here. Throws NonFiniteResult on non-finite output.
BodyMesh smpl_forward(const SmplParams& params, const BodyModelAssets& assets);

// Differentiable variant: pose (1 x 72), shape (1 x 10) -> vertices (N x 3).
ad::Var smpl_vertices(ad::Graph& g, ad::Var pose, ad::Var shape, const BodyModelAssets& assets);

// Exponential map with a Taylor branch below |w| < 1e-8.
Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& w);
// Derivatives dR/dw_i for i = 0..2.
std::array<Eigen::Matrix3d, 3> axis_angle_jacobian(const Eigen::Vector3d& w);

ad::Var axis_angle_to_matrix(ad::Var w);

}  // namespace smplgan
