#include "smplgan/body_model.hpp"

#include "smplgan/array_file.hpp"
#include "smplgan/errors.hpp"

#include <cmath>
#include <numbers>

namespace smplgan {

std::array<double, kParamDim> SmplParams::flatten() const {
  std::array<double, kParamDim> out{};
  std::copy(pose.begin(), pose.end(), out.begin());
  std::copy(shape.begin(), shape.end(), out.begin() + kPoseDim);
  std::copy(camera.begin(), camera.end(), out.begin() + kPoseDim + kShapeDim);
  return out;
}

RowVector SmplParams::as_row() const {
  const auto flat = flatten();
  RowVector r(kParamDim);
  for (int i = 0; i < kParamDim; ++i) r(i) = flat[static_cast<std::size_t>(i)];
  return r;
}

SmplParams SmplParams::from_flat(std::span<const double> flat) {
  check(flat.size() == kParamDim, ErrorKind::ShapeMismatch,
        "SMPL parameter vector must have 85 entries, got " + std::to_string(flat.size()));
  SmplParams p;
  std::copy(flat.begin(), flat.begin() + kPoseDim, p.pose.begin());
  std::copy(flat.begin() + kPoseDim, flat.begin() + kPoseDim + kShapeDim, p.shape.begin());
  std::copy(flat.begin() + kPoseDim + kShapeDim, flat.end(), p.camera.begin());
  return p;
}

bool SmplParams::all_finite() const {
  const auto flat = flatten();
  return std::all_of(flat.begin(), flat.end(), [](double v) { return std::isfinite(v); });
}

std::vector<int> SmplParams::oversized_rotations() const {
  std::vector<int> joints;
  for (int j = 0; j < kMaxJoints; ++j) {
    const double n = std::hypot(pose[3 * j], pose[3 * j + 1], pose[3 * j + 2]);
    if (n > 2.0 * std::numbers::pi) joints.push_back(j);
  }
  return joints;
}

void validate_params(const SmplParams& params) {
  check(params.all_finite(), ErrorKind::NonFiniteResult, "SMPL parameters contain non-finite entries");
}

// ---- assets ----------------------------------------------------------------

void validate_assets(const BodyModelAssets& a) {
  const Index n = a.num_vertices();
  const int j = a.num_joints();
  auto bad = [](const std::string& what) { fail(ErrorKind::MalformedAsset, what); };
  if (n <= 0 || a.template_vertices.cols() != 3) bad("template must be N x 3 with N > 0");
  if (j < 1 || j > kMaxJoints) bad("joint count must be in [1, 24], got " + std::to_string(j));
  if (a.joint_regressor.rows() != j || a.joint_regressor.cols() != n) bad("joint regressor must be J x N");
  if (a.skin_weights.rows() != n || a.skin_weights.cols() != j) bad("skin weights must be N x J");
  if (a.shape_basis.rows() != kShapeDim || a.shape_basis.cols() != 3 * n) bad("shape basis must be 10 x 3N");
  if (a.pose_basis.size() != 0 && (a.pose_basis.rows() != 9 * (j - 1) || a.pose_basis.cols() != 3 * n)) {
    bad("pose basis must be 9(J-1) x 3N when present");
  }
  if (a.faces.cols() != 3 || a.faces.rows() == 0) bad("faces must be F x 3 with F > 0");
  for (Index i = 0; i < a.faces.size(); ++i) {
    if (a.faces.data()[i] < 0 || a.faces.data()[i] >= n) bad("face index out of [0, N_v)");
  }
  for (Index v = 0; v < n; ++v) {
    double s = 0.0;
    for (int k = 0; k < j; ++k) {
      const double w = a.skin_weights(v, k);
      if (!(w >= 0.0)) bad("skinning weight of vertex " + std::to_string(v) + " is negative");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-6) {
      bad("skinning weights of vertex " + std::to_string(v) + " sum to " + std::to_string(s) + ", expected 1");
    }
  }
  int roots = 0;
  for (int k = 0; k < j; ++k) {
    const int p = a.parents[static_cast<std::size_t>(k)];
    if (p == -1) {
      ++roots;
    } else if (p < 0 || p >= j || p == k) {
      bad("joint " + std::to_string(k) + " has invalid parent " + std::to_string(p));
    }
  }
  if (roots != 1) bad("kinematic tree must have exactly one root, found " + std::to_string(roots));
  for (int k = 0; k < j; ++k) {
    int cur = k, steps = 0;
    while (cur != -1 && steps <= j) {
      cur = a.parents[static_cast<std::size_t>(cur)];
      ++steps;
    }
    if (cur != -1) bad("kinematic tree contains a cycle through joint " + std::to_string(k));
  }
  auto finite = [](const Matrix& m) { return m.allFinite(); };
  if (!finite(a.template_vertices) || !finite(a.joint_regressor) || !finite(a.skin_weights) ||
      !finite(a.shape_basis) || !finite(a.pose_basis)) {
    bad("asset arrays contain non-finite values");
  }
}

BodyModelAssets load_body_assets(const std::filesystem::path& path) {
  const ArrayFile file = read_array_file(path, "body-assets", ErrorKind::MissingAsset, ErrorKind::MalformedAsset);
  auto real = [&](const std::string& name) -> const Matrix& {
    const auto it = file.reals.find(name);
    if (it == file.reals.end()) fail(ErrorKind::MalformedAsset, "asset file lacks array '" + name + "'");
    return it->second;
  };
  auto integer = [&](const std::string& name) -> const IndexMatrix& {
    const auto it = file.ints.find(name);
    if (it == file.ints.end()) fail(ErrorKind::MalformedAsset, "asset file lacks array '" + name + "'");
    return it->second;
  };
  BodyModelAssets a;
  a.template_vertices = real("template");
  a.faces = integer("faces");
  a.joint_regressor = real("joint_regressor");
  a.skin_weights = real("skin_weights");
  a.shape_basis = real("shape_basis");
  if (file.reals.count("pose_basis")) a.pose_basis = real("pose_basis");
  const IndexMatrix& parents = integer("parents");
  for (Index i = 0; i < parents.size(); ++i) a.parents.push_back(static_cast<int>(parents.data()[i]));

  const auto& meta = file.meta;
  auto header = [&](const char* key) -> std::int64_t {
    if (!meta.contains(key) || !meta[key].is_number_integer()) {
      fail(ErrorKind::MalformedAsset, std::string("asset header lacks integer field ") + key);
    }
    return meta[key].get<std::int64_t>();
  };
  check(header("version") == 1, ErrorKind::MalformedAsset, "unsupported asset version");
  check(header("N_v") == a.num_vertices(), ErrorKind::MalformedAsset, "header N_v disagrees with template rows");
  check(header("J") == a.num_joints(), ErrorKind::MalformedAsset, "header J disagrees with parent table");
  check(header("F") == a.num_faces(), ErrorKind::MalformedAsset, "header F disagrees with face rows");
  validate_assets(a);
  return a;
}

void save_body_assets(const std::filesystem::path& path, const BodyModelAssets& a) {
  validate_assets(a);
  ArrayFile file;
  file.kind = "body-assets";
  file.meta = {{"version", 1}, {"N_v", a.num_vertices()}, {"J", a.num_joints()}, {"F", a.num_faces()}};
  file.reals["template"] = a.template_vertices;
  file.ints["faces"] = a.faces;
  file.reals["joint_regressor"] = a.joint_regressor;
  file.reals["skin_weights"] = a.skin_weights;
  file.reals["shape_basis"] = a.shape_basis;
  if (a.pose_basis.size() != 0) file.reals["pose_basis"] = a.pose_basis;
  IndexMatrix parents(1, a.num_joints());
  for (int k = 0; k < a.num_joints(); ++k) parents(0, k) = a.parents[static_cast<std::size_t>(k)];
  file.ints["parents"] = parents;
  write_array_file(path, file);
}

// ---- rotations -------------------------------------------------------------

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d k;
  k << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return k;
}

struct RodriguesCoefficients {
  double a, b;      // sin(t)/t, (1 - cos t)/t^2
  double da, db;    // a'(t)/t, b'(t)/t
};

RodriguesCoefficients coefficients(double t) {
  const double t2 = t * t;
  RodriguesCoefficients c{};
  if (t < 1e-8) {
    c.a = 1.0;
    c.b = 0.5;
  } else {
    c.a = std::sin(t) / t;
    const double s = std::sin(0.5 * t);
    c.b = 2.0 * s * s / t2;
  }
  // Series for the derivative coefficients; the closed forms cancel badly.
  if (t < 1e-3) {
    c.da = -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0;
    c.db = -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0;
  } else {
    c.da = (t * std::cos(t) - std::sin(t)) / (t2 * t);
    c.db = (t * std::sin(t) - 2.0 * (1.0 - std::cos(t))) / (t2 * t2);
  }
  return c;
}

}  // namespace

Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& w) {
  const auto c = coefficients(w.norm());
  const Eigen::Matrix3d k = skew(w);
  return Eigen::Matrix3d::Identity() + c.a * k + c.b * k * k;
}

std::array<Eigen::Matrix3d, 3> axis_angle_jacobian(const Eigen::Vector3d& w) {
  const auto c = coefficients(w.norm());
  const Eigen::Matrix3d k = skew(w);
  const Eigen::Matrix3d k2 = k * k;
  std::array<Eigen::Matrix3d, 3> out;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Matrix3d e = skew(Eigen::Vector3d::Unit(i));
    out[static_cast<std::size_t>(i)] = c.a * e + c.b * (e * k + k * e) + c.da * w(i) * k + c.db * w(i) * k2;
  }
  return out;
}

ad::Var axis_angle_to_matrix(ad::Var w) {
  if (w.rows() != 1 || w.cols() != 3) throw std::logic_error("axis_angle_to_matrix expects 1 x 3");
  const Eigen::Vector3d wv = w.value().row(0).transpose();
  Matrix value = axis_angle_to_matrix(wv);
  return w.graph().record("axis_angle", std::move(value), {w}, [w, wv](const Matrix& grad) {
    const auto jac = axis_angle_jacobian(wv);
    Matrix gw(1, 3);
    for (int i = 0; i < 3; ++i) gw(0, i) = grad.cwiseProduct(jac[static_cast<std::size_t>(i)]).sum();
    w.graph().accumulate(w, gw);
  });
}

// ---- forward kinematics / skinning -----------------------------------------

namespace {

// [R | t; 0 0 0 1] from R (3 x 3) and t (1 x 3).
ad::Var rigid_transform(ad::Var r, ad::Var t) {
  Matrix value = Matrix::Identity(4, 4);
  value.topLeftCorner(3, 3) = r.value();
  value.topRightCorner(3, 1) = t.value().transpose();
  return r.graph().record("rigid_transform", std::move(value), {r, t}, [r, t](const Matrix& grad) {
    ad::Graph& g = r.graph();
    if (g.requires_grad(r)) g.accumulate(r, grad.topLeftCorner(3, 3));
    if (g.requires_grad(t)) g.accumulate(t, grad.topRightCorner(3, 1).transpose());
  });
}

// Moves the transform's pivot from the origin to the rest joint location:
// translation becomes t - R * j.
ad::Var remove_rest_pose(ad::Var transform, ad::Var joint) {
  Matrix value = transform.value();
  value.topRightCorner(3, 1) -= transform.value().topLeftCorner(3, 3) * joint.value().transpose();
  return transform.graph().record(
      "remove_rest_pose", std::move(value), {transform, joint}, [transform, joint](const Matrix& grad) {
        ad::Graph& g = transform.graph();
        const Eigen::Vector3d gt = grad.topRightCorner(3, 1);
        if (g.requires_grad(transform)) {
          Matrix gg = grad;
          gg.topLeftCorner(3, 3) -= gt * joint.value().row(0);
          g.accumulate(transform, gg);
        }
        if (g.requires_grad(joint)) {
          g.accumulate(joint, -(transform.value().topLeftCorner(3, 3).transpose() * gt).transpose());
        }
      });
}

// v_i' = T_i[0:3, 0:3] v_i + T_i[0:3, 3] with T (N x 16) row-major 4x4 blocks.
ad::Var apply_transforms(ad::Var transforms, ad::Var vertices) {
  const Index n = vertices.rows();
  Matrix value(n, 3);
  const Matrix& t = transforms.value();
  const Matrix& v = vertices.value();
  for (Index i = 0; i < n; ++i)
    for (int r = 0; r < 3; ++r)
      value(i, r) = t(i, 4 * r) * v(i, 0) + t(i, 4 * r + 1) * v(i, 1) + t(i, 4 * r + 2) * v(i, 2) + t(i, 4 * r + 3);
  return transforms.graph().record(
      "apply_transforms", std::move(value), {transforms, vertices}, [transforms, vertices](const Matrix& grad) {
        ad::Graph& g = transforms.graph();
        const Matrix& t = transforms.value();
        const Matrix& v = vertices.value();
        const Index n = v.rows();
        if (g.requires_grad(transforms)) {
          Matrix gt = Matrix::Zero(n, 16);
          for (Index i = 0; i < n; ++i)
            for (int r = 0; r < 3; ++r) {
              for (int c = 0; c < 3; ++c) gt(i, 4 * r + c) = grad(i, r) * v(i, c);
              gt(i, 4 * r + 3) = grad(i, r);
            }
          g.accumulate(transforms, gt);
        }
        if (g.requires_grad(vertices)) {
          Matrix gv = Matrix::Zero(n, 3);
          for (Index i = 0; i < n; ++i)
            for (int r = 0; r < 3; ++r)
              for (int c = 0; c < 3; ++c) gv(i, c) += t(i, 4 * r + c) * grad(i, r);
          g.accumulate(vertices, gv);
        }
      });
}

std::vector<int> topological_order(const std::vector<int>& parents) {
  std::vector<int> order;
  std::vector<bool> placed(parents.size(), false);
  while (order.size() < parents.size()) {
    for (std::size_t j = 0; j < parents.size(); ++j) {
      if (placed[j]) continue;
      const int p = parents[j];
      if (p == -1 || placed[static_cast<std::size_t>(p)]) {
        order.push_back(static_cast<int>(j));
        placed[j] = true;
      }
    }
  }
  return order;
}

}  // namespace

ad::Var smpl_vertices(ad::Graph& g, ad::Var pose, ad::Var shape, const BodyModelAssets& assets) {
  const Index n = assets.num_vertices();
  const int joints = assets.num_joints();
  Matrix template_flat = Eigen::Map<const Matrix>(assets.template_vertices.data(), 1, 3 * n);

  ad::Var shaped_flat = ad::add(g.constant(template_flat), ad::matmul(shape, g.constant(assets.shape_basis)));
  ad::Var shaped = ad::reshape(shaped_flat, n, 3);
  ad::Var joint_pos = ad::matmul(g.constant(assets.joint_regressor), shaped);

  std::vector<ad::Var> rotations;
  for (int j = 0; j < joints; ++j) rotations.push_back(axis_angle_to_matrix(ad::slice_cols(pose, 3 * j, 3)));

  ad::Var posed = shaped;
  if (assets.pose_basis.size() != 0) {
    std::vector<ad::Var> features;
    Matrix eye(1, 9);
    eye << 1, 0, 0, 0, 1, 0, 0, 0, 1;
    ad::Var identity = g.constant(eye);
    for (int j = 1; j < joints; ++j) {
      features.push_back(ad::sub(ad::reshape(rotations[static_cast<std::size_t>(j)], 1, 9), identity));
    }
    ad::Var offsets = ad::matmul(ad::concat_cols(features), g.constant(assets.pose_basis));
    posed = ad::reshape(ad::add(shaped_flat, offsets), n, 3);
  }

  std::vector<ad::Var> world(static_cast<std::size_t>(joints));
  std::vector<ad::Var> skinning(static_cast<std::size_t>(joints));
  for (int j : topological_order(assets.parents)) {
    const int p = assets.parents[static_cast<std::size_t>(j)];
    ad::Var jpos = ad::slice_rows(joint_pos, j, 1);
    ad::Var offset = p < 0 ? jpos : ad::sub(jpos, ad::slice_rows(joint_pos, p, 1));
    ad::Var local = rigid_transform(rotations[static_cast<std::size_t>(j)], offset);
    world[static_cast<std::size_t>(j)] = p < 0 ? local : ad::matmul(world[static_cast<std::size_t>(p)], local);
    skinning[static_cast<std::size_t>(j)] =
        ad::reshape(remove_rest_pose(world[static_cast<std::size_t>(j)], jpos), 1, 16);
  }
  ad::Var per_vertex = ad::matmul(g.constant(assets.skin_weights), ad::concat_rows(skinning));
  return apply_transforms(per_vertex, posed);
}

BodyMesh smpl_forward(const SmplParams& params, const BodyModelAssets& assets) {
  validate_params(params);
  ad::Graph g;
  Matrix pose(1, kPoseDim), shape(1, kShapeDim);
  for (int i = 0; i < kPoseDim; ++i) pose(0, i) = params.pose[static_cast<std::size_t>(i)];
  for (int i = 0; i < kShapeDim; ++i) shape(0, i) = params.shape[static_cast<std::size_t>(i)];
  ad::Var v = smpl_vertices(g, g.constant(pose), g.constant(shape), assets);
  BodyMesh mesh{v.value(), &assets.faces};
  check(mesh.vertices.allFinite(), ErrorKind::NonFiniteResult, "body model produced non-finite vertices");
  return mesh;
}

}  // namespace smplgan
