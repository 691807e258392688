#include "smplgan/array_file.hpp"
#include "smplgan/body_model.hpp"

#include "test_support.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

using namespace smplgan;
using smplgan::testing::random_matrix;
using smplgan::testing::TempDir;

namespace {

Matrix reshape_basis_row(const BodyModelAssets& a, int k) {
  Matrix m(a.num_vertices(), 3);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = a.shape_basis(k, i);
  return m;
}

}  // namespace

TEST(SmplParams, FlattenRoundTripAndValidation) {
  SmplParams p;
  for (int i = 0; i < kPoseDim; ++i) p.pose[i] = 0.01 * i;
  p.shape[3] = -1.5;
  p.camera = {0.5, 0.1, -0.2};
  const auto flat = p.flatten();
  EXPECT_EQ(flat.size(), 85u);
  EXPECT_EQ(flat[72 + 3], -1.5);
  EXPECT_EQ(flat[82], 0.5);
  EXPECT_EQ(SmplParams::from_flat(flat), p);
  EXPECT_TRUE(p.oversized_rotations().empty());

  p.pose[6] = 7.0;  // joint 2 rotated by more than 2 pi: flagged, not rejected
  EXPECT_EQ(p.oversized_rotations(), std::vector<int>{2});
  EXPECT_NO_THROW(validate_params(p));
  p.shape[0] = std::nan("");
  EXPECT_FALSE(p.all_finite());
  EXPECT_ERROR_KIND(validate_params(p), ErrorKind::NonFiniteResult);
}

TEST(AxisAngle, IsARotationAndMatchesEigen) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    Eigen::Vector3d w(rng.normal(), rng.normal(), rng.normal());
    const Eigen::Matrix3d r = axis_angle_to_matrix(w);
    EXPECT_TRUE((r * r.transpose()).isApprox(Eigen::Matrix3d::Identity(), 1e-12));
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    const Eigen::Matrix3d ref = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
    EXPECT_TRUE(r.isApprox(ref, 1e-12));
  }
  EXPECT_EQ(axis_angle_to_matrix(Eigen::Vector3d::Zero()), Eigen::Matrix3d::Identity());
}

TEST(AxisAngle, JacobianMatchesFiniteDifferenceIncludingSmallAngles) {
  for (double mag : {1.3, 1e-3, 1e-9, 0.0}) {
    Eigen::Vector3d w = Eigen::Vector3d(0.3, -0.5, 0.8).normalized() * mag;
    const auto jac = axis_angle_jacobian(w);
    for (int i = 0; i < 3; ++i) {
      const double h = 1e-6;
      Eigen::Vector3d up = w, down = w;
      up[i] += h;
      down[i] -= h;
      const Eigen::Matrix3d fd = (axis_angle_to_matrix(up) - axis_angle_to_matrix(down)) / (2 * h);
      EXPECT_LT((jac[i] - fd).cwiseAbs().maxCoeff(), 1e-7) << "magnitude " << mag << " axis " << i;
    }
  }
}

TEST(AxisAngle, DifferentiableVariantAgrees) {
  Rng rng(2);
  ad::Graph g;
  Matrix w0 = random_matrix(rng, 1, 3);
  ad::Var w = g.input(w0);
  ad::Var r = axis_angle_to_matrix(w);
  const Eigen::Matrix3d ref = axis_angle_to_matrix(Eigen::Vector3d(w0(0, 0), w0(0, 1), w0(0, 2)));
  EXPECT_TRUE(r.value().isApprox(Matrix(ref), 1e-14));
  Rng wr(3);
  const Matrix weights = random_matrix(wr, 3, 3);
  g.backward(ad::sum(ad::mul(r, g.constant(weights))));
  const Matrix numeric = smplgan::testing::numeric_gradient(
      [&](const Matrix& v) {
        return (axis_angle_to_matrix(Eigen::Vector3d(v(0, 0), v(0, 1), v(0, 2))).array() * weights.array()).sum();
      },
      w0);
  EXPECT_TRUE(g.grad(w).isApprox(numeric, 1e-7));
}

TEST(ToyBody, DeterministicAndValid) {
  const auto a = make_toy_body(60, 5, 0);
  const auto b = make_toy_body(60, 5, 0);
  EXPECT_EQ(a.template_vertices, b.template_vertices);
  EXPECT_EQ(a.faces, b.faces);
  EXPECT_EQ(a.skin_weights, b.skin_weights);
  EXPECT_EQ(a.shape_basis, b.shape_basis);
  EXPECT_EQ(a.joint_regressor, b.joint_regressor);
  EXPECT_EQ(a.num_vertices(), 60);
  EXPECT_EQ(a.num_joints(), 5);
  EXPECT_EQ(a.shape_basis.rows(), 10);
  for (Index i = 0; i < a.num_vertices(); ++i) {
    EXPECT_NEAR(a.skin_weights.row(i).sum(), 1.0, 1e-6);
    EXPECT_GE(a.skin_weights.row(i).minCoeff(), 0.0);
  }
  EXPECT_NO_THROW(validate_assets(a));
}

TEST(ToyBody, RejectsBadSpecs) {
  EXPECT_ERROR_KIND(make_toy_body(60, 30, 0), ErrorKind::InvalidSpec);
  EXPECT_ERROR_KIND(make_toy_body(60, 1, 0), ErrorKind::InvalidSpec);
  EXPECT_ERROR_KIND(make_toy_body(10, 5, 0), ErrorKind::InvalidSpec);
}

TEST(Assets, FileRoundTrip) {
  TempDir dir;
  const auto a = make_toy_body(80, 8, 3);
  save_body_assets(dir / "body.bin", a);
  const auto b = load_body_assets(dir / "body.bin");
  EXPECT_EQ(b.num_vertices(), 80);
  EXPECT_EQ(a.template_vertices, b.template_vertices);
  EXPECT_EQ(a.faces, b.faces);
  EXPECT_EQ(a.parents, b.parents);
  EXPECT_EQ(a.shape_basis, b.shape_basis);
  EXPECT_ERROR_KIND(load_body_assets(dir / "absent.bin"), ErrorKind::MissingAsset);
}

TEST(Assets, ValidationNamesInvariants) {
  const auto good = make_toy_body(60, 5, 0);
  auto a = good;
  a.skin_weights.row(7) *= 0.5;
  EXPECT_ERROR_KIND(validate_assets(a), ErrorKind::MalformedAsset);
  a = good;
  a.faces(0, 1) = 60;
  EXPECT_ERROR_KIND(validate_assets(a), ErrorKind::MalformedAsset);
  a = good;
  a.parents[1] = 4;  // 4's parent is 1

  EXPECT_ERROR_KIND(validate_assets(a), ErrorKind::MalformedAsset);
  a = good;
  a.parents[3] = -1;  // second root
  EXPECT_ERROR_KIND(validate_assets(a), ErrorKind::MalformedAsset);
  a = good;
  a.shape_basis = Matrix::Zero(10, 5);
  EXPECT_ERROR_KIND(validate_assets(a), ErrorKind::MalformedAsset);
}

TEST(Assets, MalformedFileIsRejected) {
  TempDir dir;
  auto a = make_toy_body(60, 5, 0);
  save_body_assets(dir / "body.bin", a);
  // The writer validates, so the broken file is patched at the container level.
  ArrayFile file = read_array_file(dir / "body.bin", "body-assets", ErrorKind::MissingAsset, ErrorKind::MalformedAsset);
  file.reals["skin_weights"].row(0) *= 0.5;
  write_array_file(dir / "bad.bin", file);
  EXPECT_ERROR_KIND(load_body_assets(dir / "bad.bin"), ErrorKind::MalformedAsset);
  a.skin_weights.row(0) *= 0.5;
  EXPECT_ERROR_KIND(save_body_assets(dir / "bad2.bin", a), ErrorKind::MalformedAsset);

  write_file_bytes(dir / "junk.bin", "not an asset file");
  EXPECT_ERROR_KIND(load_body_assets(dir / "junk.bin"), ErrorKind::MalformedAsset);
}

TEST(Forward, RestPoseIsTemplate) {
  const auto a = make_toy_body(120, 10, 0);
  SmplParams p;
  p.camera = {0.5, 0.3, 0.2};  // ignored by the body model
  const BodyMesh mesh = smpl_forward(p, a);
  EXPECT_LE((mesh.vertices - a.template_vertices).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(mesh.faces, &a.faces);
}

TEST(Forward, ShapeIsLinearAtRest) {
  const auto a = make_toy_body(120, 10, 0);
  SmplParams p;
  p.shape[0] = 1.0;
  EXPECT_LE((smpl_forward(p, a).vertices - (a.template_vertices + reshape_basis_row(a, 0))).cwiseAbs().maxCoeff(),
            1e-12);
  Rng rng(4);
  SmplParams q;
  Matrix expect = a.template_vertices;
  for (int k = 0; k < kShapeDim; ++k) {
    q.shape[k] = rng.normal();
    expect += q.shape[k] * reshape_basis_row(a, k);
  }
  EXPECT_LE((smpl_forward(q, a).vertices - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, RootRotationIsRigidAboutRootJoint) {
  const auto a = make_toy_body(120, 10, 0);
  const Eigen::RowVector3d root = a.joint_regressor.row(0) * a.template_vertices;
  Rng rng(5);
  for (int t = 0; t < 5; ++t) {
    SmplParams p;
    const Eigen::Vector3d w(rng.normal(), rng.normal(), rng.normal());
    for (int i = 0; i < 3; ++i) p.pose[i] = w[i];
    const Eigen::Matrix3d q = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
    const Matrix v = smpl_forward(p, a).vertices;
    for (Index i = 0; i < v.rows(); ++i) {
      const Eigen::Vector3d rest = (a.template_vertices.row(i) - root).transpose();
      const Eigen::Vector3d expect = q * rest + root.transpose();
      EXPECT_LE((v.row(i).transpose() - expect).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(Forward, NonFinitePoseIsReported) {
  const auto a = make_toy_body(60, 5, 0);
  SmplParams p;
  p.pose[4] = std::numeric_limits<double>::infinity();
  EXPECT_ERROR_KIND(smpl_forward(p, a), ErrorKind::NonFiniteResult);
}

TEST(Forward, ExtraJointsAreIgnored) {
  const auto a = make_toy_body(60, 5, 0);
  SmplParams p;
  p.pose[3 * 20] = 1.0;
  EXPECT_LE((smpl_forward(p, a).vertices - a.template_vertices).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, DifferentiableVariantMatchesAndHasCorrectGradients) {
  const auto a = make_toy_body(120, 10, 0);
  Rng rng(6);
  const Matrix weights = random_matrix(rng, a.num_vertices(), 3);
  int checked = 0, agreed = 0;
  for (int draw = 0; draw < 3; ++draw) {
    Matrix pose = random_matrix(rng, 1, kPoseDim, 0.4);
    Matrix shape = random_matrix(rng, 1, kShapeDim, 0.5);
    ad::Graph g;
    ad::Var pv = g.input(pose), sv = g.input(shape);
    ad::Var verts = smpl_vertices(g, pv, sv, a);
    auto to_params = [](const Matrix& po, const Matrix& sh) {
      SmplParams p;
      for (int i = 0; i < kPoseDim; ++i) p.pose[i] = po(0, i);
      for (int i = 0; i < kShapeDim; ++i) p.shape[i] = sh(0, i);
      return p;
    };
    EXPECT_LE((verts.value() - smpl_forward(to_params(pose, shape), a).vertices).cwiseAbs().maxCoeff(), 1e-12);
    g.backward(ad::sum(ad::mul(verts, g.constant(weights))));
    auto functional = [&](const Matrix& po, const Matrix& sh) {
      return smpl_forward(to_params(po, sh), a).vertices.cwiseProduct(weights).sum();
    };
    const double h = 1e-4;
    for (int i = 0; i < 3 * a.num_joints(); ++i) {
      Matrix up = pose, down = pose;
      up(0, i) += h;
      down(0, i) -= h;
      const double fd = (functional(up, shape) - functional(down, shape)) / (2 * h);
      ++checked;
      agreed += smplgan::testing::rel_error(g.grad(pv)(0, i), fd, 1e-6) < 1e-3;
    }
    for (int i = 0; i < kShapeDim; ++i) {
      Matrix up = shape, down = shape;
      up(0, i) += h;
      down(0, i) -= h;
      const double fd = (functional(pose, up) - functional(pose, down)) / (2 * h);
      ++checked;
      agreed += smplgan::testing::rel_error(g.grad(sv)(0, i), fd, 1e-6) < 1e-3;
    }
    for (int i = 3 * a.num_joints(); i < kPoseDim; ++i) EXPECT_EQ(g.grad(pv)(0, i), 0.0);
  }
  EXPECT_GE(agreed, static_cast<int>(0.95 * checked)) << agreed << " of " << checked;
}
