#include "smplgan/body_model.hpp"
#include "smplgan/errors.hpp"
#include "smplgan/rng.hpp"

#include <cmath>
#include <numbers>

namespace smplgan {

namespace {

constexpr int kParents[kMaxJoints] = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};

constexpr double kRest[kMaxJoints][3] = {
    {0, 0, 0},         {0.08, -0.09, 0},    {-0.08, -0.09, 0},     {0, 0.11, 0},
    {0.10, -0.47, 0},  {-0.10, -0.47, 0},   {0, 0.24, 0},          {0.10, -0.87, -0.02},
    {-0.10, -0.87, -0.02}, {0, 0.30, 0},    {0.11, -0.93, 0.10},   {-0.11, -0.93, 0.10},
    {0, 0.52, 0},      {0.07, 0.43, 0},     {-0.07, 0.43, 0},      {0, 0.60, 0.03},
    {0.18, 0.47, 0},   {-0.18, 0.47, 0},    {0.43, 0.47, 0},       {-0.43, 0.47, 0},
    {0.68, 0.47, 0},   {-0.68, 0.47, 0},    {0.76, 0.47, 0},       {-0.76, 0.47, 0},
};

// Segment end for each joint: a joint index, or -1 for a fixed leaf offset.
constexpr int kTip[kMaxJoints] = {3, 4, 5, 6, 7, 8, 9, 10, 11, 12, -1, -1, 15, 16, 17, -1, 18, 19, 20, 21, 22, 23, -1, -1};

constexpr double kRadius[kMaxJoints] = {0.10, 0.07, 0.07, 0.10, 0.05, 0.05, 0.11, 0.04, 0.04, 0.11, 0.035, 0.035,
                                        0.05, 0.05, 0.05, 0.09, 0.045, 0.045, 0.035, 0.035, 0.03, 0.03, 0.03, 0.03};

Eigen::Vector3d rest(int j) { return {kRest[j][0], kRest[j][1], kRest[j][2]}; }

Eigen::Vector3d leaf_offset(int j) {
  switch (j) {
    case 10:
    case 11: return {0, -0.02, 0.10};
    case 15: return {0, 0.18, 0};
    case 22: return {0.08, 0, 0};
    case 23: return {-0.08, 0, 0};
    default: return {0, 0.05, 0};
  }
}

bool is_leg(int j) { return j == 1 || j == 2 || j == 4 || j == 5 || j == 7 || j == 8 || j == 10 || j == 11; }

}  // namespace

BodyModelAssets make_toy_body(Index num_vertices, int num_joints, std::uint64_t seed) {
  check(num_joints >= 2 && num_joints <= kMaxJoints, ErrorKind::InvalidSpec,
        "toy body joint count must be in [2, 24], got " + std::to_string(num_joints));
  check(num_vertices >= 4 * num_joints, ErrorKind::InvalidSpec,
        "toy body needs at least 4 vertices per joint (" + std::to_string(4 * num_joints) + "), got " +
            std::to_string(num_vertices));

  const Index rings_total = num_vertices / 4;
  const Index apexes = num_vertices % 4;

  BodyModelAssets a;
  a.parents.assign(kParents, kParents + num_joints);
  a.template_vertices = Matrix::Zero(num_vertices, 3);
  a.skin_weights = Matrix::Zero(num_vertices, num_joints);
  a.joint_regressor = Matrix::Zero(num_joints, num_vertices);
  std::vector<std::array<Index, 3>> faces;
  std::vector<int> owner(static_cast<std::size_t>(num_vertices));
  std::vector<Eigen::Vector3d> radial(static_cast<std::size_t>(num_vertices), Eigen::Vector3d::Zero());

  Index next = 0;
  for (int j = 0; j < num_joints; ++j) {
    const Index rings = rings_total / num_joints + (j < rings_total % num_joints ? 1 : 0);
    const bool apex = j < apexes;
    const Eigen::Vector3d start = rest(j);
    const Eigen::Vector3d tip = kTip[j] >= 0 ? rest(kTip[j]) : Eigen::Vector3d(start + leaf_offset(j));
    const Eigen::Vector3d axis = (tip - start).normalized();
    const Eigen::Vector3d helper = std::abs(axis.z()) > 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitZ();
    const Eigen::Vector3d u = axis.cross(helper).normalized();
    const Eigen::Vector3d w = axis.cross(u);
    const double radius = kRadius[j];
    const int parent = a.parents[static_cast<std::size_t>(j)];

    std::vector<Index> first_of_ring;
    for (Index i = 0; i < rings; ++i) {
      const double f = rings == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(rings - 1);
      const Eigen::Vector3d center = start + f * (tip - start);
      first_of_ring.push_back(next);
      for (int q = 0; q < 4; ++q) {
        const double phi = std::numbers::pi / 4 + q * std::numbers::pi / 2;
        const Eigen::Vector3d off = radius * (std::cos(phi) * u + std::sin(phi) * w);
        a.template_vertices.row(next) = (center + off).transpose();
        radial[static_cast<std::size_t>(next)] = off;
        owner[static_cast<std::size_t>(next)] = j;
        if (parent >= 0 && f < 0.25) {
          const double wp = 0.5 * (1.0 - f / 0.25);
          a.skin_weights(next, parent) = wp;
          a.skin_weights(next, j) = 1.0 - wp;
        } else {
          a.skin_weights(next, j) = 1.0;
        }
        if (i == 0) a.joint_regressor(j, next) = 0.25;
        ++next;
      }
    }
    auto ring = [&](Index i, int q) { return first_of_ring[static_cast<std::size_t>(i)] + (q % 4); };
    for (Index i = 0; i + 1 < rings; ++i) {
      for (int q = 0; q < 4; ++q) {
        faces.push_back({ring(i, q), ring(i, q + 1), ring(i + 1, q + 1)});
        faces.push_back({ring(i, q), ring(i + 1, q + 1), ring(i + 1, q)});
      }
    }
    faces.push_back({ring(0, 0), ring(0, 2), ring(0, 1)});
    faces.push_back({ring(0, 0), ring(0, 3), ring(0, 2)});
    const Index last = rings - 1;
    if (apex) {
      a.template_vertices.row(next) = (tip + 0.5 * radius * axis).transpose();
      owner[static_cast<std::size_t>(next)] = j;
      a.skin_weights(next, j) = 1.0;
      for (int q = 0; q < 4; ++q) faces.push_back({ring(last, q), ring(last, q + 1), next});
      ++next;
    } else if (last > 0) {
      faces.push_back({ring(last, 0), ring(last, 1), ring(last, 2)});
      faces.push_back({ring(last, 0), ring(last, 2), ring(last, 3)});
    }
  }

  a.faces.resize(static_cast<Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f)
    for (int k = 0; k < 3; ++k) a.faces(static_cast<Index>(f), k) = faces[f][static_cast<std::size_t>(k)];

  // Shape directions: global scale, leg length, girth, torso height, arm
  // span, then five seeded smooth fields.
  a.shape_basis = Matrix::Zero(kShapeDim, 3 * num_vertices);
  Rng rng(seed);
  struct Field { Eigen::Vector3d freq[3]; double phase[3]; double amp; };
  std::vector<Field> fields(5);
  for (auto& fld : fields) {
    for (int d = 0; d < 3; ++d) {
      fld.freq[d] = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 3.0;
      fld.phase[d] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    fld.amp = 0.015;
  }
  for (Index v = 0; v < num_vertices; ++v) {
    const Eigen::Vector3d p = a.template_vertices.row(v).transpose();
    const int j = owner[static_cast<std::size_t>(v)];
    auto set = [&](int k, const Eigen::Vector3d& d) {
      for (int c = 0; c < 3; ++c) a.shape_basis(k, 3 * v + c) = d(c);
    };
    set(0, 0.1 * p);
    set(1, is_leg(j) ? Eigen::Vector3d(0, 0.1 * std::min(0.0, p.y() + 0.09), 0) : Eigen::Vector3d::Zero());
    set(2, 0.3 * radial[static_cast<std::size_t>(v)]);
    set(3, Eigen::Vector3d(0, 0.1 * std::max(0.0, p.y()), 0));
    const double reach = std::max(0.0, std::abs(p.x()) - 0.15);
    set(4, Eigen::Vector3d((p.x() > 0 ? 0.1 : -0.1) * reach, 0, 0));
    for (int k = 0; k < 5; ++k) {
      const Field& fld = fields[static_cast<std::size_t>(k)];
      Eigen::Vector3d d;
      for (int c = 0; c < 3; ++c) d(c) = fld.amp * std::sin(fld.freq[c].dot(p) + fld.phase[c]);
      set(5 + k, d);
    }
  }
  validate_assets(a);
  return a;
}

}  // namespace smplgan
