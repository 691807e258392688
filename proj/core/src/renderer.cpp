#include "smplgan/renderer.hpp"

#include "smplgan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smplgan {

Matrix background_row(int resolution) {
  const Index plane = static_cast<Index>(resolution) * resolution;
  Matrix row(1, 3 * plane);
  for (int c = 0; c < 3; ++c) row.middleCols(c * plane, plane).setConstant(kBackground[c]);
  return row;
}

RenderedMap background_map(int resolution) { return {resolution, background_row(resolution)}; }

Projection project_weak_perspective(const Matrix& vertices, const CameraParams& camera) {
  check(vertices.allFinite() && std::isfinite(camera.scale) && std::isfinite(camera.tx) && std::isfinite(camera.ty),
        ErrorKind::NonFiniteResult, "projection input is non-finite");
  Projection p;
  p.points.resize(vertices.rows(), 2);
  p.points.col(0) = camera.scale * (vertices.col(0).array() + camera.tx);
  p.points.col(1) = camera.scale * (vertices.col(1).array() + camera.ty);
  p.depth = vertices.col(2);
  return p;
}

namespace {

struct FaceData {
  Index v[3];
  double p[3][2];
  double line[3][3];  // oriented unit edge lines: n_x, n_y, offset
  double edge[3][3];  // b - a per edge and 1 / |b - a|^2
  double orientation;  // +1 or -1
  double z;
  double attr[2];
  bool attr_clamped[2];
};

enum class Nearest { Line, Corner };

struct Hit {
  int face;
  double sd;
  Nearest kind;
  int slot;  // edge index for Line, vertex slot for Corner
  double coverage;
  double weight;
};

class Rasterizer {
 public:
  Rasterizer(const Matrix& screen, const Matrix& vertices, const IndexMatrix& faces, const RenderConfig& cfg)
      : cfg_(cfg), res_(cfg.resolution) {
    check(res_ >= 8, ErrorKind::InvalidSpec, "render resolution must be at least 8");
    check(screen.allFinite() && vertices.allFinite(), ErrorKind::NonFiniteResult, "render input is non-finite");
    tiles_ = (res_ + kTile - 1) / kTile;
    bins_.assign(static_cast<std::size_t>(tiles_ * tiles_), {});
    const double margin = cfg_.cutoff / cfg_.tau;
    for (Index f = 0; f < faces.rows(); ++f) {
      FaceData d{};
      double z = 0.0, y = 0.0;
      for (int k = 0; k < 3; ++k) {
        d.v[k] = faces(f, k);
        d.p[k][0] = screen(d.v[k], 0);
        d.p[k][1] = screen(d.v[k], 1);
        z += vertices(d.v[k], 2);
        y += vertices(d.v[k], 1);
      }
      const double cross = (d.p[1][0] - d.p[0][0]) * (d.p[2][1] - d.p[0][1]) -
                           (d.p[1][1] - d.p[0][1]) * (d.p[2][0] - d.p[0][0]);
      if (std::abs(cross) < 1e-14) continue;
      d.orientation = cross > 0 ? 1.0 : -1.0;
      for (int k = 0; k < 3; ++k) {
        const double* a = d.p[k];
        const double* b = d.p[(k + 1) % 3];
        const double ex = b[0] - a[0], ey = b[1] - a[1];
        d.edge[k][0] = ex;
        d.edge[k][1] = ey;
        d.edge[k][2] = 1.0 / (ex * ex + ey * ey);
        const double inv = d.orientation / std::sqrt(ex * ex + ey * ey);
        d.line[k][0] = -ey * inv;
        d.line[k][1] = ex * inv;
        d.line[k][2] = (ey * a[0] - ex * a[1]) * inv;
      }
      d.z = z / 3.0;
      const double raw[2] = {0.5 + d.z / 4.0, 0.5 + (y / 3.0) / 2.0};
      for (int k = 0; k < 2; ++k) {
        d.attr[k] = std::clamp(raw[k], 0.0, 1.0);
        d.attr_clamped[k] = raw[k] < 0.0 || raw[k] > 1.0;
      }
      double lo[2], hi[2];
      for (int a = 0; a < 2; ++a) {
        lo[a] = std::min({d.p[0][a], d.p[1][a], d.p[2][a]}) - margin;
        hi[a] = std::max({d.p[0][a], d.p[1][a], d.p[2][a]}) + margin;
      }
      // Column j has center x = -1 + (2j + 1) / R; row i has y = 1 - (2i + 1) / R.
      const int c0 = std::max(0, static_cast<int>(std::floor((lo[0] + 1.0) * res_ / 2.0 - 0.5)));
      const int c1 = std::min(res_ - 1, static_cast<int>(std::ceil((hi[0] + 1.0) * res_ / 2.0 - 0.5)));
      const int r0 = std::max(0, static_cast<int>(std::floor((1.0 - hi[1]) * res_ / 2.0 - 0.5)));
      const int r1 = std::min(res_ - 1, static_cast<int>(std::ceil((1.0 - lo[1]) * res_ / 2.0 - 0.5)));
      if (c0 > c1 || r0 > r1) continue;
      const int id = static_cast<int>(faces_.size());
      faces_.push_back(d);
      for (int tr = r0 / kTile; tr <= r1 / kTile; ++tr)
        for (int tc = c0 / kTile; tc <= c1 / kTile; ++tc) bins_[static_cast<std::size_t>(tr * tiles_ + tc)].push_back(id);
    }
  }

  Matrix forward() const {
    Matrix out = background_row(res_);
    const Index plane = static_cast<Index>(res_) * res_;
    std::vector<Hit> hits;
    for (int i = 0; i < res_; ++i)
      for (int j = 0; j < res_; ++j) {
        collect(i, j, hits);
        if (hits.empty()) continue;
        double s, a[2];
        shade(hits, s, a);
        const Index idx = static_cast<Index>(i) * res_ + j;
        out(0, idx) = s;
        for (int k = 0; k < 2; ++k) out(0, (k + 1) * plane + idx) = s * a[k] + (1.0 - s) * 0.5;
      }
    return out;
  }

  // Accumulates d(loss)/d(screen) and d(loss)/d(vertices) from the map gradient.
  void backward(const Matrix& grad, Matrix& g_screen, Matrix& g_vertices) const {
    const Index plane = static_cast<Index>(res_) * res_;
    std::vector<Hit> hits;
    std::vector<double> prefix, suffix;
    for (int i = 0; i < res_; ++i)
      for (int j = 0; j < res_; ++j) {
        const Index idx = static_cast<Index>(i) * res_ + j;
        const double g[3] = {grad(0, idx), grad(0, plane + idx), grad(0, 2 * plane + idx)};
        if (g[0] == 0.0 && g[1] == 0.0 && g[2] == 0.0) continue;
        collect(i, j, hits);
        if (hits.empty()) continue;
        double s, a[2];
        const double z_total = shade(hits, s, a);
        const std::size_t m = hits.size();
        prefix.assign(m + 1, 1.0);
        suffix.assign(m + 1, 1.0);
        for (std::size_t h = 0; h < m; ++h) prefix[h + 1] = prefix[h] * (1.0 - hits[h].coverage);
        for (std::size_t h = m; h-- > 0;) suffix[h] = suffix[h + 1] * (1.0 - hits[h].coverage);
        const double px = pixel_x(j), py = pixel_y(i);
        for (std::size_t h = 0; h < m; ++h) {
          const Hit& hit = hits[h];
          const FaceData& f = faces_[static_cast<std::size_t>(hit.face)];
          const double others = prefix[h] * suffix[h + 1];
          const double e = hit.weight, c = hit.coverage;
          double gc = g[0] * others;
          double gz = 0.0, gy = 0.0;
          for (int k = 0; k < 2; ++k) {
            const double gk = g[k + 1];
            if (gk == 0.0) continue;
            gc += gk * (others * (a[k] - 0.5) + s * e * (f.attr[k] - a[k]) / z_total);
            const double g_attr = gk * s * c * e / z_total;
            gz += gk * s * c * e * (f.attr[k] - a[k]) / (cfg_.gamma * z_total);
            if (!f.attr_clamped[k]) {
              if (k == 0) gz += g_attr / 4.0;
              else gy += g_attr / 2.0;
            }
          }
          for (int k = 0; k < 3; ++k) {
            g_vertices(f.v[k], 2) += gz / 3.0;
            g_vertices(f.v[k], 1) += gy / 3.0;
          }
          const double gsd = gc * cfg_.tau * c * (1.0 - c);
          if (gsd != 0.0) distance_gradient(f, hit, px, py, gsd, g_screen);
        }
      }
  }

 private:
  static constexpr int kTile = 8;

  double pixel_x(int j) const { return -1.0 + (2.0 * j + 1.0) / res_; }
  double pixel_y(int i) const { return 1.0 - (2.0 * i + 1.0) / res_; }

  void collect(int i, int j, std::vector<Hit>& hits) const {
    hits.clear();
    const double px = pixel_x(j), py = pixel_y(i);
    const double reach = -cfg_.cutoff / cfg_.tau;
    for (int id : bins_[static_cast<std::size_t>((i / kTile) * tiles_ + j / kTile)]) {
      const FaceData& f = faces_[static_cast<std::size_t>(id)];
      // the distance to a triangle is at least the distance to any edge line it lies outside of
      double lower = 0.0;
      for (int k = 0; k < 3; ++k) lower = std::min(lower, f.line[k][0] * px + f.line[k][1] * py + f.line[k][2]);
      if (lower <= reach) continue;
      Hit h = signed_distance(f, px, py);
      if (cfg_.tau * h.sd <= -cfg_.cutoff) continue;
      h.face = id;
      h.coverage = 1.0 / (1.0 + std::exp(-cfg_.tau * h.sd));
      hits.push_back(h);
    }
  }

  // Returns the attribute normalizer Z; fills silhouette and blended attributes.
  double shade(std::vector<Hit>& hits, double& s, double a[2]) const {
    double zmax = -std::numeric_limits<double>::infinity();
    for (const Hit& h : hits) zmax = std::max(zmax, faces_[static_cast<std::size_t>(h.face)].z);
    double empty = 1.0, z_total = 0.0, acc[2] = {0.0, 0.0};
    for (Hit& h : hits) {
      const FaceData& f = faces_[static_cast<std::size_t>(h.face)];
      empty *= 1.0 - h.coverage;
      h.weight = std::exp((f.z - zmax) / cfg_.gamma);
      const double w = h.coverage * h.weight;
      z_total += w;
      acc[0] += w * f.attr[0];
      acc[1] += w * f.attr[1];
    }
    s = 1.0 - empty;
    a[0] = acc[0] / z_total;
    a[1] = acc[1] / z_total;
    return z_total;
  }

  static Hit signed_distance(const FaceData& f, double px, double py) {
    double line[3];
    bool inside = true;
    for (int k = 0; k < 3; ++k) {
      line[k] = f.line[k][0] * px + f.line[k][1] * py + f.line[k][2];
      if (line[k] < 0.0) inside = false;
    }
    Hit h{};
    if (inside) {
      int best = 0;
      for (int k = 1; k < 3; ++k)
        if (line[k] < line[best]) best = k;
      h.sd = line[best];
      h.kind = Nearest::Line;
      h.slot = best;
      return h;
    }
    double best = std::numeric_limits<double>::infinity();  // squared distance
    static constexpr int kNext[3] = {1, 2, 0};
    for (int k = 0; k < 3; ++k) {
      const double* a = f.p[k];
      const double ex = f.edge[k][0], ey = f.edge[k][1];
      const double rx = px - a[0], ry = py - a[1];
      const double t = (rx * ex + ry * ey) * f.edge[k][2];
      double d2;
      Nearest kind;
      int slot;
      if (t <= 0.0) {
        d2 = rx * rx + ry * ry, kind = Nearest::Corner, slot = k;
      } else if (t >= 1.0) {
        const double qx = rx - ex, qy = ry - ey;
        d2 = qx * qx + qy * qy, kind = Nearest::Corner, slot = kNext[k];
      } else {
        d2 = line[k] * line[k], kind = Nearest::Line, slot = k;
      }
      if (d2 < best) {
        best = d2;
        h.kind = kind;
        h.slot = slot;
      }
    }
    best = std::sqrt(best);
    h.sd = -best;
    return h;
  }

  static void distance_gradient(const FaceData& f, const Hit& hit, double px, double py, double gsd, Matrix& g) {
    if (hit.kind == Nearest::Corner) {
      const double* q = f.p[hit.slot];
      const double dx = px - q[0], dy = py - q[1];
      const double n = std::sqrt(dx * dx + dy * dy);
      if (n == 0.0) return;
      g(f.v[hit.slot], 0) += gsd * dx / n;
      g(f.v[hit.slot], 1) += gsd * dy / n;
      return;
    }
    // sd = s * cross(e, r) / |e| with e = b - a, r = p - a.
    const int ka = hit.slot, kb = (hit.slot + 1) % 3;
    const double* a = f.p[ka];
    const double* b = f.p[kb];
    const double ex = b[0] - a[0], ey = b[1] - a[1];
    const double rx = px - a[0], ry = py - a[1];
    const double len2 = ex * ex + ey * ey, len = std::sqrt(len2);
    const double cr = ex * ry - ey * rx;
    const double s = f.orientation;
    const double de_x = s * (ry / len - cr * ex / (len2 * len));
    const double de_y = s * (-rx / len - cr * ey / (len2 * len));
    const double dr_x = s * (-ey / len);
    const double dr_y = s * (ex / len);
    g(f.v[ka], 0) += gsd * (-de_x - dr_x);
    g(f.v[ka], 1) += gsd * (-de_y - dr_y);
    g(f.v[kb], 0) += gsd * de_x;
    g(f.v[kb], 1) += gsd * de_y;
  }

  const RenderConfig& cfg_;
  int res_;
  int tiles_ = 0;
  std::vector<FaceData> faces_;
  std::vector<std::vector<int>> bins_;
};

}  // namespace

RenderedMap render_map(const BodyMesh& mesh, const CameraParams& camera, const RenderConfig& cfg) {
  check(mesh.faces != nullptr, ErrorKind::InvalidSpec, "mesh has no topology");
  const Projection proj = project_weak_perspective(mesh.vertices, camera);
  if (!(camera.scale > 0.0)) return background_map(cfg.resolution);
  Rasterizer r(proj.points, mesh.vertices, *mesh.faces, cfg);
  return {cfg.resolution, r.forward()};
}

RenderedMap render_map(const BodyMesh& mesh, const CameraParams& camera, int resolution) {
  RenderConfig cfg;
  cfg.resolution = resolution;
  return render_map(mesh, camera, cfg);
}

RenderedMap render_params(const SmplParams& params, const BodyModelAssets& assets, const RenderConfig& cfg) {
  return render_map(smpl_forward(params, assets), CameraParams::of(params), cfg);
}

ad::Var project_weak_perspective(ad::Var vertices, ad::Var camera) {
  const Matrix& v = vertices.value();
  const Matrix& cam = camera.value();
  const double s = cam(0, 0), tx = cam(0, 1), ty = cam(0, 2);
  Matrix out(v.rows(), 2);
  out.col(0) = s * (v.col(0).array() + tx);
  out.col(1) = s * (v.col(1).array() + ty);
  return vertices.graph().record("project", std::move(out), {vertices, camera}, [vertices, camera](const Matrix& g) {
    ad::Graph& graph = vertices.graph();
    const Matrix& v = vertices.value();
    const Matrix& cam = camera.value();
    const double s = cam(0, 0), tx = cam(0, 1), ty = cam(0, 2);
    if (graph.requires_grad(vertices)) {
      Matrix gv = Matrix::Zero(v.rows(), 3);
      gv.col(0) = s * g.col(0);
      gv.col(1) = s * g.col(1);
      graph.accumulate(vertices, gv);
    }
    if (graph.requires_grad(camera)) {
      Matrix gc(1, 3);
      gc(0, 0) = (g.col(0).array() * (v.col(0).array() + tx)).sum() + (g.col(1).array() * (v.col(1).array() + ty)).sum();
      gc(0, 1) = s * g.col(0).sum();
      gc(0, 2) = s * g.col(1).sum();
      graph.accumulate(camera, gc);
    }
  });
}

ad::Var rasterize(ad::Var screen, ad::Var vertices, const IndexMatrix& faces, const RenderConfig& cfg) {
  Matrix value = Rasterizer(screen.value(), vertices.value(), faces, cfg).forward();
  return screen.graph().record(
      "rasterize", std::move(value), {screen, vertices}, [screen, vertices, &faces, cfg](const Matrix& g) {
        ad::Graph& graph = screen.graph();
        Matrix gs = Matrix::Zero(screen.rows(), 2);
        Matrix gv = Matrix::Zero(vertices.rows(), 3);
        Rasterizer(screen.value(), vertices.value(), faces, cfg).backward(g, gs, gv);
        if (graph.requires_grad(screen)) graph.accumulate(screen, gs);
        if (graph.requires_grad(vertices)) graph.accumulate(vertices, gv);
      });
}

ad::Var render_map(ad::Var vertices, ad::Var camera, const IndexMatrix& faces, const RenderConfig& cfg) {
  check(camera.value().allFinite(), ErrorKind::NonFiniteResult, "camera is non-finite");
  if (!(camera.value()(0, 0) > 0.0)) return vertices.graph().constant(background_row(cfg.resolution));
  return rasterize(project_weak_perspective(vertices, camera), vertices, faces, cfg);
}

ad::Var render_param_rows(ad::Graph& g, ad::Var params, const BodyModelAssets& assets, const RenderConfig& cfg) {
  check(params.cols() == kParamDim, ErrorKind::ShapeMismatch, "parameter rows must have 85 columns");
  std::vector<ad::Var> rows;
  for (Index b = 0; b < params.rows(); ++b) {
    ad::Var row = ad::slice_rows(params, b, 1);
    ad::Var vertices = smpl_vertices(g, ad::slice_cols(row, 0, kPoseDim), ad::slice_cols(row, kPoseDim, kShapeDim), assets);
    rows.push_back(render_map(vertices, ad::slice_cols(row, kPoseDim + kShapeDim, kCameraDim), assets.faces, cfg));
  }
  return ad::concat_rows(rows);
}

RenderedMap composite_by_depth(const std::vector<RenderedMap>& maps) {
  check(!maps.empty(), ErrorKind::EmptySet, "nothing to composite");
  const int res = maps.front().resolution;
  const Index plane = static_cast<Index>(res) * res;
  RenderedMap out = background_map(res);
  for (Index idx = 0; idx < plane; ++idx) {
    int best = -1;
    double best_depth = -1.0, best_sil = 0.0;
    for (std::size_t m = 0; m < maps.size(); ++m) {
      check(maps[m].resolution == res, ErrorKind::ShapeMismatch, "composited maps differ in resolution");
      const double sil = maps[m].pixels(0, idx);
      const double depth = maps[m].pixels(0, plane + idx);
      if (sil > 0.5 && depth > best_depth) {
        best = static_cast<int>(m), best_depth = depth;
      } else if (best_depth < 0.0 && sil > best_sil) {
        best_sil = sil;
        out.pixels(0, idx) = sil;
        out.pixels(0, plane + idx) = maps[m].pixels(0, plane + idx);
        out.pixels(0, 2 * plane + idx) = maps[m].pixels(0, 2 * plane + idx);
      }
    }
    if (best >= 0)
      for (int c = 0; c < 3; ++c) out.pixels(0, c * plane + idx) = maps[static_cast<std::size_t>(best)].pixels(0, c * plane + idx);
  }
  return out;
}

}  // namespace smplgan
