#include "smplgan/evaluation.hpp"

#include "smplgan/errors.hpp"
#include "smplgan/hungarian.hpp"
#include "smplgan/rng.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

namespace smplgan {

namespace {

// Each element of a set as one row: the 85-vector or the flattened map.
struct Embedded {
  std::vector<Matrix> rows;
  Matrix reference;  // what an unmatched element is compared against
};

Embedded embed(const ShapeSet& s, Space space, const RenderContext* ctx) {
  Embedded e;
  if (space == Space::Param) {
    for (const auto& p : s) e.rows.push_back(p.as_row());
    e.reference = Matrix::Zero(1, kParamDim);
  } else {
    check(ctx != nullptr && ctx->assets != nullptr, ErrorKind::InvalidSpec, "uv distances need body assets");
    for (const auto& p : s) e.rows.push_back(render_params(p, *ctx->assets, ctx->render).pixels);
    e.reference = background_row(ctx->render.resolution);
  }
  return e;
}

Matching match_embedded(const Embedded& a, const Embedded& b) {
  check(!a.rows.empty() && !b.rows.empty(), ErrorKind::EmptySet, "cannot match an empty set");
  const auto na = static_cast<Index>(a.rows.size()), nb = static_cast<Index>(b.rows.size());
  Matrix cost(na, nb);
  for (Index i = 0; i < na; ++i)
    for (Index j = 0; j < nb; ++j) cost(i, j) = (a.rows[static_cast<std::size_t>(i)] - b.rows[static_cast<std::size_t>(j)]).norm();
  Eigen::VectorXd pa(na), pb(nb);
  for (Index i = 0; i < na; ++i) pa(i) = (a.rows[static_cast<std::size_t>(i)] - a.reference).norm();
  for (Index j = 0; j < nb; ++j) pb(j) = (b.rows[static_cast<std::size_t>(j)] - b.reference).norm();
  return match_costs(cost, pa, pb);
}

}  // namespace

double pairwise_cost(const SmplParams& a, const SmplParams& b, Space space, const RenderContext* ctx) {
  const Embedded ea = embed({a}, space, ctx), eb = embed({b}, space, ctx);
  return (ea.rows[0] - eb.rows[0]).norm();
}

Matching match_costs(const Matrix& cost, const Eigen::VectorXd& penalty_a, const Eigen::VectorXd& penalty_b) {
  const Index na = cost.rows(), nb = cost.cols();
  check(na > 0 && nb > 0, ErrorKind::EmptySet, "cannot match an empty set");
  check(penalty_a.size() == na && penalty_b.size() == nb, ErrorKind::ShapeMismatch, "penalty vectors disagree with costs");
  const Index n = std::max(na, nb);
  Matrix padded = Matrix::Zero(n, n);
  padded.topLeftCorner(na, nb) = cost;
  for (Index i = 0; i < na; ++i) padded.block(i, nb, 1, n - nb).setConstant(penalty_a(i));
  for (Index j = 0; j < nb; ++j) padded.block(na, j, n - na, 1).setConstant(penalty_b(j));
  const Assignment as = solve_assignment(padded);
  Matching m;
  for (Index i = 0; i < n; ++i) {
    const int j = as.row_to_col[static_cast<std::size_t>(i)];
    if (i < na && j < nb) {
      m.pairs.emplace_back(static_cast<int>(i), j);
      m.cost += cost(i, j);
    } else if (i < na) {
      m.unmatched_a.push_back(static_cast<int>(i));
      m.cost += penalty_a(i);
    } else if (j < nb) {
      m.unmatched_b.push_back(j);
      m.cost += penalty_b(j);
    }
  }
  return m;
}

Matching match_sets(const ShapeSet& a, const ShapeSet& b, Space space, const RenderContext* ctx) {
  check(!a.empty() && !b.empty(), ErrorKind::EmptySet, "cannot match an empty set");
  return match_embedded(embed(a, space, ctx), embed(b, space, ctx));
}

std::vector<const Sample*> subsample(const std::vector<const Sample*>& samples, int sample_n, std::uint64_t seed) {
  check(sample_n >= 1, ErrorKind::ConfigError, "sample_n must be positive");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  std::vector<const Sample*> out;
  for (std::size_t i = 0; i < order.size() && static_cast<int>(out.size()) < sample_n; ++i) out.push_back(samples[order[i]]);
  return out;
}

double mean_pairwise_text_distance(const std::vector<const Sample*>& pool) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      total += text_distance(pool[i]->embedding, pool[j]->embedding);
      ++pairs;
    }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

SetMetrics eval_metrics(const std::vector<ShapeSet>& generated, const std::vector<const Sample*>& pool,
                        const RenderContext* ctx) {
  check(!pool.empty(), ErrorKind::EmptySet, "evaluation pool is empty");
  check(generated.size() == pool.size(), ErrorKind::CardinalityMismatch,
        "need exactly one generated set per evaluated caption");
  const std::size_t n = pool.size();
  SetMetrics out;
  out.sample_n = static_cast<int>(n);
  out.has_uv = ctx != nullptr;
  out.per_sample.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.per_sample[i].caption_id = pool[i]->caption_id;

  auto run_space = [&](Space space, auto&& store) {
    std::vector<Embedded> real, fake;
    for (std::size_t i = 0; i < n; ++i) {
      real.push_back(embed(pool[i]->gt, space, ctx));
      fake.push_back(embed(generated[i], space, ctx));
    }
    double sum_gt = 0.0, sum_nn = 0.0, sum_t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity(), own = 0.0;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double c = match_embedded(fake[i], real[j]).cost;
        if (j == i) own = c;
        if (c < best) best = c, best_j = j;
      }
      const double dt = text_distance(pool[i]->embedding, pool[best_j]->embedding);
      store(out.per_sample[i], own, best, dt, static_cast<int>(best_j));
      sum_gt += own;
      sum_nn += best;
      sum_t += dt;
    }
    const double dn = static_cast<double>(n);
    return std::array<double, 3>{sum_nn / dn, sum_gt / dn, sum_t / dn};
  };

  const auto p = run_space(Space::Param, [](SampleMetrics& s, double gt, double nn, double dt, int j) {
    s.d_gt_param = gt, s.d_nn_param = nn, s.d_t_pnn_param = dt, s.nn_param = j;
  });
  out.d_nn_param = p[0], out.d_gt_param = p[1], out.d_t_pnn_param = p[2];
  if (ctx != nullptr) {
    const auto u = run_space(Space::Uv, [](SampleMetrics& s, double gt, double nn, double dt, int j) {
      s.d_gt_uv = gt, s.d_nn_uv = nn, s.d_t_pnn_uv = dt, s.nn_uv = j;
    });
    out.d_nn_uv = u[0], out.d_gt_uv = u[1], out.d_t_pnn_uv = u[2];
  }
  out.d_t_all = mean_pairwise_text_distance(pool);
  return out;
}

nlohmann::json to_json(const SetMetrics& m, bool include_per_sample) {
  nlohmann::json j = {{"d_nn_param", m.d_nn_param}, {"d_gt_param", m.d_gt_param}, {"d_t_pnn_param", m.d_t_pnn_param},
                      {"d_t_all", m.d_t_all},       {"sample_n", m.sample_n}};
  if (m.has_uv) {
    j["d_nn_uv"] = m.d_nn_uv;
    j["d_gt_uv"] = m.d_gt_uv;
    j["d_t_pnn_uv"] = m.d_t_pnn_uv;
  }
  if (include_per_sample) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : m.per_sample) {
      nlohmann::json r = {{"caption_id", s.caption_id}, {"d_gt_param", s.d_gt_param}, {"d_nn_param", s.d_nn_param},
                          {"nn_param", s.nn_param}};
      if (m.has_uv) {
        r["d_gt_uv"] = s.d_gt_uv;
        r["d_nn_uv"] = s.d_nn_uv;
        r["nn_uv"] = s.nn_uv;
      }
      rows.push_back(std::move(r));
    }
    j["per_sample"] = std::move(rows);
  }
  return j;
}

std::string format_metrics_tables(const std::vector<std::pair<std::string, SetMetrics>>& rows) {
  std::string out;
  char line[256];
  auto table = [&](const char* title, bool uv) {
    out += title;
    out += "\n";
    std::snprintf(line, sizeof line, "%-18s %10s %10s %10s %10s\n", "Method", uv ? "d_nn^r" : "d_nn^p",
                  uv ? "d_gt^r" : "d_gt^p", "d_t_pnn", "d_t_all");
    out += line;
    for (const auto& [label, m] : rows) {
      if (uv && !m.has_uv) continue;
      std::snprintf(line, sizeof line, "%-18s %10.4f %10.4f %10.4f %10.4f\n", label.c_str(),
                    uv ? m.d_nn_uv : m.d_nn_param, uv ? m.d_gt_uv : m.d_gt_param,
                    uv ? m.d_t_pnn_uv : m.d_t_pnn_param, m.d_t_all);
      out += line;
    }
  };
  table("SMPL parameter space", false);
  out += "\n";
  table("UV (rendered map) space", true);
  return out;
}

}  // namespace smplgan
