#pragma once

#include "smplgan/body_model.hpp"
#include "smplgan/dataset.hpp"
#include "smplgan/renderer.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace smplgan {

enum class Space { Param, Uv };

struct RenderContext {
  const BodyModelAssets* assets = nullptr;
  RenderConfig render;
};

// Param: Euclidean distance of the 85-vectors. Uv: Frobenius distance of the
// two rendered maps (requires a render context).
double pairwise_cost(const SmplParams& a, const SmplParams& b, Space space, const RenderContext* ctx = nullptr);

struct Matching {
  std::vector<std::pair<int, int>> pairs;  // (index in A, index in B)
  std::vector<int> unmatched_a;
  std::vector<int> unmatched_b;
  double cost = 0.0;  // matched costs plus penalties of unmatched elements
};

// Optimal matching from a cost matrix plus per-element penalties charged when
// an element stays unmatched (only the larger side has unmatched elements).
Matching match_costs(const Matrix& cost, const Eigen::VectorXd& penalty_a, const Eigen::VectorXd& penalty_b);

// Unmatched elements cost their distance to the zero vector (param) or to
// the background map (uv). Throws EmptySet.
Matching match_sets(const ShapeSet& a, const ShapeSet& b, Space space, const RenderContext* ctx = nullptr);

struct SampleMetrics {
  std::string caption_id;
  double d_gt_param = 0.0, d_nn_param = 0.0, d_t_pnn_param = 0.0;
  int nn_param = -1;
  double d_gt_uv = 0.0, d_nn_uv = 0.0, d_t_pnn_uv = 0.0;
  int nn_uv = -1;
};

struct SetMetrics {
  double d_nn_param = 0.0, d_gt_param = 0.0, d_t_pnn_param = 0.0;
  double d_nn_uv = 0.0, d_gt_uv = 0.0, d_t_pnn_uv = 0.0;
  double d_t_all = 0.0;
  bool has_uv = false;
  int sample_n = 0;
  std::vector<SampleMetrics> per_sample;
};

// Seeded subset of `samples` of size min(sample_n, |samples|), in drawn order.
std::vector<const Sample*> subsample(const std::vector<const Sample*>& samples, int sample_n, std::uint64_t seed);

// Mean pairwise text distance over all pairs of the pool (0 for one caption).
double mean_pairwise_text_distance(const std::vector<const Sample*>& pool);

// generated[i] belongs to pool[i]; the pool is also the nearest-neighbour
// candidate set. UV metrics are computed when ctx is non-null.
SetMetrics eval_metrics(const std::vector<ShapeSet>& generated, const std::vector<const Sample*>& pool,
                        const RenderContext* ctx);

nlohmann::json to_json(const SetMetrics& m, bool include_per_sample = false);

// Two tables (parameter space, UV space) with one row per labelled result.
std::string format_metrics_tables(const std::vector<std::pair<std::string, SetMetrics>>& rows);

}  // namespace smplgan
