#pragma once

// Tape-based reverse-mode automatic differentiation over row-major matrices.
//
// Every recorded op carries a pullback (vector-Jacobian product) and, for the
// ops used inside the critics, a tangent rule that expresses its
// Jacobian-vector product with further recorded ops. Graph::jvp therefore
// yields a differentiable directional derivative, which is how the Lipschitz
// penalty obtains exact parameter gradients of an input-gradient norm using
// first-order reverse mode only.

#include "smplgan/types.hpp"

#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace smplgan::ad {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Graph;

class Var {
 public:
  Var() = default;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double item() const;
  Graph& graph() const { return *graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

using Pullback = std::function<void(const Matrix& out_grad)>;
using TangentRule = std::function<Var(Var self, std::span<const std::optional<Var>> parent_tangents)>;

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  // Differentiable leaf whose gradient is read back with grad().
  Var input(Matrix value);
  // Leaf bound to parameter storage; one node per parameter per graph. A
  // non-trainable parameter behaves as a constant.
  Var param(Parameter& p, bool trainable = true);
  // Later param() calls for `p` in this graph yield constants.
  void freeze(const Parameter& p) { frozen_.insert(&p); }

  Var record(const char* op, Matrix value, std::vector<Var> parents, Pullback pullback,
             TangentRule tangent = {});

  // Seeds d(root)/d(root) = 1; root must be 1x1.
  void backward(Var root);
  void backward(Var root, const Matrix& seed);

  // Gradient accumulated at `v` by the last backward (zeros if none reached it).
  Matrix grad(Var v) const;
  void accumulate(Var v, const Matrix& g);
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].requires_grad; }

  // Adds node gradients of parameter leaves into Parameter::grad.
  void accumulate_into_parameters();
  void clear_grads();

  // Directional derivative of `output` along the given input directions,
  // recorded as ops so that it can itself be back-propagated.
  Var jvp(Var output, std::span<const std::pair<Var, Matrix>> directions);

  std::size_t size() const { return nodes_.size(); }
  const Matrix& value_of(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

 private:
  struct Node {
    const char* op = "";
    Matrix value;
    Matrix grad;
    std::vector<Var> parents;
    Pullback pullback;
    TangentRule tangent;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  std::unordered_set<const Parameter*> frozen_;
};

inline const Matrix& Var::value() const { return graph_->value_of(id_); }

// ---- ops -------------------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// a (r x c) + bias (1 x c) broadcast over rows.
Var add_bias(Var a, Var bias);
Var scale(Var a, double s);
// alpha * a + beta, elementwise.
Var affine(Var a, double alpha, double beta);
Var sigmoid(Var a);
Var tanh(Var a);
Var leaky_relu(Var a, double slope);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, Index start, Index count);
Var slice_rows(Var a, Index start, Index count);
// Row-major reinterpretation.
Var reshape(Var a, Index rows, Index cols);
Var transpose(Var a);
Var sum(Var a);
Var mean(Var a);
// (B x d) -> (B*n x d), each row repeated n times consecutively.
Var repeat_rows(Var a, Index n);
// Row-wise softmax with entries where mask == 0 forced to weight 0.
Var masked_softmax_rows(Var logits, const Matrix& mask);
// weights (B x n), features (B*n x d) -> (B x d).
Var weighted_row_sum(Var weights, Var features);
// (B x C) -> (B x C*h*w), each channel value broadcast over an h x w plane.
Var tile_spatial(Var a, Index height, Index width);
// Mean cross-entropy of row-wise softmax(logits) against integer labels.
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);
// Forward value `value`, gradient routed to `surrogate` unchanged.
Var straight_through(Var surrogate, const Matrix& value);

struct ConvGeometry {
  Index in_channels = 0;
  Index height = 0;
  Index width = 0;
  Index kernel = 3;
  Index stride = 1;
  Index pad = 1;

  Index out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  Index out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};

// x: (B x C*H*W) channel-major rows; weight: (Cout x C*k*k); bias: (1 x Cout)
// or invalid Var. Output (B x Cout*Ho*Wo).
Var conv2d(Var x, Var weight, Var bias, const ConvGeometry& geometry);

}  // namespace smplgan::ad
