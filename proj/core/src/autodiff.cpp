#include "smplgan/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace smplgan::ad {

double Var::item() const {
  const Matrix& v = value();
  if (v.size() != 1) throw std::logic_error("Var::item on a non-scalar");
  return v(0, 0);
}

Var Graph::constant(Matrix value) {
  return record("constant", std::move(value), {}, {});
}

Var Graph::input(Matrix value) {
  Var v = record("input", std::move(value), {}, {});
  nodes_.back().requires_grad = true;
  return v;
}

Var Graph::param(Parameter& p, bool trainable) {
  const auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  trainable = trainable && !frozen_.count(&p);
  Var v = record("param", p.value, {}, {});
  nodes_.back().requires_grad = trainable;
  nodes_.back().param = trainable ? &p : nullptr;
  param_nodes_.emplace(&p, v.id());
  return v;
}

Var Graph::record(const char* op, Matrix value, std::vector<Var> parents, Pullback pullback, TangentRule tangent) {
  Node node;
  node.op = op;
  node.value = std::move(value);
  for (const Var& p : parents) {
    assert(&p.graph() == this);
    node.requires_grad = node.requires_grad || nodes_[static_cast<std::size_t>(p.id())].requires_grad;
  }
  if (node.requires_grad) node.pullback = std::move(pullback);
  node.tangent = std::move(tangent);
  node.parents = std::move(parents);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Graph::backward(Var root) {
  if (root.value().size() != 1) throw std::logic_error("backward without seed needs a scalar root");
  backward(root, Matrix::Ones(1, 1));
}

void Graph::backward(Var root, const Matrix& seed) {
  accumulate(root, seed);
  for (int id = root.id(); id >= 0; --id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.requires_grad || node.grad.size() == 0 || !node.pullback) continue;
    node.pullback(node.grad);
  }
}

Matrix Graph::grad(Var v) const {
  const Node& node = nodes_[static_cast<std::size_t>(v.id())];
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Graph::accumulate(Var v, const Matrix& g) {
  Node& node = nodes_[static_cast<std::size_t>(v.id())];
  if (!node.requires_grad) return;
  assert(g.rows() == node.value.rows() && g.cols() == node.value.cols());
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

void Graph::accumulate_into_parameters() {
  for (Node& node : nodes_) {
    if (node.param == nullptr || node.grad.size() == 0) continue;
    Parameter& p = *node.param;
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
    p.grad += node.grad;
  }
}

void Graph::clear_grads() {
  for (Node& node : nodes_) node.grad.resize(0, 0);
}

Var Graph::jvp(Var output, std::span<const std::pair<Var, Matrix>> directions) {
  const auto last = static_cast<std::size_t>(output.id());
  std::vector<std::optional<Var>> tangents(last + 1);
  std::size_t first = last + 1;
  for (const auto& [v, dir] : directions) {
    const auto id = static_cast<std::size_t>(v.id());
    if (id > last) continue;
    if (dir.rows() != v.rows() || dir.cols() != v.cols()) throw std::logic_error("jvp direction shape mismatch");
    tangents[id] = constant(dir);
    first = std::min(first, id);
  }
  std::vector<std::optional<Var>> parent_tangents;
  for (std::size_t id = first + 1; id <= last; ++id) {
    // Copy what we need: recording new nodes below may grow the deque.
    const Node& node = nodes_[id];
    if (node.parents.empty() || tangents[id]) continue;
    parent_tangents.clear();
    bool any = false;
    for (const Var& p : node.parents) {
      parent_tangents.push_back(tangents[static_cast<std::size_t>(p.id())]);
      any = any || parent_tangents.back().has_value();
    }
    if (!any) continue;
    if (!node.tangent) throw std::logic_error(std::string("no tangent rule for op '") + node.op + "'");
    TangentRule rule = node.tangent;
    tangents[id] = rule(Var(this, static_cast<int>(id)), parent_tangents);
  }
  if (!tangents[last]) return constant(Matrix::Zero(output.rows(), output.cols()));
  return *tangents[last];
}

// ---- ops -------------------------------------------------------------------

namespace {

Var zeros_like(Var a) { return a.graph().constant(Matrix::Zero(a.rows(), a.cols())); }

Var tangent_or_zero(const std::optional<Var>& t, Var like) { return t ? *t : zeros_like(like); }

Var sum_terms(const std::vector<Var>& terms) {
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

void require_same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw std::logic_error("vars from different graphs");
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::logic_error(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                           std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                           std::to_string(b.cols()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  if (a.cols() != b.rows()) throw std::logic_error("matmul: inner dimension mismatch");
  Graph& g = a.graph();
  Matrix value = a.value() * b.value();
  return g.record(
      "matmul", std::move(value), {a, b},
      [a, b](const Matrix& grad) {
        Graph& g = a.graph();
        if (g.requires_grad(a)) g.accumulate(a, grad * b.value().transpose());
        if (g.requires_grad(b)) g.accumulate(b, a.value().transpose() * grad);
      },
      [a, b](Var, std::span<const std::optional<Var>> t) {
        std::vector<Var> terms;
        if (t[0]) terms.push_back(matmul(*t[0], b));
        if (t[1]) terms.push_back(matmul(a, *t[1]));
        return sum_terms(terms);
      });
}

Var add(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape(a, b, "add");
  Graph& g = a.graph();
  return g.record(
      "add", a.value() + b.value(), {a, b},
      [a, b](const Matrix& grad) {
        a.graph().accumulate(a, grad);
        a.graph().accumulate(b, grad);
      },
      [](Var, std::span<const std::optional<Var>> t) {
        std::vector<Var> terms;
        for (const auto& ti : t)
          if (ti) terms.push_back(*ti);
        return sum_terms(terms);
      });
}

Var sub(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape(a, b, "sub");
  Graph& g = a.graph();
  return g.record(
      "sub", a.value() - b.value(), {a, b},
      [a, b](const Matrix& grad) {
        a.graph().accumulate(a, grad);
        if (a.graph().requires_grad(b)) a.graph().accumulate(b, -grad);
      },
      [](Var, std::span<const std::optional<Var>> t) {
        if (t[0] && t[1]) return sub(*t[0], *t[1]);
        if (t[0]) return *t[0];
        return scale(*t[1], -1.0);
      });
}

Var mul(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape(a, b, "mul");
  Graph& g = a.graph();
  return g.record(
      "mul", a.value().cwiseProduct(b.value()), {a, b},
      [a, b](const Matrix& grad) {
        Graph& g = a.graph();
        if (g.requires_grad(a)) g.accumulate(a, grad.cwiseProduct(b.value()));
        if (g.requires_grad(b)) g.accumulate(b, grad.cwiseProduct(a.value()));
      },
      [a, b](Var, std::span<const std::optional<Var>> t) {
        std::vector<Var> terms;
        if (t[0]) terms.push_back(mul(*t[0], b));
        if (t[1]) terms.push_back(mul(a, *t[1]));
        return sum_terms(terms);
      });
}

Var add_bias(Var a, Var bias) {
  require_same_graph(a, bias);
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw std::logic_error("add_bias: bias must be 1 x cols");
  Graph& g = a.graph();
  Matrix value = a.value();
  value.rowwise() += bias.value().row(0);
  return g.record(
      "add_bias", std::move(value), {a, bias},
      [a, bias](const Matrix& grad) {
        Graph& g = a.graph();
        g.accumulate(a, grad);
        if (g.requires_grad(bias)) g.accumulate(bias, grad.colwise().sum());
      },
      [a](Var, std::span<const std::optional<Var>> t) {
        if (t[0] && t[1]) return add_bias(*t[0], *t[1]);
        if (t[0]) return *t[0];
        return add_bias(zeros_like(a), *t[1]);
      });
}

Var scale(Var a, double s) {
  return a.graph().record(
      "scale", a.value() * s, {a}, [a, s](const Matrix& grad) { a.graph().accumulate(a, grad * s); },
      [s](Var, std::span<const std::optional<Var>> t) { return scale(*t[0], s); });
}

Var affine(Var a, double alpha, double beta) {
  Matrix value = (a.value().array() * alpha + beta).matrix();
  return a.graph().record(
      "affine", std::move(value), {a}, [a, alpha](const Matrix& grad) { a.graph().accumulate(a, grad * alpha); },
      [alpha](Var, std::span<const std::optional<Var>> t) { return scale(*t[0], alpha); });
}

Var sigmoid(Var a) {
  Matrix value = a.value().unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  Graph& g = a.graph();
  const int self_id = static_cast<int>(g.size());
  return g.record(
      "sigmoid", std::move(value), {a},
      [a, self_id](const Matrix& grad) {
        const Matrix& y = a.graph().value_of(self_id);
        a.graph().accumulate(a, grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
      },
      [](Var self, std::span<const std::optional<Var>> t) {
        return mul(*t[0], mul(self, affine(self, -1.0, 1.0)));
      });
}

Var tanh(Var a) {
  Matrix value = a.value().array().tanh().matrix();
  Graph& g = a.graph();
  const int self_id = static_cast<int>(g.size());
  return g.record(
      "tanh", std::move(value), {a},
      [a, self_id](const Matrix& grad) {
        const Matrix& y = a.graph().value_of(self_id);
        a.graph().accumulate(a, grad.cwiseProduct((1.0 - y.array().square()).matrix()));
      },
      [](Var self, std::span<const std::optional<Var>> t) {
        return mul(*t[0], affine(mul(self, self), -1.0, 1.0));
      });
}

Var leaky_relu(Var a, double slope) {
  Matrix slope_mask = a.value().unaryExpr([slope](double x) { return x > 0 ? 1.0 : slope; });
  Matrix value = a.value().cwiseProduct(slope_mask);
  return a.graph().record(
      "leaky_relu", std::move(value), {a},
      [a, slope_mask](const Matrix& grad) { a.graph().accumulate(a, grad.cwiseProduct(slope_mask)); },
      [slope_mask](Var self, std::span<const std::optional<Var>> t) {
        return mul(*t[0], self.graph().constant(slope_mask));
      });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::logic_error("concat_cols: no parts");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::logic_error("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix value(rows, cols);
  Index at = 0;
  for (const Var& p : parts) {
    value.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return parts.front().graph().record(
      "concat_cols", std::move(value), parts,
      [parts](const Matrix& grad) {
        Index at = 0;
        for (const Var& p : parts) {
          if (p.graph().requires_grad(p)) p.graph().accumulate(p, grad.middleCols(at, p.cols()));
          at += p.cols();
        }
      },
      [parts](Var, std::span<const std::optional<Var>> t) {
        std::vector<Var> pieces;
        for (std::size_t i = 0; i < parts.size(); ++i) pieces.push_back(tangent_or_zero(t[i], parts[i]));
        return concat_cols(pieces);
      });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::logic_error("concat_rows: no parts");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::logic_error("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix value(rows, cols);
  Index at = 0;
  for (const Var& p : parts) {
    value.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return parts.front().graph().record(
      "concat_rows", std::move(value), parts,
      [parts](const Matrix& grad) {
        Index at = 0;
        for (const Var& p : parts) {
          if (p.graph().requires_grad(p)) p.graph().accumulate(p, grad.middleRows(at, p.rows()));
          at += p.rows();
        }
      },
      [parts](Var, std::span<const std::optional<Var>> t) {
        std::vector<Var> pieces;
        for (std::size_t i = 0; i < parts.size(); ++i) pieces.push_back(tangent_or_zero(t[i], parts[i]));
        return concat_rows(pieces);
      });
}

Var slice_cols(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::logic_error("slice_cols out of range");
  return a.graph().record(
      "slice_cols", a.value().middleCols(start, count), {a},
      [a, start, count](const Matrix& grad) {
        Matrix full = Matrix::Zero(a.rows(), a.cols());
        full.middleCols(start, count) = grad;
        a.graph().accumulate(a, full);
      },
      [start, count](Var, std::span<const std::optional<Var>> t) { return slice_cols(*t[0], start, count); });
}

Var slice_rows(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::logic_error("slice_rows out of range");
  return a.graph().record(
      "slice_rows", a.value().middleRows(start, count), {a},
      [a, start, count](const Matrix& grad) {
        Matrix full = Matrix::Zero(a.rows(), a.cols());
        full.middleRows(start, count) = grad;
        a.graph().accumulate(a, full);
      },
      [start, count](Var, std::span<const std::optional<Var>> t) { return slice_rows(*t[0], start, count); });
}

Var reshape(Var a, Index rows, Index cols) {
  if (rows * cols != a.value().size()) throw std::logic_error("reshape: size mismatch");
  Matrix value = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  const Index r0 = a.rows(), c0 = a.cols();
  return a.graph().record(
      "reshape", std::move(value), {a},
      [a, r0, c0](const Matrix& grad) { a.graph().accumulate(a, Eigen::Map<const Matrix>(grad.data(), r0, c0)); },
      [rows, cols](Var, std::span<const std::optional<Var>> t) { return reshape(*t[0], rows, cols); });
}

Var transpose(Var a) {
  return a.graph().record(
      "transpose", a.value().transpose(), {a},
      [a](const Matrix& grad) { a.graph().accumulate(a, grad.transpose()); },
      [](Var, std::span<const std::optional<Var>> t) { return transpose(*t[0]); });
}

Var sum(Var a) {
  Matrix value(1, 1);
  value(0, 0) = a.value().sum();
  return a.graph().record(
      "sum", std::move(value), {a},
      [a](const Matrix& grad) { a.graph().accumulate(a, Matrix::Constant(a.rows(), a.cols(), grad(0, 0))); },
      [](Var, std::span<const std::optional<Var>> t) { return sum(*t[0]); });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var repeat_rows(Var a, Index n) {
  const Index batch = a.rows();
  Matrix value(batch * n, a.cols());
  for (Index b = 0; b < batch; ++b)
    for (Index i = 0; i < n; ++i) value.row(b * n + i) = a.value().row(b);
  return a.graph().record(
      "repeat_rows", std::move(value), {a},
      [a, n, batch](const Matrix& grad) {
        Matrix ga = Matrix::Zero(batch, a.cols());
        for (Index b = 0; b < batch; ++b)
          for (Index i = 0; i < n; ++i) ga.row(b) += grad.row(b * n + i);
        a.graph().accumulate(a, ga);
      },
      [n](Var, std::span<const std::optional<Var>> t) { return repeat_rows(*t[0], n); });
}

Var masked_softmax_rows(Var logits, const Matrix& mask) {
  if (mask.rows() != logits.rows() || mask.cols() != logits.cols()) {
    throw std::logic_error("masked_softmax_rows: mask shape mismatch");
  }
  const Matrix& x = logits.value();
  Matrix value = Matrix::Zero(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < x.cols(); ++c)
      if (mask(r, c) != 0.0) mx = std::max(mx, x(r, c));
    if (!std::isfinite(mx)) throw std::logic_error("masked_softmax_rows: fully masked row");
    double z = 0.0;
    for (Index c = 0; c < x.cols(); ++c) {
      if (mask(r, c) == 0.0) continue;
      value(r, c) = std::exp(x(r, c) - mx);
      z += value(r, c);
    }
    value.row(r) /= z;
  }
  Graph& g = logits.graph();
  const int self_id = static_cast<int>(g.size());
  return g.record("masked_softmax_rows", std::move(value), {logits}, [logits, self_id](const Matrix& grad) {
    const Matrix& y = logits.graph().value_of(self_id);
    Matrix gx(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      const double dot = grad.row(r).dot(y.row(r));
      gx.row(r) = y.row(r).cwiseProduct((grad.row(r).array() - dot).matrix());
    }
    logits.graph().accumulate(logits, gx);
  });
}

Var weighted_row_sum(Var weights, Var features) {
  require_same_graph(weights, features);
  const Index batch = weights.rows(), n = weights.cols(), d = features.cols();
  if (features.rows() != batch * n) throw std::logic_error("weighted_row_sum: features must have B*n rows");
  Matrix value = Matrix::Zero(batch, d);
  for (Index b = 0; b < batch; ++b)
    for (Index i = 0; i < n; ++i) value.row(b) += weights.value()(b, i) * features.value().row(b * n + i);
  return weights.graph().record(
      "weighted_row_sum", std::move(value), {weights, features},
      [weights, features, batch, n](const Matrix& grad) {
        Graph& g = weights.graph();
        if (g.requires_grad(weights)) {
          Matrix gw(batch, n);
          for (Index b = 0; b < batch; ++b)
            for (Index i = 0; i < n; ++i) gw(b, i) = grad.row(b).dot(features.value().row(b * n + i));
          g.accumulate(weights, gw);
        }
        if (g.requires_grad(features)) {
          Matrix gf(batch * n, features.cols());
          for (Index b = 0; b < batch; ++b)
            for (Index i = 0; i < n; ++i) gf.row(b * n + i) = weights.value()(b, i) * grad.row(b);
          g.accumulate(features, gf);
        }
      },
      [weights, features](Var, std::span<const std::optional<Var>> t) {
        std::vector<Var> terms;
        if (t[0]) terms.push_back(weighted_row_sum(*t[0], features));
        if (t[1]) terms.push_back(weighted_row_sum(weights, *t[1]));
        return sum_terms(terms);
      });
}

Var tile_spatial(Var a, Index height, Index width) {
  const Index plane = height * width;
  Matrix value(a.rows(), a.cols() * plane);
  for (Index r = 0; r < a.rows(); ++r)
    for (Index c = 0; c < a.cols(); ++c) value.row(r).segment(c * plane, plane).setConstant(a.value()(r, c));
  return a.graph().record(
      "tile_spatial", std::move(value), {a},
      [a, plane](const Matrix& grad) {
        Matrix ga(a.rows(), a.cols());
        for (Index r = 0; r < a.rows(); ++r)
          for (Index c = 0; c < a.cols(); ++c) ga(r, c) = grad.row(r).segment(c * plane, plane).sum();
        a.graph().accumulate(a, ga);
      },
      [height, width](Var, std::span<const std::optional<Var>> t) { return tile_spatial(*t[0], height, width); });
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
  const Matrix& x = logits.value();
  if (static_cast<Index>(labels.size()) != x.rows()) throw std::logic_error("softmax_cross_entropy: label count");
  Matrix probs(x.rows(), x.cols());
  double loss = 0.0;
  for (Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    const Eigen::ArrayXd e = (x.row(r).array() - mx).exp().transpose();
    const double z = e.sum();
    probs.row(r) = (e / z).matrix().transpose();
    const int label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= x.cols()) throw std::logic_error("softmax_cross_entropy: label out of range");
    loss -= (x(r, label) - mx) - std::log(z);
  }
  const double batch = static_cast<double>(x.rows());
  Matrix value(1, 1);
  value(0, 0) = loss / batch;
  return logits.graph().record("softmax_cross_entropy", std::move(value), {logits},
                               [logits, probs, labels, batch](const Matrix& grad) {
                                 Matrix gx = probs;
                                 for (Index r = 0; r < gx.rows(); ++r) gx(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
                                 logits.graph().accumulate(logits, gx * (grad(0, 0) / batch));
                               });
}

Var straight_through(Var surrogate, const Matrix& value) {
  if (value.rows() != surrogate.rows() || value.cols() != surrogate.cols()) {
    throw std::logic_error("straight_through: shape mismatch");
  }
  return surrogate.graph().record("straight_through", value, {surrogate},
                                  [surrogate](const Matrix& grad) { surrogate.graph().accumulate(surrogate, grad); });
}

// ---- convolution -----------------------------------------------------------

namespace {

void im2col(const double* x, const ConvGeometry& geo, Matrix& cols) {
  const Index k = geo.kernel, ho = geo.out_height(), wo = geo.out_width();
  cols.setZero(geo.in_channels * k * k, ho * wo);
  for (Index c = 0; c < geo.in_channels; ++c)
    for (Index ky = 0; ky < k; ++ky)
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index oy = 0; oy < ho; ++oy) {
          const Index iy = oy * geo.stride - geo.pad + ky;
          if (iy < 0 || iy >= geo.height) continue;
          for (Index ox = 0; ox < wo; ++ox) {
            const Index ix = ox * geo.stride - geo.pad + kx;
            if (ix < 0 || ix >= geo.width) continue;
            cols(row, oy * wo + ox) = x[(c * geo.height + iy) * geo.width + ix];
          }
        }
      }
}

void col2im(const Matrix& cols, const ConvGeometry& geo, double* x) {
  const Index k = geo.kernel, ho = geo.out_height(), wo = geo.out_width();
  for (Index c = 0; c < geo.in_channels; ++c)
    for (Index ky = 0; ky < k; ++ky)
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index oy = 0; oy < ho; ++oy) {
          const Index iy = oy * geo.stride - geo.pad + ky;
          if (iy < 0 || iy >= geo.height) continue;
          for (Index ox = 0; ox < wo; ++ox) {
            const Index ix = ox * geo.stride - geo.pad + kx;
            if (ix < 0 || ix >= geo.width) continue;
            x[(c * geo.height + iy) * geo.width + ix] += cols(row, oy * wo + ox);
          }
        }
      }
}

}  // namespace

Var conv2d(Var x, Var weight, Var bias, const ConvGeometry& geo) {
  require_same_graph(x, weight);
  const Index k = geo.kernel, ho = geo.out_height(), wo = geo.out_width();
  const Index cin = geo.in_channels, cout = weight.rows();
  if (x.cols() != cin * geo.height * geo.width) throw std::logic_error("conv2d: input size mismatch");
  if (weight.cols() != cin * k * k) throw std::logic_error("conv2d: weight size mismatch");
  if (bias.valid() && (bias.rows() != 1 || bias.cols() != cout)) throw std::logic_error("conv2d: bias shape");
  const Index batch = x.rows(), plane = ho * wo;
  Matrix value(batch, cout * plane);
  Matrix cols;
  for (Index b = 0; b < batch; ++b) {
    im2col(x.value().row(b).data(), geo, cols);
    Eigen::Map<Matrix> out(value.row(b).data(), cout, plane);
    out.noalias() = weight.value() * cols;
    if (bias.valid()) out.colwise() += bias.value().row(0).transpose();
  }
  std::vector<Var> parents{x, weight};
  if (bias.valid()) parents.push_back(bias);
  return x.graph().record(
      "conv2d", std::move(value), parents,
      [x, weight, bias, geo, batch, cout, plane](const Matrix& grad) {
        Graph& g = x.graph();
        const bool want_x = g.requires_grad(x), want_w = g.requires_grad(weight);
        const bool want_b = bias.valid() && g.requires_grad(bias);
        Matrix gx = want_x ? Matrix::Zero(batch, x.cols()) : Matrix();
        Matrix gw = want_w ? Matrix::Zero(weight.rows(), weight.cols()) : Matrix();
        Matrix gb = want_b ? Matrix::Zero(1, cout) : Matrix();
        Matrix cols;
        for (Index b = 0; b < batch; ++b) {
          Eigen::Map<const Matrix> gy(grad.row(b).data(), cout, plane);
          if (want_w) {
            im2col(x.value().row(b).data(), geo, cols);
            gw.noalias() += gy * cols.transpose();
          }
          if (want_b) gb += gy.rowwise().sum().transpose();
          if (want_x) {
            Matrix gcols = weight.value().transpose() * gy;
            col2im(gcols, geo, gx.row(b).data());
          }
        }
        if (want_x) g.accumulate(x, gx);
        if (want_w) g.accumulate(weight, gw);
        if (want_b) g.accumulate(bias, gb);
      },
      [x, weight, geo](Var, std::span<const std::optional<Var>> t) {
        if (t.size() > 2 && t[2]) throw std::logic_error("conv2d: bias tangent unsupported");
        std::vector<Var> terms;
        if (t[0]) terms.push_back(conv2d(*t[0], weight, Var(), geo));
        if (t[1]) terms.push_back(conv2d(x, *t[1], Var(), geo));
        return sum_terms(terms);
      });
}

}  // namespace smplgan::ad
