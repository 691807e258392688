#include "smplgan/nn.hpp"

#include "smplgan/errors.hpp"
#include "smplgan/hashing.hpp"

#include <cmath>

namespace smplgan::nn {

Parameter& ParameterSet::create(const std::string& name, Index rows, Index cols) {
  for (const auto& p : params_) {
    if (p->name == name) throw std::logic_error("duplicate parameter " + name);
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Matrix::Zero(rows, cols);
  p->grad = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

void ParameterSet::zero_grad() {
  for (const auto& p : params_) p->zero_grad();
}

void ParameterSet::freeze_in(Graph& g) const {
  for (const auto& p : params_) g.freeze(*p);
}

double ParameterSet::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_) s += p->grad.squaredNorm();
  return std::sqrt(s);
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

std::map<std::string, Matrix> ParameterSet::snapshot() const {
  std::map<std::string, Matrix> out;
  for (const auto& p : params_) out.emplace(p->name, p->value);
  return out;
}

void ParameterSet::restore(const std::map<std::string, Matrix>& values, const std::string& prefix) {
  for (const auto& p : params_) {
    const auto it = values.find(prefix + p->name);
    check(it != values.end(), ErrorKind::MalformedAsset, "checkpoint lacks parameter " + prefix + p->name);
    check(it->second.rows() == p->value.rows() && it->second.cols() == p->value.cols(), ErrorKind::MalformedAsset,
          "parameter " + prefix + p->name + " has shape " + std::to_string(it->second.rows()) + "x" +
              std::to_string(it->second.cols()) + ", expected " + std::to_string(p->value.rows()) + "x" +
              std::to_string(p->value.cols()));
    p->value = it->second;
  }
}

std::string ParameterSet::digest() const {
  Fnv1a h;
  for (const auto& p : params_) {
    h.update(p->name);
    h.update_pod(static_cast<std::int64_t>(p->value.rows()));
    h.update_pod(static_cast<std::int64_t>(p->value.cols()));
    h.update(std::as_bytes(std::span(p->value.data(), static_cast<std::size_t>(p->value.size()))));
  }
  return h.hex();
}

void glorot_uniform(Parameter& p, Rng& rng, double gain) {
  const double fan = static_cast<double>(p.value.rows() + p.value.cols());
  const double limit = gain * std::sqrt(6.0 / fan);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-limit, limit);
}

Linear Linear::create(ParameterSet& set, const std::string& name, Index in, Index out, Rng& rng, double gain) {
  Linear l;
  l.weight = &set.create(name + ".weight", in, out);
  l.bias = &set.create(name + ".bias", 1, out);
  glorot_uniform(*l.weight, rng, gain);
  return l;
}

Var Linear::operator()(Graph& g, Var x) const {
  return ad::add_bias(ad::matmul(x, g.param(*weight)), g.param(*bias));
}

LstmStack::LstmStack(ParameterSet& set, const std::string& name, Index input_size, Index hidden, int layers,
                     Rng& rng)
    : hidden_(hidden) {
  Index in = input_size;
  for (int l = 0; l < layers; ++l) {
    Linear gate = Linear::create(set, name + ".layer" + std::to_string(l), in + hidden, 4 * hidden, rng);
    gate.bias->value.middleCols(hidden, hidden).setOnes();  // forget gate
    gates_.push_back(gate);
    in = hidden;
  }
}

LstmState LstmStack::zero_state(Graph& g, Index batch) const {
  LstmState s;
  for (std::size_t l = 0; l < gates_.size(); ++l) {
    s.h.push_back(g.constant(Matrix::Zero(batch, hidden_)));
    s.c.push_back(g.constant(Matrix::Zero(batch, hidden_)));
  }
  return s;
}

namespace {

// Standard LSTM cell update from pre-activation gates laid out as
// [input | forget | cell | output] blocks of `width` columns.
void lstm_update(Var gates, Index width, Var& h, Var& c) {
  Var i = ad::sigmoid(ad::slice_cols(gates, 0, width));
  Var f = ad::sigmoid(ad::slice_cols(gates, width, width));
  Var cell = ad::tanh(ad::slice_cols(gates, 2 * width, width));
  Var o = ad::sigmoid(ad::slice_cols(gates, 3 * width, width));
  c = ad::add(ad::mul(f, c), ad::mul(i, cell));
  h = ad::mul(o, ad::tanh(c));
}

}  // namespace

Var LstmStack::step(Graph& g, Var input, LstmState& state) const {
  Var x = input;
  for (std::size_t l = 0; l < gates_.size(); ++l) {
    Var gates = gates_[l](g, ad::concat_cols({x, state.h[l]}));
    lstm_update(gates, hidden_, state.h[l], state.c[l]);
    x = state.h[l];
  }
  return x;
}

Conv2d Conv2d::create(ParameterSet& set, const std::string& name, const ad::ConvGeometry& geometry,
                      Index out_channels, bool with_bias, Rng& rng) {
  Conv2d c;
  c.geometry = geometry;
  const Index k = geometry.kernel;
  c.weight = &set.create(name + ".weight", out_channels, geometry.in_channels * k * k);
  // Glorot on the receptive-field fan rather than the matrix shape.
  const double fan = static_cast<double>((geometry.in_channels + out_channels) * k * k);
  const double limit = std::sqrt(6.0 / fan);
  for (Index i = 0; i < c.weight->value.size(); ++i) c.weight->value.data()[i] = rng.uniform(-limit, limit);
  if (with_bias) c.bias = &set.create(name + ".bias", 1, out_channels);
  return c;
}

Var Conv2d::operator()(Graph& g, Var x) const {
  return ad::conv2d(x, g.param(*weight), bias ? g.param(*bias) : Var(), geometry);
}

ConvLstmStack::ConvLstmStack(ParameterSet& set, const std::string& name, std::vector<ConvLstmLayerShape> shapes,
                             Rng& rng)
    : shapes_(std::move(shapes)) {
  for (std::size_t l = 0; l < shapes_.size(); ++l) {
    const auto& s = shapes_[l];
    const std::string prefix = name + ".layer" + std::to_string(l);
    ad::ConvGeometry in_geo{s.in_channels, s.in_size, s.in_size, 3, 2, 1};
    ad::ConvGeometry h_geo{s.hidden_channels, s.out_size(), s.out_size(), 3, 1, 1};
    Conv2d in_conv = Conv2d::create(set, prefix + ".input", in_geo, 4 * s.hidden_channels, true, rng);
    in_conv.bias->value.middleCols(s.hidden_channels, s.hidden_channels).setOnes();
    input_gates_.push_back(in_conv);
    hidden_gates_.push_back(Conv2d::create(set, prefix + ".hidden", h_geo, 4 * s.hidden_channels, false, rng));
    if (l + 1 < shapes_.size()) {
      if (shapes_[l + 1].in_channels != s.hidden_channels || shapes_[l + 1].in_size != s.out_size()) {
        throw std::logic_error("ConvLstmStack: layer shapes do not chain");
      }
    }
  }
}

LstmState ConvLstmStack::zero_state(Graph& g, Index batch) const {
  LstmState st;
  for (const auto& s : shapes_) {
    const Index n = s.hidden_channels * s.out_size() * s.out_size();
    st.h.push_back(g.constant(Matrix::Zero(batch, n)));
    st.c.push_back(g.constant(Matrix::Zero(batch, n)));
  }
  return st;
}

Var ConvLstmStack::step(Graph& g, Var input, LstmState& state) const {
  Var x = input;
  for (std::size_t l = 0; l < shapes_.size(); ++l) {
    const auto& s = shapes_[l];
    Var gates = ad::add(input_gates_[l](g, x), hidden_gates_[l](g, state.h[l]));
    lstm_update(gates, s.hidden_channels * s.out_size() * s.out_size(), state.h[l], state.c[l]);
    x = state.h[l];
  }
  return x;
}

Index ConvLstmStack::output_size() const {
  const auto& s = shapes_.back();
  return s.hidden_channels * s.out_size() * s.out_size();
}

RmsProp::RmsProp(ParameterSet& set, double learning_rate, double decay, double epsilon)
    : set_(&set), lr_(learning_rate), decay_(decay), eps_(epsilon) {
  for (const auto& p : set.params()) mean_square_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
}

void RmsProp::step(double clip_norm) {
  double factor = 1.0;
  if (clip_norm > 0.0) {
    const double norm = set_->grad_norm();
    if (norm > clip_norm) factor = clip_norm / norm;
  }
  const auto& params = set_->params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    const Matrix g = p.grad * factor;
    mean_square_[i] = decay_ * mean_square_[i] + (1.0 - decay_) * g.cwiseProduct(g);
    p.value.array() -= lr_ * g.array() / (mean_square_[i].array().sqrt() + eps_);
  }
}

}  // namespace smplgan::nn
