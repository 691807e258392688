#pragma once

#include "smplgan/autodiff.hpp"
#include "smplgan/rng.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace smplgan::nn {

using ad::Graph;
using ad::Parameter;
using ad::Var;

// Owns trainable parameters with stable addresses, in creation order.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;

  Parameter& create(const std::string& name, Index rows, Index cols);
  Parameter* find(const std::string& name);
  const std::vector<std::unique_ptr<Parameter>>& params() const { return params_; }

  void zero_grad();
  // Makes every parameter of this set a constant inside `g`.
  void freeze_in(Graph& g) const;
  double grad_norm() const;
  std::size_t scalar_count() const;

  std::map<std::string, Matrix> snapshot() const;
  // Throws Error(MalformedAsset) when a name is missing or shapes differ.
  void restore(const std::map<std::string, Matrix>& values, const std::string& prefix = "");

  // FNV-1a over names, shapes and raw values, in creation order.
  std::string digest() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

void glorot_uniform(Parameter& p, Rng& rng, double gain = 1.0);

struct Linear {
  Parameter* weight = nullptr;  // in x out
  Parameter* bias = nullptr;    // 1 x out

  static Linear create(ParameterSet& set, const std::string& name, Index in, Index out, Rng& rng,
                       double gain = 1.0);
  Var operator()(Graph& g, Var x) const;
  Index in_features() const { return weight->value.rows(); }
  Index out_features() const { return weight->value.cols(); }
};

struct LstmState {
  std::vector<Var> h;
  std::vector<Var> c;
};

// Stacked LSTM whose gates are fully connected layers over [input, h].
class LstmStack {
 public:
  LstmStack() = default;
  LstmStack(ParameterSet& set, const std::string& name, Index input_size, Index hidden, int layers, Rng& rng);

  LstmState zero_state(Graph& g, Index batch) const;
  // Advances every layer one step; returns the top layer's hidden state.
  Var step(Graph& g, Var input, LstmState& state) const;

  Index hidden() const { return hidden_; }
  int layers() const { return static_cast<int>(gates_.size()); }

 private:
  Index hidden_ = 0;
  std::vector<Linear> gates_;
};

struct Conv2d {
  Parameter* weight = nullptr;  // out x in*k*k
  Parameter* bias = nullptr;    // 1 x out, may be null
  ad::ConvGeometry geometry;

  static Conv2d create(ParameterSet& set, const std::string& name, const ad::ConvGeometry& geometry,
                       Index out_channels, bool with_bias, Rng& rng);
  Var operator()(Graph& g, Var x) const;
  Index out_channels() const { return weight->value.rows(); }
};

struct ConvLstmLayerShape {
  Index in_channels;
  Index in_size;  // square spatial extent of the input
  Index hidden_channels;
  Index out_size() const { return (in_size + 1) / 2; }
};

// Convolutional LSTM stack; each layer halves the spatial extent through a
// stride-2 input-to-gate convolution, the recurrent path is stride 1.
class ConvLstmStack {
 public:
  ConvLstmStack() = default;
  ConvLstmStack(ParameterSet& set, const std::string& name, std::vector<ConvLstmLayerShape> shapes, Rng& rng);

  LstmState zero_state(Graph& g, Index batch) const;
  Var step(Graph& g, Var input, LstmState& state) const;
  const std::vector<ConvLstmLayerShape>& shapes() const { return shapes_; }
  Index output_size() const;  // flattened size of the top hidden state

 private:
  std::vector<ConvLstmLayerShape> shapes_;
  std::vector<Conv2d> input_gates_;
  std::vector<Conv2d> hidden_gates_;
};

class RmsProp {
 public:
  RmsProp(ParameterSet& set, double learning_rate, double decay = 0.99, double epsilon = 1e-8);

  // Applies one update from Parameter::grad; clips the global gradient norm
  // first when clip_norm > 0.
  void step(double clip_norm = 0.0);

 private:
  ParameterSet* set_;
  double lr_, decay_, eps_;
  std::vector<Matrix> mean_square_;
};

}  // namespace smplgan::nn
