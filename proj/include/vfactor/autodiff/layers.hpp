#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>

#include "vfactor/autodiff/ops.hpp"
#include "vfactor/autodiff/parameter_store.hpp"

namespace vfactor::ad {

/// y = x W + b with W [in, out] and b [1, out]. Default init is
/// Uniform(+-1/sqrt(in)) for both.
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out,
         std::mt19937_64& rng);

  DiffValue forward(const ParameterStore& store, const DiffValue& x) const;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  ParamId weight() const { return weight_; }
  ParamId bias() const { return bias_; }

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  ParamId weight_;
  ParamId bias_;
};

/// Two linear layers with a ReLU between them.
class TwoLayerMlp {
 public:
  TwoLayerMlp() = default;
  TwoLayerMlp(ParameterStore& store, const std::string& prefix, std::size_t in,
              std::size_t hidden, std::size_t out, std::mt19937_64& rng);

  DiffValue forward(const ParameterStore& store, const DiffValue& x) const;
  const Linear& output_layer() const { return second_; }

 private:
  Linear first_;
  Linear second_;
};

/// Recurrent hidden state, one row per (episode slot, agent).
struct GruState {
  DiffValue hidden;

  static GruState zeros(std::size_t rows, std::size_t width) {
    return {DiffValue::zeros({rows, width})};
  }
};

/// Gated recurrent unit:
///   r = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
///   z = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
///   n = tanh(x W_in + b_in + r * (h W_hn + b_hn))
///   h' = (1 - z) * n + z * h
/// Gate blocks are packed column-wise in (r, z, n) order.
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParameterStore& store, const std::string& prefix, std::size_t input_width,
          std::size_t hidden_width, std::mt19937_64& rng);

  /// Returns (output, next state); the output is the new hidden value.
  std::pair<DiffValue, GruState> forward(const ParameterStore& store, const DiffValue& input,
                                         const GruState& state) const;

  std::size_t input_width() const { return input_width_; }
  std::size_t hidden_width() const { return hidden_width_; }
  ParamId input_weight() const { return w_input_; }
  ParamId hidden_weight() const { return w_hidden_; }
  ParamId input_bias() const { return b_input_; }
  ParamId hidden_bias() const { return b_hidden_; }

 private:
  std::size_t input_width_ = 0;
  std::size_t hidden_width_ = 0;
  ParamId w_input_;
  ParamId w_hidden_;
  ParamId b_input_;
  ParamId b_hidden_;
};

}  // namespace vfactor::ad
