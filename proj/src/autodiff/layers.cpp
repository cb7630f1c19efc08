#include "vfactor/autodiff/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace vfactor::ad {

Linear::Linear(ParameterStore& store, const std::string& prefix, std::size_t in,
               std::size_t out, std::mt19937_64& rng)
    : in_(in), out_(out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = store.add_uniform(prefix + ".weight", {in, out}, bound, rng);
  bias_ = store.add_uniform(prefix + ".bias", {1, out}, bound, rng);
}

DiffValue Linear::forward(const ParameterStore& store, const DiffValue& x) const {
  if (x.cols() != in_) {
    throw ShapeError("linear: input " + x.shape().to_string() + " does not match " +
                     std::to_string(in_) + " input features");
  }
  return add(matmul(x, store[weight_]), store[bias_]);
}

TwoLayerMlp::TwoLayerMlp(ParameterStore& store, const std::string& prefix, std::size_t in,
                         std::size_t hidden, std::size_t out, std::mt19937_64& rng)
    : first_(store, prefix + ".0", in, hidden, rng), second_(store, prefix + ".1", hidden, out, rng) {}

DiffValue TwoLayerMlp::forward(const ParameterStore& store, const DiffValue& x) const {
  return second_.forward(store, relu(first_.forward(store, x)));
}

GruCell::GruCell(ParameterStore& store, const std::string& prefix, std::size_t input_width,
                 std::size_t hidden_width, std::mt19937_64& rng)
    : input_width_(input_width), hidden_width_(hidden_width) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_width));
  w_input_ = store.add_uniform(prefix + ".weight_ih", {input_width, 3 * hidden_width}, bound, rng);
  w_hidden_ = store.add_uniform(prefix + ".weight_hh", {hidden_width, 3 * hidden_width}, bound, rng);
  b_input_ = store.add_uniform(prefix + ".bias_ih", {1, 3 * hidden_width}, bound, rng);
  b_hidden_ = store.add_uniform(prefix + ".bias_hh", {1, 3 * hidden_width}, bound, rng);
}

std::pair<DiffValue, GruState> GruCell::forward(const ParameterStore& store,
                                                const DiffValue& input,
                                                const GruState& state) const {
  if (input.cols() != input_width_) {
    throw ShapeError("gru: input width " + std::to_string(input.cols()) + " != configured " +
                     std::to_string(input_width_));
  }
  const DiffValue& h = state.hidden;
  if (h.cols() != hidden_width_ || h.rows() != input.rows()) {
    throw ShapeError("gru: hidden state " + h.shape().to_string() + " does not match input " +
                     input.shape().to_string() + " and width " + std::to_string(hidden_width_));
  }
  const std::size_t H = hidden_width_;
  DiffValue gi = add(matmul(input, store[w_input_]), store[b_input_]);
  DiffValue gh = add(matmul(h, store[w_hidden_]), store[b_hidden_]);

  DiffValue r = sigmoid(add(slice_cols(gi, 0, H), slice_cols(gh, 0, H)));
  DiffValue z = sigmoid(add(slice_cols(gi, H, 2 * H), slice_cols(gh, H, 2 * H)));
  DiffValue n = tanh(add(slice_cols(gi, 2 * H, 3 * H), mul(r, slice_cols(gh, 2 * H, 3 * H))));
  // (1 - z) * n + z * h  ==  n + z * (h - n)
  DiffValue next = add(n, mul(z, sub(h, n)));
  return {next, GruState{next}};
}

}  // namespace vfactor::ad
