#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vfactor/autodiff/tensor.hpp"

namespace vfactor::ad {

// Binary elementwise ops broadcast 2-D operands: each dimension must match
// or be 1 on one side.

DiffValue matmul(const DiffValue& a, const DiffValue& b);
DiffValue add(const DiffValue& a, const DiffValue& b);
DiffValue sub(const DiffValue& a, const DiffValue& b);
DiffValue mul(const DiffValue& a, const DiffValue& b);
DiffValue scale(const DiffValue& a, double factor);
DiffValue add_scalar(const DiffValue& a, double offset);

DiffValue relu(const DiffValue& a);
DiffValue elu(const DiffValue& a, double alpha = 1.0);
DiffValue sigmoid(const DiffValue& a);
DiffValue tanh(const DiffValue& a);
/// Subgradient 0 at exactly 0.
DiffValue abs(const DiffValue& a);
DiffValue square(const DiffValue& a);

/// Sum of every element, 1x1.
DiffValue sum(const DiffValue& a);
/// Mean of every element, 1x1.
DiffValue mean(const DiffValue& a);
/// Row sums, [rows, 1].
DiffValue sum_cols(const DiffValue& a);

/// Elementwise max of equal-shaped operands. Ties route the gradient to `a`.
DiffValue maximum(const DiffValue& a, const DiffValue& b);

/// Elementwise clamp of `x` into [lo, hi] with tensor bounds of x's shape.
/// The gradient reaches x only where lo < x < hi; clamped entries (including
/// exact bound hits) send it to the active bound instead.
DiffValue clip(const DiffValue& x, const DiffValue& lo, const DiffValue& hi);

/// Same values, no gradient flow.
DiffValue detach(const DiffValue& a);

/// While alive, detach() outputs on the current thread are recorded; after
/// replay() they are returned again in recording order, so stop-gradient
/// values stay pinned at a base point while the inputs move.
class FrozenDetach {
 public:
  FrozenDetach();
  ~FrozenDetach();
  FrozenDetach(const FrozenDetach&) = delete;
  FrozenDetach& operator=(const FrozenDetach&) = delete;

  /// Starts (or restarts) replaying from the first recorded value.
  void replay();
  DiffValue next(const DiffValue& live);

 private:
  std::vector<std::vector<double>> values_;
  std::size_t cursor_ = 0;
  bool replaying_ = false;
  FrozenDetach* previous_;
};

DiffValue concat_cols(std::span<const DiffValue> parts);
DiffValue concat_rows(std::span<const DiffValue> parts);
DiffValue slice_cols(const DiffValue& a, std::size_t begin, std::size_t end);
DiffValue gather_rows(const DiffValue& a, std::span<const std::size_t> rows);
/// out[r] = a[r, index[r]], shape [rows, 1].
DiffValue pick_cols(const DiffValue& a, std::span<const std::size_t> index);
DiffValue reshape(const DiffValue& a, Shape shape);

inline DiffValue operator+(const DiffValue& a, const DiffValue& b) { return add(a, b); }
inline DiffValue operator-(const DiffValue& a, const DiffValue& b) { return sub(a, b); }
inline DiffValue operator*(const DiffValue& a, const DiffValue& b) { return mul(a, b); }
inline DiffValue operator*(const DiffValue& a, double f) { return scale(a, f); }
inline DiffValue operator*(double f, const DiffValue& a) { return scale(a, f); }

}  // namespace vfactor::ad
