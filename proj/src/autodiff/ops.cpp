#include "vfactor/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace vfactor::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;

MatrixMap as_matrix(std::vector<double>& v, const Shape& s) {
  return MatrixMap(v.data(), static_cast<Eigen::Index>(s.rows),
                   static_cast<Eigen::Index>(s.cols));
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.to_string() +
                   " and " + b.to_string());
}

// Strides that map an output index onto a broadcast operand.
struct Broadcast {
  std::size_t row_stride;
  std::size_t col_stride;
  std::size_t index(std::size_t r, std::size_t c) const { return r * row_stride + c * col_stride; }
};

Broadcast broadcast_of(const Shape& s) {
  return {s.rows == 1 ? 0 : s.cols, s.cols == 1 ? 0 : std::size_t{1}};
}

Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  auto dim = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    shape_mismatch(op, a, b);
  };
  return {dim(a.rows, b.rows), dim(a.cols, b.cols)};
}

template <class Fn>
DiffValue unary(const DiffValue& a, Fn&& value, std::function<void(detail::Node&)> back) {
  std::vector<double> out(a.size());
  auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(in[i]);
  return DiffValue::from_op(a.shape(), std::move(out), {a}, std::move(back));
}

// Backward for unary ops whose local derivative depends on (input, output).
template <class Deriv>
std::function<void(detail::Node&)> unary_back(Deriv deriv) {
  return [deriv](detail::Node& self) {
    auto& in = *self.parents[0];
    if (!in.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      in.grad[i] += self.grad[i] * deriv(in.data[i], self.data[i]);
    }
  };
}

void require_same(const char* op, const DiffValue& a, const DiffValue& b) {
  if (a.shape() != b.shape()) shape_mismatch(op, a.shape(), b.shape());
}

}  // namespace

DiffValue matmul(const DiffValue& a, const DiffValue& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a.shape(), b.shape());
  Shape out_shape{a.rows(), b.cols()};
  std::vector<double> out(out_shape.size());
  as_matrix(out, out_shape).noalias() =
      as_matrix(a.node().data, a.shape()) * as_matrix(b.node().data, b.shape());
  return DiffValue::from_op(out_shape, std::move(out), {a, b}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    auto g = as_matrix(self.grad, self.shape);
    if (pa.requires_grad) {
      as_matrix(pa.grad, pa.shape).noalias() += g * as_matrix(pb.data, pb.shape).transpose();
    }
    if (pb.requires_grad) {
      as_matrix(pb.grad, pb.shape).noalias() += as_matrix(pa.data, pa.shape).transpose() * g;
    }
  });
}

namespace {

template <class Fn, class GradA, class GradB>
DiffValue binary(const char* op, const DiffValue& a, const DiffValue& b, Fn fn, GradA ga,
                 GradB gb) {
  const Shape out_shape = broadcast_shape(op, a.shape(), b.shape());
  std::vector<double> out(out_shape.size());
  const Broadcast ba = broadcast_of(a.shape());
  const Broadcast bb = broadcast_of(b.shape());
  auto ad = a.data();
  auto bd = b.data();
  if (a.shape() == out_shape && b.shape() == out_shape) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(ad[i], bd[i]);
  } else {
    for (std::size_t r = 0; r < out_shape.rows; ++r) {
      for (std::size_t c = 0; c < out_shape.cols; ++c) {
        out[r * out_shape.cols + c] = fn(ad[ba.index(r, c)], bd[bb.index(r, c)]);
      }
    }
  }
  return DiffValue::from_op(
      out_shape, std::move(out), {a, b}, [ba, bb, ga, gb](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const std::size_t cols = self.shape.cols;
        for (std::size_t r = 0; r < self.shape.rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            const double g = self.grad[r * cols + c];
            const std::size_t ia = ba.index(r, c);
            const std::size_t ib = bb.index(r, c);
            if (pa.requires_grad) pa.grad[ia] += g * ga(pa.data[ia], pb.data[ib]);
            if (pb.requires_grad) pb.grad[ib] += g * gb(pa.data[ia], pb.data[ib]);
          }
        }
      });
}

}  // namespace

DiffValue add(const DiffValue& a, const DiffValue& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

DiffValue sub(const DiffValue& a, const DiffValue& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

DiffValue mul(const DiffValue& a, const DiffValue& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

DiffValue scale(const DiffValue& a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; },
      unary_back([factor](double, double) { return factor; }));
}

DiffValue add_scalar(const DiffValue& a, double offset) {
  return unary(
      a, [offset](double x) { return x + offset; },
      unary_back([](double, double) { return 1.0; }));
}

DiffValue relu(const DiffValue& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      unary_back([](double x, double) { return x > 0.0 ? 1.0 : 0.0; }));
}

DiffValue elu(const DiffValue& a, double alpha) {
  return unary(
      a, [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
      unary_back([alpha](double x, double y) { return x > 0.0 ? 1.0 : y + alpha; }));
}

DiffValue sigmoid(const DiffValue& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      unary_back([](double, double y) { return y * (1.0 - y); }));
}

DiffValue tanh(const DiffValue& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      unary_back([](double, double y) { return 1.0 - y * y; }));
}

DiffValue abs(const DiffValue& a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      unary_back([](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }));
}

DiffValue square(const DiffValue& a) {
  return unary(
      a, [](double x) { return x * x; },
      unary_back([](double x, double) { return 2.0 * x; }));
}

DiffValue sum(const DiffValue& a) {
  double total = 0.0;
  for (double x : a.data()) total += x;
  return DiffValue::from_op({1, 1}, {total}, {a}, [](detail::Node& self) {
    auto& in = *self.parents[0];
    if (!in.requires_grad) return;
    const double g = self.grad[0];
    for (double& x : in.grad) x += g;
  });
}

DiffValue mean(const DiffValue& a) {
  if (a.size() == 0) throw ShapeError("mean: empty operand");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

DiffValue sum_cols(const DiffValue& a) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  std::vector<double> out(rows, 0.0);
  auto in = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r] += in[r * cols + c];
  }
  return DiffValue::from_op({rows, 1}, std::move(out), {a}, [cols](detail::Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t r = 0; r < self.shape.rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) p.grad[r * cols + c] += self.grad[r];
    }
  });
}

DiffValue maximum(const DiffValue& a, const DiffValue& b) {
  require_same("maximum", a, b);
  std::vector<double> out(a.size());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(ad[i], bd[i]);
  return DiffValue::from_op(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const bool a_wins = pa.data[i] >= pb.data[i];
      if (a_wins && pa.requires_grad) pa.grad[i] += self.grad[i];
      if (!a_wins && pb.requires_grad) pb.grad[i] += self.grad[i];
    }
  });
}

DiffValue clip(const DiffValue& x, const DiffValue& lo, const DiffValue& hi) {
  require_same("clip", x, lo);
  require_same("clip", x, hi);
  auto xd = x.data();
  auto ld = lo.data();
  auto hd = hi.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (ld[i] > hd[i]) {
      throw std::invalid_argument("clip: lower bound " + std::to_string(ld[i]) +
                                  " exceeds upper bound " + std::to_string(hd[i]) +
                                  " at element " + std::to_string(i));
    }
    out[i] = std::min(std::max(xd[i], ld[i]), hd[i]);
  }
  return DiffValue::from_op(x.shape(), std::move(out), {x, lo, hi}, [](detail::Node& self) {
    auto& px = *self.parents[0];
    auto& pl = *self.parents[1];
    auto& ph = *self.parents[2];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double g = self.grad[i];
      if (px.data[i] <= pl.data[i]) {
        if (pl.requires_grad) pl.grad[i] += g;
      } else if (px.data[i] >= ph.data[i]) {
        if (ph.requires_grad) ph.grad[i] += g;
      } else if (px.requires_grad) {
        px.grad[i] += g;
      }
    }
  });
}

namespace {
thread_local FrozenDetach* active_freeze = nullptr;
}  // namespace

DiffValue detach(const DiffValue& a) {
  if (active_freeze != nullptr) return active_freeze->next(a);
  auto in = a.data();
  return DiffValue::constant(a.shape(), std::vector<double>(in.begin(), in.end()));
}

FrozenDetach::FrozenDetach() : previous_(active_freeze) { active_freeze = this; }

FrozenDetach::~FrozenDetach() { active_freeze = previous_; }

void FrozenDetach::replay() {
  replaying_ = true;
  cursor_ = 0;
}

DiffValue FrozenDetach::next(const DiffValue& live) {
  if (!replaying_) {
    auto in = live.data();
    values_.emplace_back(in.begin(), in.end());
    return DiffValue::constant(live.shape(), values_.back());
  }
  if (cursor_ >= values_.size() || values_[cursor_].size() != live.size()) {
    throw ShapeError("FrozenDetach: replay diverged from the recorded pass");
  }
  return DiffValue::constant(live.shape(), values_[cursor_++]);
}

DiffValue concat_cols(std::span<const DiffValue> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_mismatch("concat_cols", parts[0].shape(), p.shape());
    cols += p.cols();
  }
  std::vector<double> out(rows * cols);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    auto d = p.data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(r * p.cols()), p.cols(),
                  out.begin() + static_cast<std::ptrdiff_t>(r * cols + offset));
    }
    offset += p.cols();
  }
  std::vector<DiffValue> parents(parts.begin(), parts.end());
  return DiffValue::from_op({rows, cols}, std::move(out), std::move(parents),
                            [offsets](detail::Node& self) {
                              const std::size_t total = self.shape.cols;
                              for (std::size_t k = 0; k < self.parents.size(); ++k) {
                                auto& p = *self.parents[k];
                                if (!p.requires_grad) continue;
                                for (std::size_t r = 0; r < p.shape.rows; ++r) {
                                  for (std::size_t c = 0; c < p.shape.cols; ++c) {
                                    p.grad[r * p.shape.cols + c] +=
                                        self.grad[r * total + offsets[k] + c];
                                  }
                                }
                              }
                            });
}

DiffValue concat_rows(std::span<const DiffValue> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_mismatch("concat_rows", parts[0].shape(), p.shape());
    rows += p.rows();
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<DiffValue> parents(parts.begin(), parts.end());
  return DiffValue::from_op({rows, cols}, std::move(out), std::move(parents),
                            [](detail::Node& self) {
                              std::size_t offset = 0;
                              for (auto& pp : self.parents) {
                                auto& p = *pp;
                                if (p.requires_grad) {
                                  for (std::size_t i = 0; i < p.grad.size(); ++i) {
                                    p.grad[i] += self.grad[offset + i];
                                  }
                                }
                                offset += p.grad.size();
                              }
                            });
}

DiffValue slice_cols(const DiffValue& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") outside " + a.shape().to_string());
  }
  const std::size_t rows = a.rows();
  const std::size_t width = end - begin;
  const std::size_t src_cols = a.cols();
  std::vector<double> out(rows * width);
  auto d = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = d[r * src_cols + begin + c];
  }
  return DiffValue::from_op({rows, width}, std::move(out), {a},
                            [begin, width, src_cols](detail::Node& self) {
                              auto& p = *self.parents[0];
                              if (!p.requires_grad) return;
                              for (std::size_t r = 0; r < self.shape.rows; ++r) {
                                for (std::size_t c = 0; c < width; ++c) {
                                  p.grad[r * src_cols + begin + c] += self.grad[r * width + c];
                                }
                              }
                            });
}

DiffValue gather_rows(const DiffValue& a, std::span<const std::size_t> rows) {
  const std::size_t cols = a.cols();
  std::vector<double> out(rows.size() * cols);
  auto d = a.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " outside " +
                       a.shape().to_string());
    }
    std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(rows[i] * cols), cols,
                out.begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return DiffValue::from_op({rows.size(), cols}, std::move(out), {a},
                            [idx, cols](detail::Node& self) {
                              auto& p = *self.parents[0];
                              if (!p.requires_grad) return;
                              for (std::size_t i = 0; i < idx.size(); ++i) {
                                for (std::size_t c = 0; c < cols; ++c) {
                                  p.grad[idx[i] * cols + c] += self.grad[i * cols + c];
                                }
                              }
                            });
}

DiffValue pick_cols(const DiffValue& a, std::span<const std::size_t> index) {
  if (index.size() != a.rows()) {
    throw ShapeError("pick_cols: " + std::to_string(index.size()) + " indices for " +
                     a.shape().to_string());
  }
  const std::size_t cols = a.cols();
  std::vector<double> out(a.rows());
  auto d = a.data();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    if (index[r] >= cols) {
      throw ShapeError("pick_cols: column " + std::to_string(index[r]) + " outside " +
                       a.shape().to_string());
    }
    out[r] = d[r * cols + index[r]];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return DiffValue::from_op({a.rows(), 1}, std::move(out), {a}, [idx, cols](detail::Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t r = 0; r < idx.size(); ++r) p.grad[r * cols + idx[r]] += self.grad[r];
  });
}

DiffValue reshape(const DiffValue& a, Shape shape) {
  if (shape.size() != a.size()) shape_mismatch("reshape", a.shape(), shape);
  auto d = a.data();
  return DiffValue::from_op(shape, std::vector<double>(d.begin(), d.end()), {a},
                            [](detail::Node& self) {
                              auto& p = *self.parents[0];
                              if (!p.requires_grad) return;
                              for (std::size_t i = 0; i < p.grad.size(); ++i) {
                                p.grad[i] += self.grad[i];
                              }
                            });
}

}  // namespace vfactor::ad
