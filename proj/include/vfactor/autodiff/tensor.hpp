#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vfactor::ad {

/// Row-major 2-D shape. Scalars are 1x1, vectors are 1xN or Nx1.
struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  std::vector<std::size_t> dims() const { return {rows, cols}; }
  std::string to_string() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty on op results that record no graph
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;
};

}  // namespace detail

/// Handle to a node in a dynamically built computation graph. Copies share
/// the node; the graph is kept alive by the handles that reference it.
class DiffValue {
 public:
  DiffValue() = default;

  static DiffValue constant(Shape shape, std::vector<double> data);
  static DiffValue parameter(Shape shape, std::vector<double> data);
  static DiffValue zeros(Shape shape, bool requires_grad = false);
  static DiffValue filled(Shape shape, double value);
  static DiffValue scalar(double value, bool requires_grad = false);

  /// Internal: wires a new op result into the graph. The node only records
  /// parents and a backward closure when gradients are enabled and at least
  /// one parent requires them.
  static DiffValue from_op(Shape shape, std::vector<double> data,
                           std::vector<DiffValue> parents,
                           std::function<void(detail::Node&)> backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows; }
  std::size_t cols() const { return node_->shape.cols; }
  std::size_t size() const { return node_->shape.size(); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }

  double item() const;
  double at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) {
    node_->requires_grad = flag;
    if (flag) node_->grad.resize(node_->data.size(), 0.0);
  }

  /// Reverse pass from a 1x1 root. Gradients accumulate into every reachable
  /// node that requires them; each node is visited once in topological order.
  void backward() const;
  void zero_grad();

  /// True when both handles refer to the same graph node.
  bool same_node(const DiffValue& other) const { return node_ == other.node_; }

  detail::Node& node() const { return *node_; }

 private:
  explicit DiffValue(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace vfactor::ad
