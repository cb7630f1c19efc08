#include "vfactor/autodiff/tensor.hpp"

#include <unordered_set>
#include <utility>

namespace vfactor::ad {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string Shape::to_string() const {
  return "[" + std::to_string(rows) + ", " + std::to_string(cols) + "]";
}

DiffValue DiffValue::constant(Shape shape, std::vector<double> data) {
  if (data.size() != shape.size()) {
    throw ShapeError("constant: " + std::to_string(data.size()) +
                     " values do not fill shape " + shape.to_string());
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->grad.assign(data.size(), 0.0);
  node->data = std::move(data);
  return DiffValue(std::move(node));
}

DiffValue DiffValue::parameter(Shape shape, std::vector<double> data) {
  DiffValue v = constant(shape, std::move(data));
  v.node_->requires_grad = true;
  return v;
}

DiffValue DiffValue::zeros(Shape shape, bool requires_grad) {
  DiffValue v = constant(shape, std::vector<double>(shape.size(), 0.0));
  v.node_->requires_grad = requires_grad;
  return v;
}

DiffValue DiffValue::filled(Shape shape, double value) {
  return constant(shape, std::vector<double>(shape.size(), value));
}

DiffValue DiffValue::scalar(double value, bool requires_grad) {
  DiffValue v = constant({1, 1}, {value});
  v.node_->requires_grad = requires_grad;
  return v;
}

DiffValue DiffValue::from_op(Shape shape, std::vector<double> data,
                             std::vector<DiffValue> parents,
                             std::function<void(detail::Node&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->data = std::move(data);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->grad.assign(node->data.size(), 0.0);
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(std::move(p.node_));
      node->backward = std::move(backward);
    }
  }
  return DiffValue(std::move(node));
}

double DiffValue::item() const {
  if (size() != 1) {
    throw ShapeError("item: expected a 1x1 value, got " + shape().to_string());
  }
  return node_->data[0];
}

void DiffValue::backward() const {
  if (size() != 1) {
    throw ShapeError("backward: root must be 1x1, got " + shape().to_string());
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order without recursion.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

void DiffValue::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

}  // namespace vfactor::ad
