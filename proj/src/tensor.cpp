// SPDX-License-Identifier: Apache-2.0
#include "fst/tensor.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace fst {

#if defined(__GLIBC__)
namespace {
// Activation buffers are tens of megabytes and freed every step; serving them
// from mmap costs a page fault per page on each reuse.
const bool kHeapTuned = [] {
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
}  // namespace
#endif

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (data.size() != shape_numel(shape)) {
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

detail::Node& Tensor::checked() const {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(int axis) const {
  const auto& s = shape();
  const int r = static_cast<int>(s.size());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw std::out_of_range("axis out of range for shape " + shape_string(s));
  return s[static_cast<std::size_t>(a)];
}

std::size_t Tensor::numel() const { return checked().value.size(); }

std::span<const double> Tensor::data() const { return checked().value; }

std::span<double> Tensor::mutable_data() {
  auto& n = checked();
  if (!n.inputs.empty() || n.backward) throw std::logic_error("mutable_data on an op output");
  return n.value;
}

double Tensor::item() const {
  const auto& n = checked();
  if (n.value.size() != 1) throw std::invalid_argument("item() on non-scalar " + shape_string(n.shape));
  return n.value[0];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

bool Tensor::is_leaf() const {
  const auto& n = checked();
  return n.inputs.empty() && !n.backward;
}

bool Tensor::has_grad() const { return !checked().grad.empty(); }

std::span<const double> Tensor::grad() const { return checked().grad; }

void Tensor::zero_grad() { checked().grad.clear(); }

Tensor Tensor::detach() const {
  const auto& n = checked();
  return from_data(n.shape, n.value, false);
}

Tensor Tensor::make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                           BackwardFn backward) {
  Tensor out = from_data(std::move(shape), std::move(value), false);
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.checked().requires_grad;
  if (needs) {
    auto& node = *out.node_;
    node.requires_grad = true;
    node.inputs.reserve(inputs.size());
    for (auto& in : inputs) node.inputs.push_back(in.node_);
    node.backward = std::move(backward);
  }
  return out;
}

Tape Tape::record(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward on an undefined tensor");
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward needs a scalar loss, got shape " +
                                shape_string(loss.shape()));
  }
  const auto& root = loss.node();
  if (root->consumed) throw std::logic_error("backward already ran on this graph");
  if (!root->requires_grad) {
    throw std::invalid_argument("loss does not depend on any tensor that requires grad");
  }

  Tape tape;
  tape.root_ = root;
  // Iterative post-order DFS; a node is emitted after all of its inputs.
  std::unordered_set<const detail::Node*> seen{root.get()};
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(root, 0);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const auto child = node->inputs[next++];
      if (child->requires_grad && child->backward && seen.insert(child.get()).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    tape.ops_.push_back(std::move(node));
    stack.pop_back();
  }
  return tape;
}

void Tape::backward() {
  if (done_) throw std::logic_error("tape already replayed");
  if (root_->consumed) throw std::logic_error("backward already ran on this graph");
  done_ = true;
  root_->grad_buffer()[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    auto& node = **it;
    if (node.grad.empty() || !node.backward) continue;
    node.backward(node);
  }
  // Release the graph: interior grads, rules and edges.
  for (auto& op : ops_) {
    if (!op->backward) continue;  // a leaf used directly as the loss keeps its grad
    op->backward = nullptr;
    op->inputs.clear();
    op->grad.clear();
    op->grad.shrink_to_fit();
    op->consumed = true;
  }
  ops_.clear();
}

void backward(const Tensor& loss) { Tape::record(loss).backward(); }

}  // namespace fst
