// SPDX-License-Identifier: Apache-2.0
//
// Shaped 64-bit arrays with define-by-run reverse-mode differentiation.
//
// Every op output that depends on a tensor with requires_grad() keeps its
// inputs and a backward rule. backward() walks that graph once in reverse
// topological order, accumulates into the leaves' grad buffers and then
// releases the graph. Outputs of ops on constant inputs record nothing.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fst {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Shape& shape() const;
  [[nodiscard]] std::size_t rank() const { return shape().size(); }
  /// Size of axis `axis`; negative values count from the back.
  [[nodiscard]] std::size_t dim(int axis) const;
  [[nodiscard]] std::size_t numel() const;

  [[nodiscard]] std::span<const double> data() const;
  /// Writable view of a leaf's values. Throws for op outputs.
  std::span<double> mutable_data();
  [[nodiscard]] double item() const;

  [[nodiscard]] bool requires_grad() const;
  [[nodiscard]] bool is_leaf() const;
  [[nodiscard]] bool has_grad() const;
  /// Accumulated gradient; empty until a backward pass reaches this tensor.
  [[nodiscard]] std::span<const double> grad() const;
  void zero_grad();

  /// Constant copy of the values, detached from any graph.
  [[nodiscard]] Tensor detach() const;

  [[nodiscard]] const std::shared_ptr<detail::Node>& node() const { return node_; }

  using BackwardFn = std::function<void(detail::Node&)>;

  /// Builds an op output. The graph edge is recorded only when an input needs grad.
  static Tensor make_result(Shape shape, std::vector<double> value,
                            std::vector<Tensor> inputs, BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  detail::Node& checked() const;

  std::shared_ptr<detail::Node> node_;
};

/// Reverse topological schedule of the ops reachable from a scalar loss.
class Tape {
 public:
  /// Throws std::invalid_argument for a non-scalar loss or one with no
  /// differentiable inputs, std::logic_error if its graph was already consumed.
  static Tape record(const Tensor& loss);

  /// Number of recorded ops (leaves excluded).
  [[nodiscard]] std::size_t size() const { return ops_.size(); }

  /// Seeds d(loss)/d(loss) = 1, runs every backward rule once and frees the graph.
  void backward();

 private:
  std::shared_ptr<detail::Node> root_;
  std::vector<std::shared_ptr<detail::Node>> ops_;  // inputs precede outputs
  bool done_ = false;
};

/// Tape::record(loss).backward().
void backward(const Tensor& loss);

}  // namespace fst
