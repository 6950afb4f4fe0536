#pragma once

#include <Eigen/Dense>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "coid/rng.hpp"

namespace coid {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

std::string shape_string(const Matrix& m);

namespace ad {

// A node of the computation graph. Values are rank-2 (scalars are 1x1).
struct Node {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Pushes this->grad into the inputs' grads.
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

// Handle to a graph node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value);
  /// Leaf that receives gradients.
  static Tensor parameter(Matrix value);

  const Matrix& value() const { return node_->value; }
  /// Gradient of the last backward pass; zero-filled if none reached this node.
  Matrix grad() const;
  bool has_grad() const { return node_ && node_->grad.size() > 0; }
  Matrix& mutable_value() { return node_->value; }
  void zero_grad() { node_->grad.resize(0, 0); }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  bool tracked() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  std::string shape() const { return shape_string(node_->value); }
  /// Value of a 1x1 tensor.
  double item() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_result(Matrix value, std::span<const Tensor> inputs,
                            std::function<void(Node&)> backward);
};

// Builds an op output. The backward closure is only kept when some input is
// tracked and no NoGrad scope is active on this thread.
Tensor make_result(Matrix value, std::span<const Tensor> inputs, std::function<void(Node&)> backward);
inline Tensor make_result(Matrix value, std::initializer_list<Tensor> inputs,
                          std::function<void(Node&)> backward) {
  return make_result(std::move(value), std::span<const Tensor>(inputs.begin(), inputs.size()), std::move(backward));
}

// While alive, ops on this thread record no graph: outputs are untracked
// constants. For evaluation-only forward passes.
class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  bool prev_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// a (n x k) plus row vector b (1 x k) added to every row.
Tensor add_row(const Tensor& a, const Tensor& b);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, Index start, Index width);
/// Elementwise mean of equally-shaped tensors.
Tensor mean(std::span<const Tensor> parts);
Tensor relu(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
/// Row softmax restricted to entries where mask != 0; masked entries are 0.
/// Throws NumericError("empty neighborhood") for a row with no allowed entry.
Tensor softmax_rows(const Tensor& a, const Matrix& mask);
/// Inverted dropout. Identity when !train or p == 0.
Tensor dropout(const Tensor& a, double p, bool train, RngStream& rng);
Tensor gather_rows(const Tensor& a, std::span<const Index> rows);
/// Row-major reshape.
Tensor reshape(const Tensor& a, Index rows, Index cols);
Tensor row_sum(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean_all(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }

/// Reverse pass from a scalar, tracked tensor. Leaf gradients accumulate.
void backward(const Tensor& loss);

}  // namespace ad
}  // namespace coid
