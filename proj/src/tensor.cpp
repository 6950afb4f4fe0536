#include "coid/tensor.hpp"

#include <cmath>
#include <unordered_set>

#include "coid/error.hpp"

namespace coid {

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

namespace ad {

namespace {

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
}

Node& in(Node& n, std::size_t k) { return *n.inputs[k]; }

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0)
    grad = g;
  else
    grad += g;
}

Tensor Tensor::constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Tensor(std::move(n));
}

Matrix Tensor::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("item: expected 1x1, got " + shape());
  return node_->value(0, 0);
}

namespace {

thread_local bool grad_disabled = false;

}  // namespace

NoGrad::NoGrad() : prev_(grad_disabled) { grad_disabled = true; }
NoGrad::~NoGrad() { grad_disabled = prev_; }

Tensor make_result(Matrix value, std::span<const Tensor> inputs, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (!grad_disabled)
    for (const auto& t : inputs)
      if (t.tracked()) n->requires_grad = true;
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (auto& t : inputs) n->inputs.push_back(t.node_);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

namespace {

// op(a) * op(b), op = transpose when the flag is set. Scene graphs have a
// handful of nodes, so in every hot product one side has few rows. Blocked
// GEMM spends its time packing operands there; matrix-vector products per
// row (or column) of the small side do not.
Matrix product(const Matrix& a, bool ta, const Matrix& b, bool tb) {
  constexpr Index kSmall = 16;
  const Index rows = ta ? a.cols() : a.rows();
  const Index cols = tb ? b.rows() : b.cols();
  Matrix c(rows, cols);
  if (!ta && rows <= kSmall) {
    for (Index i = 0; i < rows; ++i) {
      if (tb) c.row(i).noalias() = a.row(i) * b.transpose();
      else c.row(i).noalias() = a.row(i) * b;
    }
  } else if (!tb && cols <= kSmall) {
    for (Index j = 0; j < cols; ++j) {
      if (ta) c.col(j).noalias() = a.transpose() * b.col(j);
      else c.col(j).noalias() = a * b.col(j);
    }
  } else if (ta && tb) {
    c.noalias() = a.transpose() * b.transpose();
  } else if (ta) {
    c.noalias() = a.transpose() * b;
  } else if (tb) {
    c.noalias() = a * b.transpose();
  } else {
    c.noalias() = a * b;
  }
  return c;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: shape mismatch " + a.shape() + " vs " + b.shape());
  return make_result(product(a.value(), false, b.value(), false), {a, b}, [](Node& self) {
    Node& x = in(self, 0);
    Node& y = in(self, 1);
    if (x.requires_grad) x.accumulate(product(self.grad, false, y.value, true));
    if (y.requires_grad) y.accumulate(product(x.value, true, self.grad, false));
  });
}

Tensor transpose(const Tensor& a) {
  return make_result(a.value().transpose(), {a},
                     [](Node& self) { in(self, 0).accumulate(self.grad.transpose()); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a.value(), b.value());
  return make_result(a.value() + b.value(), {a, b}, [](Node& self) {
    in(self, 0).accumulate(self.grad);
    in(self, 1).accumulate(self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a.value(), b.value());
  return make_result(a.value() - b.value(), {a, b}, [](Node& self) {
    in(self, 0).accumulate(self.grad);
    in(self, 1).accumulate(-self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a.value(), b.value());
  return make_result(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    Node& x = in(self, 0);
    Node& y = in(self, 1);
    if (x.requires_grad) x.accumulate(self.grad.cwiseProduct(y.value));
    if (y.requires_grad) y.accumulate(self.grad.cwiseProduct(x.value));
  });
}

Tensor scale(const Tensor& a, double s) {
  return make_result(a.value() * s, {a}, [s](Node& self) { in(self, 0).accumulate(self.grad * s); });
}

Tensor add_row(const Tensor& a, const Tensor& b) {
  if (b.rows() != 1 || b.cols() != a.cols())
    throw ShapeError("add_row: shape mismatch " + a.shape() + " vs " + b.shape());
  Matrix out = a.value();
  out.rowwise() += b.value().row(0);
  return make_result(std::move(out), {a, b}, [](Node& self) {
    in(self, 0).accumulate(self.grad);
    Node& y = in(self, 1);
    if (y.requires_grad) y.accumulate(self.grad.colwise().sum());
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      throw ShapeError("concat_cols: shape mismatch " + parts[0].shape() + " vs " + p.shape());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index c = 0;
  for (const auto& p : parts) {
    offsets.push_back(c);
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return make_result(std::move(out), {parts.begin(), parts.end()},
                     [offsets = std::move(offsets)](Node& self) {
                       for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                         Node& x = in(self, k);
                         if (x.requires_grad)
                           x.accumulate(self.grad.middleCols(offsets[k], x.value.cols()));
                       }
                     });
}

Tensor slice_cols(const Tensor& a, Index start, Index width) {
  if (start < 0 || width < 0 || start + width > a.cols())
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + width) + ") out of range for " + a.shape());
  return make_result(a.value().middleCols(start, width), {a}, [start](Node& self) {
    Node& x = in(self, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    g.middleCols(start, self.grad.cols()) = self.grad;
    x.accumulate(g);
  });
}

Tensor mean(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("mean: no inputs");
  Matrix out = parts[0].value();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    require_same_shape("mean", parts[0].value(), parts[k].value());
    out += parts[k].value();
  }
  const double w = 1.0 / static_cast<double>(parts.size());
  out *= w;
  return make_result(std::move(out), {parts.begin(), parts.end()}, [w](Node& self) {
    for (auto& x : self.inputs) x->accumulate(self.grad * w);
  });
}

Tensor relu(const Tensor& a) {
  return make_result(a.value().cwiseMax(0.0), {a}, [](Node& self) {
    Node& x = in(self, 0);
    x.accumulate((x.value.array() > 0.0).cast<double>().matrix().cwiseProduct(self.grad));
  });
}

namespace {

Matrix softmax_forward(const Matrix& x, const Matrix* mask) {
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < x.cols(); ++j)
      if (!mask || (*mask)(i, j) != 0.0) mx = std::max(mx, x(i, j));
    if (mx == -std::numeric_limits<double>::infinity()) {
      if (x.cols() == 0) continue;
      if (mask) throw NumericError("softmax_rows: empty neighborhood at row " + std::to_string(i));
      throw NumericError("softmax_rows: non-finite row " + std::to_string(i));
    }
    double z = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
      if (mask && (*mask)(i, j) == 0.0) continue;
      y(i, j) = std::exp(x(i, j) - mx);
      z += y(i, j);
    }
    y.row(i) /= z;
  }
  return y;
}

Tensor softmax_impl(const Tensor& a, const Matrix* mask) {
  return make_result(softmax_forward(a.value(), mask), {a}, [](Node& self) {
    const Matrix& y = self.value;
    const Eigen::VectorXd dot = self.grad.cwiseProduct(y).rowwise().sum();
    Matrix g = y.cwiseProduct(self.grad);
    g -= y.cwiseProduct(dot.replicate(1, y.cols()));
    in(self, 0).accumulate(g);
  });
}

}  // namespace

Tensor softmax_rows(const Tensor& a) { return softmax_impl(a, nullptr); }

Tensor softmax_rows(const Tensor& a, const Matrix& mask) {
  require_same_shape("softmax_rows(mask)", a.value(), mask);
  return softmax_impl(a, &mask);
}

Tensor dropout(const Tensor& a, double p, bool train, RngStream& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: probability must be in [0, 1)");
  if (!train || p == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) mask(i, j) = rng.uniform() < p ? 0.0 : keep_scale;
  Matrix out = a.value().cwiseProduct(mask);
  return make_result(std::move(out), {a}, [mask = std::move(mask)](Node& self) {
    in(self, 0).accumulate(self.grad.cwiseProduct(mask));
  });
}

Tensor gather_rows(const Tensor& a, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= a.rows())
      throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " out of range for " +
                       a.shape());
    out.row(static_cast<Index>(r)) = a.value().row(rows[r]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return make_result(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    Node& x = in(self, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) g.row(idx[r]) += self.grad.row(static_cast<Index>(r));
    x.accumulate(g);
  });
}

namespace {

Matrix reshape_row_major(const Matrix& m, Index rows, Index cols) {
  Matrix out(rows, cols);
  const Index src_cols = m.cols();
  for (Index k = 0; k < rows * cols; ++k) out(k / cols, k % cols) = m(k / src_cols, k % src_cols);
  return out;
}

}  // namespace

Tensor reshape(const Tensor& a, Index rows, Index cols) {
  if (rows * cols != a.rows() * a.cols())
    throw ShapeError("reshape: cannot view " + a.shape() + " as " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  if (a.cols() == 0 || cols == 0) return make_result(Matrix(rows, cols), {a}, [](Node&) {});
  return make_result(reshape_row_major(a.value(), rows, cols), {a}, [](Node& self) {
    Node& x = in(self, 0);
    x.accumulate(reshape_row_major(self.grad, x.value.rows(), x.value.cols()));
  });
}

Tensor row_sum(const Tensor& a) {
  return make_result(a.value().rowwise().sum(), {a}, [](Node& self) {
    Node& x = in(self, 0);
    x.accumulate(self.grad.replicate(1, x.value.cols()));
  });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& x = in(self, 0);
    x.accumulate(Matrix::Constant(x.value.rows(), x.value.cols(), self.grad(0, 0)));
  });
}

Tensor mean_all(const Tensor& a) {
  const auto count = static_cast<double>(a.rows() * a.cols());
  if (count == 0) throw ShapeError("mean_all: empty tensor " + a.shape());
  return scale(sum(a), 1.0 / count);
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw NumericError("backward: undefined tensor");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw ShapeError("backward: loss must be scalar, got " + loss.shape());
  if (!loss.tracked()) throw NumericError("backward: loss does not depend on any parameter");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && !child->inputs.empty() && seen.insert(child).second)
        stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior nodes start from a clean gradient; leaves accumulate across calls.
  for (Node* n : order) n->grad.resize(0, 0);
  Node& root = *loss.node();
  root.grad = Matrix::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() > 0) n->backward(*n);
  }
}

}  // namespace ad
}  // namespace coid
