#pragma once

// Minimal reverse-mode automatic differentiation over dense 2-D matrices.
//
// A `Var` is a shared handle to a graph node. Operations build the graph
// eagerly while gradient recording is enabled on the current thread; call
// `backward(loss)` on a 1x1 result to accumulate gradients into every leaf
// that requires them. Parameters are leaves that outlive individual graphs.

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace interaction {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0);
  Matrix(int r, int c, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

namespace detail {
struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Matrix& grad_buffer();
};
}  // namespace detail

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  static Var constant(Matrix value);
  static Var parameter(Matrix value);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.data.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  int rows() const { return node_->value.rows; }
  int cols() const { return node_->value.cols; }
  double item() const;

  void zero_grad();
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Gradient recording is a per-thread switch, on by default.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

void backward(const Var& loss);

namespace ag {

Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var linear(const Var& x, const Var& weight, const Var& bias);  // x*W + b (b is 1 x out)

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var add_row(const Var& a, const Var& row);  // broadcast a 1 x cols row over every row of a

Var relu(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var abs(const Var& a);

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var softmax_rows(const Var& x, const Matrix* additive_mask = nullptr);

Var slice_rows(const Var& x, int start, int count);
Var slice_cols(const Var& x, int start, int count);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);

// Rows of `table` selected by `ids`; gradients scatter back into the table.
Var gather_rows(const Var& table, std::span<const int> ids);

// Column-wise maximum over rows: [L x C] -> [1 x C]. Ties pick the first row.
Var max_rows(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);

// Sum over rows of -log softmax(logits[r])[targets[r]]; result is 1x1.
Var cross_entropy_sum(const Var& logits, std::span<const int> targets);

// Inverted dropout; identity when p == 0.
Var dropout(const Var& x, double p, std::mt19937_64& rng);

}  // namespace ag

// Per-row log-probabilities of the given targets, without building a graph.
std::vector<double> target_log_probs(const Matrix& logits, std::span<const int> targets);

}  // namespace interaction
