#pragma once

// Reverse-mode automatic differentiation over Eigen double matrices.
//
// The engine is deliberately small: a Var is a shared handle to a DAG node
// holding a value, a lazily allocated gradient, and a closure that pushes
// the node's gradient into its parents. Graphs are rebuilt on every forward
// pass; parameters are long-lived leaf nodes whose gradients survive until
// zero_grad(). All values are column-major Eigen::MatrixXd; vectors are
// d x 1 matrices unless an op says otherwise.

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <vector>

namespace rrl::ad {

using Mat = Eigen::MatrixXd;

namespace detail {
struct Node {
  Mat value;
  Mat grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // may be empty for leaves

  Mat& grad_ref() {
    if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
    return grad;
  }

  // Iterative teardown: recurrent graphs form parent chains tens of
  // thousands of nodes long, which would otherwise recurse on destruction.
  ~Node();
};
}  // namespace detail

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

  /// Leaf with no gradient tracking.
  static Var constant(Mat v);
  static Var scalar_const(double v);
  /// Trainable leaf; gradients accumulate across backward() calls until
  /// zero_grad().
  static Var param(Mat v);

  bool defined() const { return node_ != nullptr; }
  bool requires_grad() const { return node_->requires_grad; }
  const Mat& value() const { return node_->value; }
  /// Mutable access to the stored value; only meaningful for leaves
  /// (optimizer updates, checkpoint loading).
  Mat& mutable_value() { return node_->value; }
  const Mat& grad() const;
  void zero_grad();

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Runs backprop from a 1x1 root. Seeds the root gradient with 1.
void backward(const Var& root);

double scalar(const Var& v);

// --- elementwise / arithmetic -------------------------------------------

Var add(const Var& a, const Var& b);          // equal shapes, or b 1x1
Var add_colwise(const Var& m, const Var& b);  // b: (rows x 1), broadcast over cols
Var sub(const Var& a, const Var& b);          // equal shapes, or b 1x1
Var mul(const Var& a, const Var& b);          // elementwise; equal shapes or b 1x1
Var cdiv(const Var& a, const Var& b);         // elementwise; equal shapes or b 1x1
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_const(const Var& a, double c);

Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);

// --- reductions -----------------------------------------------------------

Var sum(const Var& a);   // 1x1
Var mean(const Var& a);  // 1x1
Var dot(const Var& a, const Var& b);           // column vectors -> 1x1
Var mask_sum(const Var& a, const Mat& mask);   // sum(a .* mask) -> 1x1
Var logsumexp(const Var& a);                   // over all entries -> 1x1
Var colwise_logsumexp(const Var& a);           // m x n -> 1 x n

// --- structure ------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var softmax(const Var& a);  // column vector -> column vector
Var vcat(const std::vector<Var>& parts);  // stack rows
Var hcat(const std::vector<Var>& parts);  // stack cols
Var block(const Var& a, Eigen::Index r, Eigen::Index c, Eigen::Index nr,
          Eigen::Index nc);
Var rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var lookup_row(const Var& table, Eigen::Index r);  // row r as column vector
Var broadcast_cols(const Var& v, Eigen::Index n);  // m x 1 -> m x n
Var stop_gradient(const Var& a);

}  // namespace rrl::ad
