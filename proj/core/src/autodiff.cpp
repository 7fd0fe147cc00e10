#include "rrl/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace rrl::ad {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

detail::Node::~Node() {
  std::vector<NodePtr> queue(std::move(parents));
  while (!queue.empty()) {
    NodePtr p = std::move(queue.back());
    queue.pop_back();
    if (p.use_count() == 1) {
      // Sole owner: lift the grandparents out before p dies so its own
      // destructor finds an empty parent list.
      for (auto& gp : p->parents) queue.push_back(std::move(gp));
      p->parents.clear();
    }
  }
}

namespace {

NodePtr make_node(Mat value, std::vector<NodePtr> parents,
                  std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) {
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) n->backward = std::move(backward);
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

bool is_scalar(const Var& v) { return v.rows() == 1 && v.cols() == 1; }

Mat softmax_of(const Eigen::Ref<const Mat>& x) {
  const double m = x.maxCoeff();
  Mat e = (x.array() - m).exp();
  return e / e.sum();
}

}  // namespace

Var Var::constant(Mat v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return Var(n);
}

Var Var::scalar_const(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var Var::param(Mat v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  return Var(n);
}

const Mat& Var::grad() const { return node_->grad_ref(); }

void Var::zero_grad() {
  if (node_->grad.size() != 0) node_->grad.setZero();
}

void backward(const Var& root) {
  if (!root.defined()) throw std::invalid_argument("backward: undefined var");
  if (root.rows() != 1 || root.cols() != 1) {
    throw std::invalid_argument("backward: root must be a scalar (1x1)");
  }
  if (!root.requires_grad()) return;

  // Reverse post-order DFS over requires_grad nodes gives a topological
  // order with every consumer processed before its producer.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.node().get(), 0});
  visited.insert(root.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  root.node()->grad_ref().setConstant(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

double scalar(const Var& v) {
  if (v.rows() != 1 || v.cols() != 1) {
    throw std::invalid_argument("scalar: var is not 1x1");
  }
  return v.value()(0, 0);
}

// --- elementwise / arithmetic -------------------------------------------

Var add(const Var& a, const Var& b) {
  if (is_scalar(b) && !is_scalar(a)) {
    Mat v = a.value().array() + b.value()(0, 0);
    return Var(make_node(std::move(v), {a.node(), b.node()}, [](Node& n) {
      Node* pa = n.parents[0].get();
      Node* pb = n.parents[1].get();
      if (pa->requires_grad) pa->grad_ref() += n.grad;
      if (pb->requires_grad) pb->grad_ref()(0, 0) += n.grad.sum();
    }));
  }
  check_same_shape(a, b, "add");
  Mat v = a.value() + b.value();
  return Var(make_node(std::move(v), {a.node(), b.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    Node* pb = n.parents[1].get();
    if (pa->requires_grad) pa->grad_ref() += n.grad;
    if (pb->requires_grad) pb->grad_ref() += n.grad;
  }));
}

Var add_colwise(const Var& m, const Var& b) {
  if (b.cols() != 1 || b.rows() != m.rows()) {
    throw std::invalid_argument("add_colwise: bias must be rows(m) x 1");
  }
  Mat v = m.value().colwise() + Eigen::VectorXd(b.value().col(0));
  return Var(make_node(std::move(v), {m.node(), b.node()}, [](Node& n) {
    Node* pm = n.parents[0].get();
    Node* pb = n.parents[1].get();
    if (pm->requires_grad) pm->grad_ref() += n.grad;
    if (pb->requires_grad) pb->grad_ref() += n.grad.rowwise().sum();
  }));
}

Var sub(const Var& a, const Var& b) {
  if (is_scalar(b) && !is_scalar(a)) {
    Mat v = a.value().array() - b.value()(0, 0);
    return Var(make_node(std::move(v), {a.node(), b.node()}, [](Node& n) {
      Node* pa = n.parents[0].get();
      Node* pb = n.parents[1].get();
      if (pa->requires_grad) pa->grad_ref() += n.grad;
      if (pb->requires_grad) pb->grad_ref()(0, 0) -= n.grad.sum();
    }));
  }
  check_same_shape(a, b, "sub");
  Mat v = a.value() - b.value();
  return Var(make_node(std::move(v), {a.node(), b.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    Node* pb = n.parents[1].get();
    if (pa->requires_grad) pa->grad_ref() += n.grad;
    if (pb->requires_grad) pb->grad_ref() -= n.grad;
  }));
}

Var mul(const Var& a, const Var& b) {
  if (is_scalar(b) && !is_scalar(a)) {
    Mat v = a.value() * b.value()(0, 0);
    return Var(make_node(std::move(v), {a.node(), b.node()}, [](Node& n) {
      Node* pa = n.parents[0].get();
      Node* pb = n.parents[1].get();
      const double s = pb->value(0, 0);
      if (pa->requires_grad) pa->grad_ref() += n.grad * s;
      if (pb->requires_grad)
        pb->grad_ref()(0, 0) += (n.grad.array() * pa->value.array()).sum();
    }));
  }
  check_same_shape(a, b, "mul");
  Mat v = a.value().cwiseProduct(b.value());
  return Var(make_node(std::move(v), {a.node(), b.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    Node* pb = n.parents[1].get();
    if (pa->requires_grad)
      pa->grad_ref().array() += n.grad.array() * pb->value.array();
    if (pb->requires_grad)
      pb->grad_ref().array() += n.grad.array() * pa->value.array();
  }));
}

Var cdiv(const Var& a, const Var& b) {
  if (is_scalar(b) && !is_scalar(a)) {
    const double s = b.value()(0, 0);
    Mat v = a.value() / s;
    return Var(make_node(std::move(v), {a.node(), b.node()}, [](Node& n) {
      Node* pa = n.parents[0].get();
      Node* pb = n.parents[1].get();
      const double s = pb->value(0, 0);
      if (pa->requires_grad) pa->grad_ref() += n.grad / s;
      if (pb->requires_grad)
        pb->grad_ref()(0, 0) -=
            (n.grad.array() * pa->value.array()).sum() / (s * s);
    }));
  }
  check_same_shape(a, b, "cdiv");
  Mat v = a.value().cwiseQuotient(b.value());
  return Var(make_node(std::move(v), {a.node(), b.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    Node* pb = n.parents[1].get();
    if (pa->requires_grad)
      pa->grad_ref().array() += n.grad.array() / pb->value.array();
    if (pb->requires_grad)
      pb->grad_ref().array() -= n.grad.array() * pa->value.array() /
                                pb->value.array().square();
  }));
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double c) {
  Mat v = a.value() * c;
  return Var(make_node(std::move(v), {a.node()}, [c](Node& n) {
    Node* pa = n.parents[0].get();
    if (pa->requires_grad) pa->grad_ref() += n.grad * c;
  }));
}

Var add_const(const Var& a, double c) {
  Mat v = a.value().array() + c;
  return Var(make_node(std::move(v), {a.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    if (pa->requires_grad) pa->grad_ref() += n.grad;
  }));
}

Var tanh(const Var& a) {
  Mat v = a.value().array().tanh();
  return Var(make_node(std::move(v), {a.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    if (pa->requires_grad)
      pa->grad_ref().array() += n.grad.array() * (1.0 - n.value.array().square());
  }));
}

Var sigmoid(const Var& a) {
  Mat v = 1.0 / (1.0 + (-a.value().array()).exp());
  return Var(make_node(std::move(v), {a.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    if (pa->requires_grad)
      pa->grad_ref().array() +=
          n.grad.array() * n.value.array() * (1.0 - n.value.array());
  }));
}

Var exp(const Var& a) {
  Mat v = a.value().array().exp();
  return Var(make_node(std::move(v), {a.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    if (pa->requires_grad)
      pa->grad_ref().array() += n.grad.array() * n.value.array();
  }));
}

Var log(const Var& a) {
  Mat v = a.value().array().log();
  return Var(make_node(std::move(v), {a.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    if (pa->requires_grad)
      pa->grad_ref().array() += n.grad.array() / pa->value.array();
  }));
}

Var sqrt(const Var& a) {
  Mat v = a.value().array().sqrt();
  return Var(make_node(std::move(v), {a.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    if (pa->requires_grad)
      pa->grad_ref().array() += n.grad.array() * 0.5 / n.value.array();
  }));
}

// --- reductions -----------------------------------------------------------

Var sum(const Var& a) {
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return Var(make_node(std::move(v), {a.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    if (pa->requires_grad) pa->grad_ref().array() += n.grad(0, 0);
  }));
}

Var mean(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a.value().size());
  Mat v(1, 1);
  v(0, 0) = a.value().sum() * inv;
  return Var(make_node(std::move(v), {a.node()}, [inv](Node& n) {
    Node* pa = n.parents[0].get();
    if (pa->requires_grad) pa->grad_ref().array() += n.grad(0, 0) * inv;
  }));
}

Var dot(const Var& a, const Var& b) {
  if (a.cols() != 1 || b.cols() != 1 || a.rows() != b.rows()) {
    throw std::invalid_argument("dot: expects equal-length column vectors");
  }
  Mat v(1, 1);
  v(0, 0) = a.value().col(0).dot(b.value().col(0));
  return Var(make_node(std::move(v), {a.node(), b.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    Node* pb = n.parents[1].get();
    const double g = n.grad(0, 0);
    if (pa->requires_grad) pa->grad_ref() += g * pb->value;
    if (pb->requires_grad) pb->grad_ref() += g * pa->value;
  }));
}

Var mask_sum(const Var& a, const Mat& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) {
    throw std::invalid_argument("mask_sum: mask shape mismatch");
  }
  Mat v(1, 1);
  v(0, 0) = (a.value().array() * mask.array()).sum();
  return Var(make_node(std::move(v), {a.node()}, [mask](Node& n) {
    Node* pa = n.parents[0].get();
    if (pa->requires_grad) pa->grad_ref() += n.grad(0, 0) * mask;
  }));
}

Var logsumexp(const Var& a) {
  const double m = a.value().maxCoeff();
  const double s = (a.value().array() - m).exp().sum();
  Mat v(1, 1);
  v(0, 0) = m + std::log(s);
  return Var(make_node(std::move(v), {a.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    if (pa->requires_grad) {
      const double lse = n.value(0, 0);
      pa->grad_ref().array() +=
          n.grad(0, 0) * (pa->value.array() - lse).exp();
    }
  }));
}

Var colwise_logsumexp(const Var& a) {
  Mat v(1, a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double m = a.value().col(j).maxCoeff();
    v(0, j) = m + std::log((a.value().col(j).array() - m).exp().sum());
  }
  return Var(make_node(std::move(v), {a.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    if (!pa->requires_grad) return;
    Mat& g = pa->grad_ref();
    for (Eigen::Index j = 0; j < pa->value.cols(); ++j) {
      g.col(j).array() +=
          n.grad(0, j) * (pa->value.col(j).array() - n.value(0, j)).exp();
    }
  }));
}

// --- structure ------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimension mismatch");
  }
  Mat v = a.value() * b.value();
  return Var(make_node(std::move(v), {a.node(), b.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    Node* pb = n.parents[1].get();
    if (pa->requires_grad) pa->grad_ref() += n.grad * pb->value.transpose();
    if (pb->requires_grad) pb->grad_ref() += pa->value.transpose() * n.grad;
  }));
}

Var transpose(const Var& a) {
  Mat v = a.value().transpose();
  return Var(make_node(std::move(v), {a.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    if (pa->requires_grad) pa->grad_ref() += n.grad.transpose();
  }));
}

Var softmax(const Var& a) {
  if (a.cols() != 1) throw std::invalid_argument("softmax: expects column vector");
  Mat v = softmax_of(a.value());
  return Var(make_node(std::move(v), {a.node()}, [](Node& n) {
    Node* pa = n.parents[0].get();
    if (!pa->requires_grad) return;
    const double s = (n.grad.array() * n.value.array()).sum();
    pa->grad_ref().array() += n.value.array() * (n.grad.array() - s);
  }));
}

Var vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("vcat: no parts");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("vcat: column mismatch");
    rows += p.rows();
  }
  Mat v(rows, cols);
  std::vector<NodePtr> parents;
  parents.reserve(parts.size());
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    parents.push_back(p.node());
    r += p.rows();
  }
  return Var(make_node(std::move(v), std::move(parents), [](Node& n) {
    Eigen::Index r = 0;
    for (auto& p : n.parents) {
      if (p->requires_grad)
        p->grad_ref() += n.grad.middleRows(r, p->value.rows());
      r += p->value.rows();
    }
  }));
}

Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: no parts");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("hcat: row mismatch");
    cols += p.cols();
  }
  Mat v(rows, cols);
  std::vector<NodePtr> parents;
  parents.reserve(parts.size());
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    parents.push_back(p.node());
    c += p.cols();
  }
  return Var(make_node(std::move(v), std::move(parents), [](Node& n) {
    Eigen::Index c = 0;
    for (auto& p : n.parents) {
      if (p->requires_grad)
        p->grad_ref() += n.grad.middleCols(c, p->value.cols());
      c += p->value.cols();
    }
  }));
}

Var block(const Var& a, Eigen::Index r, Eigen::Index c, Eigen::Index nr,
          Eigen::Index nc) {
  if (r < 0 || c < 0 || r + nr > a.rows() || c + nc > a.cols()) {
    throw std::invalid_argument("block: out of range");
  }
  Mat v = a.value().block(r, c, nr, nc);
  return Var(make_node(std::move(v), {a.node()}, [r, c, nr, nc](Node& n) {
    Node* pa = n.parents[0].get();
    if (pa->requires_grad) pa->grad_ref().block(r, c, nr, nc) += n.grad;
  }));
}

Var rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  return block(a, start, 0, count, a.cols());
}

Var lookup_row(const Var& table, Eigen::Index r) {
  if (r < 0 || r >= table.rows()) {
    throw std::invalid_argument("lookup_row: index out of range");
  }
  Mat v = table.value().row(r).transpose();
  return Var(make_node(std::move(v), {table.node()}, [r](Node& n) {
    Node* pt = n.parents[0].get();
    if (pt->requires_grad) pt->grad_ref().row(r) += n.grad.transpose();
  }));
}

Var broadcast_cols(const Var& v, Eigen::Index n) {
  if (v.cols() != 1) throw std::invalid_argument("broadcast_cols: expects m x 1");
  Mat val = v.value().replicate(1, n);
  return Var(make_node(std::move(val), {v.node()}, [](Node& n) {
    Node* pv = n.parents[0].get();
    if (pv->requires_grad) pv->grad_ref() += n.grad.rowwise().sum();
  }));
}

Var stop_gradient(const Var& a) { return Var::constant(a.value()); }

}  // namespace rrl::ad
