#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "querymesh/error.hpp"

namespace querymesh::ag {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
using BoolArr = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Gradient recording switch. Off during inference so forward passes skip
// building backward closures.
inline bool& grad_enabled() {
  thread_local bool on = true;
  return on;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
  ~NoGradGuard() { grad_enabled() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename S>
struct Node {
  Mat<S> value;
  Mat<S> grad;  // allocated lazily on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<S>>> parents;
  std::function<void()> backprop;  // accumulates this->grad into parents

  Mat<S>& grad_ref() {
    if (grad.size() == 0) grad = Mat<S>::Zero(value.rows(), value.cols());
    return grad;
  }
};

// Handle to one matrix-valued node of a dynamically built computation DAG.
// Intermediate nodes die with their handles; parameters are long-lived
// leaves whose gradients persist until zero_grad().
template <typename S>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<S>> n) : node_(std::move(n)) {}

  static Var constant(Mat<S> v) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(v);
    return Var(n);
  }
  static Var param(Mat<S> v) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(v);
    n->requires_grad = true;
    return Var(n);
  }

  bool defined() const { return node_ != nullptr; }
  const Mat<S>& value() const { return node_->value; }
  Mat<S>& mutable_value() { return node_->value; }
  const Mat<S>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Eigen::Index size() const { return node_->value.size(); }

  void zero_grad() {
    if (node_) node_->grad.setZero(node_->value.rows(), node_->value.cols());
  }

  std::shared_ptr<Node<S>>& node() { return node_; }
  const std::shared_ptr<Node<S>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<S>> node_;
};

namespace detail {

template <typename S>
std::shared_ptr<Node<S>> make_node(Mat<S> value,
                                   std::vector<std::shared_ptr<Node<S>>> parents) {
  auto n = std::make_shared<Node<S>>();
  n->value = std::move(value);
  if (grad_enabled()) {
    for (const auto& p : parents)
      if (p->requires_grad) {
        n->requires_grad = true;
        break;
      }
    if (n->requires_grad) n->parents = std::move(parents);
  }
  return n;
}

}  // namespace detail

// ---- primitive ops ---------------------------------------------------------

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  auto n = detail::make_node<S>(a.value() + b.value(), {a.node(), b.node()});
  if (n->requires_grad) {
    auto *na = a.node().get(), *nb = b.node().get(), *out = n.get();
    n->backprop = [na, nb, out] {
      if (na->requires_grad) na->grad_ref() += out->grad;
      if (nb->requires_grad) nb->grad_ref() += out->grad;
    };
  }
  return Var<S>(n);
}

// Broadcasts a [1 x d] row (bias) over every row of a.
template <typename S>
Var<S> add_rowvec(const Var<S>& a, const Var<S>& b) {
  require(b.rows() == 1 && b.cols() == a.cols(), "add_rowvec: bias must be [1 x cols]");
  Mat<S> v = a.value().rowwise() + b.value().row(0);
  auto n = detail::make_node<S>(std::move(v), {a.node(), b.node()});
  if (n->requires_grad) {
    auto *na = a.node().get(), *nb = b.node().get(), *out = n.get();
    n->backprop = [na, nb, out] {
      if (na->requires_grad) na->grad_ref() += out->grad;
      if (nb->requires_grad) nb->grad_ref() += out->grad.colwise().sum();
    };
  }
  return Var<S>(n);
}

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  auto n = detail::make_node<S>(a.value() * b.value(), {a.node(), b.node()});
  if (n->requires_grad) {
    auto *na = a.node().get(), *nb = b.node().get(), *out = n.get();
    n->backprop = [na, nb, out] {
      if (na->requires_grad) na->grad_ref().noalias() += out->grad * nb->value.transpose();
      if (nb->requires_grad) nb->grad_ref().noalias() += na->value.transpose() * out->grad;
    };
  }
  return Var<S>(n);
}

// a * b^T without materializing the transpose as a node.
template <typename S>
Var<S> matmul_nt(const Var<S>& a, const Var<S>& b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  auto n = detail::make_node<S>(a.value() * b.value().transpose(), {a.node(), b.node()});
  if (n->requires_grad) {
    auto *na = a.node().get(), *nb = b.node().get(), *out = n.get();
    n->backprop = [na, nb, out] {
      if (na->requires_grad) na->grad_ref().noalias() += out->grad * nb->value;
      if (nb->requires_grad) nb->grad_ref().noalias() += out->grad.transpose() * na->value;
    };
  }
  return Var<S>(n);
}

template <typename S>
Var<S> scale(const Var<S>& a, S c) {
  auto n = detail::make_node<S>(Mat<S>(a.value() * c), {a.node()});
  if (n->requires_grad) {
    auto* na = a.node().get();
    auto* out = n.get();
    n->backprop = [na, out, c] { na->grad_ref() += out->grad * c; };
  }
  return Var<S>(n);
}

template <typename S>
Var<S> cwise_mul(const Var<S>& a, const Var<S>& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "cwise_mul: shape mismatch");
  auto n = detail::make_node<S>(a.value().cwiseProduct(b.value()), {a.node(), b.node()});
  if (n->requires_grad) {
    auto *na = a.node().get(), *nb = b.node().get(), *out = n.get();
    n->backprop = [na, nb, out] {
      if (na->requires_grad) na->grad_ref() += out->grad.cwiseProduct(nb->value);
      if (nb->requires_grad) nb->grad_ref() += out->grad.cwiseProduct(na->value);
    };
  }
  return Var<S>(n);
}

// Elementwise product with a fixed matrix (dropout masks and the like).
template <typename S>
Var<S> cwise_mul_const(const Var<S>& a, Mat<S> m) {
  require(a.rows() == m.rows() && a.cols() == m.cols(), "cwise_mul_const: shape mismatch");
  auto n = detail::make_node<S>(a.value().cwiseProduct(m), {a.node()});
  if (n->requires_grad) {
    auto* na = a.node().get();
    auto* out = n.get();
    n->backprop = [na, out, m = std::move(m)] {
      na->grad_ref() += out->grad.cwiseProduct(m);
    };
  }
  return Var<S>(n);
}

// Rows of an embedding table selected by token id; repeated ids accumulate.
template <typename S>
Var<S> gather_rows(const Var<S>& table, std::vector<int> ids) {
  Mat<S> v(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (size_t t = 0; t < ids.size(); ++t) {
    require(ids[t] >= 0 && ids[t] < table.rows(), "gather_rows: id out of range");
    v.row(static_cast<Eigen::Index>(t)) = table.value().row(ids[t]);
  }
  auto n = detail::make_node<S>(std::move(v), {table.node()});
  if (n->requires_grad) {
    auto* nt = table.node().get();
    auto* out = n.get();
    n->backprop = [nt, out, ids = std::move(ids)] {
      auto& g = nt->grad_ref();
      for (size_t t = 0; t < ids.size(); ++t)
        g.row(ids[t]) += out->grad.row(static_cast<Eigen::Index>(t));
    };
  }
  return Var<S>(n);
}

template <typename S>
Var<S> col_block(const Var<S>& a, Eigen::Index start, Eigen::Index len) {
  require(start >= 0 && len > 0 && start + len <= a.cols(), "col_block: out of range");
  auto n = detail::make_node<S>(Mat<S>(a.value().middleCols(start, len)), {a.node()});
  if (n->requires_grad) {
    auto* na = a.node().get();
    auto* out = n.get();
    n->backprop = [na, out, start, len] {
      na->grad_ref().middleCols(start, len) += out->grad;
    };
  }
  return Var<S>(n);
}

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Eigen::Index rows = parts[0].rows(), total = 0;
  std::vector<std::shared_ptr<Node<S>>> parents;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: row mismatch");
    total += p.cols();
    parents.push_back(p.node());
  }
  Mat<S> v(rows, total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  auto n = detail::make_node<S>(std::move(v), std::move(parents));
  if (n->requires_grad) {
    std::vector<Node<S>*> raw;
    std::vector<Eigen::Index> widths;
    for (const auto& p : parts) {
      raw.push_back(p.node().get());
      widths.push_back(p.cols());
    }
    auto* out = n.get();
    n->backprop = [raw = std::move(raw), widths = std::move(widths), out] {
      Eigen::Index at = 0;
      for (size_t i = 0; i < raw.size(); ++i) {
        if (raw[i]->requires_grad) raw[i]->grad_ref() += out->grad.middleCols(at, widths[i]);
        at += widths[i];
      }
    };
  }
  return Var<S>(n);
}

// Appends zero rows up to target_len. Used to bring hypothesis encodings of
// different lengths to a common T before fusion.
template <typename S>
Var<S> pad_rows(const Var<S>& a, Eigen::Index target_len) {
  require(target_len >= a.rows(), "pad_rows: target below current length");
  if (target_len == a.rows()) return a;
  Mat<S> v = Mat<S>::Zero(target_len, a.cols());
  v.topRows(a.rows()) = a.value();
  auto n = detail::make_node<S>(std::move(v), {a.node()});
  if (n->requires_grad) {
    auto* na = a.node().get();
    auto* out = n.get();
    Eigen::Index r = a.rows();
    n->backprop = [na, out, r] { na->grad_ref() += out->grad.topRows(r); };
  }
  return Var<S>(n);
}

// Row-wise softmax restricted to valid entries; fully masked rows become
// all-zero. The cached output drives the backward pass.
template <typename S>
Var<S> softmax_rows_masked(const Var<S>& a, const BoolArr& valid) {
  require(valid.rows() == a.rows() && valid.cols() == a.cols(),
          "softmax_rows_masked: mask shape mismatch");
  Mat<S> p = Mat<S>::Zero(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    S maxv = std::numeric_limits<S>::lowest();
    bool any = false;
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      if (valid(r, c)) {
        any = true;
        maxv = std::max(maxv, a.value()(r, c));
      }
    if (!any) continue;
    S sum = S(0);
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      if (valid(r, c)) {
        p(r, c) = std::exp(a.value()(r, c) - maxv);
        sum += p(r, c);
      }
    p.row(r) /= sum;
  }
  auto n = detail::make_node<S>(std::move(p), {a.node()});
  if (n->requires_grad) {
    auto* na = a.node().get();
    auto* out = n.get();
    n->backprop = [na, out] {
      auto& g = na->grad_ref();
      const Mat<S>& p = out->value;
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        S dot = out->grad.row(r).cwiseProduct(p.row(r)).sum();
        g.row(r).array() +=
            p.row(r).array() * (out->grad.row(r).array() - dot);
      }
    };
  }
  return Var<S>(n);
}

// Row-wise layer normalization with learned gain/offset ([1 x d] each).
template <typename S>
Var<S> layer_norm(const Var<S>& a, const Var<S>& gamma, const Var<S>& beta, S eps = S(1e-5)) {
  require(gamma.rows() == 1 && gamma.cols() == a.cols(), "layer_norm: bad gamma shape");
  require(beta.rows() == 1 && beta.cols() == a.cols(), "layer_norm: bad beta shape");
  const Eigen::Index T = a.rows(), d = a.cols();
  Mat<S> xhat(T, d);
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(T);
  for (Eigen::Index r = 0; r < T; ++r) {
    S mean = a.value().row(r).mean();
    S var = (a.value().row(r).array() - mean).square().mean();
    inv_std(r) = S(1) / std::sqrt(var + eps);
    xhat.row(r) = (a.value().row(r).array() - mean) * inv_std(r);
  }
  Mat<S> v = ((xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
              beta.value().row(0).array())
                 .matrix();
  auto n = detail::make_node<S>(std::move(v), {a.node(), gamma.node(), beta.node()});
  if (n->requires_grad) {
    auto *na = a.node().get(), *ng = gamma.node().get(), *nb = beta.node().get();
    auto* out = n.get();
    n->backprop = [na, ng, nb, out, xhat = std::move(xhat), inv_std = std::move(inv_std),
                   gamma_v = Mat<S>(gamma.value())] {
      const Eigen::Index T = out->grad.rows(), d = out->grad.cols();
      if (ng->requires_grad)
        ng->grad_ref().row(0) += out->grad.cwiseProduct(xhat).colwise().sum();
      if (nb->requires_grad) nb->grad_ref().row(0) += out->grad.colwise().sum();
      if (na->requires_grad) {
        auto& g = na->grad_ref();
        for (Eigen::Index r = 0; r < T; ++r) {
          Eigen::Array<S, 1, Eigen::Dynamic> dxhat =
              out->grad.row(r).array() * gamma_v.row(0).array();
          S m1 = dxhat.mean();
          S m2 = (dxhat * xhat.row(r).array()).mean();
          g.row(r).array() += inv_std(r) * (dxhat - m1 - xhat.row(r).array() * m2);
        }
        (void)d;
      }
    };
  }
  return Var<S>(n);
}

// Gaussian error linear unit, exact erf form (smooth, so finite-difference
// checks behave).
template <typename S>
Var<S> gelu(const Var<S>& a) {
  static const S inv_sqrt2 = S(1) / std::sqrt(S(2));
  static const S inv_sqrt2pi = S(1) / std::sqrt(S(2) * S(M_PI));
  Mat<S> v = a.value().unaryExpr(
      [](S x) { return S(0.5) * x * (S(1) + std::erf(x * inv_sqrt2)); });
  auto n = detail::make_node<S>(std::move(v), {a.node()});
  if (n->requires_grad) {
    auto* na = a.node().get();
    auto* out = n.get();
    n->backprop = [na, out, x = Mat<S>(a.value())] {
      Mat<S> d = x.unaryExpr([](S xi) {
        return S(0.5) * (S(1) + std::erf(xi * inv_sqrt2)) +
               xi * inv_sqrt2pi * std::exp(S(-0.5) * xi * xi);
      });
      na->grad_ref() += out->grad.cwiseProduct(d);
    };
  }
  return Var<S>(n);
}

// Sum over rows of -log softmax(logits_row)[target], as a 1x1 node.
// Pair with scale() to get a mean over any token count.
template <typename S>
Var<S> cross_entropy_sum(const Var<S>& logits, std::vector<int> targets) {
  require(static_cast<Eigen::Index>(targets.size()) == logits.rows(),
          "cross_entropy_sum: one target per row required");
  const Eigen::Index T = logits.rows();
  Mat<S> probs(T, logits.cols());
  S total = S(0);
  for (Eigen::Index r = 0; r < T; ++r) {
    require(targets[static_cast<size_t>(r)] >= 0 &&
                targets[static_cast<size_t>(r)] < logits.cols(),
            "cross_entropy_sum: target id out of range");
    S maxv = logits.value().row(r).maxCoeff();
    Eigen::Array<S, 1, Eigen::Dynamic> e = (logits.value().row(r).array() - maxv).exp();
    S z = e.sum();
    probs.row(r) = (e / z).matrix();
    total += -(logits.value()(r, targets[static_cast<size_t>(r)]) - maxv - std::log(z));
  }
  Mat<S> v(1, 1);
  v(0, 0) = total;
  auto n = detail::make_node<S>(std::move(v), {logits.node()});
  if (n->requires_grad) {
    auto* nl = logits.node().get();
    auto* out = n.get();
    n->backprop = [nl, out, probs = std::move(probs), targets = std::move(targets)] {
      S g = out->grad(0, 0);
      auto& dl = nl->grad_ref();
      dl += probs * g;
      for (Eigen::Index r = 0; r < probs.rows(); ++r)
        dl(r, targets[static_cast<size_t>(r)]) -= g;
    };
  }
  return Var<S>(n);
}

// ---- backward --------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Parameters accumulate into .grad;
// call zero_grad() on them between steps.
template <typename S>
void backward(const Var<S>& loss) {
  require(loss.defined() && loss.rows() == 1 && loss.cols() == 1,
          "backward: loss must be a 1x1 node");
  require(loss.requires_grad(), "backward: loss does not require grad (inference graph?)");

  // Iterative post-order DFS for the topological order.
  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> seen;
  std::vector<std::pair<Node<S>*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<S>* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_ref()(0, 0) += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop();
}

}  // namespace querymesh::ag
