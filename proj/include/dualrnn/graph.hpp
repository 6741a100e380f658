#ifndef DUALRNN_GRAPH_HPP
#define DUALRNN_GRAPH_HPP

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "dualrnn/tensor.hpp"

namespace dualrnn {

// Reverse-mode tape over dense tensors. Every op records its output value and
// a closure holding the analytic backward rule; backward() replays the
// closures in reverse order, accumulating into node gradients. Nodes are
// created per window and the whole tape is discarded afterwards, which is
// what detaches state across truncated-BPTT windows.
template <typename T>
class Graph {
 public:
  using Id = int32_t;

  Id leaf(Tensor<T> v) {
    nodes_.push_back(Node{std::move(v), Tensor<T>()});
    return static_cast<Id>(nodes_.size() - 1);
  }

  const Tensor<T>& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Tensor<T>& grad(Id id) const { return nodes_[static_cast<size_t>(id)].grad; }

  Id matmul(Id a, Id b) {
    Id c = push(dualrnn::matmul(val(a), val(b)));
    record(c, [this, a, b, c] {
      const Tensor<T>& g = nodes_[c].grad;
      accumulate(a, dualrnn::matmul_nt(g, val(b)));
      accumulate(b, dualrnn::matmul_tn(val(a), g));
    });
    return c;
  }

  // a * b^T; the natural orientation for x[B x in] * W[out x in]^T.
  Id matmul_nt(Id a, Id b) {
    Id c = push(dualrnn::matmul_nt(val(a), val(b)));
    record(c, [this, a, b, c] {
      const Tensor<T>& g = nodes_[c].grad;
      accumulate(a, dualrnn::matmul(g, val(b)));
      accumulate(b, dualrnn::matmul_tn(g, val(a)));
    });
    return c;
  }

  Id add(Id a, Id b) {
    const bool bias_bcast = val(a).shape() != val(b).shape();
    Id c = push(dualrnn::add(val(a), val(b)));
    record(c, [this, a, b, c, bias_bcast] {
      const Tensor<T>& g = nodes_[c].grad;
      accumulate(a, g);
      if (!bias_bcast) {
        accumulate(b, g);
      } else {
        Tensor<T> gb(val(b).shape());
        for (int64_t i = 0; i < g.rows(); ++i)
          for (int64_t j = 0; j < g.cols(); ++j) gb[j] += g.at(i, j);
        accumulate(b, gb);
      }
    });
    return c;
  }

  Id mul(Id a, Id b) {
    Id c = push(dualrnn::mul(val(a), val(b)));
    record(c, [this, a, b, c] {
      const Tensor<T>& g = nodes_[c].grad;
      accumulate(a, dualrnn::mul(g, val(b)));
      accumulate(b, dualrnn::mul(g, val(a)));
    });
    return c;
  }

  Id sigmoid(Id a) {
    Id c = push(dualrnn::sigmoid(val(a)));
    record(c, [this, a, c] {
      const Tensor<T>& y = nodes_[c].value;
      const Tensor<T>& g = nodes_[c].grad;
      Tensor<T> da(y.shape());
      for (int64_t i = 0; i < y.size(); ++i) da[i] = g[i] * y[i] * (T(1) - y[i]);
      accumulate(a, da);
    });
    return c;
  }

  Id tanh(Id a) {
    Id c = push(tanh_t(val(a)));
    record(c, [this, a, c] {
      const Tensor<T>& y = nodes_[c].value;
      const Tensor<T>& g = nodes_[c].grad;
      Tensor<T> da(y.shape());
      for (int64_t i = 0; i < y.size(); ++i) da[i] = g[i] * (T(1) - y[i] * y[i]);
      accumulate(a, da);
    });
    return c;
  }

  Id relu(Id a) {
    Id c = push(dualrnn::relu(val(a)));
    record(c, [this, a, c] {
      const Tensor<T>& y = nodes_[c].value;
      const Tensor<T>& g = nodes_[c].grad;
      Tensor<T> da(y.shape());
      for (int64_t i = 0; i < y.size(); ++i) da[i] = y[i] > T(0) ? g[i] : T(0);
      accumulate(a, da);
    });
    return c;
  }

  Id scale(Id a, T k) {
    Id c = push(dualrnn::scale(val(a), k));
    record(c, [this, a, c, k] { accumulate(a, dualrnn::scale(nodes_[c].grad, k)); });
    return c;
  }

  // Elementwise product with a constant tensor (dropout masks).
  Id cmul(Id a, Tensor<T> mask) {
    Id c = push(dualrnn::mul(val(a), mask));
    record(c, [this, a, c, m = std::move(mask)] {
      accumulate(a, dualrnn::mul(nodes_[c].grad, m));
    });
    return c;
  }

  // out[i,:] = table[ids[i],:]; backward scatters into the looked-up rows.
  Id lookup_rows(Id table, std::vector<int32_t> ids) {
    const Tensor<T>& tab = val(table);
    detail::require(tab.shape().rank == 2,
                    "lookup_rows: table must be rank-2, got " + tab.shape().str());
    const int64_t w = tab.cols();
    Tensor<T> out(Shape(static_cast<int64_t>(ids.size()), w));
    for (size_t i = 0; i < ids.size(); ++i) {
      const int32_t id = ids[i];
      if (id < 0 || id >= tab.rows())
        throw error("data", "token id " + std::to_string(id) + " out of range [0," +
                                std::to_string(tab.rows()) + ")");
      std::copy_n(tab.data() + id * w, w, out.data() + static_cast<int64_t>(i) * w);
    }
    Id c = push(std::move(out));
    record(c, [this, table, c, ids = std::move(ids), w] {
      const Tensor<T>& g = nodes_[c].grad;
      Tensor<T>& gt = grad_ref(table);
      for (size_t i = 0; i < ids.size(); ++i) {
        T* dst = gt.data() + ids[i] * w;
        const T* src = g.data() + static_cast<int64_t>(i) * w;
        for (int64_t j = 0; j < w; ++j) dst[j] += src[j];
      }
    });
    return c;
  }

  // Scalar node: sum(a .* c) for a constant c of identical shape.
  Id dot_const(Id a, Tensor<T> c) {
    const Tensor<T>& x = val(a);
    detail::require(x.shape() == c.shape(), "dot_const: incompatible shapes: " +
                                                x.shape().str() + " vs " + c.shape().str());
    T s = 0;
    for (int64_t i = 0; i < x.size(); ++i) s += x[i] * c[i];
    Id out = push(Tensor<T>(Shape(int64_t(1)), std::vector<T>{s}));
    record(out, [this, a, out, c = std::move(c)] {
      accumulate(a, dualrnn::scale(c, nodes_[out].grad[0]));
    });
    return out;
  }

  // Scalar node: coeff * sum(a^2). Keras-style L2 penalty (no 1/2 factor).
  Id l2_sumsq(Id a, T coeff) {
    const Tensor<T>& x = val(a);
    T s = 0;
    for (int64_t i = 0; i < x.size(); ++i) s += x[i] * x[i];
    Id c = push(Tensor<T>(Shape(int64_t(1)), std::vector<T>{coeff * s}));
    record(c, [this, a, c, coeff] {
      const T g = nodes_[c].grad[0];
      const Tensor<T>& x2 = val(a);
      Tensor<T> da(x2.shape());
      for (int64_t i = 0; i < x2.size(); ++i) da[i] = T(2) * coeff * g * x2[i];
      accumulate(a, da);
    });
    return c;
  }

  // Scalar node: sum of the mean row cross-entropies of softmax(logits/tau)
  // against integer targets, multiplied by `weight`. Softmax and NLL are
  // fused so the backward rule is the stable (p - onehot) form.
  Id softmax_xent(Id logits, std::vector<int32_t> targets, T temperature, T weight) {
    const Tensor<T>& z = val(logits);
    detail::require(z.shape().rank == 2 &&
                        z.rows() == static_cast<int64_t>(targets.size()),
                    "softmax_xent: logits " + z.shape().str() + " vs " +
                        std::to_string(targets.size()) + " targets");
    Tensor<T> p = softmax_rows(z, temperature);
    const int64_t n = z.rows(), v = z.cols();
    T nll = 0;
    for (int64_t i = 0; i < n; ++i) {
      // log p computed from logits directly, avoiding log of a tiny softmax.
      const T* zi = z.data() + i * v;
      T zmax = zi[0];
      for (int64_t j = 1; j < v; ++j) zmax = std::max(zmax, zi[j]);
      T lse = 0;
      for (int64_t j = 0; j < v; ++j) lse += std::exp((zi[j] - zmax) / temperature);
      nll += std::log(lse) - (zi[targets[static_cast<size_t>(i)]] - zmax) / temperature;
    }
    Id c = push(Tensor<T>(Shape(int64_t(1)), std::vector<T>{weight * nll}));
    record(c, [this, logits, c, targets = std::move(targets), temperature, weight,
               p = std::move(p)] {
      const T g = nodes_[c].grad[0] * weight / temperature;
      const int64_t n2 = p.rows(), v2 = p.cols();
      Tensor<T> dz(p.shape());
      for (int64_t i = 0; i < n2; ++i) {
        const T* pi = p.data() + i * v2;
        T* di = dz.data() + i * v2;
        for (int64_t j = 0; j < v2; ++j) di[j] = g * pi[j];
        di[targets[static_cast<size_t>(i)]] -= g;
      }
      accumulate(logits, dz);
    });
    return c;
  }

  Id sum_scalars(const std::vector<Id>& parts) {
    T s = 0;
    for (Id p : parts) s += val(p)[0];
    Id c = push(Tensor<T>(Shape(int64_t(1)), std::vector<T>{s}));
    record(c, [this, parts, c] {
      const T g = nodes_[c].grad[0];
      for (Id p : parts) grad_ref(p)[0] += g;
    });
    return c;
  }

  // Seeds d(root)/d(root) = 1 and replays the tape.
  void backward(Id root) {
    detail::require(val(root).size() == 1, "backward root must be a scalar node");
    grad_ref(root).fill(T(0));
    grad_ref(root)[0] = T(1);
    for (size_t i = ops_.size(); i-- > 0;) ops_[i]();
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated on first accumulation
  };

  const Tensor<T>& val(Id id) const { return nodes_[static_cast<size_t>(id)].value; }

  Tensor<T>& grad_ref(Id id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  void accumulate(Id id, const Tensor<T>& g) {
    Tensor<T>& dst = grad_ref(id);
    for (int64_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
  }

  Id push(Tensor<T> v) {
    nodes_.push_back(Node{std::move(v), Tensor<T>()});
    return static_cast<Id>(nodes_.size() - 1);
  }

  // A node whose gradient buffer was never touched received no contribution
  // from the root; its backward rule has nothing to propagate and is skipped,
  // so dead subgraphs stay inert.
  void record(Id out, std::function<void()> op) {
    ops_.push_back([this, out, op = std::move(op)] {
      if (!nodes_[static_cast<size_t>(out)].grad.empty()) op();
    });
  }

  std::vector<Node> nodes_;
  std::vector<std::function<void()>> ops_;
};

}  // namespace dualrnn

#endif  // DUALRNN_GRAPH_HPP
