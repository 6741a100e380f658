#ifndef DUALRNN_TENSOR_HPP
#define DUALRNN_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "dualrnn/common.hpp"
#include "dualrnn/rng.hpp"

namespace dualrnn {

// Dense row-major array, rank 1..3. Values only; gradient buffers are paired
// with values by the graph and the parameter store, not carried here.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s) : shape_(s), v_(static_cast<size_t>(s.size()), T(0)) {}
  Tensor(Shape s, T fill) : shape_(s), v_(static_cast<size_t>(s.size()), fill) {}
  Tensor(Shape s, std::vector<T> values) : shape_(s), v_(std::move(values)) {
    if (static_cast<int64_t>(v_.size()) != shape_.size())
      throw shape_error("value count " + std::to_string(v_.size()) +
                        " does not fill shape " + shape_.str());
  }

  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor full(Shape s, T fill) { return Tensor(s, fill); }
  static Tensor identity(int64_t n) {
    Tensor t(Shape(n, n));
    for (int64_t i = 0; i < n; ++i) t.at(i, i) = T(1);
    return t;
  }
  static Tensor uniform(Shape s, T lo, T hi, RngStream& rng) {
    Tensor t(s);
    for (auto& x : t.v_) x = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  const Shape& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(v_.size()); }
  int64_t rows() const { return shape_.rows(); }
  int64_t cols() const { return shape_.cols(); }
  bool empty() const { return v_.empty(); }

  T* data() { return v_.data(); }
  const T* data() const { return v_.data(); }
  std::vector<T>& values() { return v_; }
  const std::vector<T>& values() const { return v_; }

  T& operator[](int64_t i) { return v_[static_cast<size_t>(i)]; }
  T operator[](int64_t i) const { return v_[static_cast<size_t>(i)]; }
  T& at(int64_t i, int64_t j) { return v_[static_cast<size_t>(i * shape_.d[1] + j)]; }
  T at(int64_t i, int64_t j) const { return v_[static_cast<size_t>(i * shape_.d[1] + j)]; }
  T& at(int64_t i, int64_t j, int64_t k) {
    return v_[static_cast<size_t>((i * shape_.d[1] + j) * shape_.d[2] + k)];
  }
  T at(int64_t i, int64_t j, int64_t k) const {
    return v_[static_cast<size_t>((i * shape_.d[1] + j) * shape_.d[2] + k)];
  }

  void fill(T x) { std::fill(v_.begin(), v_.end(), x); }

  bool all_finite() const {
    for (T x : v_)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(v_[static_cast<size_t>(i)]);
    return out;
  }

 private:
  Shape shape_;
  std::vector<T> v_;
};

namespace detail {
inline void require(bool ok, const std::string& msg) {
  if (!ok) throw shape_error(msg);
}
}  // namespace detail

// C = A[m x k] * B[k x n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape().rank == 2 && b.shape().rank == 2 && a.cols() == b.rows(),
                  "matmul: inner dimensions disagree: " + a.shape().str() + " vs " +
                      b.shape().str());
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor<T> c(Shape(m, n));
  for (int64_t i = 0; i < m; ++i) {
    const T* ai = a.data() + i * k;
    T* ci = c.data() + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const T av = ai[p];
      if (av == T(0)) continue;
      const T* bp = b.data() + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
  return c;
}

// C = A[m x k] * B[n x k]^T
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape().rank == 2 && b.shape().rank == 2 && a.cols() == b.cols(),
                  "matmul_nt: inner dimensions disagree: " + a.shape().str() + " vs " +
                      b.shape().str());
  const int64_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor<T> c(Shape(m, n));
  for (int64_t i = 0; i < m; ++i) {
    const T* ai = a.data() + i * k;
    T* ci = c.data() + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const T* bj = b.data() + j * k;
      T acc = 0;
      for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
  return c;
}

// C = A^T[k x m] * B[k x n] (a is [k x m])
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape().rank == 2 && b.shape().rank == 2 && a.rows() == b.rows(),
                  "matmul_tn: inner dimensions disagree: " + a.shape().str() + " vs " +
                      b.shape().str());
  const int64_t k = a.rows(), m = a.cols(), n = b.cols();
  Tensor<T> c(Shape(m, n));
  for (int64_t p = 0; p < k; ++p) {
    const T* ap = a.data() + p * m;
    const T* bp = b.data() + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const T av = ap[i];
      if (av == T(0)) continue;
      T* ci = c.data() + i * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
  return c;
}

// Elementwise sum; a rank-1 bias may broadcast over the rows of a rank-2 lhs.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() == b.shape()) {
    Tensor<T> c = a;
    for (int64_t i = 0; i < c.size(); ++i) c[i] += b[i];
    return c;
  }
  if (a.shape().rank == 2 && b.shape().rank == 1 && a.cols() == b.shape().d[0]) {
    Tensor<T> c = a;
    for (int64_t i = 0; i < a.rows(); ++i)
      for (int64_t j = 0; j < a.cols(); ++j) c.at(i, j) += b[j];
    return c;
  }
  throw shape_error("add: incompatible shapes: " + a.shape().str() + " vs " + b.shape().str());
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape() == b.shape(), "mul: incompatible shapes: " + a.shape().str() +
                                              " vs " + b.shape().str());
  Tensor<T> c = a;
  for (int64_t i = 0; i < c.size(); ++i) c[i] *= b[i];
  return c;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  Tensor<T> c = a;
  for (int64_t i = 0; i < c.size(); ++i) c[i] = T(1) / (T(1) + std::exp(-c[i]));
  return c;
}

template <typename T>
Tensor<T> tanh_t(const Tensor<T>& a) {
  Tensor<T> c = a;
  for (int64_t i = 0; i < c.size(); ++i) c[i] = std::tanh(c[i]);
  return c;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  Tensor<T> c = a;
  for (int64_t i = 0; i < c.size(); ++i) c[i] = c[i] > T(0) ? c[i] : T(0);
  return c;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T k) {
  Tensor<T> c = a;
  for (int64_t i = 0; i < c.size(); ++i) c[i] *= k;
  return c;
}

// Row-wise softmax of logits/temperature, row max subtracted before exp.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits, T temperature) {
  if (!(temperature > T(0)))
    throw numeric_error("softmax temperature must be positive, got " +
                        std::to_string(static_cast<double>(temperature)));
  detail::require(logits.shape().rank == 2, "softmax_rows expects a rank-2 tensor, got " +
                                                logits.shape().str());
  const int64_t m = logits.rows(), n = logits.cols();
  Tensor<T> p(logits.shape());
  for (int64_t i = 0; i < m; ++i) {
    const T* zi = logits.data() + i * n;
    T* pi = p.data() + i * n;
    T zmax = zi[0];
    for (int64_t j = 1; j < n; ++j) zmax = std::max(zmax, zi[j]);
    T sum = 0;
    for (int64_t j = 0; j < n; ++j) {
      pi[j] = std::exp((zi[j] - zmax) / temperature);
      sum += pi[j];
    }
    for (int64_t j = 0; j < n; ++j) pi[j] /= sum;
  }
  return p;
}

// Inverted-dropout mask: 0 with probability rate, 1/(1-rate) otherwise, so the
// mask has unit expectation and evaluation needs no rescaling.
template <typename T>
Tensor<T> dropout_mask(Shape s, T rate, RngStream& rng) {
  if (!(rate >= T(0) && rate < T(1)))
    throw numeric_error("dropout rate must lie in [0,1), got " +
                        std::to_string(static_cast<double>(rate)));
  Tensor<T> m(s, T(1));
  if (rate == T(0)) return m;
  const T keep = T(1) - rate;
  const T inv = T(1) / keep;
  for (int64_t i = 0; i < m.size(); ++i)
    m[i] = rng.next_unit() < static_cast<double>(rate) ? T(0) : inv;
  return m;
}

}  // namespace dualrnn

#endif  // DUALRNN_TENSOR_HPP
