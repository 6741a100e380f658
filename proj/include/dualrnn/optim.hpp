#ifndef DUALRNN_OPTIM_HPP
#define DUALRNN_OPTIM_HPP

#include <cmath>

#include "dualrnn/model.hpp"

namespace dualrnn {

// Scales every gradient by max_norm/g when the global L2 norm g exceeds
// max_norm. max_norm == 0 disables clipping. Returns the pre-clip norm.
template <typename T>
T clip_global_norm(ParamStore<T>& store, T max_norm) {
  double sumsq = 0;
  for (size_t i = 0; i < store.count(); ++i) {
    const Tensor<T>& g = store.entry(static_cast<int>(i)).grad;
    for (int64_t j = 0; j < g.size(); ++j)
      sumsq += static_cast<double>(g[j]) * static_cast<double>(g[j]);
  }
  const T norm = static_cast<T>(std::sqrt(sumsq));
  if (max_norm > T(0) && norm > max_norm) {
    const T s = max_norm / norm;
    for (size_t i = 0; i < store.count(); ++i) {
      Tensor<T>& g = store.entry(static_cast<int>(i)).grad;
      for (int64_t j = 0; j < g.size(); ++j) g[j] *= s;
    }
  }
  return norm;
}

template <typename T>
struct NadamConfig {
  T lr = static_cast<T>(1e-3);
  T beta1 = static_cast<T>(0.9);
  T beta2 = static_cast<T>(0.999);
  T eps = static_cast<T>(1e-8);
};

// Adam with Nesterov momentum: the first-moment estimate is looked ahead one
// step, so the update blends the bias-corrected momentum at t+1 with the
// bias-corrected current gradient. beta1 = 0 degenerates to bias-corrected
// RMSProp.
template <typename T>
class Nadam {
 public:
  explicit Nadam(NadamConfig<T> cfg = {}) : cfg_(cfg) {}

  const NadamConfig<T>& config() const { return cfg_; }
  int64_t steps() const { return t_; }

  void step(ParamStore<T>& store) {
    ++t_;
    const T b1 = cfg_.beta1, b2 = cfg_.beta2;
    const T b1_t = std::pow(b1, static_cast<T>(t_));
    const T b1_t1 = b1_t * b1;
    const T b2_t = std::pow(b2, static_cast<T>(t_));
    bool any = false;
    for (size_t i = 0; i < store.count(); ++i) {
      auto& e = store.entry(static_cast<int>(i));
      if (e.grad.empty()) continue;
      any = true;
      if (e.m.empty()) e.m = Tensor<T>(e.value.shape());
      if (e.v.empty()) e.v = Tensor<T>(e.value.shape());
      for (int64_t j = 0; j < e.value.size(); ++j) {
        const T g = e.grad[j];
        e.m[j] = b1 * e.m[j] + (T(1) - b1) * g;
        e.v[j] = b2 * e.v[j] + (T(1) - b2) * g * g;
        const T m_hat = e.m[j] / (T(1) - b1_t1);
        const T v_hat = e.v[j] / (T(1) - b2_t);
        e.value[j] -= cfg_.lr * (b1 * m_hat + (T(1) - b1) * g / (T(1) - b1_t)) /
                      (std::sqrt(v_hat) + cfg_.eps);
      }
    }
    if (!any) throw error("optim", "nadam_step called with no gradients populated");
  }

 private:
  NadamConfig<T> cfg_;
  int64_t t_ = 0;
};

}  // namespace dualrnn

#endif  // DUALRNN_OPTIM_HPP
