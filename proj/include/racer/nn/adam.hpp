#pragma once

#include <cmath>
#include <vector>

#include "racer/nn/net.hpp"

namespace racer::nn {

/// Adam with optional global-norm gradient clipping (clip_norm <= 0 disables).
template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<Param<T>*> params, T lr = T(2.5e-5),
                T clip_norm = T(0), T beta1 = T(0.9), T beta2 = T(0.999),
                T eps = T(1e-8))
      : params_(std::move(params)),
        lr_(lr),
        clip_norm_(clip_norm),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {
    for (auto* p : params_) {
      p->m = Tensor<T>(p->value.shape);
      p->v = Tensor<T>(p->value.shape);
    }
  }

  /// Applies the accumulated gradients and zeroes them. Returns the global
  /// gradient norm after clipping.
  T step() {
    ++t_;
    T scale = T(1);
    T norm = global_grad_norm();
    if (clip_norm_ > T(0) && norm > clip_norm_) scale = clip_norm_ / norm;

    T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (auto* p : params_) {
      for (size_t i = 0; i < p->value.numel(); ++i) {
        T g = p->grad[i] * scale;
        p->m[i] = beta1_ * p->m[i] + (T(1) - beta1_) * g;
        p->v[i] = beta2_ * p->v[i] + (T(1) - beta2_) * g * g;
        T mhat = p->m[i] / bc1;
        T vhat = p->v[i] / bc2;
        p->value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        p->grad[i] = T(0);
      }
    }
    return norm * scale;
  }

  void zero_grad() {
    for (auto* p : params_) p->grad.fill(T(0));
  }

  T global_grad_norm() const {
    T sq = T(0);
    for (auto* p : params_)
      for (size_t i = 0; i < p->grad.numel(); ++i) sq += p->grad[i] * p->grad[i];
    return std::sqrt(sq);
  }

  void set_lr(T lr) { lr_ = lr; }
  T lr() const { return lr_; }
  long steps() const { return t_; }

 private:
  std::vector<Param<T>*> params_;
  T lr_, clip_norm_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace racer::nn
