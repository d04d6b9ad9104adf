#pragma once

#include "hybridsig/nn/tensor.hpp"

#include <cmath>
#include <cstdint>

namespace hybridsig::nn {

template <typename Scalar>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor<Scalar>> m;  // first moments, aligned with the parameter list
  std::vector<Tensor<Scalar>> v;  // second moments

  AdamState() = default;

  template <typename Params>
  AdamState(const Params& params, double learning_rate) : lr(learning_rate) {
    for (const auto* p : params) {
      m.emplace_back(p->shape());
      v.emplace_back(p->shape());
    }
  }
};

/// One bias-corrected Adam update:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
template <typename Scalar>
void adam_step(const std::vector<Tensor<Scalar>*>& params, const std::vector<Tensor<Scalar>>& grads,
               AdamState<Scalar>& state) {
  if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape() || params[i]->shape() != state.m[i].shape() ||
        params[i]->shape() != state.v[i].shape()) {
      throw std::invalid_argument("adam_step: shape mismatch at parameter " + std::to_string(i));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const auto b1 = static_cast<Scalar>(state.beta1);
  const auto b2 = static_cast<Scalar>(state.beta2);
  const auto correction1 = static_cast<Scalar>(1.0 - std::pow(state.beta1, t));
  const auto correction2 = static_cast<Scalar>(1.0 - std::pow(state.beta2, t));
  const auto lr = static_cast<Scalar>(state.lr);
  const auto eps = static_cast<Scalar>(state.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = grads[i].values().array();
    auto m = state.m[i].values().array();
    auto v = state.v[i].values().array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    params[i]->values().array() -= lr * (m / correction1) / ((v / correction2).sqrt() + eps);
  }
}

}  // namespace hybridsig::nn
