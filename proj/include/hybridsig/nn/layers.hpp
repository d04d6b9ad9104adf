#pragma once

#include "hybridsig/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hybridsig::nn {

// ---------------------------------------------------------------------------
// 3x3 convolution, stride 1, zero "same" padding.
// Input H x W x Cin, weights 3 x 3 x Cin x Cout, bias Cout.
// Evaluated as an im2col product: (H*W x 9*Cin) * (9*Cin x Cout).
// ---------------------------------------------------------------------------

inline constexpr Index kKernel = 3;

template <typename Scalar>
RowMatrix<Scalar> im2col3x3(const Tensor<Scalar>& x) {
  const Index h = x.dim(0), w = x.dim(1), c = x.dim(2);
  RowMatrix<Scalar> col = RowMatrix<Scalar>::Zero(h * w, kKernel * kKernel * c);
  for (Index y = 0; y < h; ++y) {
    for (Index xx = 0; xx < w; ++xx) {
      Scalar* row = col.data() + (y * w + xx) * col.cols();
      for (Index ky = 0; ky < kKernel; ++ky) {
        const Index sy = y + ky - 1;
        if (sy < 0 || sy >= h) continue;
        for (Index kx = 0; kx < kKernel; ++kx) {
          const Index sx = xx + kx - 1;
          if (sx < 0 || sx >= w) continue;
          const Scalar* src = x.values().data() + (sy * w + sx) * c;
          std::copy(src, src + c, row + (ky * kKernel + kx) * c);
        }
      }
    }
  }
  return col;
}

template <typename Scalar>
Tensor<Scalar> col2im3x3(const RowMatrix<Scalar>& col, const Shape& input_shape) {
  const Index h = input_shape[0], w = input_shape[1], c = input_shape[2];
  Tensor<Scalar> x(input_shape);
  for (Index y = 0; y < h; ++y) {
    for (Index xx = 0; xx < w; ++xx) {
      const Scalar* row = col.data() + (y * w + xx) * col.cols();
      for (Index ky = 0; ky < kKernel; ++ky) {
        const Index sy = y + ky - 1;
        if (sy < 0 || sy >= h) continue;
        for (Index kx = 0; kx < kKernel; ++kx) {
          const Index sx = xx + kx - 1;
          if (sx < 0 || sx >= w) continue;
          Scalar* dst = x.values().data() + (sy * w + sx) * c;
          const Scalar* src = row + (ky * kKernel + kx) * c;
          for (Index ci = 0; ci < c; ++ci) dst[ci] += src[ci];
        }
      }
    }
  }
  return x;
}

template <typename Scalar>
void check_conv_shapes(const Tensor<Scalar>& x, const Tensor<Scalar>& weights, const Tensor<Scalar>& bias) {
  if (x.rank() != 3 || x.dim(0) < 1 || x.dim(1) < 1) throw std::invalid_argument("conv2d: input must be H x W x C");
  if (weights.rank() != 4 || weights.dim(0) != kKernel || weights.dim(1) != kKernel) {
    throw std::invalid_argument("conv2d: weights must be 3 x 3 x Cin x Cout");
  }
  if (weights.dim(2) != x.dim(2)) throw std::invalid_argument("conv2d: input channel mismatch");
  require_shape(bias, {weights.dim(3)}, "conv2d bias");
}

template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weights, const Tensor<Scalar>& bias) {
  check_conv_shapes(x, weights, bias);
  const Index h = x.dim(0), w = x.dim(1), cin = x.dim(2), cout = weights.dim(3);
  const RowMatrix<Scalar> col = im2col3x3(x);
  Tensor<Scalar> out({h, w, cout});
  auto y = out.matrix(h * w, cout);
  y.noalias() = col * weights.matrix(kKernel * kKernel * cin, cout);
  y.rowwise() += bias.values().transpose();
  return out;
}

template <typename Scalar>
struct ConvGradients {
  Tensor<Scalar> grad_input;  // empty when not requested
  Tensor<Scalar> grad_weights;
  Tensor<Scalar> grad_bias;
};

template <typename Scalar>
ConvGradients<Scalar> conv2d_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& input,
                                      const Tensor<Scalar>& weights, bool need_input_grad = true) {
  if (input.rank() != 3 || weights.rank() != 4 || weights.dim(2) != input.dim(2)) {
    throw std::invalid_argument("conv2d_backward: inconsistent input/weights");
  }
  const Index h = input.dim(0), w = input.dim(1), cin = input.dim(2), cout = weights.dim(3);
  require_shape(grad_out, {h, w, cout}, "conv2d_backward grad_out");

  const auto g = grad_out.matrix(h * w, cout);
  const RowMatrix<Scalar> col = im2col3x3(input);
  ConvGradients<Scalar> out;
  out.grad_weights = Tensor<Scalar>(weights.shape());
  out.grad_weights.matrix(kKernel * kKernel * cin, cout).noalias() = col.transpose() * g;
  out.grad_bias = Tensor<Scalar>({cout}, g.colwise().sum().transpose());
  if (need_input_grad) {
    const RowMatrix<Scalar> grad_col = g * weights.matrix(kKernel * kKernel * cin, cout).transpose();
    out.grad_input = col2im3x3(grad_col, input.shape());
  }
  return out;
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2. Output is ceil(H/2) x ceil(W/2); windows on an
// odd trailing edge take the max over their in-bounds elements only. Ties go
// to the first element in row-major order.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct PoolResult {
  Tensor<Scalar> output;
  std::vector<Index> argmax;  // flat input index per output element
};

template <typename Scalar>
PoolResult<Scalar> maxpool_forward(const Tensor<Scalar>& x) {
  if (x.rank() != 3 || x.dim(0) < 1 || x.dim(1) < 1) throw std::invalid_argument("maxpool: input must be H x W x C");
  const Index h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const Index oh = (h + 1) / 2, ow = (w + 1) / 2;
  PoolResult<Scalar> r{Tensor<Scalar>({oh, ow, c}), std::vector<Index>(static_cast<std::size_t>(oh * ow * c))};
  for (Index oy = 0; oy < oh; ++oy) {
    for (Index ox = 0; ox < ow; ++ox) {
      for (Index ci = 0; ci < c; ++ci) {
        Index best = -1;
        Scalar best_value = -std::numeric_limits<Scalar>::infinity();
        for (Index dy = 0; dy < 2; ++dy) {
          const Index y = 2 * oy + dy;
          if (y >= h) continue;
          for (Index dx = 0; dx < 2; ++dx) {
            const Index xx = 2 * ox + dx;
            if (xx >= w) continue;
            const Index idx = (y * w + xx) * c + ci;
            if (best < 0 || x[idx] > best_value) {
              best = idx;
              best_value = x[idx];
            }
          }
        }
        const Index o = (oy * ow + ox) * c + ci;
        r.output[o] = best_value;
        r.argmax[static_cast<std::size_t>(o)] = best;
      }
    }
  }
  return r;
}

template <typename Scalar>
Tensor<Scalar> maxpool_backward(const Tensor<Scalar>& grad_out, const std::vector<Index>& argmax,
                                const Shape& input_shape) {
  if (static_cast<std::size_t>(grad_out.size()) != argmax.size()) {
    throw std::invalid_argument("maxpool_backward: gradient/index size mismatch");
  }
  Tensor<Scalar> grad(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) {
    const Index idx = argmax[o];
    if (idx < 0 || idx >= grad.size()) throw std::invalid_argument("maxpool_backward: index out of range");
    grad[idx] += grad_out[static_cast<Index>(o)];
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Dense: y = W^T x + b with W stored in x out.
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> dense_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weights, const Tensor<Scalar>& bias) {
  if (weights.rank() != 2 || x.size() != weights.dim(0)) throw std::invalid_argument("dense: input/weight mismatch");
  require_shape(bias, {weights.dim(1)}, "dense bias");
  Tensor<Scalar> y({weights.dim(1)}, bias.values());
  y.values().noalias() += weights.matrix(weights.dim(0), weights.dim(1)).transpose() * x.values();
  return y;
}

template <typename Scalar>
struct DenseGradients {
  Tensor<Scalar> grad_input;
  Tensor<Scalar> grad_weights;
  Tensor<Scalar> grad_bias;
};

template <typename Scalar>
DenseGradients<Scalar> dense_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& input,
                                      const Tensor<Scalar>& weights) {
  if (weights.rank() != 2 || input.size() != weights.dim(0) || grad_out.size() != weights.dim(1)) {
    throw std::invalid_argument("dense_backward: shape mismatch");
  }
  const Index in = weights.dim(0), out = weights.dim(1);
  DenseGradients<Scalar> g;
  g.grad_weights = Tensor<Scalar>(weights.shape());
  g.grad_weights.matrix(in, out).noalias() = input.values() * grad_out.values().transpose();
  g.grad_bias = Tensor<Scalar>({out}, grad_out.values());
  g.grad_input = Tensor<Scalar>(input.shape());
  g.grad_input.values().noalias() = weights.matrix(in, out) * grad_out.values();
  return g;
}

// ---------------------------------------------------------------------------
// ReLU; the subgradient at exactly 0 is 0.
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> relu_forward(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), x.values().cwiseMax(Scalar(0)));
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& input) {
  if (grad_out.size() != input.size()) throw std::invalid_argument("relu_backward: size mismatch");
  return Tensor<Scalar>(input.shape(),
                        (input.values().array() > Scalar(0)).select(grad_out.values().array(), Scalar(0)).matrix());
}

// ---------------------------------------------------------------------------
// Softmax and categorical cross-entropy.
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& logits) {
  if (logits.size() == 0 || !logits.values().allFinite()) throw std::invalid_argument("softmax: logits must be finite");
  const Scalar top = logits.values().maxCoeff();
  typename Tensor<Scalar>::Vector e = (logits.values().array() - top).exp().matrix();
  e /= e.sum();
  return Tensor<Scalar>(logits.shape(), std::move(e));
}

template <typename Scalar>
struct LossAndGradient {
  Scalar loss;
  Tensor<Scalar> grad_logits;
};

/// loss = -log softmax(logits)[target], gradient p - onehot(target).
template <typename Scalar>
LossAndGradient<Scalar> softmax_xent(const Tensor<Scalar>& logits, Index target) {
  if (target < 0 || target >= logits.size()) throw std::invalid_argument("softmax_xent: target out of range");
  if (logits.size() == 0 || !logits.values().allFinite()) {
    throw std::invalid_argument("softmax_xent: logits must be finite");
  }
  const Scalar top = logits.values().maxCoeff();
  const auto shifted = (logits.values().array() - top).eval();
  const Scalar log_sum = std::log(shifted.exp().sum());
  LossAndGradient<Scalar> r{log_sum - shifted[target], Tensor<Scalar>(logits.shape())};
  r.grad_logits.values() = (shifted - log_sum).exp().matrix();
  r.grad_logits[target] -= Scalar(1);
  return r;
}

/// Overload taking an explicit one-hot target vector.
template <typename Scalar>
LossAndGradient<Scalar> softmax_xent(const Tensor<Scalar>& logits, const Tensor<Scalar>& one_hot) {
  if (one_hot.size() != logits.size()) throw std::invalid_argument("softmax_xent: target length mismatch");
  Index hot = -1;
  for (Index i = 0; i < one_hot.size(); ++i) {
    if (one_hot[i] == Scalar(1) && hot < 0) {
      hot = i;
    } else if (one_hot[i] != Scalar(0)) {
      throw std::invalid_argument("softmax_xent: target is not one-hot");
    }
  }
  if (hot < 0) throw std::invalid_argument("softmax_xent: target is not one-hot");
  return softmax_xent(logits, hot);
}

}  // namespace hybridsig::nn
