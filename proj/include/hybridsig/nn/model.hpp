#pragma once

#include "hybridsig/nn/layers.hpp"
#include "hybridsig/random.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hybridsig::nn {

/// Numeric tags double as the on-disk layer kind byte.
enum class LayerKind : std::uint8_t { Conv3x3 = 1, MaxPool2x2 = 2, Flatten = 3, Dense = 4, Relu = 5, Softmax = 6 };

std::string_view layer_kind_name(LayerKind kind);

struct LayerSpec {
  LayerKind kind;
  Index units = 0;  // output channels for Conv3x3, output features for Dense

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Conv(16) ReLU Pool, Conv(32) ReLU Pool, Conv(64) ReLU Pool, Flatten,
/// Dense(256) ReLU, Dense(4) Softmax.
std::vector<LayerSpec> reference_architecture(Index num_classes = 4);

template <typename Scalar>
struct Layer {
  LayerKind kind;
  Index units = 0;
  Shape input_shape;
  Shape output_shape;
  Tensor<Scalar> weight;  // Conv: 3x3xCinxCout, Dense: in x out
  Tensor<Scalar> bias;

  bool trainable() const { return kind == LayerKind::Conv3x3 || kind == LayerKind::Dense; }
  Index fan_in() const { return weight.size() / units; }
  Index parameter_count() const { return trainable() ? weight.size() + bias.size() : 0; }
};

/// Per-layer intermediate values recorded by a forward pass for backward.
template <typename Scalar>
struct Trace {
  std::vector<Tensor<Scalar>> inputs;         // input to layer i
  std::vector<std::vector<Index>> pool_argmax;  // filled for pool layers only
};

template <typename Scalar>
class CnnModel {
 public:
  CnnModel() = default;

  CnnModel(Shape input_shape, const std::vector<LayerSpec>& specs) : input_shape_(std::move(input_shape)) {
    if (input_shape_.size() != 3) throw std::invalid_argument("CnnModel: input must be H x W x C");
    Shape shape = input_shape_;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const LayerSpec& spec = specs[i];
      Layer<Scalar> layer{spec.kind, spec.units, shape, {}, {}, {}};
      switch (spec.kind) {
        case LayerKind::Conv3x3:
          if (shape.size() != 3 || spec.units < 1) throw std::invalid_argument("CnnModel: bad Conv3x3 placement");
          layer.weight = Tensor<Scalar>({kKernel, kKernel, shape[2], spec.units});
          layer.bias = Tensor<Scalar>({spec.units});
          layer.output_shape = {shape[0], shape[1], spec.units};
          break;
        case LayerKind::MaxPool2x2:
          if (shape.size() != 3) throw std::invalid_argument("CnnModel: pooling needs H x W x C");
          layer.output_shape = {(shape[0] + 1) / 2, (shape[1] + 1) / 2, shape[2]};
          break;
        case LayerKind::Flatten:
          layer.output_shape = {shape_size(shape)};
          break;
        case LayerKind::Dense:
          if (shape.size() != 1 || spec.units < 1) throw std::invalid_argument("CnnModel: Dense needs flat input");
          layer.weight = Tensor<Scalar>({shape[0], spec.units});
          layer.bias = Tensor<Scalar>({spec.units});
          layer.output_shape = {spec.units};
          break;
        case LayerKind::Relu:
          layer.output_shape = shape;
          break;
        case LayerKind::Softmax:
          if (shape.size() != 1 || i + 1 != specs.size()) {
            throw std::invalid_argument("CnnModel: Softmax must be the final layer over a flat input");
          }
          layer.output_shape = shape;
          break;
        default:
          throw std::invalid_argument("CnnModel: unknown layer kind");
      }
      shape = layer.output_shape;
      layers_.push_back(std::move(layer));
    }
  }

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<Layer<Scalar>>& layers() const { return layers_; }
  std::vector<Layer<Scalar>>& layers() { return layers_; }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> s;
    for (const auto& l : layers_) s.push_back({l.kind, l.units});
    return s;
  }

  Shape output_shape() const { return layers_.empty() ? input_shape_ : layers_.back().output_shape; }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
  }

  /// Trainable tensors in layer order, weight before bias.
  std::vector<Tensor<Scalar>*> parameters() {
    std::vector<Tensor<Scalar>*> p;
    for (auto& l : layers_) {
      if (!l.trainable()) continue;
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }
  std::vector<const Tensor<Scalar>*> parameters() const {
    std::vector<const Tensor<Scalar>*> p;
    for (const auto& l : layers_) {
      if (!l.trainable()) continue;
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }

  /// Zero-filled tensors shaped like parameters().
  std::vector<Tensor<Scalar>> zero_gradients() const {
    std::vector<Tensor<Scalar>> g;
    for (const auto* p : parameters()) g.emplace_back(p->shape());
    return g;
  }

  /// He-uniform weights in +-sqrt(6 / fan_in), zero biases.
  void initialize(std::uint64_t seed) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto& l = layers_[i];
      if (!l.trainable()) continue;
      SplitMix64 rng(derive_seed(seed, i));
      const double bound = std::sqrt(6.0 / static_cast<double>(l.fan_in()));
      for (Index k = 0; k < l.weight.size(); ++k) l.weight[k] = static_cast<Scalar>(rng.uniform(-bound, bound));
      l.bias.set_zero();
    }
  }

  /// Output of the last layer before Softmax.
  Tensor<Scalar> logits(const Tensor<Scalar>& x, Trace<Scalar>* trace = nullptr) const {
    require_shape(x, input_shape_, "CnnModel input");
    if (trace) {
      trace->inputs.assign(layers_.size(), {});
      trace->pool_argmax.assign(layers_.size(), {});
    }
    Tensor<Scalar> a = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.kind == LayerKind::Softmax) break;
      Tensor<Scalar> next;
      std::vector<Index> argmax;
      switch (l.kind) {
        case LayerKind::Conv3x3: next = conv2d_forward(a, l.weight, l.bias); break;
        case LayerKind::MaxPool2x2: {
          auto pooled = maxpool_forward(a);
          next = std::move(pooled.output);
          argmax = std::move(pooled.argmax);
          break;
        }
        case LayerKind::Flatten: next = a.reshaped(l.output_shape); break;
        case LayerKind::Dense: next = dense_forward(a, l.weight, l.bias); break;
        case LayerKind::Relu: next = relu_forward(a); break;
        case LayerKind::Softmax: break;
      }
      if (trace) {
        trace->inputs[i] = std::move(a);
        trace->pool_argmax[i] = std::move(argmax);
      }
      a = std::move(next);
    }
    return a;
  }

  /// Class probabilities.
  Tensor<Scalar> forward(const Tensor<Scalar>& x) const { return softmax(logits(x)); }

  /// Adds d(loss)/d(parameter) into `grads` (aligned with parameters()) given
  /// d(loss)/d(logits). Writes the input gradient when `grad_input` is set.
  void backward(const Trace<Scalar>& trace, const Tensor<Scalar>& grad_logits, std::vector<Tensor<Scalar>>& grads,
                Tensor<Scalar>* grad_input = nullptr) const {
    if (trace.inputs.size() != layers_.size()) throw std::invalid_argument("backward: trace does not match model");
    if (grads.size() != parameters().size()) throw std::invalid_argument("backward: gradient list size mismatch");
    std::size_t last = layers_.size();
    if (last > 0 && layers_[last - 1].kind == LayerKind::Softmax) --last;

    std::size_t first_needed = 0;  // no input gradient is needed below the first trainable layer
    if (!grad_input) {
      while (first_needed < last && !layers_[first_needed].trainable()) ++first_needed;
    }

    std::size_t param_slot = 0;
    for (std::size_t i = 0; i < last; ++i) param_slot += layers_[i].trainable() ? 2 : 0;

    Tensor<Scalar> g = grad_logits;
    for (std::size_t i = last; i-- > 0;) {
      const auto& l = layers_[i];
      const Tensor<Scalar>& input = trace.inputs[i];
      const bool need_input = grad_input != nullptr || i > first_needed;
      switch (l.kind) {
        case LayerKind::Conv3x3: {
          param_slot -= 2;
          auto cg = conv2d_backward(g, input, l.weight, need_input);
          grads[param_slot].values() += cg.grad_weights.values();
          grads[param_slot + 1].values() += cg.grad_bias.values();
          g = std::move(cg.grad_input);
          break;
        }
        case LayerKind::Dense: {
          param_slot -= 2;
          const Index in = l.weight.dim(0), out = l.weight.dim(1);
          grads[param_slot].matrix(in, out).noalias() += input.values() * g.values().transpose();
          grads[param_slot + 1].values() += g.values();
          if (need_input) {
            Tensor<Scalar> gi(input.shape());
            gi.values().noalias() = l.weight.matrix(in, out) * g.values();
            g = std::move(gi);
          }
          break;
        }
        case LayerKind::MaxPool2x2: g = maxpool_backward(g, trace.pool_argmax[i], input.shape()); break;
        case LayerKind::Flatten: g = g.reshaped(input.shape()); break;
        case LayerKind::Relu: g = relu_backward(g, input); break;
        case LayerKind::Softmax: break;
      }
      if (!need_input) break;
    }
    if (grad_input) *grad_input = std::move(g);
  }

  template <typename To>
  CnnModel<To> cast() const {
    CnnModel<To> m(input_shape_, specs());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!layers_[i].trainable()) continue;
      m.layers()[i].weight = layers_[i].weight.template cast<To>();
      m.layers()[i].bias = layers_[i].bias.template cast<To>();
    }
    return m;
  }

 private:
  Shape input_shape_;
  std::vector<Layer<Scalar>> layers_;
};

/// Reference classifier for an H x W x channels input, He-initialized from seed.
CnnModel<float> init_model(int channels, std::uint64_t seed, Index height = 128, Index width = 128);

/// Layer-by-layer description, one line per layer.
template <typename Scalar>
std::string describe(const CnnModel<Scalar>& model) {
  std::string out = "input " + shape_string(model.input_shape()) + "\n";
  for (const auto& l : model.layers()) {
    out += std::string(layer_kind_name(l.kind));
    if (l.kind == LayerKind::Conv3x3) out += " filters=" + std::to_string(l.units) + " kernel=3x3";
    if (l.kind == LayerKind::Dense) out += " units=" + std::to_string(l.units);
    if (l.kind == LayerKind::MaxPool2x2) out += " window=2x2 stride=2";
    out += " -> " + shape_string(l.output_shape);
    if (l.trainable()) out += " params=" + std::to_string(l.parameter_count());
    out += "\n";
  }
  out += "total params=" + std::to_string(model.parameter_count()) + "\n";
  return out;
}

}  // namespace hybridsig::nn
