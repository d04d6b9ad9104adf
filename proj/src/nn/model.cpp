#include "hybridsig/nn/model.hpp"

namespace hybridsig::nn {

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv3x3: return "Conv2D";
    case LayerKind::MaxPool2x2: return "MaxPooling2D";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::Dense: return "Dense";
    case LayerKind::Relu: return "ReLU";
    case LayerKind::Softmax: return "Softmax";
  }
  return "Unknown";
}

std::vector<LayerSpec> reference_architecture(Index num_classes) {
  return {
      {LayerKind::Conv3x3, 16}, {LayerKind::Relu},       {LayerKind::MaxPool2x2},
      {LayerKind::Conv3x3, 32}, {LayerKind::Relu},       {LayerKind::MaxPool2x2},
      {LayerKind::Conv3x3, 64}, {LayerKind::Relu},       {LayerKind::MaxPool2x2},
      {LayerKind::Flatten},     {LayerKind::Dense, 256}, {LayerKind::Relu},
      {LayerKind::Dense, num_classes}, {LayerKind::Softmax},
  };
}

CnnModel<float> init_model(int channels, std::uint64_t seed, Index height, Index width) {
  if (channels < 1 || channels > 3) throw std::invalid_argument("init_model: channels must be 1, 2 or 3");
  if (height < 1 || width < 1) throw std::invalid_argument("init_model: input dimensions must be positive");
  CnnModel<float> model({height, width, channels}, reference_architecture());
  model.initialize(seed);
  return model;
}

}  // namespace hybridsig::nn
