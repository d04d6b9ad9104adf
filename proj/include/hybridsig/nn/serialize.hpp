#pragma once

#include "hybridsig/io.hpp"
#include "hybridsig/nn/adam.hpp"
#include "hybridsig/nn/model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace hybridsig::nn {

// Model file, all integers and floats little-endian:
//
//   header   "HSIG" | u32 version (1) | u32 layer count | u32 flags (bit 0: Adam block follows)
//   layer    u8 kind | u32 rank | rank x u32 input dims | u32 units
//            [trainable only] f32 weights (row-major) | f32 biases
//   adam     u64 step | f64 lr | f64 beta1 | f64 beta2 | f64 epsilon
//            per trainable layer: f32 m(weights) | f32 m(bias) | f32 v(weights) | f32 v(bias)

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr std::size_t kModelHeaderBytes = 16;

struct LoadedModel {
  CnnModel<float> model;
  std::optional<AdamState<float>> optimizer;
};

std::vector<std::uint8_t> save_model(const CnnModel<float>& model, const AdamState<float>* optimizer = nullptr);
LoadedModel load_model(std::span<const std::uint8_t> bytes);

/// Size of the descriptor record for one layer (excluding its parameters).
std::size_t layer_descriptor_bytes(const Layer<float>& layer);

}  // namespace hybridsig::nn
