#pragma once

#include "hybridsig/modem.hpp"
#include "hybridsig/raster.hpp"

#include <json.hpp>

#include <cstdint>

namespace hybridsig {

inline constexpr std::uint64_t kDefaultSeed = 20210612;

struct TrainConfig {
  int batch_size = 32;
  int epochs = 20;
  double lr = 1e-3;
  std::uint64_t seed = kDefaultSeed;
  bool shuffle = true;

  void validate() const;
};

struct ExperimentConfig {
  double snr_db = 10.0;
  std::uint64_t seed = kDefaultSeed;
  int per_class = 50;       // train + validation segments per class
  int test_per_class = 20;  // drawn from an independent realization
  double train_fraction = 0.8;
  raster::Representation representation = raster::Representation::Hybrid;
  TrainConfig train;
  modem::ModemConfig modem;
  raster::RenderConfig render;

  void validate() const;
};

// JSON mirrors of the configs. Decoding starts from the defaults, overrides
// only the keys present and rejects unknown keys.
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const modem::ModemConfig& c);
nlohmann::json to_json(const raster::RenderConfig& c);
nlohmann::json to_json(const ExperimentConfig& c);

void apply_json(const nlohmann::json& j, TrainConfig& c);
void apply_json(const nlohmann::json& j, modem::ModemConfig& c);
void apply_json(const nlohmann::json& j, raster::RenderConfig& c);
void apply_json(const nlohmann::json& j, ExperimentConfig& c);

/// SNR in dB; +inf is written as the string "inf".
nlohmann::json snr_to_json(double snr_db);
double snr_from_json(const nlohmann::json& j);
/// Accepts a number or "inf".
double parse_snr(std::string_view text);

}  // namespace hybridsig
