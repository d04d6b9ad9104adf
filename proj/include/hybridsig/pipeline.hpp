#pragma once

#include "hybridsig/config.hpp"
#include "hybridsig/nn/adam.hpp"
#include "hybridsig/nn/model.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace hybridsig::pipeline {

namespace fs = std::filesystem;
using modem::Modulation;
using raster::Representation;

using Logger = std::function<void(const std::string&)>;

enum class Split { TrainVal, Train, Val, Test };
std::string_view split_key(Split s);
Split parse_split(std::string_view key);

// ---------------------------------------------------------------------------
// Raw segment dataset
// ---------------------------------------------------------------------------

inline constexpr int kManifestVersion = 1;
/// ".iq" payload: 512 little-endian f32 (I, Q) pairs.
inline constexpr std::size_t kIqFileBytes = modem::kSegmentLength * 2 * 4;

struct ManifestEntry {
  std::string path;  // relative to the dataset directory
  Modulation label = Modulation::Bpsk;
  Split split = Split::TrainVal;
  double snr_db = modem::kNoNoise;
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  int version = kManifestVersion;
  modem::ModemConfig modem;
  std::vector<ManifestEntry> entries;

  int count(Modulation label, Split split) const;
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest dataset_manifest_from_json(const nlohmann::json& j);
void write_manifest(const fs::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const fs::path& path);

std::vector<std::uint8_t> encode_iq(const modem::ComplexSeq& samples);
modem::ComplexSeq decode_iq(std::span<const std::uint8_t> bytes);

/// One noisy realization per class: `count` normalized 512-sample segments.
std::vector<modem::IqSegment> synthesize_segments(Modulation label, int count, double snr_db,
                                                  std::uint64_t realization_seed, const modem::ModemConfig& cfg);

/// Writes segments/*.iq and manifest.json. Train/val segments come from one
/// realization per class, test segments from an independently seeded one.
DatasetManifest generate_dataset(const ExperimentConfig& cfg, const fs::path& out_dir);

/// Stratified shuffle-then-split of the untagged (TrainVal) entries.
DatasetManifest split_dataset(DatasetManifest manifest, double train_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Images written per segment: two PGMs for TimeIQ (I, Q), one PGM for Psd
/// and Spectrogram, one PPM for Hybrid.
std::vector<raster::RasterImage> render_segment(const modem::ComplexSeq& samples, Representation rep,
                                                const raster::RenderConfig& cfg);

struct ImageEntry {
  std::vector<std::string> paths;  // relative to the image directory
  Modulation label = Modulation::Bpsk;
  Split split = Split::Train;
  std::string source;
};

struct ImageManifest {
  int version = kManifestVersion;
  Representation representation = Representation::Hybrid;
  raster::RenderConfig render;
  std::vector<ImageEntry> entries;

  int channels() const { return raster::input_channels(representation); }
};

nlohmann::json to_json(const ImageManifest& m);
ImageManifest image_manifest_from_json(const nlohmann::json& j);
ImageManifest read_image_manifest(const fs::path& path);

/// Segments are independent; `jobs` > 1 renders them on that many threads
/// with identical output.
ImageManifest render_dataset(const DatasetManifest& manifest, const fs::path& dataset_dir, Representation rep,
                             const raster::RenderConfig& cfg, const fs::path& out_dir, int jobs = 1);

// ---------------------------------------------------------------------------
// Training and evaluation
// ---------------------------------------------------------------------------

/// Stacks single- or multi-channel rasters into one H x W x C tensor.
nn::Tensor<float> to_tensor(const std::vector<raster::RasterImage>& images);

struct LabeledImages {
  std::vector<nn::Tensor<float>> inputs;
  std::vector<Modulation> labels;

  std::size_t size() const { return inputs.size(); }
};

LabeledImages load_split(const ImageManifest& manifest, const fs::path& image_dir, Split split);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  nn::CnnModel<float> model;
  nn::AdamState<float> optimizer;
  std::vector<EpochRecord> history;
  std::int64_t steps = 0;
};

/// Reports progress after each epoch.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on mean categorical cross-entropy; the batch order is
/// reshuffled every epoch from the seed. Returns the final-epoch weights.
TrainResult train(const LabeledImages& train_set, const LabeledImages& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Same loop starting from a given model; `max_steps` > 0 stops early.
TrainResult train_from(nn::CnnModel<float> model, const LabeledImages& train_set, const LabeledImages& val_set,
                       const TrainConfig& cfg, std::int64_t max_steps = 0, const EpochCallback& on_epoch = {});

/// argmax with ties resolved to the lowest index.
int predict_class(const nn::Tensor<float>& probabilities);

class ConfusionMatrix {
 public:
  static constexpr int kClasses = modem::kNumClasses;

  void add(int true_class, int predicted_class);
  int at(int true_class, int predicted_class) const { return counts_.at(true_class).at(predicted_class); }
  int row_sum(int true_class) const;
  int col_sum(int predicted_class) const;
  int total() const;
  int trace() const;
  double accuracy() const;

  nlohmann::json to_json() const;  // 4x4 row-major
  static ConfusionMatrix from_json(const nlohmann::json& j);
  std::string to_text() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::array<std::array<int, kClasses>, kClasses> counts_{};
};

double accuracy(const nn::CnnModel<float>& model, const LabeledImages& set);
ConfusionMatrix evaluate(const nn::CnnModel<float>& model, const LabeledImages& test_set);

// ---------------------------------------------------------------------------
// Four-way comparison
// ---------------------------------------------------------------------------

struct RepresentationResult {
  Representation representation;
  ConfusionMatrix confusion;
  std::vector<EpochRecord> history;

  double accuracy() const { return confusion.accuracy(); }
};

struct ComparisonReport {
  ExperimentConfig config;
  std::vector<RepresentationResult> results;

  const RepresentationResult& result(Representation rep) const;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// generate -> render -> train -> evaluate for every representation, writing
/// dataset/, images/<rep>/, models/<rep>.hsig, report.json and report.txt.
ComparisonReport compare_representations(const ExperimentConfig& cfg, const fs::path& out_dir,
                                         const Logger& log = {});

}  // namespace hybridsig::pipeline
