#pragma once

#include "hybridsig/dsp.hpp"
#include "hybridsig/io.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hybridsig::raster {

/// Row-major, channel-interleaved image with samples in [0, 1].
/// Pixel (x, y, c) lives at ((y * width) + x) * channels + c; y = 0 is the top row.
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  Eigen::ArrayXf pixels;

  RasterImage() = default;
  RasterImage(int w, int h, int c, float fill = 0.0f);

  Eigen::Index index(int x, int y, int c = 0) const {
    return (static_cast<Eigen::Index>(y) * width + x) * channels + c;
  }
  float at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }
  float& at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }

  friend bool operator==(const RasterImage& a, const RasterImage& b) {
    return a.width == b.width && a.height == b.height && a.channels == b.channels &&
           a.pixels.size() == b.pixels.size() && (a.pixels == b.pixels).all();
  }
};

enum class Representation { TimeIQ, Psd, Spectrogram, Hybrid };

inline constexpr std::array<Representation, 4> kAllRepresentations = {
    Representation::TimeIQ, Representation::Psd, Representation::Spectrogram, Representation::Hybrid};

/// CLI/manifest key: "time", "psd", "spec", "hybrid".
std::string_view representation_key(Representation r);
Representation parse_representation(std::string_view key);
/// Channels the classifier sees for this representation.
int input_channels(Representation r);

struct RenderConfig {
  int width = 128;
  int height = 128;
  double db_range = 80.0;
  int psd_nfft = 256;
  double psd_overlap = 0.5;
  int stft_nfft = 64;
  int stft_hop = 32;

  void validate() const;
};

using hybridsig::FormatError;

/// Polyline plot of values in [-1, 1]: +1 on the top row, -1 on the bottom,
/// consecutive samples joined by Bresenham segments of intensity 1.
RasterImage raster_timeseries(const dsp::RealSeq& values, int width, int height);

/// Line plot of a dB spectrum clamped to the top db_range decibels.
RasterImage raster_psd(const dsp::PsdEstimate& psd_db, int width, int height, double db_range = 80.0);

/// Heatmap, time along x and frequency along y (highest bin at the top).
RasterImage raster_spectrogram(const dsp::StftMatrix& s, int width, int height, double db_range = 80.0);

/// R = in-phase trace, G = quadrature trace, B = PSD.
RasterImage compose_hybrid(const RasterImage& i_img, const RasterImage& q_img, const RasterImage& psd_img);
RasterImage extract_channel(const RasterImage& img, int channel);

/// Binary PGM (P5) for one channel, PPM (P6) for three; maxval 255.
std::vector<std::uint8_t> encode_image(const RasterImage& img);
RasterImage decode_image(std::span<const std::uint8_t> bytes);

void write_image(const std::filesystem::path& path, const RasterImage& img);
RasterImage read_image(const std::filesystem::path& path);

}  // namespace hybridsig::raster
