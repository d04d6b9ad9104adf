#include "hybridsig/raster.hpp"

#include "hybridsig/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace hybridsig::raster {

namespace {

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

void require_canvas(int width, int height) {
  if (width < 1 || height < 1) throw std::invalid_argument("raster: canvas dimensions must be positive");
}

// Always starts from the upper endpoint so the pixel set does not depend on
// drawing direction (and mirrors cleanly).
void draw_line(RasterImage& img, int x0, int y0, int x1, int y1) {
  if (y1 < y0) {
    std::swap(x0, x1);
    std::swap(y0, y1);
  }
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    img.at(x0, y0) = 1.0f;
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

// Skips the whitespace (and '#' comments) that separate PNM header fields.
std::size_t skip_separators(std::span<const std::uint8_t> bytes, std::size_t pos) {
  while (pos < bytes.size()) {
    const char c = static_cast<char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\n' || c == '\r' || c == '\t') {
      ++pos;
    } else {
      break;
    }
  }
  return pos;
}

int parse_header_int(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  pos = skip_separators(bytes, pos);
  long value = 0;
  std::size_t digits = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1'000'000) throw FormatError("image header: dimension too large");
    ++pos;
    ++digits;
  }
  if (digits == 0) throw FormatError("image header: expected integer");
  return static_cast<int>(value);
}

}  // namespace

RasterImage::RasterImage(int w, int h, int c, float fill)
    : width(w), height(h), channels(c),
      pixels(Eigen::ArrayXf::Constant(static_cast<Eigen::Index>(w) * h * c, fill)) {
  if (w < 1 || h < 1 || c < 1) throw std::invalid_argument("RasterImage: dimensions must be positive");
}

std::string_view representation_key(Representation r) {
  switch (r) {
    case Representation::TimeIQ: return "time";
    case Representation::Psd: return "psd";
    case Representation::Spectrogram: return "spec";
    case Representation::Hybrid: return "hybrid";
  }
  throw std::invalid_argument("unknown representation");
}

Representation parse_representation(std::string_view key) {
  for (Representation r : kAllRepresentations) {
    if (representation_key(r) == key) return r;
  }
  throw std::invalid_argument("unknown representation '" + std::string(key) + "'");
}

int input_channels(Representation r) {
  switch (r) {
    case Representation::TimeIQ: return 2;
    case Representation::Psd:
    case Representation::Spectrogram: return 1;
    case Representation::Hybrid: return 3;
  }
  throw std::invalid_argument("unknown representation");
}

void RenderConfig::validate() const {
  require_canvas(width, height);
  if (!(db_range > 0.0) || !std::isfinite(db_range)) throw std::invalid_argument("db_range must be positive");
  if (!dsp::is_power_of_two(psd_nfft) || !dsp::is_power_of_two(stft_nfft)) {
    throw std::invalid_argument("FFT sizes must be powers of two");
  }
  if (!(psd_overlap >= 0.0 && psd_overlap < 1.0)) throw std::invalid_argument("psd_overlap must be in [0, 1)");
  if (stft_hop < 1) throw std::invalid_argument("stft_hop must be >= 1");
}

RasterImage raster_timeseries(const dsp::RealSeq& values, int width, int height) {
  require_canvas(width, height);
  if (values.size() == 0) throw std::invalid_argument("raster_timeseries: empty input");
  dsp::require_finite(values, "raster_timeseries");
  if (values.minCoeff() < -1.0 || values.maxCoeff() > 1.0) {
    throw std::invalid_argument("raster_timeseries: values must lie in [-1, 1]");
  }

  RasterImage img(width, height, 1);
  const auto n = values.size();
  const double x_scale = n > 1 ? static_cast<double>(width - 1) / static_cast<double>(n - 1) : 0.0;
  auto px = [&](Eigen::Index i) { return round_half_up(static_cast<double>(i) * x_scale); };
  auto py = [&](Eigen::Index i) { return round_half_up((1.0 - values[i]) / 2.0 * (height - 1)); };

  int x_prev = px(0);
  int y_prev = py(0);
  img.at(x_prev, y_prev) = 1.0f;
  for (Eigen::Index i = 1; i < n; ++i) {
    const int x = px(i);
    const int y = py(i);
    draw_line(img, x_prev, y_prev, x, y);
    x_prev = x;
    y_prev = y;
  }
  return img;
}

RasterImage raster_psd(const dsp::PsdEstimate& psd_db, int width, int height, double db_range) {
  if (psd_db.scale != dsp::PowerScale::Decibel) throw std::invalid_argument("raster_psd: expected dB input");
  if (psd_db.bins.size() == 0) throw std::invalid_argument("raster_psd: empty spectrum");
  if (!(db_range > 0.0)) throw std::invalid_argument("raster_psd: db_range must be positive");
  dsp::require_finite(psd_db.bins, "raster_psd");

  const double top = psd_db.bins.maxCoeff();
  const double floor = top - db_range;
  const dsp::RealSeq level =
      (2.0 * (psd_db.bins.array().max(floor) - floor) / db_range - 1.0).min(1.0).max(-1.0).matrix();
  return raster_timeseries(level, width, height);
}

RasterImage raster_spectrogram(const dsp::StftMatrix& s, int width, int height, double db_range) {
  require_canvas(width, height);
  if (s.scale != dsp::PowerScale::Decibel) throw std::invalid_argument("raster_spectrogram: expected dB input");
  if (s.frames.rows() < 1 || s.frames.cols() < 1) throw std::invalid_argument("raster_spectrogram: empty matrix");
  if (!(db_range > 0.0)) throw std::invalid_argument("raster_spectrogram: db_range must be positive");
  dsp::require_finite(s.frames, "raster_spectrogram");

  const auto frames = s.frames.rows();
  const auto bins = s.frames.cols();
  const double floor = s.frames.maxCoeff() - db_range;
  RasterImage img(width, height, 1);
  for (int y = 0; y < height; ++y) {
    const auto bin = bins - 1 - (static_cast<Eigen::Index>(y) * bins) / height;
    for (int x = 0; x < width; ++x) {
      const auto frame = (static_cast<Eigen::Index>(x) * frames) / width;
      const double v = (std::max(s.frames(frame, bin), floor) - floor) / db_range;
      img.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return img;
}

RasterImage compose_hybrid(const RasterImage& i_img, const RasterImage& q_img, const RasterImage& psd_img) {
  for (const RasterImage* p : {&i_img, &q_img, &psd_img}) {
    if (p->channels != 1) throw std::invalid_argument("compose_hybrid: inputs must be single-channel");
    if (p->width != i_img.width || p->height != i_img.height) {
      throw std::invalid_argument("compose_hybrid: input dimensions differ");
    }
  }
  RasterImage out(i_img.width, i_img.height, 3);
  const auto n = i_img.pixels.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    out.pixels[3 * k + 0] = i_img.pixels[k];
    out.pixels[3 * k + 1] = q_img.pixels[k];
    out.pixels[3 * k + 2] = psd_img.pixels[k];
  }
  return out;
}

RasterImage extract_channel(const RasterImage& img, int channel) {
  if (channel < 0 || channel >= img.channels) throw std::invalid_argument("extract_channel: channel out of range");
  RasterImage out(img.width, img.height, 1);
  const auto n = out.pixels.size();
  for (Eigen::Index k = 0; k < n; ++k) out.pixels[k] = img.pixels[k * img.channels + channel];
  return out;
}

std::vector<std::uint8_t> encode_image(const RasterImage& img) {
  if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("encode_image: need 1 or 3 channels");
  if (img.pixels.size() != static_cast<Eigen::Index>(img.width) * img.height * img.channels) {
    throw std::invalid_argument("encode_image: pixel count does not match dimensions");
  }
  const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width) +
                             " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(header.size() + static_cast<std::size_t>(img.pixels.size()));
  for (float v : img.pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("encode_image: pixel outside [0, 1]");
    bytes.push_back(static_cast<std::uint8_t>(std::lround(static_cast<double>(v) * 255.0)));
  }
  return bytes;
}

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("image: missing P5/P6 magic");
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  const int width = parse_header_int(bytes, pos);
  const int height = parse_header_int(bytes, pos);
  const int maxval = parse_header_int(bytes, pos);
  if (width < 1 || height < 1) throw FormatError("image: zero dimension");
  if (maxval != 255) throw FormatError("image: maxval must be 255");
  if (pos >= bytes.size() || !(bytes[pos] == ' ' || bytes[pos] == '\n' || bytes[pos] == '\r' || bytes[pos] == '\t')) {
    throw FormatError("image: header not terminated by whitespace");
  }
  ++pos;
  const std::size_t payload = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - pos != payload) throw FormatError("image: payload size mismatch");

  RasterImage img(width, height, channels);
  for (std::size_t k = 0; k < payload; ++k) {
    img.pixels[static_cast<Eigen::Index>(k)] = static_cast<float>(bytes[pos + k]) / 255.0f;
  }
  return img;
}

void write_image(const std::filesystem::path& path, const RasterImage& img) { write_file(path, encode_image(img)); }

RasterImage read_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

}  // namespace hybridsig::raster
