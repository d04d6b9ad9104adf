#include "hybridsig/dsp.hpp"

#include <cmath>

namespace hybridsig::dsp {

namespace {

Index welch_step(Index nfft, double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw std::invalid_argument("welch_psd: overlap must be in [0, 1)");
  const auto step = static_cast<Index>(std::llround(static_cast<double>(nfft) * (1.0 - overlap)));
  if (step < 1) throw std::invalid_argument("welch_psd: overlap leaves no hop");
  return step;
}

RealSeq resolve_window(const RealSeq& window, Index nfft, const char* what) {
  if (window.size() == 0) return hann_window(nfft);
  if (window.size() != nfft) throw std::invalid_argument(std::string(what) + ": window length must equal nfft");
  require_finite(window, what);
  if (window.squaredNorm() == 0.0) throw std::invalid_argument(std::string(what) + ": window has zero energy");
  return window;
}

// |FFT(w . x[start .. start+nfft))|^2 / sum(w^2), fftshifted.
RealSeq windowed_power(const ComplexSeq& x, Index start, const RealSeq& window, double energy) {
  const ComplexSeq frame = x.segment(start, window.size()).cwiseProduct(window.cast<std::complex<double>>());
  const RealSeq power = fft(frame).cwiseAbs2() / energy;
  return fftshift(power);
}

}  // namespace

RealSeq hann_window(Index n) {
  if (n < 1) throw std::invalid_argument("hann_window: n must be >= 1");
  RealSeq w(n);
  for (Index k = 0; k < n; ++k) {
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n)));
  }
  return w;
}

Index welch_segment_count(Index length, Index nfft, double overlap) {
  if (length < nfft) return 0;
  return (length - nfft) / welch_step(nfft, overlap) + 1;
}

PsdEstimate welch_psd(const ComplexSeq& x, Index nfft, double overlap, const RealSeq& window) {
  if (!is_power_of_two(nfft)) throw std::invalid_argument("welch_psd: nfft must be a power of two");
  if (x.size() < nfft) throw std::invalid_argument("welch_psd: input shorter than nfft");
  require_finite(x, "welch_psd");
  const RealSeq w = resolve_window(window, nfft, "welch_psd");
  const double energy = w.squaredNorm();
  const Index step = welch_step(nfft, overlap);
  const Index segments = (x.size() - nfft) / step + 1;

  RealSeq acc = RealSeq::Zero(nfft);
  for (Index s = 0; s < segments; ++s) acc += windowed_power(x, s * step, w, energy);
  return {acc / static_cast<double>(segments), PowerScale::Linear};
}

StftMatrix stft(const ComplexSeq& x, Index nfft, Index hop, const RealSeq& window) {
  if (!is_power_of_two(nfft)) throw std::invalid_argument("stft: nfft must be a power of two");
  if (hop < 1) throw std::invalid_argument("stft: hop must be >= 1");
  if (x.size() < nfft) throw std::invalid_argument("stft: input shorter than nfft");
  require_finite(x, "stft");
  const RealSeq w = resolve_window(window, nfft, "stft");
  const double energy = w.squaredNorm();
  const Index frames = (x.size() - nfft) / hop + 1;

  StftMatrix out;
  out.frames.resize(frames, nfft);
  out.nfft = nfft;
  out.hop = hop;
  for (Index f = 0; f < frames; ++f) out.frames.row(f) = windowed_power(x, f * hop, w, energy).transpose();
  return out;
}

PsdEstimate to_db(const PsdEstimate& p) {
  if (p.scale == PowerScale::Decibel) throw std::invalid_argument("to_db: input already in dB");
  require_finite(p.bins, "to_db");
  return {(10.0 * p.bins.array().max(kDbFloor).log10()).matrix(), PowerScale::Decibel};
}

StftMatrix to_db(const StftMatrix& s) {
  if (s.scale == PowerScale::Decibel) throw std::invalid_argument("to_db: input already in dB");
  require_finite(s.frames, "to_db");
  StftMatrix out = s;
  out.frames = (10.0 * s.frames.array().max(kDbFloor).log10()).matrix();
  out.scale = PowerScale::Decibel;
  return out;
}

}  // namespace hybridsig::dsp
