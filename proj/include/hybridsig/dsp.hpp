#pragma once

#include <Eigen/Core>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hybridsig::dsp {

using Index = Eigen::Index;
using ComplexSeq = Eigen::VectorXcd;
using RealSeq = Eigen::VectorXd;

enum class PowerScale { Linear, Decibel };

/// Floor applied before taking logarithms of power values.
inline constexpr double kDbFloor = 1e-12;

struct PsdEstimate {
  RealSeq bins;  // fftshifted, DC at bins[nfft / 2]
  PowerScale scale = PowerScale::Linear;

  Index nfft() const { return bins.size(); }
};

struct StftMatrix {
  Eigen::MatrixXd frames;  // frames x bins, each row fftshifted
  Index nfft = 0;
  Index hop = 0;
  PowerScale scale = PowerScale::Linear;

  Index frame_count() const { return frames.rows(); }
  Index bin_count() const { return frames.cols(); }
};

constexpr bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& x, const char* what) {
  if (!x.derived().allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite value");
  }
}

namespace detail {

// In-place iterative radix-2 Cooley-Tukey. Sign -1 is the forward transform.
template <typename Scalar>
void radix2_transform(Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>& a, int sign) {
  const Index n = a.size();
  for (Index i = 1, j = 0; i < n; ++i) {
    Index bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (Index len = 2; len <= n; len <<= 1) {
    const Index half = len / 2;
    for (Index k = 0; k < half; ++k) {
      // Twiddles computed directly, not by recurrence, to keep error at O(eps log n).
      const Scalar angle = Scalar(sign) * Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(k) / Scalar(len);
      const std::complex<Scalar> w(std::cos(angle), std::sin(angle));
      for (Index start = 0; start < n; start += len) {
        const std::complex<Scalar> u = a[start + k];
        const std::complex<Scalar> v = a[start + k + half] * w;
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

}  // namespace detail

/// Unnormalized forward DFT, X[k] = sum_n x[n] exp(-j 2 pi k n / N).
template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> fft(
    const Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>& x) {
  if (!is_power_of_two(x.size())) throw std::invalid_argument("fft: length must be a power of two");
  require_finite(x, "fft");
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> out = x;
  detail::radix2_transform(out, -1);
  return out;
}

/// Inverse DFT with 1/N normalization.
template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> ifft(
    const Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>& x) {
  if (!is_power_of_two(x.size())) throw std::invalid_argument("ifft: length must be a power of two");
  require_finite(x, "ifft");
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> out = x;
  detail::radix2_transform(out, +1);
  out /= Scalar(x.size());
  return out;
}

/// Rotates by floor(N/2) so that bin 0 lands at the center.
template <typename Derived>
typename Derived::PlainObject fftshift(const Eigen::DenseBase<Derived>& x) {
  const Index n = x.size();
  typename Derived::PlainObject out(n);
  const Index shift = n / 2;
  for (Index i = 0; i < n; ++i) out[(i + shift) % n] = x.derived()[i];
  return out;
}

/// Periodic Hann window, w[k] = 0.5 (1 - cos(2 pi k / n)).
RealSeq hann_window(Index n);

/// Welch-averaged periodogram, normalized by window energy and fftshifted.
/// An empty window selects a periodic Hann window of length nfft.
PsdEstimate welch_psd(const ComplexSeq& x, Index nfft = 256, double overlap = 0.5,
                      const RealSeq& window = RealSeq());

/// Number of segments welch_psd averages for the given geometry.
Index welch_segment_count(Index length, Index nfft, double overlap);

/// Per-frame windowed |FFT|^2 / window energy, each frame fftshifted.
StftMatrix stft(const ComplexSeq& x, Index nfft = 64, Index hop = 32,
                const RealSeq& window = RealSeq());

PsdEstimate to_db(const PsdEstimate& p);
StftMatrix to_db(const StftMatrix& s);

}  // namespace hybridsig::dsp
