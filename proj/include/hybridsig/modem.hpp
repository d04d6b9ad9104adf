#pragma once

#include "hybridsig/dsp.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>
#include <variant>
#include <vector>

namespace hybridsig::modem {

using dsp::ComplexSeq;
using dsp::Index;
using dsp::RealSeq;

/// Class labels. The integer values are the stable class indices used by the
/// classifier and all file formats.
enum class Modulation : std::uint8_t { Bpsk = 0, Qpsk = 1, Qam16 = 2, Gfsk = 3 };

inline constexpr int kNumClasses = 4;
inline constexpr std::array<Modulation, kNumClasses> kAllModulations = {
    Modulation::Bpsk, Modulation::Qpsk, Modulation::Qam16, Modulation::Gfsk};

inline constexpr int class_index(Modulation m) { return static_cast<int>(m); }
Modulation from_class_index(int index);

/// Short lowercase key used in manifests: "bpsk", "qpsk", "qam16", "gfsk".
std::string_view label_key(Modulation m);
/// Human-readable name: "BPSK", "QPSK", "16-QAM", "GFSK".
std::string_view display_name(Modulation m);
Modulation parse_label(std::string_view key);

struct RrcPulse {
  double rolloff = 0.35;
  int span_symbols = 11;
};
struct RectPulse {};
using PulseShape = std::variant<RrcPulse, RectPulse>;

struct ModemConfig {
  double sample_rate = 1e6;
  int sps = 8;
  PulseShape pulse = RrcPulse{};
  double gfsk_bt = 0.35;
  double gfsk_h = 1.0;

  void validate() const;
};

/// Bit pattern (MSB first) -> unit-average-power complex point.
struct ConstellationMap {
  int bits_per_symbol = 0;
  std::vector<std::complex<double>> points;

  static const ConstellationMap& for_scheme(Modulation m);
};

using Bits = std::vector<std::uint8_t>;

inline constexpr std::size_t kSegmentLength = 512;
/// Passing this as snr_db disables noise.
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

struct IqSegment {
  ComplexSeq samples;
  Modulation label = Modulation::Bpsk;
  double snr_db = kNoNoise;
  std::uint64_t seed = 0;
};

int bits_per_symbol(Modulation m);

Bits random_bits(std::size_t count, std::uint64_t seed);

/// Baseband waveform for `bits`; PSK/QAM are Gray-mapped, upsampled by sps and
/// pulse-shaped, GFSK is delegated to gfsk_modulate. Output has
/// (bits / bits_per_symbol) * sps samples, aligned to the symbol grid.
ComplexSeq modulate(Modulation scheme, const Bits& bits, const ModemConfig& cfg);

/// Continuous-phase GFSK, exp(j phi[n]) with Gaussian-filtered NRZ frequency
/// and peak deviation h / (2 T).
ComplexSeq gfsk_modulate(const Bits& bits, const ModemConfig& cfg);

/// Root-raised-cosine taps (span_symbols * sps + 1 of them), unit energy.
RealSeq rrc_taps(double rolloff, int sps, int span_symbols);

/// Gaussian frequency-pulse filter, unit DC gain, spanning span_symbols.
RealSeq gaussian_taps(double bt, int sps, int span_symbols = 4);

/// Adds circular complex Gaussian noise at total-power SNR snr_db.
ComplexSeq awgn(const ComplexSeq& x, double snr_db, std::uint64_t seed);

std::vector<ComplexSeq> segment(const ComplexSeq& x, Index length = kSegmentLength,
                                Index stride = kSegmentLength);

/// Scales I and Q by one common factor so that max(|I|, |Q|) = 1.
ComplexSeq normalize_segment(const ComplexSeq& seg);

double mean_power(const ComplexSeq& x);

}  // namespace hybridsig::modem
