#include "hybridsig/modem.hpp"

#include "hybridsig/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hybridsig::modem {

namespace {

using cd = std::complex<double>;

ConstellationMap make_bpsk() { return {1, {cd(1.0, 0.0), cd(-1.0, 0.0)}}; }

ConstellationMap make_qpsk() {
  const double a = 1.0 / std::numbers::sqrt2;
  // 00 -> Q1, 01 -> Q2, 11 -> Q3, 10 -> Q4
  return {2, {cd(a, a), cd(-a, a), cd(a, -a), cd(-a, -a)}};
}

ConstellationMap make_qam16() {
  // Two Gray-coded bits per axis: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
  constexpr std::array<double, 4> level = {-3.0, -1.0, 3.0, 1.0};
  const double scale = 1.0 / std::sqrt(10.0);
  ConstellationMap map{4, {}};
  map.points.reserve(16);
  for (int pattern = 0; pattern < 16; ++pattern) {
    map.points.emplace_back(level[pattern >> 2] * scale, level[pattern & 3] * scale);
  }
  return map;
}

// Convolution evaluated on the input grid: out[n] = sum_k taps[k] x[n + k - delay].
template <typename Seq>
Seq filter_same(const Seq& x, const RealSeq& taps, bool clamp_edges) {
  const Index n = x.size();
  const Index delay = (taps.size() - 1) / 2;
  Seq out = Seq::Zero(n);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < taps.size(); ++k) {
      Index j = i + k - delay;
      if (j < 0 || j >= n) {
        if (!clamp_edges) continue;
        j = std::clamp<Index>(j, 0, n - 1);
      }
      out[i] += taps[k] * x[j];
    }
  }
  return out;
}

}  // namespace

Modulation from_class_index(int index) {
  if (index < 0 || index >= kNumClasses) throw std::invalid_argument("class index out of range");
  return static_cast<Modulation>(index);
}

std::string_view label_key(Modulation m) {
  switch (m) {
    case Modulation::Bpsk: return "bpsk";
    case Modulation::Qpsk: return "qpsk";
    case Modulation::Qam16: return "qam16";
    case Modulation::Gfsk: return "gfsk";
  }
  throw std::invalid_argument("unknown modulation");
}

std::string_view display_name(Modulation m) {
  switch (m) {
    case Modulation::Bpsk: return "BPSK";
    case Modulation::Qpsk: return "QPSK";
    case Modulation::Qam16: return "16-QAM";
    case Modulation::Gfsk: return "GFSK";
  }
  throw std::invalid_argument("unknown modulation");
}

Modulation parse_label(std::string_view key) {
  for (Modulation m : kAllModulations) {
    if (label_key(m) == key) return m;
  }
  throw std::invalid_argument("unknown modulation label '" + std::string(key) + "'");
}

void ModemConfig::validate() const {
  if (!(sample_rate > 0.0)) throw std::invalid_argument("sample_rate must be positive");
  if (sps < 2) throw std::invalid_argument("sps must be >= 2");
  if (!(gfsk_h > 0.0)) throw std::invalid_argument("gfsk_h must be positive");
  if (!(gfsk_bt > 0.0)) throw std::invalid_argument("gfsk_bt must be positive");
  if (const auto* rrc = std::get_if<RrcPulse>(&pulse)) {
    if (!(rrc->rolloff > 0.0 && rrc->rolloff <= 1.0)) throw std::invalid_argument("rolloff must be in (0, 1]");
    if (rrc->span_symbols < 1) throw std::invalid_argument("span_symbols must be >= 1");
  }
}

const ConstellationMap& ConstellationMap::for_scheme(Modulation m) {
  static const ConstellationMap bpsk = make_bpsk();
  static const ConstellationMap qpsk = make_qpsk();
  static const ConstellationMap qam16 = make_qam16();
  switch (m) {
    case Modulation::Bpsk: return bpsk;
    case Modulation::Qpsk: return qpsk;
    case Modulation::Qam16: return qam16;
    case Modulation::Gfsk: break;
  }
  throw std::invalid_argument("GFSK has no constellation map");
}

int bits_per_symbol(Modulation m) {
  return m == Modulation::Gfsk ? 1 : ConstellationMap::for_scheme(m).bits_per_symbol;
}

Bits random_bits(std::size_t count, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Bits bits(count);
  for (std::size_t i = 0; i < count; i += 64) {
    std::uint64_t word = rng();
    for (std::size_t b = 0; b < 64 && i + b < count; ++b) bits[i + b] = static_cast<std::uint8_t>((word >> b) & 1U);
  }
  return bits;
}

RealSeq rrc_taps(double rolloff, int sps, int span_symbols) {
  if (!(rolloff > 0.0 && rolloff <= 1.0)) throw std::invalid_argument("rrc_taps: rolloff must be in (0, 1]");
  if (sps < 1 || span_symbols < 1) throw std::invalid_argument("rrc_taps: sps and span must be positive");
  const Index count = static_cast<Index>(span_symbols) * sps + 1;
  if (count % 2 == 0) throw std::invalid_argument("rrc_taps: tap count must be odd");

  const double beta = rolloff;
  const double pi = std::numbers::pi;
  RealSeq taps(count);
  const Index center = count / 2;
  for (Index k = 0; k < count; ++k) {
    const double t = static_cast<double>(k - center) / sps;  // in symbol periods
    if (k == center) {
      taps[k] = 1.0 - beta + 4.0 * beta / pi;
    } else if (std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-12) {
      taps[k] = beta / std::numbers::sqrt2 *
                ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * beta)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * beta)));
    } else {
      const double num = std::sin(pi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(pi * t * (1.0 + beta));
      const double den = pi * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
      taps[k] = num / den;
    }
  }
  return taps / taps.norm();
}

RealSeq gaussian_taps(double bt, int sps, int span_symbols) {
  if (!(bt > 0.0) || sps < 1 || span_symbols < 1) throw std::invalid_argument("gaussian_taps: invalid parameters");
  const Index count = static_cast<Index>(span_symbols) * sps + 1 + ((span_symbols * sps) % 2);
  const Index center = count / 2;
  RealSeq taps(count);
  const double alpha = 2.0 * std::numbers::pi * std::numbers::pi * bt * bt / std::numbers::ln2;
  for (Index k = 0; k < count; ++k) {
    const double t = static_cast<double>(k - center) / sps;
    taps[k] = std::exp(-alpha * t * t);
  }
  return taps / taps.sum();
}

ComplexSeq modulate(Modulation scheme, const Bits& bits, const ModemConfig& cfg) {
  cfg.validate();
  if (scheme == Modulation::Gfsk) return gfsk_modulate(bits, cfg);

  const ConstellationMap& map = ConstellationMap::for_scheme(scheme);
  const auto k = static_cast<std::size_t>(map.bits_per_symbol);
  if (bits.size() % k != 0) throw std::invalid_argument("modulate: bit count not divisible by bits per symbol");
  const Index symbols = static_cast<Index>(bits.size() / k);
  const Index sps = cfg.sps;

  ComplexSeq sym(symbols);
  for (Index s = 0; s < symbols; ++s) {
    std::size_t pattern = 0;
    for (std::size_t b = 0; b < k; ++b) {
      const std::uint8_t bit = bits[static_cast<std::size_t>(s) * k + b];
      if (bit > 1) throw std::invalid_argument("modulate: bits must be 0 or 1");
      pattern = (pattern << 1) | bit;
    }
    sym[s] = map.points[pattern];
  }

  if (std::holds_alternative<RectPulse>(cfg.pulse)) {
    ComplexSeq out(symbols * sps);
    for (Index n = 0; n < out.size(); ++n) out[n] = sym[n / sps];
    return out;
  }

  const auto& rrc = std::get<RrcPulse>(cfg.pulse);
  const RealSeq taps = rrc_taps(rrc.rolloff, cfg.sps, rrc.span_symbols) * std::sqrt(static_cast<double>(sps));
  ComplexSeq impulses = ComplexSeq::Zero(symbols * sps);
  for (Index s = 0; s < symbols; ++s) impulses[s * sps] = sym[s];
  return filter_same(impulses, taps, false);
}

ComplexSeq gfsk_modulate(const Bits& bits, const ModemConfig& cfg) {
  cfg.validate();
  if (bits.empty()) throw std::invalid_argument("gfsk_modulate: no bits");
  const Index sps = cfg.sps;
  const Index n = static_cast<Index>(bits.size()) * sps;

  RealSeq nrz(n);
  for (Index i = 0; i < n; ++i) {
    const std::uint8_t bit = bits[static_cast<std::size_t>(i / sps)];
    if (bit > 1) throw std::invalid_argument("gfsk_modulate: bits must be 0 or 1");
    nrz[i] = bit ? 1.0 : -1.0;
  }
  const RealSeq freq = filter_same(nrz, gaussian_taps(cfg.gfsk_bt, cfg.sps), true);

  // Deviation h/(2T) gives pi*h/sps radians per sample at full swing.
  const double step = std::numbers::pi * cfg.gfsk_h / static_cast<double>(sps);
  ComplexSeq out(n);
  double phase = 0.0;
  for (Index i = 0; i < n; ++i) {
    out[i] = std::polar(1.0, phase);
    phase = std::remainder(phase + step * freq[i], 2.0 * std::numbers::pi);
  }
  return out;
}

double mean_power(const ComplexSeq& x) {
  if (x.size() == 0) return 0.0;
  return x.squaredNorm() / static_cast<double>(x.size());
}

ComplexSeq awgn(const ComplexSeq& x, double snr_db, std::uint64_t seed) {
  if (x.size() == 0) throw std::invalid_argument("awgn: empty input");
  dsp::require_finite(x, "awgn");
  if (std::isinf(snr_db) && snr_db > 0.0) return x;
  if (std::isnan(snr_db) || std::isinf(snr_db)) throw std::invalid_argument("awgn: invalid snr");
  const double power = mean_power(x);
  if (power == 0.0) throw std::invalid_argument("awgn: zero-power input");

  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0) / 2.0);
  SplitMix64 rng(seed);
  ComplexSeq out = x;
  for (Index i = 0; i < out.size(); ++i) {
    const double re = rng.normal();
    const double im = rng.normal();
    out[i] += std::complex<double>(sigma * re, sigma * im);
  }
  return out;
}

std::vector<ComplexSeq> segment(const ComplexSeq& x, Index length, Index stride) {
  if (length < 1 || stride < 1) throw std::invalid_argument("segment: length and stride must be >= 1");
  std::vector<ComplexSeq> out;
  if (x.size() < length) return out;
  const Index count = (x.size() - length) / stride + 1;
  out.reserve(static_cast<std::size_t>(count));
  for (Index s = 0; s < count; ++s) out.emplace_back(x.segment(s * stride, length));
  return out;
}

ComplexSeq normalize_segment(const ComplexSeq& seg) {
  dsp::require_finite(seg, "normalize_segment");
  const double m = std::max(seg.real().cwiseAbs().maxCoeff(), seg.imag().cwiseAbs().maxCoeff());
  if (m == 0.0) throw std::invalid_argument("normalize_segment: all-zero segment");
  ComplexSeq out = seg / m;
  // Pin the extreme component exactly to +-1 against division rounding.
  for (Index i = 0; i < out.size(); ++i) {
    if (std::abs(seg[i].real()) == m) out[i].real(std::copysign(1.0, seg[i].real()));
    if (std::abs(seg[i].imag()) == m) out[i].imag(std::copysign(1.0, seg[i].imag()));
  }
  return out;
}

}  // namespace hybridsig::modem
