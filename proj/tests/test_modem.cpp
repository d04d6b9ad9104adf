#include "oracles.hpp"

#include "hybridsig/modem.hpp"

#include <doctest.h>

#include <set>

using namespace hybridsig::modem;

namespace {

ModemConfig rect(int sps) {
  ModemConfig cfg;
  cfg.sps = sps;
  cfg.pulse = RectPulse{};
  return cfg;
}

std::vector<Index> local_maxima(const RealSeq& p) {
  std::vector<Index> out;
  for (Index i = 1; i + 1 < p.size(); ++i) {
    if (p[i] > p[i - 1] && p[i] > p[i + 1]) out.push_back(i);
  }
  return out;
}

}  // namespace

TEST_CASE("Gray constellation examples") {
  const ComplexSeq b = modulate(Modulation::Bpsk, {0, 1}, rect(2));
  REQUIRE(b.size() == 4);
  CHECK(b[0] == std::complex<double>(1, 0));
  CHECK(b[1] == std::complex<double>(1, 0));
  CHECK(b[2] == std::complex<double>(-1, 0));
  CHECK(b[3] == std::complex<double>(-1, 0));

  const ComplexSeq q = modulate(Modulation::Qpsk, {0, 0}, rect(2));
  CHECK(std::abs(q[0] - std::complex<double>(1, 1) / std::sqrt(2.0)) < 1e-15);

  const ComplexSeq m = modulate(Modulation::Qam16, {0, 0, 0, 0}, rect(2));
  CHECK(std::abs(m[0] - std::complex<double>(-3, -3) / std::sqrt(10.0)) < 1e-15);
}

TEST_CASE("constellations have unit power and Gray neighbours") {
  for (Modulation mod : {Modulation::Bpsk, Modulation::Qpsk, Modulation::Qam16}) {
    const auto& map = ConstellationMap::for_scheme(mod);
    CHECK(map.points.size() == (std::size_t{1} << map.bits_per_symbol));
    double power = 0.0;
    for (auto p : map.points) power += std::norm(p);
    CHECK(std::abs(power / map.points.size() - 1.0) < 1e-12);

    if (mod == Modulation::Bpsk) continue;
    // nearest neighbours differ in exactly one bit
    double dmin = 1e9;
    for (std::size_t a = 0; a < map.points.size(); ++a)
      for (std::size_t b = a + 1; b < map.points.size(); ++b) dmin = std::min(dmin, std::abs(map.points[a] - map.points[b]));
    for (std::size_t a = 0; a < map.points.size(); ++a)
      for (std::size_t b = a + 1; b < map.points.size(); ++b) {
        if (std::abs(std::abs(map.points[a] - map.points[b]) - dmin) > 1e-12) continue;
        CAPTURE(a);
        CAPTURE(b);
        CHECK(std::popcount(a ^ b) == 1);
      }
  }
}

TEST_CASE("bit count must divide into symbols") {
  CHECK_THROWS_AS(modulate(Modulation::Qpsk, {0, 1, 1}, rect(2)), std::invalid_argument);
  CHECK_THROWS_AS(modulate(Modulation::Qam16, {0, 1}, ModemConfig{}), std::invalid_argument);
}

TEST_CASE("rect pulse keeps samples on the constellation and BPSK real") {
  const Bits bits = random_bits(4000, 9);
  for (Modulation mod : {Modulation::Bpsk, Modulation::Qpsk, Modulation::Qam16}) {
    const auto& map = ConstellationMap::for_scheme(mod);
    const ComplexSeq x = modulate(mod, bits, rect(4));
    for (Index i = 0; i < x.size(); ++i) {
      double best = 1e9;
      for (auto p : map.points) best = std::min(best, std::abs(x[i] - p));
      REQUIRE(best == 0.0);
    }
    if (mod == Modulation::Bpsk) CHECK(x.imag().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("modulator outputs have unit power away from the edges") {
  const ModemConfig cfg;
  for (Modulation mod : kAllModulations) {
    const Bits bits = random_bits(4 * 8192, 21);
    const ComplexSeq x = modulate(mod, bits, cfg);
    const Index guard = 11 * cfg.sps;
    const ComplexSeq interior = x.segment(guard, x.size() - 2 * guard);
    // 16-QAM symbol energy itself fluctuates, so compare against the drawn symbols.
    double expected = 1.0;
    if (mod == Modulation::Qam16) {
      const ComplexSeq sym = modulate(mod, bits, rect(2));
      expected = mean_power(sym);
    }
    CAPTURE(label_key(mod));
    CHECK(std::abs(mean_power(interior) - expected) < 2e-3);
  }
}

TEST_CASE("root raised cosine taps") {
  const RealSeq taps = rrc_taps(0.35, 8, 11);
  REQUIRE(taps.size() == 89);
  for (Index k = 0; k < taps.size(); ++k) CHECK(taps[k] == doctest::Approx(taps[taps.size() - 1 - k]).epsilon(1e-14));
  CHECK(std::abs(taps.squaredNorm() - 1.0) < 1e-12);
  CHECK(taps.maxCoeff() == taps[44]);

  // before normalization the centre is 1 - b + 4b/pi; compare to a neighbour
  // computed from the general formula
  const double b = 0.35, pi = std::numbers::pi, t = 1.0 / 8.0;
  const double neighbour = (std::sin(pi * t * (1 - b)) + 4 * b * t * std::cos(pi * t * (1 + b))) /
                           (pi * t * (1 - (4 * b * t) * (4 * b * t)));
  CHECK(taps[44] / taps[45] == doctest::Approx((1 - b + 4 * b / pi) / neighbour).epsilon(1e-12));

  // t = T/(4b) lands on a tap for b = 0.25, sps = 4
  const RealSeq singular = rrc_taps(0.25, 4, 6);
  CHECK(singular.allFinite());
  CHECK(std::abs(singular.squaredNorm() - 1.0) < 1e-12);

  CHECK_THROWS_AS(rrc_taps(0.0, 8, 11), std::invalid_argument);
  CHECK_THROWS_AS(rrc_taps(1.5, 8, 11), std::invalid_argument);
  CHECK_THROWS_AS(rrc_taps(0.35, 8, 0), std::invalid_argument);
}

TEST_CASE("GFSK envelope and deviation") {
  ModemConfig cfg;
  const ComplexSeq x = gfsk_modulate(random_bits(1024, 4), cfg);
  CHECK((x.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-12);

  for (std::uint8_t bit : {std::uint8_t{0}, std::uint8_t{1}}) {
    const ComplexSeq run = gfsk_modulate(Bits(64, bit), cfg);
    const double expected = (bit ? 1.0 : -1.0) * std::numbers::pi / 8.0;
    for (Index n = 100; n < 400; ++n) {
      const double step = std::arg(run[n + 1] * std::conj(run[n]));
      REQUIRE(step == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("GFSK spectrum has mirrored peaks about DC") {
  const ModemConfig cfg;
  Bits alternating(64);
  for (std::size_t i = 0; i < alternating.size(); ++i) alternating[i] = i % 2;
  const RealSeq p = hybridsig::dsp::welch_psd(gfsk_modulate(alternating, cfg)).bins;
  // Alternating bits put spectral lines every half symbol rate: 1e6/16 Hz,
  // i.e. 16 of 256 bins from DC.
  const auto peaks = local_maxima(p);
  const std::set<Index> set(peaks.begin(), peaks.end());
  CHECK(set.count(128 - 16) == 1);
  CHECK(set.count(128 + 16) == 1);
  CHECK(p[128 - 16] == doctest::Approx(p[128 + 16]).epsilon(1e-6));

  // Random data: the two strongest local maxima sit at mirrored bins.
  const RealSeq r = hybridsig::dsp::welch_psd(gfsk_modulate(random_bits(4096, 77), cfg), 256, 0.5).bins;
  auto maxima = local_maxima(r);
  std::sort(maxima.begin(), maxima.end(), [&](Index a, Index b) { return r[a] > r[b]; });
  REQUIRE(maxima.size() >= 2);
  CHECK(maxima[0] + maxima[1] == 256);
  CHECK(std::abs(maxima[0] - 128) >= 8);
}

TEST_CASE("awgn") {
  const Bits bits = random_bits(2 * 12500, 3);
  const ComplexSeq x = modulate(Modulation::Qpsk, bits, ModemConfig{});
  REQUIRE(x.size() == 100000);

  CHECK(awgn(x, kNoNoise, 1) == x);
  for (double snr : {0.0, 5.0, 10.0, 20.0}) {
    const ComplexSeq y = awgn(x, snr, 42);
    const double measured = 10.0 * std::log10(mean_power(x) / mean_power(y - x));
    CAPTURE(snr);
    CHECK(std::abs(measured - snr) < 0.2);
  }
  CHECK(awgn(x, 10.0, 8) == awgn(x, 10.0, 8));

  const ComplexSeq base = ComplexSeq::Ones(10000);
  const ComplexSeq n1 = awgn(base, 0.0, 1) - base;
  const ComplexSeq n2 = awgn(base, 0.0, 2) - base;
  const double corr = std::abs(n1.dot(n2)) / (n1.norm() * n2.norm());
  CHECK(corr < 0.05);

  CHECK_THROWS_AS(awgn(ComplexSeq::Zero(16), 10.0, 1), std::invalid_argument);
}

TEST_CASE("segmentation") {
  CHECK(segment(ComplexSeq::Zero(512 * 50)).size() == 50);
  const ComplexSeq x = oracle::random_complex(1000, 2);
  const auto one = segment(x);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == x.head(512));
  CHECK(segment(ComplexSeq::Zero(511)).empty());

  const ComplexSeq whole = oracle::random_complex(512 * 3, 4);
  const auto parts = segment(whole);
  ComplexSeq joined(whole.size());
  for (std::size_t i = 0; i < parts.size(); ++i) joined.segment(static_cast<Index>(i) * 512, 512) = parts[i];
  CHECK(joined == whole);
}

TEST_CASE("normalize_segment") {
  ComplexSeq x(2);
  x << std::complex<double>(2, 1), std::complex<double>(-4, 1);
  const ComplexSeq y = normalize_segment(x);
  CHECK(y[0] == std::complex<double>(0.5, 0.25));
  CHECK(y[1] == std::complex<double>(-1.0, 0.25));

  const ComplexSeq r = oracle::random_complex(512, 6);
  const ComplexSeq n = normalize_segment(r);
  CHECK((normalize_segment(ComplexSeq(3.7 * r)) - n).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(normalize_segment(n) == n);
  const double m = std::max(n.real().cwiseAbs().maxCoeff(), n.imag().cwiseAbs().maxCoeff());
  CHECK(m == 1.0);
  CHECK_THROWS_AS(normalize_segment(ComplexSeq::Zero(4)), std::invalid_argument);
}

TEST_CASE("labels round trip") {
  for (Modulation m : kAllModulations) {
    CHECK(parse_label(label_key(m)) == m);
    CHECK(from_class_index(class_index(m)) == m);
  }
  CHECK_THROWS_AS(parse_label("fm"), std::invalid_argument);
}
