#pragma once

// Brute-force reference implementations, deliberately written without
// sharing code with the library.

#include "hybridsig/nn/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace oracle {

inline Eigen::VectorXcd naive_dft(const Eigen::VectorXcd& x) {
  const auto n = x.size();
  Eigen::VectorXcd out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index m = 0; m < n; ++m) {
      // reduce k*m mod n first so the angle stays small
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * m) % n) / static_cast<double>(n);
      acc += x[m] * std::polar(1.0, angle);
    }
    out[k] = acc;
  }
  return out;
}

inline Eigen::VectorXcd random_complex(Eigen::Index n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d;
  Eigen::VectorXcd x(n);
  for (auto& v : x) v = {d(gen), d(gen)};
  return x;
}

inline hybridsig::nn::Tensor<double> random_tensor(const hybridsig::nn::Shape& shape, unsigned seed,
                                                   double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> d(-scale, scale);
  hybridsig::nn::Tensor<double> t(shape);
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = d(gen);
  return t;
}

// out[y][x][o] = b[o] + sum over ky, kx, c of w[ky][kx][c][o] * in[y+ky-1][x+kx-1][c]
inline hybridsig::nn::Tensor<double> naive_conv(const hybridsig::nn::Tensor<double>& in,
                                                const hybridsig::nn::Tensor<double>& w,
                                                const hybridsig::nn::Tensor<double>& b) {
  const auto H = in.dim(0), W = in.dim(1), C = in.dim(2), O = w.dim(3);
  hybridsig::nn::Tensor<double> out({H, W, O});
  for (Eigen::Index y = 0; y < H; ++y)
    for (Eigen::Index x = 0; x < W; ++x)
      for (Eigen::Index o = 0; o < O; ++o) {
        double acc = b[o];
        for (Eigen::Index ky = 0; ky < 3; ++ky)
          for (Eigen::Index kx = 0; kx < 3; ++kx)
            for (Eigen::Index c = 0; c < C; ++c) {
              const auto sy = y + ky - 1, sx = x + kx - 1;
              if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
              acc += w[((ky * 3 + kx) * C + c) * O + o] * in[(sy * W + sx) * C + c];
            }
        out[(y * W + x) * O + o] = acc;
      }
  return out;
}

// Parameter count of the reference classifier, from layer shapes alone.
inline long long reference_parameter_count(long long channels, long long side = 128) {
  long long total = 0, in = channels, s = side;
  for (long long filters : {16, 32, 64}) {
    total += 3 * 3 * in * filters + filters;
    in = filters;
    s = (s + 1) / 2;
  }
  const long long flat = s * s * in;
  total += flat * 256 + 256;
  total += 256 * 4 + 4;
  return total;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("hybridsig_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace oracle
