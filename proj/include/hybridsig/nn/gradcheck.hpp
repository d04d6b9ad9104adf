#pragma once

#include "hybridsig/nn/model.hpp"

#include <functional>
#include <numeric>
#include <sstream>
#include <string>

namespace hybridsig::nn {

/// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero components from
/// turning rounding noise into large relative errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Central-difference gradient of a scalar function at x.
inline Tensor<double> numeric_gradient(const std::function<double(const Tensor<double>&)>& f, const Tensor<double>& x,
                                       double h = 1e-5) {
  Tensor<double> probe = x;
  Tensor<double> grad(x.shape());
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(probe);
    probe[i] = saved - h;
    const double down = f(probe);
    probe[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline double max_relative_error(const Tensor<double>& analytic, const Tensor<double>& numeric, double floor = 1e-6) {
  if (analytic.size() != numeric.size()) throw std::invalid_argument("max_relative_error: size mismatch");
  double worst = 0.0;
  for (Index i = 0; i < analytic.size(); ++i) worst = std::max(worst, relative_error(analytic[i], numeric[i], floor));
  return worst;
}

struct GradCheckOptions {
  double h = 1e-5;
  double tolerance = 1e-4;
  Index samples_per_layer = 50;
  std::uint64_t seed = 1;
  bool check_input = true;
};

struct LayerCheck {
  std::string name;
  Index sampled = 0;
  Index skipped = 0;  // coordinates whose perturbation crossed a ReLU or max-pool switch
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<LayerCheck> layers;
  double tolerance = 0.0;

  bool passed() const {
    return std::all_of(layers.begin(), layers.end(), [](const LayerCheck& l) { return l.passed; });
  }

  std::string summary() const {
    std::ostringstream os;
    for (const auto& l : layers) {
      os << (l.passed ? "ok   " : "FAIL ") << l.name << " sampled=" << l.sampled << " skipped=" << l.skipped
         << " max_rel_err=" << l.max_rel_error << "\n";
    }
    return os.str();
  }
};

/// Computes parameter gradients (aligned with parameters()) and the input
/// gradient of softmax-xent(logits(input), target).
using AnalyticGradientFn = std::function<void(const CnnModel<double>&, const Tensor<double>& input, Index target,
                                              std::vector<Tensor<double>>& param_grads, Tensor<double>& input_grad)>;

inline void backprop_gradient(const CnnModel<double>& model, const Tensor<double>& input, Index target,
                              std::vector<Tensor<double>>& param_grads, Tensor<double>& input_grad) {
  Trace<double> trace;
  const auto logits = model.logits(input, &trace);
  const auto lg = softmax_xent(logits, target);
  param_grads = model.zero_gradients();
  model.backward(trace, lg.grad_logits, param_grads, &input_grad);
}

namespace detail {

// ReLU on/off pattern and pooling winners; identical patterns mean the loss is
// smooth between the two evaluation points.
inline std::vector<Index> activation_pattern(const CnnModel<double>& model, const Trace<double>& trace) {
  std::vector<Index> pattern;
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    const auto kind = model.layers()[i].kind;
    if (kind == LayerKind::Relu) {
      for (double v : trace.inputs[i].values()) pattern.push_back(v > 0.0 ? 1 : (v < 0.0 ? 0 : 2));
    } else if (kind == LayerKind::MaxPool2x2) {
      pattern.insert(pattern.end(), trace.pool_argmax[i].begin(), trace.pool_argmax[i].end());
    }
  }
  return pattern;
}

struct Evaluation {
  double loss;
  std::vector<Index> pattern;
};

inline Evaluation evaluate_loss(const CnnModel<double>& model, const Tensor<double>& input, Index target) {
  Trace<double> trace;
  const auto logits = model.logits(input, &trace);
  return {softmax_xent(logits, target).loss, activation_pattern(model, trace)};
}

template <typename Perturb>
void check_coordinates(LayerCheck& check, Index total, const GradCheckOptions& opt, SplitMix64& rng,
                       const std::vector<Index>& base_pattern, Perturb&& perturb_and_compare) {
  std::vector<Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Index{0});
  shuffle(std::span<Index>(order), rng);
  for (Index k : order) {
    if (check.sampled >= opt.samples_per_layer) break;
    const auto [analytic, up, down] = perturb_and_compare(k);
    if (up.pattern != base_pattern || down.pattern != base_pattern) {
      ++check.skipped;
      continue;
    }
    const double numeric = (up.loss - down.loss) / (2.0 * opt.h);
    check.max_rel_error = std::max(check.max_rel_error, relative_error(analytic, numeric));
    ++check.sampled;
  }
  check.passed = check.max_rel_error < opt.tolerance && check.sampled > 0;
}

}  // namespace detail

/// Compares `analytic` gradients against central differences on a random
/// subsample of each trainable layer (and the input). Coordinates at which
/// the perturbation changes a ReLU sign or a max-pool winner are skipped.
inline GradCheckReport grad_check(const CnnModel<double>& model, const Tensor<double>& input, Index target,
                                  const GradCheckOptions& opt = {},
                                  const AnalyticGradientFn& analytic = backprop_gradient) {
  GradCheckReport report;
  report.tolerance = opt.tolerance;
  std::vector<Tensor<double>> param_grads;
  Tensor<double> input_grad;
  analytic(model, input, target, param_grads, input_grad);
  const auto base = detail::evaluate_loss(model, input, target);

  SplitMix64 rng(opt.seed);
  CnnModel<double> probe = model;
  std::size_t slot = 0;
  for (std::size_t li = 0; li < probe.layers().size(); ++li) {
    auto& layer = probe.layers()[li];
    if (!layer.trainable()) continue;
    LayerCheck check{std::to_string(li) + ":" + std::string(layer_kind_name(layer.kind)), 0, 0, 0.0, true};
    const Index nw = layer.weight.size();
    const Tensor<double>& gw = param_grads[slot];
    const Tensor<double>& gb = param_grads[slot + 1];
    detail::check_coordinates(check, nw + layer.bias.size(), opt, rng, base.pattern, [&](Index k) {
      double& theta = k < nw ? layer.weight[k] : layer.bias[k - nw];
      const double a = k < nw ? gw[k] : gb[k - nw];
      const double saved = theta;
      theta = saved + opt.h;
      auto up = detail::evaluate_loss(probe, input, target);
      theta = saved - opt.h;
      auto down = detail::evaluate_loss(probe, input, target);
      theta = saved;
      return std::tuple{a, std::move(up), std::move(down)};
    });
    report.layers.push_back(std::move(check));
    slot += 2;
  }

  if (opt.check_input) {
    LayerCheck check{"input", 0, 0, 0.0, true};
    Tensor<double> x = input;
    detail::check_coordinates(check, x.size(), opt, rng, base.pattern, [&](Index k) {
      const double saved = x[k];
      x[k] = saved + opt.h;
      auto up = detail::evaluate_loss(model, x, target);
      x[k] = saved - opt.h;
      auto down = detail::evaluate_loss(model, x, target);
      x[k] = saved;
      return std::tuple{input_grad[k], std::move(up), std::move(down)};
    });
    report.layers.push_back(std::move(check));
  }
  return report;
}

}  // namespace hybridsig::nn
