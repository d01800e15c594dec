#pragma once

// One SGD step on a misclassified sample shrinks every layer.
//
// For a network without explicit biases and homogeneous activations,
// <grad_{W_l} N, W_l> = N(x) for every layer, so the first-order change of
// ||W_l||^2 is -2 h L' |N| in every layer and the layers differ only by
// h^2 (||g_l||^2 - ||g_{l+1}||^2).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "noisysgd/loss.hpp"
#include "noisysgd/model.hpp"
#include "noisysgd/rng.hpp"
#include "noisysgd/theorems/report.hpp"
#include "noisysgd/train.hpp"

namespace noisysgd {

struct Theorem1Config {
  std::size_t trials = 1000;
  double h = 1e-5;
  std::vector<std::size_t> depths = {1, 2, 3};  // number of weight layers
  std::vector<Activation> activations = {Activation::relu(), Activation::leaky_relu(0.1)};
  std::vector<SurrogateLoss> losses = {SurrogateLoss::hinge(0.0), SurrogateLoss::hinge(1.0),
                                       SurrogateLoss::logistic()};
  std::size_t max_width = 8;
  std::size_t max_input = 6;
  double min_abs_output = 1e-3;
  double balance_factor = 10.0;
  std::size_t max_attempts = 1000;
  std::uint64_t seed = 1;
};

/// ||after||^2 - ||before||^2 summed as (a - b)(a + b) to avoid cancellation.
inline double squared_norm_change(const Matrix& before, const Matrix& after) {
  const auto b = before.values();
  const auto a = after.values();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] + b[i]);
  return s;
}

struct Theorem1Trial {
  std::vector<double> deltas;        // change of ||W_l||^2 per layer
  std::vector<double> grad_sq;       // ||g_l||^2 per layer
  double output = 0.0;
  double loss_slope = 0.0;           // L'(-y N)
  bool all_decreased = false;
  double worst_balance_ratio = 0.0;  // |D_l - D_{l+1}| / (h^2 max(||g_l||^2, ||g_{l+1}||^2))
  std::optional<bool> appendix_inequality;  // one-hidden-layer bound on the first layer
};

/// Applies one step to `net` on the misclassified (x, y) and measures every layer.
inline Theorem1Trial theorem1_step(const Network& net, const Vector& x, double y,
                                   const SurrogateLoss& loss, double h) {
  const ForwardTrace trace = forward(net, x);
  const TargetSpec target = BinaryLabel{y};
  const GradientSet grad = backprop(net, trace, target, loss);
  const Network next = sgd_step(net, x, target, loss, h);

  Theorem1Trial t;
  t.output = trace.output[0];
  t.loss_slope = loss.derivative(-y * t.output);
  t.all_decreased = true;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    t.deltas.push_back(squared_norm_change(net.weight(l), next.weight(l)));
    t.grad_sq.push_back(grad.squared_norm(l));
    if (!(t.deltas.back() < 0.0)) t.all_decreased = false;
  }
  for (std::size_t l = 0; l + 1 < net.layer_count(); ++l) {
    const double bound = h * h * std::max(t.grad_sq[l], t.grad_sq[l + 1]);
    const double gap = std::abs(t.deltas[l] - t.deltas[l + 1]);
    const double ratio = bound > 0.0 ? gap / bound : (gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    t.worst_balance_ratio = std::max(t.worst_balance_ratio, ratio);
  }
  if (net.layer_count() == 2) {
    const double v_sq = frobenius_norm_squared(net.weight(1));
    const double x_sq = squared_norm(trace.first_layer_input.values());
    const double rhs = 2.0 * h * t.loss_slope * y * t.output +
                       h * h * t.loss_slope * t.loss_slope * v_sq * x_sq;
    t.appendix_inequality = t.deltas[0] <= rhs + 1e-15 * frobenius_norm_squared(net.weight(0));
  }
  return t;
}

inline TheoremReport check_theorem1(const Theorem1Config& cfg) {
  TheoremReport rep;
  rep.id = "thm1";
  rep.config = {{"trials", cfg.trials},          {"h", cfg.h},
                {"min_abs_output", cfg.min_abs_output}, {"balance_factor", cfg.balance_factor},
                {"seed", cfg.seed}};
  if (!(cfg.h > 0.0 && cfg.h <= 1e-4)) throw InvalidArgument("check_theorem1: need 0 < h <= 1e-4");
  if (cfg.depths.empty() || cfg.activations.empty() || cfg.losses.empty()) {
    throw InvalidArgument("check_theorem1: empty architecture family");
  }
  RngStream rng(cfg.seed, derive_stream_id(cfg.seed, 0x7431));

  std::size_t done = 0, layers_checked = 0, layers_decreased = 0, appendix_checked = 0,
              appendix_held = 0, balance_ok = 0, balance_pairs = 0;
  double worst_margin = -std::numeric_limits<double>::infinity();  // max over layers of D_l
  double worst_balance = 0.0;
  std::size_t failed_draws = 0;

  while (done < cfg.trials) {
    const std::size_t depth = cfg.depths[rng.draw_index(cfg.depths.size())];
    const Activation act = cfg.activations[rng.draw_index(cfg.activations.size())];
    const SurrogateLoss loss = cfg.losses[rng.draw_index(cfg.losses.size())];
    ArchSpec spec;
    spec.input_dim = 2 + rng.draw_index(cfg.max_input - 1);
    for (std::size_t l = 1; l < depth; ++l) spec.hidden.push_back(2 + rng.draw_index(cfg.max_width - 1));
    spec.activation = act;
    spec.mode = ModeKind::AugmentedInput;
    const Network net = init_network(spec, InitLaw{}, rng);

    std::optional<std::pair<Vector, double>> pick;
    for (std::size_t a = 0; a < cfg.max_attempts && !pick; ++a) {
      Vector x(spec.input_dim);
      for (double& v : x) v = rng.draw_gaussian();
      const double y = rng.draw_bernoulli(0.5) ? 1.0 : -1.0;
      const double out = forward(net, x).output[0];
      if (y * out < 0.0 && std::abs(out) >= cfg.min_abs_output) pick.emplace(std::move(x), y);
    }
    if (!pick) {
      if (++failed_draws > cfg.trials) break;
      continue;
    }
    const Theorem1Trial t = theorem1_step(net, pick->first, pick->second, loss, cfg.h);
    ++done;
    layers_checked += t.deltas.size();
    for (double d : t.deltas) {
      layers_decreased += d < 0.0 ? 1 : 0;
      worst_margin = std::max(worst_margin, d);
    }
    if (t.deltas.size() > 1) {
      ++balance_pairs;
      balance_ok += t.worst_balance_ratio <= cfg.balance_factor ? 1 : 0;
      worst_balance = std::max(worst_balance, t.worst_balance_ratio);
    }
    if (t.appendix_inequality) {
      ++appendix_checked;
      appendix_held += *t.appendix_inequality ? 1 : 0;
    }
  }

  rep.evidence = {{"trials_done", done},
                  {"layers_checked", layers_checked},
                  {"layers_strictly_decreased", layers_decreased},
                  {"worst_norm_change", worst_margin},
                  {"balance_pairs", balance_pairs},
                  {"balance_within_bound", balance_ok},
                  {"worst_balance_ratio", worst_balance},
                  {"one_hidden_layer_bound_checked", appendix_checked},
                  {"one_hidden_layer_bound_held", appendix_held}};
  if (done < cfg.trials) {
    rep.verdict = Verdict::Inconclusive;
    rep.notes.push_back("could not find enough misclassified samples");
    return rep;
  }
  const bool ok = layers_decreased == layers_checked && balance_ok == balance_pairs &&
                  appendix_held == appendix_checked;
  rep.verdict = ok ? Verdict::Pass : Verdict::Fail;
  return rep;
}

}  // namespace noisysgd
