#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "noisysgd/error.hpp"
#include "noisysgd/linalg.hpp"
#include "noisysgd/model.hpp"

namespace noisysgd {

/// Increasing convex L applied to the margin argument xi = -y N(x).
///
/// Derivatives are right-derivatives, so Hinge(beta) has L'(-beta) = 1.
struct SurrogateLoss {
  enum class Kind { Hinge, Logistic };

  Kind kind = Kind::Hinge;
  double beta = 0.0;

  static SurrogateLoss hinge(double beta = 0.0) {
    if (!(beta >= 0.0)) throw InvalidArgument("hinge: beta must be >= 0");
    return {Kind::Hinge, beta};
  }
  static SurrogateLoss logistic() noexcept { return {Kind::Logistic, 0.0}; }

  double value(double xi) const noexcept {
    if (kind == Kind::Hinge) return std::max(0.0, beta + xi);
    return xi > 0.0 ? xi + std::log1p(std::exp(-xi)) : std::log1p(std::exp(xi));
  }

  double derivative(double xi) const noexcept {
    if (kind == Kind::Hinge) return xi >= -beta ? 1.0 : 0.0;
    if (xi >= 0.0) return 1.0 / (1.0 + std::exp(-xi));
    const double e = std::exp(xi);
    return e / (1.0 + e);
  }

  /// M = sup L'.
  double sup_derivative() const noexcept { return 1.0; }

  /// m: jump of L' at the kink for hinge, L''(0) for logistic.
  double kink_gap() const noexcept { return kind == Kind::Hinge ? 1.0 : 0.25; }

  std::string name() const {
    return kind == Kind::Hinge ? "hinge(" + std::to_string(beta) + ")" : "logistic";
  }

  friend bool operator==(const SurrogateLoss&, const SurrogateLoss&) = default;
};

inline double loss_value(const SurrogateLoss& l, double xi) noexcept { return l.value(xi); }
inline double loss_deriv(const SurrogateLoss& l, double xi) noexcept { return l.derivative(xi); }

struct BinaryLabel {
  double y = 1.0;  // +1 or -1
};

/// Ten-way (or K-way) +-1 target: +1 at the true class, -1 elsewhere.
struct MultiLabel {
  Vector y;

  static MultiLabel one_vs_rest(std::size_t true_class, std::size_t width = 10) {
    if (true_class >= width) throw InvalidArgument("one_vs_rest: class out of range");
    Vector y(width, -1.0);
    y[true_class] = 1.0;
    return {std::move(y)};
  }
};

/// Softmax cross-entropy against (1-p) e_true + p/K.
struct SmoothedDistribution {
  double p = 0.0;
  std::size_t true_class = 0;
};

using TargetSpec = std::variant<BinaryLabel, MultiLabel, SmoothedDistribution>;

/// Stable softmax of `z` into `out`.
inline void softmax_into(std::span<const double> z, std::span<double> out) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - zmax);
    s += out[i];
  }
  for (double& v : out) v /= s;
}

inline double smoothed_target(const SmoothedDistribution& t, std::size_t cls, std::size_t width) {
  const double base = t.p / static_cast<double>(width);
  return cls == t.true_class ? 1.0 - t.p + base : base;
}

namespace detail {

inline void check_target(const TargetSpec& target, std::size_t width) {
  if (std::holds_alternative<BinaryLabel>(target)) {
    if (width != 1) throw ShapeError("binary target needs output width 1, got " + std::to_string(width));
    const double y = std::get<BinaryLabel>(target).y;
    if (y != 1.0 && y != -1.0) throw InvalidArgument("binary label must be +1 or -1");
  } else if (const auto* m = std::get_if<MultiLabel>(&target)) {
    if (m->y.size() != width) {
      throw ShapeError("multi-label target of width " + std::to_string(m->y.size()) +
                       " vs output width " + std::to_string(width));
    }
  } else {
    const auto& s = std::get<SmoothedDistribution>(target);
    if (s.true_class >= width) throw ShapeError("smoothed target class out of range");
    if (!(s.p >= 0.0 && s.p <= 1.0)) throw InvalidArgument("smoothing p must be in [0,1]");
  }
}

}  // namespace detail

/// Scalar training objective at the traced output.
inline double objective(const ForwardTrace& trace, const TargetSpec& target,
                        const SurrogateLoss& loss) {
  const Vector& out = trace.output;
  detail::check_target(target, out.size());
  if (const auto* b = std::get_if<BinaryLabel>(&target)) return loss.value(-b->y * out[0]);
  if (const auto* m = std::get_if<MultiLabel>(&target)) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += loss.value(-m->y[i] * out[i]);
    return s;
  }
  const auto& sm = std::get<SmoothedDistribution>(target);
  const double zmax = *std::max_element(out.begin(), out.end());
  double lse = 0.0;
  for (double z : out) lse += std::exp(z - zmax);
  lse = zmax + std::log(lse);
  double s = 0.0;
  for (std::size_t c = 0; c < out.size(); ++c) {
    s -= smoothed_target(sm, c, out.size()) * (out[c] - lse);
  }
  return s;
}

/// d objective / d output.
inline void output_delta_into(const ForwardTrace& trace, const TargetSpec& target,
                              const SurrogateLoss& loss, Vector& delta) {
  const Vector& out = trace.output;
  detail::check_target(target, out.size());
  detail::ensure_size(delta, out.size());
  if (const auto* b = std::get_if<BinaryLabel>(&target)) {
    delta[0] = -b->y * loss.derivative(-b->y * out[0]);
  } else if (const auto* m = std::get_if<MultiLabel>(&target)) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      delta[i] = -m->y[i] * loss.derivative(-m->y[i] * out[i]);
    }
  } else {
    const auto& sm = std::get<SmoothedDistribution>(target);
    softmax_into(out.values(), delta.values());
    for (std::size_t c = 0; c < out.size(); ++c) delta[c] -= smoothed_target(sm, c, out.size());
  }
}

/// Per-layer error signals: the weight gradient of layer l is deltas[l] (x) layer_input(l).
struct Deltas {
  std::vector<Vector> per_layer;
  bool all_zero = false;  // true when the output delta vanished (no update)
};

inline void backprop_deltas(const Network& net, const ForwardTrace& trace,
                            const TargetSpec& target, const SurrogateLoss& loss, Deltas& d) {
  const std::size_t n_layers = net.layer_count();
  d.per_layer.resize(n_layers);
  Vector& top = d.per_layer[n_layers - 1];
  output_delta_into(trace, target, loss, top);
  d.all_zero = std::all_of(top.begin(), top.end(), [](double v) { return v == 0.0; });
  const Activation act = net.activation();
  for (std::size_t l = n_layers - 1; l > 0; --l) {
    Vector& below = d.per_layer[l - 1];
    detail::ensure_size(below, net.weight(l).cols());
    matvec_transposed_into(net.weight(l), d.per_layer[l].values(), below.values());
    const Vector& z = trace.preactivations[l - 1];
    for (std::size_t i = 0; i < below.size(); ++i) below[i] *= act.derivative(z[i]);
  }
}

/// Gradient of the objective with shapes mirroring the network.
struct GradientSet {
  std::vector<Matrix> weight;
  std::vector<std::optional<Vector>> bias;

  double squared_norm(std::size_t l) const { return frobenius_norm_squared(weight.at(l)); }
};

/// Exact gradient; the frozen output layer of a FixedTopLayer network gets zeros.
inline GradientSet backprop(const Network& net, const ForwardTrace& trace,
                            const TargetSpec& target, const SurrogateLoss& loss) {
  Deltas d;
  backprop_deltas(net, trace, target, loss, d);
  GradientSet g;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const Matrix& w = net.weight(l);
    Matrix gw(w.rows(), w.cols());
    std::optional<Vector> gb;
    if (net.bias(l)) gb = Vector(w.rows());
    if (net.trainable(l)) {
      const auto in = trace.layer_input(l);
      const Vector& delta = d.per_layer[l];
      for (std::size_t r = 0; r < w.rows(); ++r) {
        for (std::size_t c = 0; c < w.cols(); ++c) gw(r, c) = delta[r] * in[c];
        if (gb) (*gb)[r] = delta[r];
      }
    }
    g.weight.push_back(std::move(gw));
    g.bias.push_back(std::move(gb));
  }
  return g;
}

/// Binary: y N(x) < 0. Ties are not misclassified.
inline bool misclassified(const ForwardTrace& trace, const BinaryLabel& target) {
  if (trace.output.size() != 1) throw ShapeError("misclassified: binary target needs output width 1");
  return target.y * trace.output[0] < 0.0;
}

/// Multi-label: one sign test per output coordinate.
inline std::vector<bool> misclassified(const ForwardTrace& trace, const MultiLabel& target) {
  if (trace.output.size() != target.y.size()) throw ShapeError("misclassified: width mismatch");
  std::vector<bool> out(target.y.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = target.y[i] * trace.output[i] < 0.0;
  return out;
}

/// Generic form: one entry per coordinate (a single entry for binary targets).
inline std::vector<bool> misclassified(const ForwardTrace& trace, const TargetSpec& target) {
  if (const auto* b = std::get_if<BinaryLabel>(&target)) return {misclassified(trace, *b)};
  if (const auto* m = std::get_if<MultiLabel>(&target)) return misclassified(trace, *m);
  throw InvalidArgument("misclassified: smoothed targets have no 0-1 notion");
}

}  // namespace noisysgd
