#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "noisysgd/error.hpp"
#include "noisysgd/linalg.hpp"
#include "noisysgd/rng.hpp"

namespace noisysgd {

/// Homogeneous pointwise non-linearity: f'(z) z = f(z) away from z = 0.
///
/// The derivative at the kink is the left value (0 for ReLU, alpha for leaky
/// ReLU): a unit with preactivation exactly 0 is not firing, in line with the
/// strict inequality used to count active neurons.
struct Activation {
  enum class Kind { ReLU, LeakyReLU, Identity };

  Kind kind = Kind::ReLU;
  double alpha = 0.0;

  static Activation relu() noexcept { return {Kind::ReLU, 0.0}; }
  static Activation identity() noexcept { return {Kind::Identity, 0.0}; }
  static Activation leaky_relu(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("leaky_relu: alpha must be in (0,1)");
    return {Kind::LeakyReLU, alpha};
  }

  double value(double z) const noexcept {
    switch (kind) {
      case Kind::ReLU: return z > 0.0 ? z : 0.0;
      case Kind::LeakyReLU: return z > 0.0 ? z : alpha * z;
      case Kind::Identity: return z;
    }
    return z;
  }

  double derivative(double z) const noexcept {
    switch (kind) {
      case Kind::ReLU: return z > 0.0 ? 1.0 : 0.0;
      case Kind::LeakyReLU: return z > 0.0 ? 1.0 : alpha;
      case Kind::Identity: return 1.0;
    }
    return 1.0;
  }

  bool is_kink(double z) const noexcept { return kind != Kind::Identity && z == 0.0; }

  std::string name() const {
    switch (kind) {
      case Kind::ReLU: return "relu";
      case Kind::LeakyReLU: return "leaky_relu";
      case Kind::Identity: return "identity";
    }
    return "?";
  }

  friend bool operator==(const Activation&, const Activation&) = default;
};

/// Every layer carries a bias vector.
struct WithBias {
  friend bool operator==(const WithBias&, const WithBias&) = default;
};
/// No bias vectors; the input is extended to (x, 1) before the first layer.
struct AugmentedInput {
  friend bool operator==(const AugmentedInput&, const AugmentedInput&) = default;
};
/// One hidden layer, no biases; the output weights are frozen to `top_vector`.
struct FixedTopLayer {
  Vector top_vector;
  friend bool operator==(const FixedTopLayer&, const FixedTopLayer&) = default;
};

using ArchMode = std::variant<WithBias, AugmentedInput, FixedTopLayer>;

inline std::string mode_name(const ArchMode& m) {
  if (std::holds_alternative<WithBias>(m)) return "with_bias";
  if (std::holds_alternative<AugmentedInput>(m)) return "augmented_input";
  return "fixed_top";
}

struct Layer {
  Matrix weight;
  std::optional<Vector> bias;
  friend bool operator==(const Layer&, const Layer&) = default;
};

/// (1,...,1,-1,...,-1) with k entries of each sign.
inline Vector balanced_top_vector(std::size_t k) {
  if (k == 0) throw InvalidArgument("balanced_top_vector: k must be positive");
  Vector v(2 * k, 1.0);
  for (std::size_t i = k; i < 2 * k; ++i) v[i] = -1.0;
  return v;
}

class Network {
 public:
  Network(std::vector<Layer> layers, Activation activation, ArchMode mode)
      : layers_(std::move(layers)), activation_(activation), mode_(std::move(mode)) {
    validate();
  }

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t hidden_layer_count() const noexcept { return layers_.size() - 1; }

  const Matrix& weight(std::size_t l) const { return layers_.at(l).weight; }
  Matrix& weight(std::size_t l) { return layers_.at(l).weight; }
  const std::optional<Vector>& bias(std::size_t l) const { return layers_.at(l).bias; }
  std::optional<Vector>& bias(std::size_t l) { return layers_.at(l).bias; }

  const Activation& activation() const noexcept { return activation_; }
  const ArchMode& mode() const noexcept { return mode_; }

  bool has_bias() const noexcept { return std::holds_alternative<WithBias>(mode_); }
  bool augmented() const noexcept { return std::holds_alternative<AugmentedInput>(mode_); }
  bool fixed_top() const noexcept { return std::holds_alternative<FixedTopLayer>(mode_); }

  /// Width of the raw input x (before augmentation).
  std::size_t input_width() const noexcept {
    return layers_.front().weight.cols() - (augmented() ? 1 : 0);
  }
  std::size_t output_width() const noexcept { return layers_.back().weight.rows(); }
  std::size_t hidden_width(std::size_t l) const { return layers_.at(l).weight.rows(); }

  /// False only for the frozen output layer of a FixedTopLayer network.
  bool trainable(std::size_t l) const noexcept {
    return !(fixed_top() && l + 1 == layers_.size());
  }

  bool all_finite() const noexcept {
    for (const auto& layer : layers_) {
      if (!layer.weight.all_finite()) return false;
      if (layer.bias && !layer.bias->all_finite()) return false;
    }
    return true;
  }

  friend bool operator==(const Network&, const Network&) = default;

 private:
  void validate() const {
    if (layers_.empty()) throw InvalidArgument("Network: at least one layer required");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
        throw ShapeError("Network: layer " + std::to_string(l) + " weight " +
                         layer.weight.shape_string() + " does not chain with layer " +
                         std::to_string(l - 1) + " weight " +
                         layers_[l - 1].weight.shape_string());
      }
      if (has_bias() != layer.bias.has_value()) {
        throw InvalidArgument("Network: bias presence on layer " + std::to_string(l) +
                              " does not match mode " + mode_name(mode_));
      }
      if (layer.bias && layer.bias->size() != layer.weight.rows()) {
        throw ShapeError("Network: layer " + std::to_string(l) + " bias length " +
                         std::to_string(layer.bias->size()) + " vs weight " +
                         layer.weight.shape_string());
      }
    }
    if (augmented() && layers_.front().weight.cols() < 2) {
      throw ShapeError("Network: augmented first layer needs at least 2 columns");
    }
    if (const auto* top = std::get_if<FixedTopLayer>(&mode_)) {
      if (layers_.size() != 2) throw InvalidArgument("Network: fixed top layer needs one hidden layer");
      const Matrix& out = layers_.back().weight;
      if (out.rows() != 1 || out.cols() != top->top_vector.size()) {
        throw ShapeError("Network: top vector length " + std::to_string(top->top_vector.size()) +
                         " vs output weight " + out.shape_string());
      }
      for (std::size_t i = 0; i < out.cols(); ++i) {
        if (out(0, i) != top->top_vector[i]) {
          throw InvalidArgument("Network: output weights differ from the frozen top vector");
        }
      }
    }
  }

  std::vector<Layer> layers_;
  Activation activation_;
  ArchMode mode_;
};

/// Everything computed while evaluating one input.
///
/// `preactivations` and `activations` cover the hidden layers only; `output`
/// is the final affine map of the last activation (or of the input when the
/// network has no hidden layer).
struct ForwardTrace {
  Vector input;
  Vector first_layer_input;  // equals input unless the mode augments it
  std::vector<Vector> preactivations;
  std::vector<Vector> activations;
  Vector output;

  std::span<const double> layer_input(std::size_t l) const {
    return l == 0 ? first_layer_input.values() : activations.at(l - 1).values();
  }
};

namespace detail {

inline void ensure_size(Vector& v, std::size_t n) {
  if (v.size() != n) v = Vector(n);
}

}  // namespace detail

/// Forward pass reusing the buffers already held by `trace`.
inline void forward_into(const Network& net, std::span<const double> x, ForwardTrace& trace) {
  if (x.size() != net.input_width()) {
    throw ShapeError("forward: input length " + std::to_string(x.size()) +
                     " but network expects " + std::to_string(net.input_width()));
  }
  const std::size_t n_layers = net.layer_count();
  detail::ensure_size(trace.input, x.size());
  std::copy(x.begin(), x.end(), trace.input.begin());
  detail::ensure_size(trace.first_layer_input, net.weight(0).cols());
  std::copy(x.begin(), x.end(), trace.first_layer_input.begin());
  if (net.augmented()) trace.first_layer_input[x.size()] = 1.0;

  trace.preactivations.resize(n_layers - 1);
  trace.activations.resize(n_layers - 1);
  const Activation act = net.activation();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Matrix& w = net.weight(l);
    const bool last = l + 1 == n_layers;
    Vector& z = last ? trace.output : trace.preactivations[l];
    detail::ensure_size(z, w.rows());
    matvec_into(w, trace.layer_input(l), z.values());
    if (const auto& b = net.bias(l)) z += *b;
    if (!last) {
      Vector& a = trace.activations[l];
      detail::ensure_size(a, w.rows());
      for (std::size_t i = 0; i < z.size(); ++i) a[i] = act.value(z[i]);
    }
  }
}

inline ForwardTrace forward(const Network& net, const Vector& x) {
  ForwardTrace trace;
  forward_into(net, x.values(), trace);
  return trace;
}

/// Number of units in hidden layer `layer` with strictly positive preactivation.
inline std::size_t active_count(const ForwardTrace& trace, std::size_t layer) {
  if (layer >= trace.preactivations.size()) {
    throw InvalidArgument("active_count: no hidden layer " + std::to_string(layer));
  }
  std::size_t n = 0;
  for (double z : trace.preactivations[layer]) n += z > 0.0 ? 1 : 0;
  return n;
}

/// Mean active count over `inputs` (each input weighted equally).
inline double typical_active(const Network& net, std::span<const Vector> inputs,
                             std::size_t layer = 0) {
  if (inputs.empty()) throw InvalidArgument("typical_active: empty dataset");
  if (layer >= net.hidden_layer_count()) {
    throw InvalidArgument("typical_active: no hidden layer " + std::to_string(layer));
  }
  ForwardTrace trace;
  double total = 0.0;
  for (const auto& x : inputs) {
    forward_into(net, x.values(), trace);
    total += static_cast<double>(active_count(trace, layer));
  }
  return total / static_cast<double>(inputs.size());
}

/// Units of hidden layer `layer` whose preactivation is <= 0 on every input.
inline std::vector<std::size_t> dead_neurons(const Network& net, std::span<const Vector> inputs,
                                             std::size_t layer = 0) {
  if (inputs.empty()) throw InvalidArgument("dead_neurons: empty dataset");
  if (layer >= net.hidden_layer_count()) {
    throw InvalidArgument("dead_neurons: no hidden layer " + std::to_string(layer));
  }
  std::vector<bool> fired(net.hidden_width(layer), false);
  ForwardTrace trace;
  for (const auto& x : inputs) {
    forward_into(net, x.values(), trace);
    const auto& z = trace.preactivations[layer];
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (z[i] > 0.0) fired[i] = true;
    }
  }
  std::vector<std::size_t> dead;
  for (std::size_t i = 0; i < fired.size(); ++i) {
    if (!fired[i]) dead.push_back(i);
  }
  return dead;
}

struct LayerNorm {
  double weight = 0.0;
  std::optional<double> bias;
  friend bool operator==(const LayerNorm&, const LayerNorm&) = default;
};

inline std::vector<LayerNorm> layer_norms(const Network& net) {
  std::vector<LayerNorm> out;
  out.reserve(net.layer_count());
  for (const auto& layer : net.layers()) {
    LayerNorm n{frobenius_norm(layer.weight), std::nullopt};
    if (layer.bias) n.bias = euclidean_norm(layer.bias->values());
    out.push_back(n);
  }
  return out;
}

/// sqrt of the summed squared Frobenius norms of all weight matrices (biases excluded).
inline double total_weight_norm(const Network& net) {
  double s = 0.0;
  for (const auto& layer : net.layers()) s += frobenius_norm_squared(layer.weight);
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Construction

enum class ModeKind { WithBias, AugmentedInput, FixedTopLayer };

struct ArchSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden;  // widths of the hidden layers, may be empty
  std::size_t output_width = 1;
  Activation activation = Activation::relu();
  ModeKind mode = ModeKind::WithBias;
};

enum class BiasInit { Zero, Uniform };

/// Weights i.i.d. U[-scale, scale]; biases zero or from the same law.
struct InitLaw {
  double weight_scale = 1.7320508075688772;  // sqrt(3): unit variance
  BiasInit bias = BiasInit::Zero;
};

/// Draws layer by layer: weights row-major, then that layer's bias.
inline Network init_network(const ArchSpec& spec, const InitLaw& law, RngStream& rng) {
  if (spec.input_dim == 0 || spec.output_width == 0) {
    throw InvalidArgument("init_network: widths must be positive");
  }
  if (!(law.weight_scale > 0.0)) throw InvalidArgument("init_network: weight_scale must be positive");
  std::vector<std::size_t> widths;
  widths.push_back(spec.input_dim + (spec.mode == ModeKind::AugmentedInput ? 1 : 0));
  widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(spec.output_width);

  ArchMode mode = WithBias{};
  if (spec.mode == ModeKind::AugmentedInput) mode = AugmentedInput{};
  if (spec.mode == ModeKind::FixedTopLayer) {
    if (spec.hidden.size() != 1 || spec.hidden[0] % 2 != 0 || spec.output_width != 1) {
      throw InvalidArgument("init_network: fixed top layer needs one even hidden width and one output");
    }
    mode = FixedTopLayer{balanced_top_vector(spec.hidden[0] / 2)};
  }

  std::vector<Layer> layers;
  const std::size_t n_layers = widths.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    Layer layer{Matrix(widths[l + 1], widths[l]), std::nullopt};
    const bool frozen_top = spec.mode == ModeKind::FixedTopLayer && l + 1 == n_layers;
    if (frozen_top) {
      const auto& top = std::get<FixedTopLayer>(mode).top_vector;
      for (std::size_t i = 0; i < top.size(); ++i) layer.weight(0, i) = top[i];
    } else {
      for (double& w : layer.weight.values()) w = rng.draw_uniform(-law.weight_scale, law.weight_scale);
    }
    if (spec.mode == ModeKind::WithBias) {
      Vector b(widths[l + 1]);
      if (law.bias == BiasInit::Uniform) {
        for (double& v : b) v = rng.draw_uniform(-law.weight_scale, law.weight_scale);
      }
      layer.bias = std::move(b);
    }
    layers.push_back(std::move(layer));
  }
  return Network(std::move(layers), spec.activation, std::move(mode));
}

}  // namespace noisysgd
