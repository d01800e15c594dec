#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "noisysgd/error.hpp"
#include "noisysgd/linalg.hpp"
#include "noisysgd/model.hpp"
#include "noisysgd/rng.hpp"

namespace noisysgd {

/// Binary labels are stored as -1/+1, multiclass labels as 0..K-1.
enum class LabelKind { Binary, Multiclass };

struct LabeledDataset {
  std::vector<Vector> inputs;
  std::vector<int> labels;
  LabelKind kind = LabelKind::Binary;
  std::size_t num_classes = 2;
  std::string name;

  std::size_t size() const noexcept { return inputs.size(); }

  void validate() const {
    if (inputs.size() != labels.size()) {
      throw InvalidArgument("dataset '" + name + "': " + std::to_string(inputs.size()) +
                            " inputs vs " + std::to_string(labels.size()) + " labels");
    }
    for (int y : labels) {
      const bool ok = kind == LabelKind::Binary
                          ? (y == 1 || y == -1)
                          : (y >= 0 && static_cast<std::size_t>(y) < num_classes);
      if (!ok) throw InvalidArgument("dataset '" + name + "': bad label " + std::to_string(y));
    }
  }

  /// The set labels are drawn from when a label is replaced.
  std::vector<int> label_set() const { return make_label_set(kind, num_classes); }

  static std::vector<int> make_label_set(LabelKind kind, std::size_t num_classes) {
    if (kind == LabelKind::Binary) return {-1, 1};
    std::vector<int> out(num_classes);
    for (std::size_t i = 0; i < num_classes; ++i) out[i] = static_cast<int>(i);
    return out;
  }
};

struct Gaussian {
  std::size_t d = 1;
};
struct StandardBasis {
  std::size_t d = 1;
};
/// ½ U(C_1) + ½ U(C_{-1}); C_s = {‖x‖∞ = s}, labels +1 / -1.
struct HypercubeBoundary {
  std::size_t d = 1;
  double eps = 0.3;
};
struct FixedSet {
  std::shared_ptr<const LabeledDataset> data;
};

using Distribution = std::variant<Gaussian, StandardBasis, HypercubeBoundary, FixedSet>;

struct Sample {
  Vector x;
  std::optional<int> label;  // absent for Gaussian and StandardBasis
};

inline std::size_t input_dim(const Distribution& dist) {
  return std::visit(
      [](const auto& d) -> std::size_t {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, FixedSet>) {
          return d.data->inputs.front().size();
        } else {
          return d.d;
        }
      },
      dist);
}

/// One draw. Counter use: Gaussian d blocks; StandardBasis 1;
/// HypercubeBoundary 3 + (d - 1) in the order coin, extremal coordinate,
/// its sign, remaining coordinates ascending; FixedSet 1.
inline Sample sample(const Distribution& dist, RngStream& rng) {
  if (const auto* g = std::get_if<Gaussian>(&dist)) {
    Vector x(g->d);
    for (double& v : x) v = rng.draw_gaussian();
    return {std::move(x), std::nullopt};
  }
  if (const auto* b = std::get_if<StandardBasis>(&dist)) {
    Vector x(b->d);
    x[rng.draw_index(b->d)] = 1.0;
    return {std::move(x), std::nullopt};
  }
  if (const auto* h = std::get_if<HypercubeBoundary>(&dist)) {
    if (!(h->eps > 0.0 && h->eps < 1.0)) throw InvalidArgument("hypercube: eps must be in (0,1)");
    const bool outer = rng.draw_bernoulli(0.5);
    const double s = outer ? 1.0 : 1.0 - h->eps;
    const std::size_t k = rng.draw_index(h->d);
    const bool positive = rng.draw_bernoulli(0.5);
    Vector x(h->d);
    for (std::size_t j = 0; j < h->d; ++j) {
      if (j == k) continue;
      x[j] = rng.draw_uniform(-s, s);
    }
    x[k] = positive ? s : -s;
    return {std::move(x), outer ? 1 : -1};
  }
  const auto& fs = std::get<FixedSet>(dist);
  if (!fs.data || fs.data->size() == 0) throw InvalidArgument("sample: empty fixed set");
  const std::size_t i = rng.draw_index(fs.data->size());
  return {fs.data->inputs[i], fs.data->labels[i]};
}

inline LabeledDataset make_hypercube_dataset(std::size_t d, double eps, std::size_t n,
                                             RngStream& rng) {
  if (n == 0) throw InvalidArgument("make_hypercube_dataset: n must be >= 1");
  LabeledDataset ds;
  ds.kind = LabelKind::Binary;
  ds.num_classes = 2;
  ds.name = "hypercube";
  ds.inputs.reserve(n);
  ds.labels.reserve(n);
  const Distribution dist = HypercubeBoundary{d, eps};
  for (std::size_t i = 0; i < n; ++i) {
    auto s = sample(dist, rng);
    ds.inputs.push_back(std::move(s.x));
    ds.labels.push_back(*s.label);
  }
  return ds;
}

/// The explicit 2d-unit network for the hypercube boundary function:
/// rows i and i+d detect x_i > 1-eps/2 and x_i < -(1-eps/2); output bias -1/2.
inline Network reference_hypercube_network(std::size_t d, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("reference_hypercube_network: eps in (0,1)");
  if (d == 0) throw InvalidArgument("reference_hypercube_network: d must be positive");
  Matrix w1(2 * d, d);
  for (std::size_t i = 0; i < d; ++i) {
    w1(i, i) = 1.0;
    w1(i + d, i) = -1.0;
  }
  Vector b1(2 * d, -(1.0 - eps / 2.0));
  Matrix w2(1, 2 * d, 1.0);
  Vector b2{-0.5};
  std::vector<Layer> layers;
  layers.push_back({std::move(w1), std::move(b1)});
  layers.push_back({std::move(w2), std::move(b2)});
  return Network(std::move(layers), Activation::relu(), WithBias{});
}

}  // namespace noisysgd
