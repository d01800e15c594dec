#pragma once

// Digit association: a hidden unit is associated with class c when it fires
// (preactivation > 0) for class c at least `factor` times as often as for any
// other class.

#include <algorithm>
#include <optional>
#include <vector>

#include "noisysgd/data.hpp"
#include "noisysgd/model.hpp"

namespace noisysgd {

inline std::optional<std::size_t> associated_class(const std::vector<std::size_t>& histogram,
                                                   double factor = 2.0) {
  if (histogram.size() < 2) return std::nullopt;
  const auto top = std::max_element(histogram.begin(), histogram.end());
  std::size_t second = 0;
  for (auto it = histogram.begin(); it != histogram.end(); ++it) {
    if (it != top) second = std::max(second, *it);
  }
  const auto best = static_cast<double>(*top);
  if (best > 0.0 && best >= factor * static_cast<double>(second)) {
    return static_cast<std::size_t>(top - histogram.begin());
  }
  return std::nullopt;
}

struct DigitAssociation {
  std::vector<std::vector<std::size_t>> histograms;  // [unit][class] firing counts
  std::vector<std::optional<std::size_t>> associated;
  std::size_t associated_count = 0;
};

inline DigitAssociation digit_association(const Network& net, const LabeledDataset& data,
                                          double factor = 2.0, std::size_t layer = 0) {
  if (data.kind != LabelKind::Multiclass) throw InvalidArgument("digit_association: needs class labels");
  if (data.size() == 0) throw InvalidArgument("digit_association: empty dataset");
  if (layer >= net.hidden_layer_count()) throw InvalidArgument("digit_association: no such hidden layer");
  data.validate();
  const std::size_t units = net.hidden_width(layer);
  DigitAssociation out;
  out.histograms.assign(units, std::vector<std::size_t>(data.num_classes, 0));
  ForwardTrace trace;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward_into(net, data.inputs[i].values(), trace);
    const auto& z = trace.preactivations[layer];
    const auto cls = static_cast<std::size_t>(data.labels[i]);
    for (std::size_t u = 0; u < units; ++u) {
      if (z[u] > 0.0) ++out.histograms[u][cls];
    }
  }
  for (const auto& h : out.histograms) {
    out.associated.push_back(associated_class(h, factor));
    out.associated_count += out.associated.back() ? 1 : 0;
  }
  return out;
}

}  // namespace noisysgd
