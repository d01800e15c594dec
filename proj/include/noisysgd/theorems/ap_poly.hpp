#pragma once

// a(p): the typical number of active neurons after T label-noise SGD steps,
// averaged over the sampled indices, the keep/replace bits and the
// replacement labels. Writing b_t = 1 when the label of step t is kept,
//
//   a(p) = sum_i p^(T-i) (1-p)^i c_i,   c_i = sum_{|b| = i} E[A | b],
//
// so a(p) is a polynomial. The enumerator replays every (index, bit,
// replacement) path with the same step semantics as train().

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "noisysgd/data.hpp"
#include "noisysgd/model.hpp"
#include "noisysgd/theorems/report.hpp"
#include "noisysgd/train.hpp"

namespace noisysgd {

struct ApPolynomial {
  std::size_t steps = 0;
  std::vector<double> basis;     // c_i, coefficient of p^(T-i) (1-p)^i
  std::vector<double> monomial;  // coefficient of p^j

  double evaluate(double p) const {
    double s = 0.0;
    const double T = static_cast<double>(steps);
    for (std::size_t i = 0; i < basis.size(); ++i) {
      const double di = static_cast<double>(i);
      s += std::pow(p, T - di) * std::pow(1.0 - p, di) * basis[i];
    }
    return s;
  }

  double evaluate_monomial(double p) const {
    double s = 0.0;
    for (std::size_t j = monomial.size(); j-- > 0;) s = s * p + monomial[j];
    return s;
  }
};

inline constexpr double kApEnumerationLimit = 1e7;

/// Everything a(p) depends on: dataset, initial network, loss, h, T.
struct ApTinyConfig {
  std::shared_ptr<const LabeledDataset> data;
  Network initial;
  SurrogateLoss loss = SurrogateLoss::logistic();
  double h = 0.5;
  std::size_t steps = 3;
  std::size_t layer = 0;

  /// A train() config with the same step semantics; `noise` chooses the arm.
  TrainConfig train_config(const NoiseSpec& noise) const {
    TrainConfig tc;
    tc.source = FixedSet{data};
    tc.initial_network = initial;
    tc.loss = loss;
    tc.noise = noise;
    tc.learning_rate = h;
    tc.steps = static_cast<std::int64_t>(steps);
    return tc;
  }
};

/// Total active count over the dataset; an integer, so sums of it are exact.
inline std::uint64_t total_active(const Network& net, const LabeledDataset& data, std::size_t layer) {
  ForwardTrace trace;
  std::uint64_t total = 0;
  for (const auto& x : data.inputs) {
    forward_into(net, x.values(), trace);
    total += active_count(trace, layer);
  }
  return total;
}

inline double ap_enumeration_size(std::size_t n, std::size_t labels, std::size_t steps) {
  return std::pow(static_cast<double>(n) * 2.0 * static_cast<double>(labels), static_cast<double>(steps));
}

namespace detail {

struct ApEnumerator {
  const ApTinyConfig& cfg;
  const TrainConfig tc;
  std::vector<int> label_set;
  std::vector<std::uint64_t> sums;  // indexed by keep-bit pattern
  StepWorkspace ws;

  void walk(const Network& net, std::size_t t, std::uint32_t bits) {
    if (t == cfg.steps) {
      sums[bits] += total_active(net, *cfg.data, cfg.layer);
      return;
    }
    for (std::size_t i = 0; i < cfg.data->size(); ++i) {
      const auto x = cfg.data->inputs[i].values();
      Network kept = net;
      train_on_example(kept, x, cfg.data->labels[i], tc, cfg.h, ws);
      walk(kept, t + 1, bits | (1u << t));
      for (int label : label_set) {
        Network replaced = net;
        train_on_example(replaced, x, label, tc, cfg.h, ws);
        walk(replaced, t + 1, bits);
      }
    }
  }
};

}  // namespace detail

inline ApPolynomial a_p_exact(const ApTinyConfig& cfg) {
  if (!cfg.data || cfg.data->size() == 0) throw InvalidArgument("a_p_exact: empty dataset");
  cfg.data->validate();
  const std::vector<int> label_set = cfg.data->label_set();
  const std::size_t n = cfg.data->size();
  if (ap_enumeration_size(n, label_set.size(), cfg.steps) > kApEnumerationLimit || cfg.steps > 24) {
    throw InvalidArgument("a_p_exact: enumeration exceeds " + std::to_string(kApEnumerationLimit) + " paths");
  }
  detail::ApEnumerator e{cfg, cfg.train_config(LabelNoise{0.0}), label_set,
                         std::vector<std::uint64_t>(std::size_t{1} << cfg.steps, 0), {}};
  e.walk(cfg.initial, 0, 0);

  const std::size_t T = cfg.steps;
  ApPolynomial poly;
  poly.steps = T;
  poly.basis.assign(T + 1, 0.0);
  const double orderings = std::pow(static_cast<double>(n), static_cast<double>(T));
  for (std::uint32_t bits = 0; bits < e.sums.size(); ++bits) {
    const auto kept = static_cast<std::size_t>(std::popcount(bits));
    const double replacements = std::pow(static_cast<double>(label_set.size()), static_cast<double>(T - kept));
    poly.basis[kept] += static_cast<double>(e.sums[bits]) / (static_cast<double>(n) * orderings * replacements);
  }
  // p^(T-i) (1-p)^i = sum_j binom(i, j) (-1)^j p^(T-i+j)
  poly.monomial.assign(T + 1, 0.0);
  for (std::size_t i = 0; i <= T; ++i) {
    double binom = 1.0;
    for (std::size_t j = 0; j <= i; ++j) {
      poly.monomial[T - i + j] += (j % 2 == 0 ? 1.0 : -1.0) * binom * poly.basis[i];
      binom = binom * static_cast<double>(i - j) / static_cast<double>(j + 1);
    }
  }
  return poly;
}

struct ApPoint {
  double p = 0.0;
  double mean = 0.0;
  std::optional<double> stderr_;
};

/// Monte Carlo a(p): `runs` independent train() runs per grid point, each
/// scored by its final typical active count on the training inputs.
inline std::vector<ApPoint> a_p_curve(const TrainConfig& templ, const std::vector<double>& p_grid,
                                      std::size_t runs, unsigned parallelism = 1) {
  if (runs == 0) throw InvalidArgument("a_p_curve: runs must be positive");
  std::vector<ApPoint> out;
  for (std::size_t g = 0; g < p_grid.size(); ++g) {
    const double p = p_grid[g];
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("a_p_curve: p outside [0,1]");
    std::vector<TrainConfig> configs(runs, templ);
    for (std::size_t r = 0; r < runs; ++r) {
      configs[r].noise = LabelNoise{p};
      configs[r].run_id = templ.run_id + g * runs + r;
      configs[r].metric_every = 0;
    }
    const auto results = sweep(configs, parallelism);
    std::vector<double> actives;
    for (const auto& res : results) {
      if (!res.ok()) throw NumericError("a_p_curve: " + *res.failure);
      actives.push_back(res.metrics.back().active_train);
    }
    const auto ms = mean_stderr(actives);
    out.push_back({p, ms.mean, ms.stderr_});
  }
  return out;
}

/// Number of adjacent grid pairs where the curve goes down; reported, never asserted.
inline std::size_t decreasing_pairs(const std::vector<ApPoint>& curve) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) n += curve[i].mean < curve[i - 1].mean ? 1 : 0;
  return n;
}

/// The default tiny instance: two points in the plane, one hidden ReLU unit, T = 3.
inline ApTinyConfig default_ap_config() {
  auto data = std::make_shared<LabeledDataset>();
  data->inputs = {Vector{1.0, 0.5}, Vector{-0.5, 1.0}};
  data->labels = {1, -1};
  data->kind = LabelKind::Binary;
  data->name = "tiny";
  std::vector<Layer> layers;
  layers.push_back({Matrix{{0.6, -0.4}}, Vector{0.1}});
  layers.push_back({Matrix{{0.8}}, Vector{0.0}});
  Network net(std::move(layers), Activation::relu(), WithBias{});
  return {data, std::move(net), SurrogateLoss::logistic(), 1.0, 3, 0};
}

inline TheoremReport check_ap_exact(const ApTinyConfig& cfg) {
  TheoremReport rep;
  rep.id = "ap-exact";
  rep.config = {{"n", cfg.data ? cfg.data->size() : 0}, {"steps", cfg.steps}, {"h", cfg.h},
                {"loss", cfg.loss.name()}};
  const ApPolynomial poly = a_p_exact(cfg);
  rep.evidence = {{"basis_coefficients", poly.basis},
                  {"monomial_coefficients", poly.monomial},
                  {"a(0)", poly.evaluate(0.0)},
                  {"a(0.5)", poly.evaluate(0.5)},
                  {"a(1)", poly.evaluate(1.0)}};
  bool consistent = true;
  for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    consistent = consistent && std::abs(poly.evaluate(p) - poly.evaluate_monomial(p)) <= 1e-9;
  }
  rep.verdict = consistent ? Verdict::Pass : Verdict::Fail;
  if (!consistent) rep.notes.push_back("basis and monomial forms disagree");
  return rep;
}

}  // namespace noisysgd
