#pragma once

// Batch-size-one SGD with label noise.
//
// Per iteration the training stream is consumed in a fixed order:
//   1. the input (dataset index, or a fresh draw from the distribution),
//   2. the noise flip bit (LabelNoise only),
//   3. the replacement label (LabelNoise when flipping, PureNoise always).
// The exact a(p) enumerator relies on this order to replay runs.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "noisysgd/data.hpp"
#include "noisysgd/error.hpp"
#include "noisysgd/loss.hpp"
#include "noisysgd/model.hpp"
#include "noisysgd/rng.hpp"

namespace noisysgd {

struct NoNoise {};
/// With probability p the label is replaced by a uniform draw from the label set.
struct LabelNoise {
  double p = 0.0;
};
/// Labels are uniform and independent of the input.
struct PureNoise {};
/// Labels untouched; the loss target becomes the smoothed distribution.
struct Smoothing {
  double p = 0.0;
};

using NoiseSpec = std::variant<NoNoise, LabelNoise, PureNoise, Smoothing>;

inline int draw_uniform_label(std::span<const int> label_set, RngStream& rng) {
  if (label_set.empty()) throw InvalidArgument("empty label set");
  return label_set[rng.draw_index(label_set.size())];
}

inline int corrupt_label(int y, const NoiseSpec& noise, std::span<const int> label_set,
                         RngStream& rng) {
  if (std::find(label_set.begin(), label_set.end(), y) == label_set.end()) {
    throw InvalidArgument("corrupt_label: label " + std::to_string(y) + " not in label set");
  }
  if (const auto* ln = std::get_if<LabelNoise>(&noise)) {
    const bool flip = rng.draw_bernoulli(ln->p);
    return flip ? draw_uniform_label(label_set, rng) : y;
  }
  if (std::holds_alternative<PureNoise>(noise)) return draw_uniform_label(label_set, rng);
  return y;
}

/// How a label becomes a loss target.
enum class TargetKind {
  Auto,        // binary labels -> BinaryLabel, multiclass -> MultiLabel
  MultiLabel,  // sum of per-class surrogate losses
  Softmax,     // softmax cross-entropy (smoothed when the noise is Smoothing)
};

inline TargetSpec make_target(int label, LabelKind kind, std::size_t num_classes,
                              TargetKind target, const NoiseSpec& noise) {
  if (kind == LabelKind::Binary && target != TargetKind::Softmax) {
    return BinaryLabel{static_cast<double>(label)};
  }
  const std::size_t cls = kind == LabelKind::Binary ? (label > 0 ? 1 : 0)
                                                    : static_cast<std::size_t>(label);
  if (target == TargetKind::Softmax || std::holds_alternative<Smoothing>(noise)) {
    const double p = std::holds_alternative<Smoothing>(noise) ? std::get<Smoothing>(noise).p : 0.0;
    return SmoothedDistribution{p, cls};
  }
  return MultiLabel::one_vs_rest(cls, num_classes);
}

struct StepWorkspace {
  ForwardTrace trace;
  Deltas deltas;
};

/// One in-place gradient step. Returns false when the gradient vanished.
inline bool apply_sgd_step(Network& net, std::span<const double> x, const TargetSpec& target,
                           const SurrogateLoss& loss, double h, StepWorkspace& ws) {
  forward_into(net, x, ws.trace);
  backprop_deltas(net, ws.trace, target, loss, ws.deltas);
  if (ws.deltas.all_zero) return false;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    if (!net.trainable(l)) continue;
    Matrix& w = net.weight(l);
    const auto in = ws.trace.layer_input(l);
    const Vector& delta = ws.deltas.per_layer[l];
    auto& bias = net.bias(l);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double dr = delta[r];
      if (dr == 0.0) continue;
      auto row = w.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] -= h * (dr * in[c]);
      if (bias) (*bias)[r] -= h * dr;
    }
  }
  return true;
}

/// Functional form: the network after exactly one step.
inline Network sgd_step(Network net, const Vector& x, const TargetSpec& target,
                        const SurrogateLoss& loss, double h) {
  if (!(h > 0.0)) throw InvalidArgument("sgd_step: learning rate must be positive");
  StepWorkspace ws;
  apply_sgd_step(net, x.values(), target, loss, h, ws);
  return net;
}

struct ConstantRate {};
struct HalveEvery {
  std::int64_t epochs = 5;
};
using Schedule = std::variant<ConstantRate, HalveEvery>;

struct FixedBudget {};
/// Stop at twice the first step where the clean training error is zero.
struct ZeroErrorDoubling {
  std::int64_t check_every = 1000;
};
using StopRule = std::variant<FixedBudget, ZeroErrorDoubling>;

struct TrainConfig {
  Distribution source = Gaussian{1};
  /// Inputs used for the "train" metrics; defaults to the FixedSet data.
  std::shared_ptr<const LabeledDataset> eval_train;
  std::shared_ptr<const LabeledDataset> eval_test;

  ArchSpec arch;
  InitLaw init;
  std::optional<Network> initial_network;  // overrides arch/init when set

  SurrogateLoss loss = SurrogateLoss::hinge(0.0);
  TargetKind target = TargetKind::Auto;
  NoiseSpec noise = NoNoise{};

  double learning_rate = 0.01;
  Schedule schedule = ConstantRate{};
  std::int64_t epoch_length = 0;  // 0: dataset size

  std::int64_t steps = 0;
  StopRule stop = FixedBudget{};

  std::uint64_t master_seed = 1;
  std::uint64_t run_id = 0;
  std::int64_t metric_every = 0;  // 0: initial and final records only
};

struct MetricsRecord {
  std::int64_t step = 0;
  double lr = 0.0;
  std::vector<double> layer_norms;
  double mean_bias = std::numeric_limits<double>::quiet_NaN();
  double active_train = std::numeric_limits<double>::quiet_NaN();
  double active_test = std::numeric_limits<double>::quiet_NaN();
  double err_train = std::numeric_limits<double>::quiet_NaN();
  double err_test = std::numeric_limits<double>::quiet_NaN();
};

struct RunResult {
  Network final_network;
  std::vector<MetricsRecord> metrics;
  TrainConfig config;
  double wall_seconds = 0.0;
  std::int64_t steps_run = 0;
  std::optional<std::int64_t> zero_error_step;
  std::optional<std::string> failure;

  bool ok() const noexcept { return !failure.has_value(); }
};

struct StepInfo {
  std::int64_t step;  // 0-based index of the step just taken
  const Network& net;
  std::span<const double> x;
  int label;  // label actually used (after noise)
  bool updated;
  double lr;
};

/// Called after every step; return false to stop the run early.
using StepObserver = std::function<bool(const StepInfo&)>;

inline bool is_labeled(const LabeledDataset& ds) { return !ds.labels.empty(); }

/// Binary: sign mismatch with ties counted as errors. Multiclass: argmax mismatch.
inline double classification_error(const Network& net, const LabeledDataset& ds) {
  if (!is_labeled(ds)) return std::numeric_limits<double>::quiet_NaN();
  if (ds.size() == 0) throw InvalidArgument("classification_error: empty dataset");
  ForwardTrace trace;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    forward_into(net, ds.inputs[i].values(), trace);
    if (ds.kind == LabelKind::Binary) {
      wrong += ds.labels[i] * trace.output[0] <= 0.0 ? 1 : 0;
    } else {
      const auto& out = trace.output;
      const auto best = static_cast<int>(std::max_element(out.begin(), out.end()) - out.begin());
      wrong += best != ds.labels[i] ? 1 : 0;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

inline double mean_first_bias(const Network& net) {
  const auto& b = net.bias(0);
  if (!b) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double v : *b) s += v;
  return s / static_cast<double>(b->size());
}

inline MetricsRecord measure(const Network& net, std::int64_t step, double lr,
                             const LabeledDataset* train_set, const LabeledDataset* test_set) {
  MetricsRecord m;
  m.step = step;
  m.lr = lr;
  for (const auto& n : layer_norms(net)) m.layer_norms.push_back(n.weight);
  m.mean_bias = mean_first_bias(net);
  const bool hidden = net.hidden_layer_count() > 0;
  if (train_set != nullptr && train_set->size() > 0) {
    if (hidden) m.active_train = typical_active(net, train_set->inputs, 0);
    m.err_train = classification_error(net, *train_set);
  }
  if (test_set != nullptr && test_set->size() > 0) {
    if (hidden) m.active_test = typical_active(net, test_set->inputs, 0);
    m.err_test = classification_error(net, *test_set);
  }
  return m;
}

namespace detail {

struct LabelInfo {
  LabelKind kind = LabelKind::Binary;
  std::size_t num_classes = 2;
};

inline LabelInfo label_info(const Distribution& source) {
  if (const auto* fs = std::get_if<FixedSet>(&source)) {
    return {fs->data->kind, fs->data->num_classes};
  }
  return {};
}

inline double rate_at(const TrainConfig& cfg, std::int64_t step, std::int64_t epoch_len) {
  if (const auto* he = std::get_if<HalveEvery>(&cfg.schedule)) {
    const std::int64_t period = he->epochs * epoch_len;
    if (period <= 0) throw InvalidArgument("HalveEvery: period must be positive");
    return cfg.learning_rate * std::ldexp(1.0, -static_cast<int>(step / period));
  }
  return cfg.learning_rate;
}

}  // namespace detail

inline Network initial_network(const TrainConfig& cfg) {
  if (cfg.initial_network) return *cfg.initial_network;
  RngStream init_rng(cfg.master_seed, derive_stream_id(cfg.run_id, 0));
  return init_network(cfg.arch, cfg.init, init_rng);
}

/// Applies one labelled example with the training semantics of `cfg`.
inline bool train_on_example(Network& net, std::span<const double> x, int label,
                             const TrainConfig& cfg, double lr, StepWorkspace& ws) {
  const auto info = detail::label_info(cfg.source);
  const TargetSpec target = make_target(label, info.kind, info.num_classes, cfg.target, cfg.noise);
  return apply_sgd_step(net, x, target, cfg.loss, lr, ws);
}

inline RunResult train(const TrainConfig& cfg, const StepObserver& observer = {}) {
  if (!(cfg.learning_rate > 0.0)) throw InvalidArgument("train: learning rate must be positive");
  if (cfg.steps < 0) throw InvalidArgument("train: negative step budget");
  const auto t0 = std::chrono::steady_clock::now();

  const FixedSet* fixed = std::get_if<FixedSet>(&cfg.source);
  if (fixed != nullptr) {
    if (!fixed->data || fixed->data->size() == 0) throw InvalidArgument("train: empty dataset");
    fixed->data->validate();
  }
  const bool unlabeled_source =
      std::holds_alternative<Gaussian>(cfg.source) || std::holds_alternative<StandardBasis>(cfg.source);
  if (unlabeled_source && !std::holds_alternative<PureNoise>(cfg.noise)) {
    throw InvalidArgument("train: unlabeled distributions need PureNoise labels");
  }
  const auto info = detail::label_info(cfg.source);
  const std::vector<int> label_set = LabeledDataset::make_label_set(info.kind, info.num_classes);

  const LabeledDataset* eval_train = cfg.eval_train ? cfg.eval_train.get()
                                     : fixed != nullptr ? fixed->data.get()
                                                        : nullptr;
  const LabeledDataset* eval_test = cfg.eval_test.get();
  const std::int64_t epoch_len =
      cfg.epoch_length > 0 ? cfg.epoch_length
                           : static_cast<std::int64_t>(fixed != nullptr ? fixed->data->size() : 1);

  RunResult result{initial_network(cfg), {}, cfg, 0.0, 0, std::nullopt, std::nullopt};
  Network& net = result.final_network;
  RngStream rng(cfg.master_seed, derive_stream_id(cfg.run_id, 1));
  StepWorkspace ws;

  result.metrics.push_back(measure(net, 0, detail::rate_at(cfg, 0, epoch_len), eval_train, eval_test));

  const auto* doubling = std::get_if<ZeroErrorDoubling>(&cfg.stop);
  if (doubling != nullptr && (eval_train == nullptr || !is_labeled(*eval_train))) {
    throw InvalidArgument("train: zero-error stopping needs a labelled training set");
  }
  std::int64_t budget = cfg.steps;
  Vector fresh;
  std::int64_t step = 0;
  bool stopped_by_observer = false;
  for (; step < budget; ++step) {
    const double lr = detail::rate_at(cfg, step, epoch_len);
    std::span<const double> x;
    int label = 0;
    if (fixed != nullptr) {
      const std::size_t i = rng.draw_index(fixed->data->size());
      x = fixed->data->inputs[i].values();
      label = corrupt_label(fixed->data->labels[i], cfg.noise, label_set, rng);
    } else {
      Sample s = sample(cfg.source, rng);
      fresh = std::move(s.x);
      x = fresh.values();
      label = s.label ? corrupt_label(*s.label, cfg.noise, label_set, rng)
                      : draw_uniform_label(label_set, rng);
    }
    const bool updated = train_on_example(net, x, label, cfg, lr, ws);
    if (!ws.trace.output.all_finite()) {
      result.failure = "non-finite network output at step " + std::to_string(step);
      ++step;
      break;
    }
    const std::int64_t done = step + 1;
    if (observer && !observer(StepInfo{step, net, x, label, updated, lr})) {
      stopped_by_observer = true;
      ++step;
      break;
    }
    if (cfg.metric_every > 0 && done % cfg.metric_every == 0 && done != budget) {
      if (!net.all_finite()) {
        result.failure = "non-finite weights at step " + std::to_string(done);
        ++step;
        break;
      }
      result.metrics.push_back(measure(net, done, detail::rate_at(cfg, done, epoch_len), eval_train, eval_test));
    }
    if (doubling != nullptr && !result.zero_error_step && done % doubling->check_every == 0 &&
        classification_error(net, *eval_train) == 0.0) {
      result.zero_error_step = done;
      budget = std::min(budget, 2 * done);
    }
  }
  result.steps_run = step;
  if (!result.failure && !net.all_finite()) {
    result.failure = "non-finite weights at step " + std::to_string(step);
  }
  if (!result.failure && (result.metrics.back().step != step || stopped_by_observer)) {
    if (result.metrics.back().step != step) {
      result.metrics.push_back(measure(net, step, detail::rate_at(cfg, step, epoch_len), eval_train, eval_test));
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

/// Runs every config; the result list is identical for any parallelism.
/// A run that throws is reported through RunResult::failure.
inline std::vector<RunResult> sweep(const std::vector<TrainConfig>& configs,
                                    unsigned parallelism = 1) {
  std::set<std::pair<std::uint64_t, std::uint64_t>> ids;
  for (const auto& c : configs) {
    if (!ids.insert({c.master_seed, c.run_id}).second) {
      throw InvalidArgument("sweep: duplicate run_id " + std::to_string(c.run_id));
    }
  }
  std::vector<std::optional<RunResult>> slots(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        slots[i] = train(configs[i]);
      } catch (const std::exception& e) {
        Network placeholder = configs[i].initial_network
                                  ? *configs[i].initial_network
                                  : Network({Layer{Matrix(1, 2), std::nullopt}}, Activation::identity(),
                                            AugmentedInput{});
        try {
          placeholder = initial_network(configs[i]);
        } catch (const std::exception&) {
        }
        slots[i] = RunResult{std::move(placeholder), {}, configs[i], 0.0, 0, std::nullopt,
                             std::string("run failed: ") + e.what()};
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(parallelism, static_cast<unsigned>(configs.size())));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  std::vector<RunResult> out;
  out.reserve(configs.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct MeanStderr {
  double mean = 0.0;
  std::optional<double> stderr_;  // absent for a single run
};

inline MeanStderr mean_stderr(std::span<const double> xs) {
  if (xs.empty()) throw InvalidArgument("mean_stderr: no values");
  double s = 0.0;
  for (double x : xs) s += x;
  const double mean = s / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, std::nullopt};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double var = ss / static_cast<double>(xs.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

/// Final-record aggregates across runs, reduced in run order.
struct RunSummary {
  std::size_t runs = 0;
  MeanStderr err_train, err_test, active_train, active_test, total_norm, mean_bias, steps;
};

inline RunSummary summarize(std::span<const RunResult> results) {
  std::vector<double> et, ete, at, ate, tn, mb, st;
  for (const auto& r : results) {
    if (!r.ok() || r.metrics.empty()) continue;
    const auto& m = r.metrics.back();
    et.push_back(m.err_train);
    ete.push_back(m.err_test);
    at.push_back(m.active_train);
    ate.push_back(m.active_test);
    double s = 0.0;
    for (double n : m.layer_norms) s += n * n;
    tn.push_back(std::sqrt(s));
    mb.push_back(m.mean_bias);
    st.push_back(static_cast<double>(m.step));
  }
  if (et.empty()) throw InvalidArgument("summarize: no successful runs");
  return {et.size(),          mean_stderr(et), mean_stderr(ete), mean_stderr(at),
          mean_stderr(ate),   mean_stderr(tn), mean_stderr(mb),  mean_stderr(st)};
}

}  // namespace noisysgd
