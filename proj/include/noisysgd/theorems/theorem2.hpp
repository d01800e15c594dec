#pragma once

// Single neuron under pure label noise with Gaussian inputs.
//
// With W = (V, b) and x~ = (x, 1), W.x~ ~ N(b, ||V||^2), so the expected
// hinge(0) decay term r = E[y W.x~ 1{y W.x~ < 0}] has the closed form
//   r(sigma, mu) = -sigma/sqrt(2 pi) exp(-mu^2 / 2 sigma^2) - (mu/2) erf(mu / (sqrt(2) sigma)).
// It is bounded by r < -C sqrt(sigma^2 + mu^2) with C = min(c1, c2),
//   c1 = exp(-1/2) / (2 sqrt(2 pi))   (branch |mu| <= sigma)
//   c2 = erf(1/sqrt(2)) / 4           (branch |mu| >= sigma).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "noisysgd/loss.hpp"
#include "noisysgd/model.hpp"
#include "noisysgd/rng.hpp"
#include "noisysgd/theorems/report.hpp"
#include "noisysgd/train.hpp"

namespace noisysgd {

inline double expected_decay_rate(double sigma, double mu) {
  if (!(sigma > 0.0)) throw InvalidArgument("expected_decay_rate: sigma must be positive");
  const double s2pi = std::sqrt(2.0 * std::numbers::pi);
  return -sigma / s2pi * std::exp(-mu * mu / (2.0 * sigma * sigma)) -
         0.5 * mu * std::erf(mu / (std::numbers::sqrt2 * sigma));
}

inline double decay_constant_c1() { return std::exp(-0.5) / (2.0 * std::sqrt(2.0 * std::numbers::pi)); }
inline double decay_constant_c2() { return std::erf(1.0 / std::numbers::sqrt2) / 4.0; }
inline double decay_constant() { return std::min(decay_constant_c1(), decay_constant_c2()); }

inline bool decay_bound_holds(double sigma, double mu) {
  return expected_decay_rate(sigma, mu) < -decay_constant() * std::hypot(sigma, mu);
}

struct DecayRateConfig {
  std::size_t samples = 10000;
  double max_sigma = 10.0;
  double max_abs_mu = 10.0;
  std::uint64_t seed = 1;
};

/// The bound and the mu -> -mu symmetry over random (sigma, mu).
inline TheoremReport check_decay_rate(const DecayRateConfig& cfg) {
  TheoremReport rep;
  rep.id = "decay-rate";
  rep.config = {{"samples", cfg.samples}, {"max_sigma", cfg.max_sigma},
                {"max_abs_mu", cfg.max_abs_mu}, {"seed", cfg.seed}};
  RngStream rng(cfg.seed, derive_stream_id(cfg.seed, 0xdeca));
  std::size_t bound_ok = 0, symmetric = 0;
  double worst_slack = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    const double sigma = cfg.max_sigma * (1.0 - rng.next_unit());  // (0, max]
    const double mu = rng.draw_uniform(-cfg.max_abs_mu, cfg.max_abs_mu);
    const double r = expected_decay_rate(sigma, mu);
    const double slack = r + decay_constant() * std::hypot(sigma, mu);
    worst_slack = std::max(worst_slack, slack);
    bound_ok += slack < 0.0 ? 1 : 0;
    symmetric += r == expected_decay_rate(sigma, -mu) ? 1 : 0;
  }
  rep.evidence = {{"c1", decay_constant_c1()},
                  {"c2", decay_constant_c2()},
                  {"C", decay_constant()},
                  {"r(1,0)", expected_decay_rate(1.0, 0.0)},
                  {"bound_held", bound_ok},
                  {"symmetric", symmetric},
                  {"worst_slack", worst_slack}};
  rep.verdict = bound_ok == cfg.samples && symmetric == cfg.samples ? Verdict::Pass : Verdict::Fail;
  return rep;
}

/// A single neuron N(x) = V.x + b stored as the augmented weight row (V, b).
inline Network make_single_neuron(const Vector& v, double b) {
  std::vector<double> row(v.begin(), v.end());
  row.push_back(b);
  const std::size_t n = row.size();
  std::vector<Layer> layers;
  layers.push_back({Matrix(1, n, std::move(row)), std::nullopt});
  return Network(std::move(layers), Activation::identity(), AugmentedInput{});
}

struct Theorem2Config {
  std::size_t d = 30;
  double h = 1.0 / 900.0;
  SurrogateLoss loss = SurrogateLoss::hinge(0.0);
  double initial_norm = std::sqrt(30.0);
  std::size_t runs = 20;
  std::size_t required_successes = 18;
  double floor_multiplier = 100.0;  // K
  double budget_multiplier = 5.0;
  double decrement_factor = 4.0;
  std::int64_t tail_steps = 0;      // extra steps after the floor, for the equilibrium estimate
  std::uint64_t seed = 1;
};

struct Theorem2Run {
  double initial_norm = 0.0;
  std::optional<std::int64_t> floor_step;  // first t with ||W_t|| < K * floor
  double mean_decrement = 0.0;             // (||W_t*|| - ||W_0||) / t*
  double predicted_decrement = 0.0;        // mean of h |r_t| / ||W_t|| over the same steps
  double tail_mean_norm = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> norm_trace;          // ||W|| every `trace_every` steps
};

/// Floor of the theorem for the configured loss: d h max(M^2/m, 1) for a kink,
/// d sqrt(h) max(M^2/m, 1) for a smooth loss.
inline double theorem2_floor(const Theorem2Config& cfg) {
  const double m = cfg.loss.kink_gap();
  const double M = cfg.loss.sup_derivative();
  const double scale = std::max(M * M / m, 1.0);
  const double d = static_cast<double>(cfg.d);
  return cfg.loss.kind == SurrogateLoss::Kind::Hinge ? d * cfg.h * scale : d * std::sqrt(cfg.h) * scale;
}

inline std::int64_t theorem2_budget(const Theorem2Config& cfg) {
  const double m = cfg.loss.kink_gap();
  const double n0 = cfg.initial_norm;
  const double d = static_cast<double>(cfg.d);
  const double t = cfg.loss.kind == SurrogateLoss::Kind::Hinge
                       ? cfg.budget_multiplier * n0 / (m * cfg.h)
                       : cfg.budget_multiplier * n0 / (m * d * std::pow(cfg.h, 1.5));
  return static_cast<std::int64_t>(std::ceil(t));
}

inline Theorem2Run run_single_neuron(const Theorem2Config& cfg, std::uint64_t run_id,
                                     std::int64_t trace_every = 0) {
  RngStream init(cfg.seed, derive_stream_id(run_id, 0x5eed));
  Vector v(cfg.d);
  for (double& x : v) x = init.draw_gaussian();
  v *= cfg.initial_norm / euclidean_norm(v.values());

  TrainConfig tc;
  tc.source = Gaussian{cfg.d};
  tc.initial_network = make_single_neuron(v, 0.0);
  tc.loss = cfg.loss;
  tc.noise = PureNoise{};
  tc.learning_rate = cfg.h;
  tc.master_seed = cfg.seed;
  tc.run_id = run_id;
  const std::int64_t budget = theorem2_budget(cfg);
  tc.steps = budget + cfg.tail_steps;

  const double threshold = cfg.floor_multiplier * theorem2_floor(cfg);
  const bool hinge = cfg.loss.kind == SurrogateLoss::Kind::Hinge;
  Theorem2Run out;
  out.initial_norm = frobenius_norm(tc.initial_network->weight(0));
  if (out.initial_norm < threshold) out.floor_step = 0;

  double predicted_sum = 0.0;
  double tail_sum = 0.0;
  std::int64_t tail_count = 0;
  auto account = [&](double norm_before, const Matrix& w) {
    if (!hinge) return;
    const auto row = w.row(0);
    const double sigma = euclidean_norm(row.first(cfg.d));
    const double mu = row[cfg.d];
    if (sigma > 0.0) predicted_sum += cfg.h * std::abs(expected_decay_rate(sigma, mu)) / norm_before;
  };
  account(out.initial_norm, tc.initial_network->weight(0));
  if (trace_every > 0) out.norm_trace.push_back(out.initial_norm);

  train(tc, [&](const StepInfo& s) {
    const double norm = frobenius_norm(s.net.weight(0));
    const std::int64_t done = s.step + 1;
    if (trace_every > 0 && done % trace_every == 0) out.norm_trace.push_back(norm);
    if (!out.floor_step) {
      if (norm < threshold) {
        out.floor_step = done;
        out.mean_decrement = (norm - out.initial_norm) / static_cast<double>(done);
        out.predicted_decrement = -predicted_sum / static_cast<double>(done);
        if (cfg.tail_steps == 0) return false;
      } else {
        if (done >= budget) return false;
        account(norm, s.net.weight(0));
      }
    } else {
      tail_sum += norm;
      ++tail_count;
      if (done >= *out.floor_step + cfg.tail_steps) return false;
    }
    return true;
  });
  if (tail_count > 0) out.tail_mean_norm = tail_sum / static_cast<double>(tail_count);
  return out;
}

inline TheoremReport check_theorem2(const Theorem2Config& cfg) {
  if (cfg.d == 0 || !(cfg.h > 0.0) || !(cfg.initial_norm > 0.0) || cfg.runs == 0) {
    throw InvalidArgument("check_theorem2: bad configuration");
  }
  TheoremReport rep;
  rep.id = "thm2";
  const double floor = theorem2_floor(cfg);
  const bool hinge = cfg.loss.kind == SurrogateLoss::Kind::Hinge;
  rep.config = {{"d", cfg.d},
                {"h", cfg.h},
                {"loss", cfg.loss.name()},
                {"initial_norm", cfg.initial_norm},
                {"runs", cfg.runs},
                {"required_successes", cfg.required_successes},
                {"floor", floor},
                {"threshold", cfg.floor_multiplier * floor},
                {"budget_steps", theorem2_budget(cfg)},
                {"decrement_factor", cfg.decrement_factor},
                {"seed", cfg.seed}};

  std::size_t reached = 0, decrement_ok = 0, decrement_checked = 0;
  nlohmann::json runs = nlohmann::json::array();
  std::vector<double> tails;
  for (std::size_t r = 0; r < cfg.runs; ++r) {
    const Theorem2Run run = run_single_neuron(cfg, r);
    nlohmann::json rec = {{"run", r}, {"initial_norm", run.initial_norm}};
    if (run.floor_step) {
      ++reached;
      rec["floor_step"] = *run.floor_step;
      if (*run.floor_step > 0 && hinge) {
        ++decrement_checked;
        const double ratio = run.mean_decrement / run.predicted_decrement;
        const bool ok = run.mean_decrement < 0.0 && ratio >= 1.0 / cfg.decrement_factor &&
                        ratio <= cfg.decrement_factor;
        decrement_ok += ok ? 1 : 0;
        rec["mean_decrement"] = run.mean_decrement;
        rec["predicted_decrement"] = run.predicted_decrement;
        rec["ratio"] = ratio;
      }
    } else {
      rec["floor_step"] = nullptr;
    }
    if (std::isfinite(run.tail_mean_norm)) {
      rec["tail_mean_norm"] = run.tail_mean_norm;
      tails.push_back(run.tail_mean_norm);
    }
    runs.push_back(rec);
  }
  rep.evidence = {{"reached_floor", reached}, {"decrement_checked", decrement_checked},
                  {"decrement_ok", decrement_ok}, {"runs", runs}};
  if (!tails.empty()) rep.evidence["tail_mean_norm"] = mean_stderr(tails).mean;
  if (!hinge) rep.notes.push_back("no closed-form decrement prediction for a smooth loss; only the floor is checked");
  const bool ok = reached >= cfg.required_successes && decrement_ok == decrement_checked;
  rep.verdict = ok ? Verdict::Pass : Verdict::Fail;
  return rep;
}

}  // namespace noisysgd
