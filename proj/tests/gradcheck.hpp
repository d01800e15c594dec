#pragma once

// Central finite differences against backprop on random networks.

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "noisysgd/loss.hpp"
#include "noisysgd/model.hpp"
#include "noisysgd/rng.hpp"

namespace gradcheck {

using namespace noisysgd;

struct Case {
  Network net;
  Vector x;
  TargetSpec target;
  SurrogateLoss loss;
  std::string label;
};

struct Outcome {
  double rel_error = 0.0;
  double tolerance = 1e-4;
  std::string label;
};

inline bool is_smoothed(const TargetSpec& t) { return std::holds_alternative<SmoothedDistribution>(t); }

/// True when no hidden unit and no hinge argument sits within `margin` of a kink.
inline bool away_from_kinks(const Case& c, double margin) {
  const ForwardTrace t = forward(c.net, c.x);
  if (c.net.activation().kind != Activation::Kind::Identity) {
    for (const auto& z : t.preactivations) {
      for (double v : z) {
        if (std::abs(v) < margin) return false;
      }
    }
  }
  if (c.loss.kind == SurrogateLoss::Kind::Hinge) {
    const auto check = [&](double y, double out) { return std::abs(-y * out + c.loss.beta) >= margin; };
    if (const auto* b = std::get_if<BinaryLabel>(&c.target)) return check(b->y, t.output[0]);
    if (const auto* m = std::get_if<MultiLabel>(&c.target)) {
      for (std::size_t i = 0; i < m->y.size(); ++i) {
        if (!check(m->y[i], t.output[i])) return false;
      }
    }
  }
  return true;
}

/// Draws configuration `i`: depth 1 or 2 hidden layers, all activations,
/// all loss variants and binary, multi-label and smoothed targets.
inline Case random_case(std::size_t i, RngStream& rng) {
  const Activation acts[] = {Activation::relu(), Activation::leaky_relu(0.1), Activation::identity()};
  const SurrogateLoss losses[] = {SurrogateLoss::hinge(0.0), SurrogateLoss::hinge(1.0), SurrogateLoss::logistic()};
  const Activation act = acts[i % 3];
  const SurrogateLoss loss = losses[(i / 3) % 3];
  const std::size_t kind = (i / 9) % 3;  // 0 binary, 1 multi-label, 2 smoothed
  const std::size_t depth = 1 + (i / 27) % 2;
  const ModeKind mode = i % 2 == 0 ? ModeKind::WithBias : ModeKind::AugmentedInput;

  for (;;) {
    const std::size_t d = 2 + rng.draw_index(4);
    const std::size_t width = kind == 0 ? 1 : 3;
    std::vector<std::size_t> hidden;
    for (std::size_t l = 0; l < depth; ++l) hidden.push_back(2 + rng.draw_index(5));
    Case c{init_network({d, hidden, width, act, mode}, InitLaw{1.0, BiasInit::Uniform}, rng), Vector(d), {}, loss,
           {}};
    for (double& v : c.x) v = rng.draw_gaussian();
    const std::size_t cls = rng.draw_index(width);
    if (kind == 0) {
      c.target = BinaryLabel{rng.draw_bernoulli(0.5) ? 1.0 : -1.0};
    } else if (kind == 1) {
      c.target = MultiLabel::one_vs_rest(cls, width);
    } else {
      c.target = SmoothedDistribution{rng.draw_uniform(0.0, 1.0), cls};
    }
    c.label = "case " + std::to_string(i) + " " + act.name() + " " + loss.name() +
              (kind == 0 ? " binary" : kind == 1 ? " multilabel" : " smoothed") + " depth " + std::to_string(depth);
    if (away_from_kinks(c, 1e-3)) return c;
  }
}

inline double objective_at(const Case& c, const Network& net) {
  return objective(forward(net, c.x), c.target, c.loss);
}

/// Relative error ||g - fd|| / max(||g||, ||fd||) over every trainable parameter.
inline Outcome check(const Case& c, double step = 1e-6) {
  const GradientSet g = backprop(c.net, forward(c.net, c.x), c.target, c.loss);
  Network probe = c.net;
  double diff2 = 0.0, g2 = 0.0, fd2 = 0.0;
  const auto visit = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + step;
    const double up = objective_at(c, probe);
    param = saved - step;
    const double down = objective_at(c, probe);
    param = saved;
    const double fd = (up - down) / (2.0 * step);
    diff2 += (fd - analytic) * (fd - analytic);
    g2 += analytic * analytic;
    fd2 += fd * fd;
  };
  for (std::size_t l = 0; l < probe.layer_count(); ++l) {
    if (!probe.trainable(l)) continue;
    Matrix& w = probe.weight(l);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      for (std::size_t col = 0; col < w.cols(); ++col) visit(w(r, col), g.weight[l](r, col));
    }
    if (auto& b = probe.bias(l)) {
      for (std::size_t r = 0; r < b->size(); ++r) visit((*b)[r], (*g.bias[l])[r]);
    }
  }
  const double scale = std::sqrt(std::max(g2, fd2));
  Outcome o;
  o.rel_error = scale > 1e-12 ? std::sqrt(diff2) / scale : std::sqrt(diff2);
  o.tolerance = is_smoothed(c.target) ? 1e-3 : 1e-4;
  o.label = c.label;
  return o;
}

/// Runs `count` configurations; returns every outcome in order.
inline std::vector<Outcome> run(std::size_t count, std::uint64_t seed) {
  RngStream rng(seed, 0);
  std::vector<Outcome> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(check(random_case(i, rng)));
  return out;
}

}  // namespace gradcheck
