#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "noisysgd/loss.hpp"
#include "noisysgd/train.hpp"

using namespace noisysgd;

namespace {

Network single_neuron(const Vector& v_with_bias) {
  std::vector<Layer> layers;
  layers.push_back({Matrix(1, v_with_bias.size(), std::vector<double>(v_with_bias.begin(), v_with_bias.end())),
                    std::nullopt});
  return Network(std::move(layers), Activation::identity(), AugmentedInput{});
}

ForwardTrace trace_with_output(Vector out) {
  ForwardTrace t;
  t.output = std::move(out);
  return t;
}

}  // namespace

TEST(SurrogateLoss, HingeValuesAndRightDerivative) {
  const auto h0 = SurrogateLoss::hinge(0.0);
  EXPECT_EQ(h0.value(-1.0), 0.0);
  EXPECT_EQ(h0.derivative(-1.0), 0.0);
  EXPECT_EQ(h0.derivative(0.0), 1.0);
  EXPECT_EQ(h0.value(2.5), 2.5);
  const auto h1 = SurrogateLoss::hinge(1.0);
  EXPECT_EQ(h1.value(-1.0), 0.0);
  EXPECT_EQ(h1.derivative(-1.0), 1.0);
  EXPECT_EQ(h1.derivative(-1.0000001), 0.0);
  EXPECT_EQ(h1.value(0.5), 1.5);
  EXPECT_THROW(SurrogateLoss::hinge(-0.1), InvalidArgument);
}

TEST(SurrogateLoss, LogisticValuesAndStability) {
  const auto l = SurrogateLoss::logistic();
  EXPECT_NEAR(l.value(0.0), std::log(2.0), 1e-15);
  EXPECT_EQ(l.derivative(0.0), 0.5);
  EXPECT_NEAR(l.value(800.0), 800.0, 1e-12);
  EXPECT_NEAR(l.value(-800.0), 0.0, 1e-300);
  EXPECT_EQ(l.derivative(800.0), 1.0);
  EXPECT_GE(l.derivative(-800.0), 0.0);
  for (double xi : {-3.0, -0.4, 0.7, 5.0}) {
    EXPECT_NEAR(l.derivative(xi), 1.0 / (1.0 + std::exp(-xi)), 1e-15);
    EXPECT_NEAR(l.value(xi), std::log1p(std::exp(xi)), 1e-12);
  }
}

TEST(Misclassified, StrictSignTest) {
  EXPECT_FALSE(misclassified(trace_with_output(Vector{0.3}), BinaryLabel{1.0}));
  EXPECT_TRUE(misclassified(trace_with_output(Vector{-0.3}), BinaryLabel{1.0}));
  EXPECT_FALSE(misclassified(trace_with_output(Vector{0.0}), BinaryLabel{-1.0}));
  const auto per = misclassified(trace_with_output(Vector{0.5, 0.2, -1.0}), MultiLabel::one_vs_rest(2, 3));
  EXPECT_EQ(per, (std::vector<bool>{true, true, true}));
  const TargetSpec smoothed = SmoothedDistribution{0.1, 0};
  EXPECT_THROW(misclassified(trace_with_output(Vector{1.0, 0.0}), smoothed), InvalidArgument);
}

TEST(Backprop, TargetWidthMismatchThrows) {
  const Network net = single_neuron(Vector{1.0, 0.0, 0.0});
  const ForwardTrace t = forward(net, Vector{1.0, 1.0});
  EXPECT_THROW(backprop(net, t, MultiLabel::one_vs_rest(0, 3), SurrogateLoss::logistic()), ShapeError);
  EXPECT_THROW(backprop(net, t, BinaryLabel{0.5}, SurrogateLoss::logistic()), InvalidArgument);
}

TEST(Backprop, SingleNeuronCorrectlyClassifiedHasZeroGradient) {
  const Network net = single_neuron(Vector{1.0, -2.0, 0.5});
  const Vector x{2.0, 0.25};  // V.(x,1) = 2 - 0.5 + 0.5 = 2
  const GradientSet g = backprop(net, forward(net, x), BinaryLabel{1.0}, SurrogateLoss::hinge(0.0));
  for (double v : g.weight[0].values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(sgd_step(net, x, BinaryLabel{1.0}, SurrogateLoss::hinge(0.0), 0.1), net);
}

TEST(Backprop, SingleNeuronMisclassifiedMovesAlongYX) {
  const Vector v{0.5, -1.0, 0.25};
  const Network net = single_neuron(v);
  const Vector x{-1.0, 3.0};
  const double h = 0.125;
  for (double y : {1.0, -1.0}) {
    const ForwardTrace t = forward(net, x);
    if (y * t.output[0] > 0.0) continue;
    const GradientSet g = backprop(net, t, BinaryLabel{y}, SurrogateLoss::hinge(0.0));
    EXPECT_EQ(g.weight[0], (Matrix{{-y * x[0], -y * x[1], -y}}));
    const Network after = sgd_step(net, x, BinaryLabel{y}, SurrogateLoss::hinge(0.0), h);
    EXPECT_EQ(after.weight(0), (Matrix{{v[0] + h * y * x[0], v[1] + h * y * x[1], v[2] + h * y}}));
  }
  // V.(x,1) = -0.5 - 3 + 0.25 < 0, so y = +1 is the misclassified label; make sure it was exercised.
  EXPECT_LT(forward(net, x).output[0], 0.0);
}

TEST(Backprop, FixedTopVectorGetsZeroGradient) {
  RngStream rng(12, 0);
  const Network net = init_network({3, {6}, 1, Activation::relu(), ModeKind::FixedTopLayer}, InitLaw{}, rng);
  const ForwardTrace t = forward(net, Vector{0.3, -1.0, 2.0});
  const GradientSet g = backprop(net, t, BinaryLabel{t.output[0] > 0 ? -1.0 : 1.0}, SurrogateLoss::hinge(0.0));
  for (double v : g.weight[1].values()) EXPECT_EQ(v, 0.0);
  const Network after =
      sgd_step(net, Vector{0.3, -1.0, 2.0}, BinaryLabel{t.output[0] > 0 ? -1.0 : 1.0}, SurrogateLoss::hinge(0.0), 0.5);
  EXPECT_EQ(after.weight(1), net.weight(1));
}

TEST(Backprop, MatchesFiniteDifferencesOn200Configurations) {
  const auto outcomes = gradcheck::run(200, 2024);
  ASSERT_EQ(outcomes.size(), 200u);
  for (const auto& o : outcomes) EXPECT_LE(o.rel_error, o.tolerance) << o.label;
}

TEST(Backprop, SmoothedGradientIsSoftmaxMinusTarget) {
  std::vector<Layer> layers;
  layers.push_back({Matrix{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}}, Vector{0.0, 0.0, 0.0}});
  const Network net(std::move(layers), Activation::identity(), WithBias{});
  const ForwardTrace t = forward(net, Vector{0.5, -0.5});
  const SmoothedDistribution s{0.3, 1};
  Vector delta;
  output_delta_into(t, s, SurrogateLoss::logistic(), delta);
  const double e0 = std::exp(0.5), e1 = std::exp(-0.5), e2 = 1.0;
  const double z = e0 + e1 + e2;
  EXPECT_NEAR(delta[0], e0 / z - 0.1, 1e-15);
  EXPECT_NEAR(delta[1], e1 / z - 0.8, 1e-15);
  EXPECT_NEAR(delta[2], e2 / z - 0.1, 1e-15);
}

TEST(OneHiddenLayer, StepNormBound) {
  // Fixed top layer, no biases: ||W'||^2 <= ||W||^2 + 2hyN(x) + h^2 ||V||^2 ||x||^2 on every update.
  RngStream rng(31, 0);
  const double h = 0.01;
  Network net = init_network({8, {10}, 1, Activation::relu(), ModeKind::FixedTopLayer}, InitLaw{}, rng);
  const double v2 = squared_norm(net.weight(1).values());
  std::size_t updates = 0;
  for (int step = 0; step < 2000; ++step) {
    Vector x(8);
    for (double& v : x) v = rng.draw_gaussian();
    const double y = rng.draw_bernoulli(0.5) ? 1.0 : -1.0;
    const double before = frobenius_norm_squared(net.weight(0));
    const double n = forward(net, x).output[0];
    net = sgd_step(std::move(net), x, BinaryLabel{y}, SurrogateLoss::hinge(0.0), h);
    const double after = frobenius_norm_squared(net.weight(0));
    if (y * n <= 0.0) {
      ++updates;
      EXPECT_LE(after, before + 2.0 * h * y * n + h * h * v2 * squared_norm(x.values()) + 1e-12 * before);
    } else {
      EXPECT_EQ(after, before);
    }
  }
  EXPECT_GT(updates, 100u);
}
