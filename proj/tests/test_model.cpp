#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "noisysgd/data.hpp"
#include "noisysgd/model.hpp"
#include "noisysgd/rng.hpp"

using namespace noisysgd;

namespace {

Network one_unit_net(double w0, double w1, double b) {
  std::vector<Layer> layers;
  layers.push_back({Matrix{{w0, w1}}, Vector{b}});
  layers.push_back({Matrix{{1.0}}, Vector{0.0}});
  return Network(std::move(layers), Activation::relu(), WithBias{});
}

Network zero_net(std::size_t d, std::size_t hidden) {
  std::vector<Layer> layers;
  layers.push_back({Matrix(hidden, d), Vector(hidden)});
  layers.push_back({Matrix(1, hidden), Vector(1)});
  return Network(std::move(layers), Activation::relu(), WithBias{});
}

}  // namespace

TEST(Forward, ZeroNetworkGivesZeroEverywhere) {
  const Network net = zero_net(3, 4);
  const ForwardTrace t = forward(net, Vector{1.0, -2.0, 3.0});
  EXPECT_EQ(t.output[0], 0.0);
  for (double z : t.preactivations[0]) EXPECT_EQ(z, 0.0);
}

TEST(Forward, HandComputedUnit) {
  const Network net = one_unit_net(1.0, 0.0, -0.5);
  const ForwardTrace on = forward(net, Vector{1.0, 0.0});
  EXPECT_DOUBLE_EQ(on.preactivations[0][0], 0.5);
  EXPECT_DOUBLE_EQ(on.output[0], 0.5);
  const ForwardTrace off = forward(net, Vector{0.0, 1.0});
  EXPECT_DOUBLE_EQ(off.preactivations[0][0], -0.5);
  EXPECT_EQ(off.activations[0][0], 0.0);
  EXPECT_EQ(off.output[0], 0.0);
}

TEST(Forward, AugmentedInputAppendsOne) {
  std::vector<Layer> layers;
  layers.push_back({Matrix{{2.0, 0.0, 0.25}}, std::nullopt});
  const Network net(std::move(layers), Activation::identity(), AugmentedInput{});
  EXPECT_EQ(net.input_width(), 2u);
  const ForwardTrace t = forward(net, Vector{1.0, 5.0});
  EXPECT_EQ(t.first_layer_input, (Vector{1.0, 5.0, 1.0}));
  EXPECT_DOUBLE_EQ(t.output[0], 2.25);
}

TEST(Forward, ShapeMismatchThrows) {
  const Network net = one_unit_net(1.0, 0.0, 0.0);
  EXPECT_THROW(forward(net, Vector{1.0, 2.0, 3.0}), ShapeError);
}

TEST(Network, ValidatesChainingAndBiasPresence) {
  std::vector<Layer> bad_chain;
  bad_chain.push_back({Matrix(3, 2), Vector(3)});
  bad_chain.push_back({Matrix(1, 4), Vector(1)});
  EXPECT_THROW(Network(bad_chain, Activation::relu(), WithBias{}), ShapeError);

  std::vector<Layer> missing_bias;
  missing_bias.push_back({Matrix(3, 2), std::nullopt});
  missing_bias.push_back({Matrix(1, 3), Vector(1)});
  EXPECT_THROW(Network(missing_bias, Activation::relu(), WithBias{}), InvalidArgument);

  std::vector<Layer> top;
  top.push_back({Matrix(4, 2), std::nullopt});
  top.push_back({Matrix{{1.0, 1.0, -1.0, 0.5}}, std::nullopt});
  EXPECT_THROW(Network(top, Activation::relu(), FixedTopLayer{balanced_top_vector(2)}), InvalidArgument);
}

TEST(Activation, HomogeneityOnTracePreactivations) {
  RngStream rng(3, 0);
  for (const Activation act : {Activation::relu(), Activation::leaky_relu(0.1), Activation::identity()}) {
    ArchSpec spec{5, {7, 6}, 2, act, ModeKind::WithBias};
    const Network net = init_network(spec, InitLaw{1.0, BiasInit::Uniform}, rng);
    Vector x(5);
    for (double& v : x) v = rng.draw_gaussian();
    const ForwardTrace t = forward(net, x);
    for (std::size_t l = 0; l < t.preactivations.size(); ++l) {
      for (std::size_t i = 0; i < t.preactivations[l].size(); ++i) {
        const double z = t.preactivations[l][i];
        EXPECT_DOUBLE_EQ(t.activations[l][i], act.value(z));
        if (!act.is_kink(z)) {
          EXPECT_DOUBLE_EQ(act.derivative(z) * z, act.value(z));
        }
      }
    }
  }
  EXPECT_EQ(Activation::relu().derivative(0.0), 0.0);
  EXPECT_THROW(Activation::leaky_relu(1.5), InvalidArgument);
}

TEST(ActiveCount, StrictInequality) {
  ForwardTrace t;
  t.preactivations = {Vector{0.3, 0.0, -1.2}};
  EXPECT_EQ(active_count(t, 0), 1u);
  t.preactivations = {Vector{-0.1, 0.0, -1.2}};
  EXPECT_EQ(active_count(t, 0), 0u);
  EXPECT_THROW(active_count(t, 1), InvalidArgument);
}

TEST(ActiveCount, ComplementsNonPositiveCount) {
  RngStream rng(8, 0);
  const Network net = init_network({4, {9}, 1, Activation::relu(), ModeKind::WithBias}, InitLaw{}, rng);
  for (int i = 0; i < 20; ++i) {
    Vector x(4);
    for (double& v : x) v = rng.draw_gaussian();
    const ForwardTrace t = forward(net, x);
    std::size_t off = 0;
    for (double z : t.preactivations[0]) off += z <= 0.0 ? 1 : 0;
    EXPECT_EQ(active_count(t, 0) + off, 9u);
  }
}

TEST(ActiveCount, ReferenceHypercubeSilentOnInnerShell) {
  const Network net = reference_hypercube_network(60, 0.3);
  RngStream rng(4, 0);
  for (int i = 0; i < 200; ++i) {
    Vector x(60);
    for (double& v : x) v = rng.draw_uniform(-0.7, 0.7);
    x[rng.draw_index(60)] = rng.draw_bernoulli(0.5) ? 0.7 : -0.7;
    EXPECT_EQ(active_count(forward(net, x), 0), 0u);
  }
}

TEST(TypicalActive, MeansOverDataset) {
  const Network net = one_unit_net(1.0, 0.0, -0.5);
  const std::vector<Vector> one = {Vector{1.0, 0.0}};
  EXPECT_DOUBLE_EQ(typical_active(net, one), 1.0);

  std::vector<Layer> layers;
  layers.push_back({Matrix(4, 1, 1.0), Vector(4)});
  layers.push_back({Matrix(1, 4, 1.0), Vector(1)});
  const Network four(std::move(layers), Activation::relu(), WithBias{});
  const std::vector<Vector> two = {Vector{-1.0}, Vector{1.0}};
  EXPECT_DOUBLE_EQ(typical_active(four, two), 2.0);
  EXPECT_THROW(typical_active(four, std::vector<Vector>{}), InvalidArgument);
}

TEST(TypicalActive, FreshUniformInitFiresHalf) {
  RngStream rng(21, 0);
  const Network net = init_network({30, {120}, 1, Activation::relu(), ModeKind::WithBias}, InitLaw{}, rng);
  std::vector<Vector> inputs;
  for (int i = 0; i < 1000; ++i) inputs.push_back(sample(Gaussian{30}, rng).x);
  EXPECT_NEAR(typical_active(net, inputs), 60.0, 5.0);
}

TEST(DeadNeurons, NegativeUnitAndZeroNet) {
  std::vector<Layer> layers;
  layers.push_back({Matrix{{1.0, 1.0}, {-1.0, -2.0}}, Vector{0.0, -0.5}});
  layers.push_back({Matrix{{1.0, 1.0}}, Vector{0.0}});
  const Network net(std::move(layers), Activation::relu(), WithBias{});
  const std::vector<Vector> data = {Vector{1.0, 0.0}, Vector{0.0, 2.0}, Vector{0.5, 0.5}};
  EXPECT_EQ(dead_neurons(net, data), (std::vector<std::size_t>{1}));
  EXPECT_EQ(dead_neurons(zero_net(2, 3), data), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_THROW(dead_neurons(net, std::vector<Vector>{}), InvalidArgument);
}

TEST(LayerNorms, IdentityZeroAndRandom) {
  std::vector<Layer> layers;
  layers.push_back({Matrix::identity(3), Vector(3)});
  layers.push_back({Matrix::identity(3), Vector(3)});
  const Network id(std::move(layers), Activation::relu(), WithBias{});
  for (const auto& n : layer_norms(id)) {
    EXPECT_DOUBLE_EQ(n.weight, std::sqrt(3.0));
    EXPECT_EQ(n.bias, 0.0);
  }
  for (const auto& n : layer_norms(zero_net(2, 2))) EXPECT_EQ(n.weight, 0.0);

  RngStream rng(2, 0);
  const Network net = init_network({3, {4}, 2, Activation::relu(), ModeKind::AugmentedInput}, InitLaw{}, rng);
  const auto norms = layer_norms(net);
  ASSERT_EQ(norms.size(), 2u);
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_EQ(norms[l].weight, frobenius_norm(net.weight(l)));
    EXPECT_FALSE(norms[l].bias.has_value());
  }
  EXPECT_DOUBLE_EQ(total_weight_norm(net), std::hypot(norms[0].weight, norms[1].weight));
}

TEST(FixedTop, OutputIsPosSideMinusNegSide) {
  RngStream rng(6, 0);
  const Network net =
      init_network({5, {8}, 1, Activation::relu(), ModeKind::FixedTopLayer}, InitLaw{1.0, BiasInit::Zero}, rng);
  EXPECT_EQ(net.weight(1), (Matrix{{1, 1, 1, 1, -1, -1, -1, -1}}));
  EXPECT_FALSE(net.trainable(1));
  Vector x(5);
  for (double& v : x) v = rng.draw_gaussian();
  const ForwardTrace t = forward(net, x);
  double expect = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    const double r = std::max(0.0, t.preactivations[0][i]);
    expect += i < 4 ? r : -r;
  }
  EXPECT_DOUBLE_EQ(t.output[0], expect);
}

TEST(Init, DeterministicPerStreamAndUnitVariance) {
  const ArchSpec spec{30, {120}, 1, Activation::relu(), ModeKind::WithBias};
  RngStream a(1, 5), b(1, 5), c(1, 6);
  const Network na = init_network(spec, InitLaw{}, a);
  EXPECT_EQ(na, init_network(spec, InitLaw{}, b));
  EXPECT_NE(na, init_network(spec, InitLaw{}, c));
  double ss = 0.0;
  for (double w : na.weight(0).values()) ss += w * w;
  EXPECT_NEAR(ss / 3600.0, 1.0, 0.05);
  for (double v : *na.bias(0)) EXPECT_EQ(v, 0.0);
}
