#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "noisysgd/data.hpp"
#include "noisysgd/train.hpp"

using namespace noisysgd;

namespace {

TrainConfig gaussian_pure_noise(ModeKind mode, std::int64_t steps) {
  TrainConfig c;
  c.source = Gaussian{10};
  c.arch = {10, {16}, 1, Activation::relu(), mode};
  c.loss = SurrogateLoss::logistic();
  c.noise = PureNoise{};
  c.learning_rate = 0.01;
  c.steps = steps;
  c.metric_every = steps / 4;
  return c;
}

TrainConfig hypercube_config(std::uint64_t run_id, std::int64_t steps) {
  RngStream data_rng(7, 99);
  auto data = std::make_shared<const LabeledDataset>(make_hypercube_dataset(8, 0.3, 32, data_rng));
  TrainConfig c;
  c.source = FixedSet{data};
  c.arch = {8, {12}, 1, Activation::relu(), ModeKind::WithBias};
  c.loss = SurrogateLoss::logistic();
  c.noise = LabelNoise{0.2};
  c.learning_rate = 0.05;
  c.steps = steps;
  c.metric_every = 100;
  c.run_id = run_id;
  return c;
}

}  // namespace

TEST(CorruptLabel, NoFlipAtZeroAndFairAtOne) {
  RngStream rng(1, 0);
  const std::vector<int> set = {-1, 1};
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(corrupt_label(1, LabelNoise{0.0}, set, rng), 1);
  int plus = 0;
  for (int i = 0; i < 20000; ++i) plus += corrupt_label(-1, LabelNoise{1.0}, set, rng) == 1 ? 1 : 0;
  EXPECT_NEAR(plus / 20000.0, 0.5, 0.015);
  EXPECT_EQ(corrupt_label(1, NoNoise{}, set, rng), 1);
  EXPECT_EQ(corrupt_label(1, Smoothing{0.5}, set, rng), 1);
  EXPECT_THROW(corrupt_label(3, LabelNoise{0.1}, set, rng), InvalidArgument);
}

TEST(CorruptLabel, ChangeRateIsHalfThePForBinaryLabels) {
  RngStream rng(2, 0);
  const std::vector<int> set = {-1, 1};
  constexpr int n = 1000000;
  int changed = 0;
  for (int i = 0; i < n; ++i) changed += corrupt_label(1, LabelNoise{0.2}, set, rng) != 1 ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(changed) / n, 0.1, 0.002);
}

TEST(CorruptLabel, DrawOrderIsFlipBitThenReplacement) {
  const std::vector<int> set = {0, 1, 2, 3};
  for (std::uint64_t s = 0; s < 200; ++s) {
    RngStream a(s, 5), b(s, 5);
    const int got = corrupt_label(2, LabelNoise{0.5}, set, a);
    const bool flip = b.draw_bernoulli(0.5);
    const int want = flip ? set[b.draw_index(set.size())] : 2;
    EXPECT_EQ(got, want);
    EXPECT_EQ(a.counter(), b.counter());
  }
}

TEST(MakeTarget, KindsFollowLabelsAndNoise) {
  EXPECT_TRUE(std::holds_alternative<BinaryLabel>(make_target(-1, LabelKind::Binary, 2, TargetKind::Auto, NoNoise{})));
  const TargetSpec ml = make_target(3, LabelKind::Multiclass, 10, TargetKind::Auto, LabelNoise{0.1});
  ASSERT_TRUE(std::holds_alternative<MultiLabel>(ml));
  EXPECT_EQ(std::get<MultiLabel>(ml).y[3], 1.0);
  EXPECT_EQ(std::get<MultiLabel>(ml).y[4], -1.0);
  const TargetSpec sm = make_target(3, LabelKind::Multiclass, 10, TargetKind::Auto, Smoothing{0.2});
  ASSERT_TRUE(std::holds_alternative<SmoothedDistribution>(sm));
  EXPECT_EQ(std::get<SmoothedDistribution>(sm).p, 0.2);
}

TEST(SgdStep, SmallStepShrinksEveryLayerOnMisclassifiedSample) {
  RngStream rng(9, 0);
  std::size_t checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Network net =
        init_network({4, {6, 5}, 1, Activation::leaky_relu(0.1), ModeKind::AugmentedInput}, InitLaw{}, rng);
    Vector x(4);
    for (double& v : x) v = rng.draw_gaussian();
    const double out = forward(net, x).output[0];
    if (out == 0.0) continue;
    const double y = out > 0 ? -1.0 : 1.0;
    const Network after = sgd_step(net, x, BinaryLabel{y}, SurrogateLoss::hinge(0.0), 1e-5);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      EXPECT_LT(frobenius_norm_squared(after.weight(l)), frobenius_norm_squared(net.weight(l)));
    }
    ++checked;
  }
  EXPECT_GT(checked, 150u);
  EXPECT_THROW(sgd_step(init_network({2, {}, 1, Activation::identity(), ModeKind::AugmentedInput}, InitLaw{}, rng),
                        Vector{1.0, 1.0}, BinaryLabel{1.0}, SurrogateLoss::hinge(0.0), 0.0),
               InvalidArgument);
}

TEST(Train, ZeroBudgetReturnsInitialNetwork) {
  TrainConfig c = gaussian_pure_noise(ModeKind::WithBias, 0);
  const RunResult r = train(c);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.final_network, initial_network(c));
  ASSERT_EQ(r.metrics.size(), 1u);
  EXPECT_EQ(r.metrics[0].step, 0);
  EXPECT_EQ(r.steps_run, 0);
}

TEST(Train, DeterministicGivenSeedAndRunId) {
  const TrainConfig c = hypercube_config(3, 1500);
  const RunResult a = train(c), b = train(c);
  EXPECT_EQ(a.final_network, b.final_network);
  ASSERT_EQ(a.metrics.size(), b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    EXPECT_EQ(a.metrics[i].step, b.metrics[i].step);
    EXPECT_EQ(a.metrics[i].layer_norms, b.metrics[i].layer_norms);
    EXPECT_EQ(a.metrics[i].err_train, b.metrics[i].err_train);
  }
  EXPECT_NE(train(hypercube_config(4, 1500)).final_network, a.final_network);
}

TEST(Train, MetricStepsStrictlyIncreaseAndEndAtBudget) {
  const RunResult r = train(hypercube_config(1, 1050));
  ASSERT_GE(r.metrics.size(), 2u);
  for (std::size_t i = 1; i < r.metrics.size(); ++i) EXPECT_GT(r.metrics[i].step, r.metrics[i - 1].step);
  EXPECT_EQ(r.metrics.back().step, 1050);
  EXPECT_EQ(r.metrics.size(), 12u);
}

TEST(Train, HalvingScheduleRecordsRate) {
  TrainConfig c = hypercube_config(2, 320);
  c.schedule = HalveEvery{2};
  c.epoch_length = 50;
  c.metric_every = 100;
  const RunResult r = train(c);
  ASSERT_EQ(r.metrics.size(), 5u);
  EXPECT_EQ(r.metrics[0].lr, 0.05);
  EXPECT_EQ(r.metrics[1].lr, 0.025);     // step 100
  EXPECT_EQ(r.metrics[2].lr, 0.0125);    // step 200
  EXPECT_EQ(r.metrics[3].lr, 0.00625);   // step 300
  EXPECT_EQ(r.metrics[4].lr, 0.00625);   // step 320
}

TEST(Train, ZeroErrorDoublingStopsAtTwiceTheFirstZero) {
  TrainConfig c = hypercube_config(5, 200000);
  c.noise = NoNoise{};
  c.stop = ZeroErrorDoubling{50};
  const RunResult r = train(c);
  ASSERT_TRUE(r.zero_error_step.has_value());
  EXPECT_EQ(*r.zero_error_step % 50, 0);
  EXPECT_EQ(r.steps_run, 2 * *r.zero_error_step);
  EXPECT_EQ(r.metrics.back().err_train, 0.0);
}

TEST(Train, RejectsLabelNoiseOnUnlabeledSource) {
  TrainConfig c = gaussian_pure_noise(ModeKind::WithBias, 10);
  c.noise = LabelNoise{0.1};
  EXPECT_THROW(train(c), InvalidArgument);
  c = gaussian_pure_noise(ModeKind::WithBias, 10);
  c.learning_rate = -1.0;
  EXPECT_THROW(train(c), InvalidArgument);
}

TEST(Train, DivergenceIsReportedNotThrown) {
  TrainConfig c = gaussian_pure_noise(ModeKind::AugmentedInput, 5000);
  c.arch.activation = Activation::identity();
  c.arch.hidden = {16, 16, 16};
  c.loss = SurrogateLoss::hinge(0.0);
  c.learning_rate = 50.0;
  c.init.weight_scale = 5.0;
  const RunResult r = train(c);
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.failure->find("non-finite"), std::string::npos);
}

TEST(Train, ObserverSeesEveryStepAndCanStop) {
  TrainConfig c = hypercube_config(6, 500);
  std::int64_t seen = 0;
  const RunResult r = train(c, [&](const StepInfo& s) {
    EXPECT_EQ(s.step, seen);
    ++seen;
    return s.step < 99;
  });
  EXPECT_EQ(seen, 100);
  EXPECT_EQ(r.steps_run, 100);
  EXPECT_EQ(r.metrics.back().step, 100);
}

TEST(Train, HingeUpdateChangesSquaredNormBySecondOrderIdentity) {
  // Bias-free ReLU nets are homogeneous of degree L in their weights, so one hinge update on a
  // misclassified sample changes the squared norm by exactly -2hL|yN| + h^2 ||g||^2. With h = 1e-4
  // the first-order term dominates except on samples whose margin is within h||g||^2 / 2L of zero.
  RngStream rng(17, 0);
  const double h = 1e-4;
  Network net =
      init_network({10, {12, 8}, 1, Activation::relu(), ModeKind::AugmentedInput}, InitLaw{}, rng);
  const double depth = static_cast<double>(net.layer_count());
  std::size_t updates = 0, grew = 0, grew_outside_band = 0;
  for (int step = 0; step < 20000; ++step) {
    const Vector x = sample(Gaussian{10}, rng).x;
    const double y = rng.draw_bernoulli(0.5) ? 1.0 : -1.0;
    const ForwardTrace t = forward(net, x);
    const GradientSet g = backprop(net, t, BinaryLabel{y}, SurrogateLoss::hinge(0.0));
    double g2 = 0.0;
    for (std::size_t l = 0; l < net.layer_count(); ++l) g2 += g.squared_norm(l);
    const double before = total_weight_norm(net);
    net = sgd_step(std::move(net), x, BinaryLabel{y}, SurrogateLoss::hinge(0.0), h);
    const double after = total_weight_norm(net);
    if (g2 == 0.0) {
      EXPECT_EQ(after, before);
      continue;
    }
    ++updates;
    const double margin = std::abs(y * t.output[0]);
    const double predicted = -2.0 * h * depth * margin + h * h * g2;
    EXPECT_NEAR(after * after - before * before, predicted, 1e-12 * before * before);
    if (after > before) {
      ++grew;
      grew_outside_band += h * g2 < 2.0 * depth * margin ? 1 : 0;
    }
  }
  EXPECT_GT(updates, 5000u);
  EXPECT_EQ(grew_outside_band, 0u);
  EXPECT_LT(grew, updates / 100);
}

TEST(Train, PureNoiseDrivesHiddenBiasesDown) {
  TrainConfig c = gaussian_pure_noise(ModeKind::WithBias, 200000);
  c.init.bias = BiasInit::Uniform;
  c.metric_every = 20000;
  c.eval_test = std::make_shared<const LabeledDataset>([] {
    LabeledDataset probe;
    RngStream rng(50, 0);
    for (int i = 0; i < 200; ++i) probe.inputs.push_back(sample(Gaussian{10}, rng).x);
    return probe;
  }());
  const RunResult r = train(c);
  ASSERT_TRUE(r.ok());
  for (std::size_t i = 1; i < r.metrics.size(); ++i) EXPECT_LT(r.metrics[i].mean_bias, r.metrics[i - 1].mean_bias);
}

TEST(Sweep, ParallelMatchesSequentialAndEmptyIsEmpty) {
  std::vector<TrainConfig> configs;
  for (std::uint64_t id = 0; id < 6; ++id) configs.push_back(hypercube_config(id, 400));
  const auto seq = sweep(configs, 1);
  const auto par = sweep(configs, 4);
  ASSERT_EQ(seq.size(), 6u);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    EXPECT_EQ(seq[i].final_network, par[i].final_network);
    EXPECT_EQ(seq[i].config.run_id, i);
  }
  EXPECT_NE(seq[0].final_network, seq[1].final_network);
  EXPECT_TRUE(sweep({}, 3).empty());
  configs.push_back(hypercube_config(2, 10));
  EXPECT_THROW(sweep(configs, 1), InvalidArgument);
}

TEST(Sweep, FailingRunDoesNotAbortTheOthers) {
  std::vector<TrainConfig> configs = {hypercube_config(0, 50), hypercube_config(1, 50)};
  configs[1].learning_rate = 0.0;
  const auto out = sweep(configs, 2);
  EXPECT_TRUE(out[0].ok());
  ASSERT_FALSE(out[1].ok());
  EXPECT_NE(out[1].failure->find("learning rate"), std::string::npos);
}

TEST(Summary, MeanAndStderrInRunOrder) {
  const std::vector<double> xs = {1.0, 2.0, 4.0};
  const MeanStderr ms = mean_stderr(xs);
  EXPECT_DOUBLE_EQ(ms.mean, 7.0 / 3.0);
  ASSERT_TRUE(ms.stderr_.has_value());
  const double var = ((1 - 7.0 / 3) * (1 - 7.0 / 3) + (2 - 7.0 / 3) * (2 - 7.0 / 3) + (4 - 7.0 / 3) * (4 - 7.0 / 3)) / 2;
  EXPECT_DOUBLE_EQ(*ms.stderr_, std::sqrt(var / 3));
  EXPECT_FALSE(mean_stderr(std::vector<double>{5.0}).stderr_.has_value());
  EXPECT_THROW(mean_stderr(std::vector<double>{}), InvalidArgument);

  std::vector<TrainConfig> configs = {hypercube_config(0, 300), hypercube_config(1, 300)};
  const auto results = sweep(configs, 1);
  const RunSummary s = summarize(results);
  EXPECT_EQ(s.runs, 2u);
  EXPECT_DOUBLE_EQ(s.err_train.mean, (results[0].metrics.back().err_train + results[1].metrics.back().err_train) / 2);
  EXPECT_DOUBLE_EQ(s.steps.mean, 300.0);
}
