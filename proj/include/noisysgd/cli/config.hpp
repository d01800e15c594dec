#pragma once

// Experiment configuration: a JSON key tree with strict key checking, and its
// expansion into one TrainConfig per (p, run).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "noisysgd/data.hpp"
#include "noisysgd/error.hpp"
#include "noisysgd/mnist.hpp"
#include "noisysgd/train.hpp"

namespace noisysgd::cli {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DataConfig {
  std::string kind = "gaussian";  // gaussian | standard_basis | hypercube | mnist
  std::size_t d = 0;
  double eps = 0.3;
  std::size_t train_size = 0;  // hypercube sample count; mnist subset (0: all)
  std::size_t test_size = 0;   // hypercube test set; gaussian probe inputs; mnist test subset
  std::string dir;             // mnist directory, empty for $NOISYSGD_DATA_DIR
};

struct ExperimentConfig {
  std::string name = "experiment";
  DataConfig data;

  std::vector<std::size_t> hidden;
  std::string activation = "relu";
  double leaky_alpha = 0.1;
  std::string mode = "with_bias";  // with_bias | augmented_input

  double weight_scale = 1.7320508075688772;
  std::string bias_init = "zero";  // zero | uniform

  std::string loss = "hinge";  // hinge | logistic
  double beta = 0.0;
  std::string target = "auto";  // auto | multilabel | softmax
  std::string noise = "label";  // none | label | pure | smoothing
  std::vector<double> p = {0.0};

  double learning_rate = 0.01;
  std::int64_t halve_every_epochs = 0;  // 0: constant rate
  std::int64_t epoch_length = 0;        // 0: training set size
  std::int64_t steps = 0;
  std::int64_t epochs = 0;
  std::int64_t zero_error_check = 0;  // > 0: stop at twice the first zero-error step

  std::size_t runs = 1;
  std::uint64_t seed = 1;
  std::int64_t metric_every = 0;
  unsigned parallel = 1;
};

namespace detail {

class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  const nlohmann::json* object(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError(where_ + ": unknown key \"" + k + "\"");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline void require_one_of(const std::string& value, std::initializer_list<const char*> allowed,
                           const std::string& what) {
  for (const char* a : allowed) {
    if (value == a) return;
  }
  throw ConfigError(what + ": unsupported value \"" + value + "\"");
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  using detail::require_one_of;
  require_one_of(c.data.kind, {"gaussian", "standard_basis", "hypercube", "mnist"}, "data.kind");
  if (c.data.kind != "mnist" && c.data.d == 0) throw ConfigError("data.d must be positive");
  if (c.data.kind == "hypercube") {
    if (!(c.data.eps > 0.0 && c.data.eps < 1.0)) throw ConfigError("data.eps must lie in (0,1)");
    if (c.data.train_size == 0) throw ConfigError("data.train_size must be positive");
  }
  require_one_of(c.activation, {"relu", "leaky_relu", "identity"}, "arch.activation");
  require_one_of(c.mode, {"with_bias", "augmented_input"}, "arch.mode");
  require_one_of(c.bias_init, {"zero", "uniform"}, "init.bias");
  require_one_of(c.loss, {"hinge", "logistic"}, "loss.kind");
  require_one_of(c.target, {"auto", "multilabel", "softmax"}, "target");
  require_one_of(c.noise, {"none", "label", "pure", "smoothing"}, "noise");
  if (c.p.empty()) throw ConfigError("p: list is empty");
  for (double p : c.p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p: values must lie in [0,1]");
  }
  const std::set<double> distinct(c.p.begin(), c.p.end());
  if (distinct.size() != c.p.size()) throw ConfigError("p: duplicate values");
  if ((c.data.kind == "gaussian" || c.data.kind == "standard_basis") && c.noise != "pure") {
    throw ConfigError("noise: unlabeled distributions need \"pure\" noise");
  }
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) throw ConfigError("learning_rate must be positive");
  if ((c.steps > 0) == (c.epochs > 0)) throw ConfigError("exactly one of steps and epochs must be positive");
  if (c.runs == 0) throw ConfigError("runs must be positive");
  if (c.parallel == 0) throw ConfigError("parallel must be positive");
  if (c.halve_every_epochs < 0 || c.epoch_length < 0 || c.metric_every < 0 || c.zero_error_check < 0) {
    throw ConfigError("negative count in schedule, epoch_length, metric_every or stop");
  }
  if (!(c.weight_scale > 0.0)) throw ConfigError("init.weight_scale must be positive");
}

inline ExperimentConfig parse_experiment(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::ObjectReader top(j, "config");
  top.get("name", c.name);
  if (const auto* d = top.object("data")) {
    detail::ObjectReader r(*d, "data");
    r.get("kind", c.data.kind);
    r.get("d", c.data.d);
    r.get("eps", c.data.eps);
    r.get("train_size", c.data.train_size);
    r.get("test_size", c.data.test_size);
    r.get("dir", c.data.dir);
    r.finish();
  } else {
    throw ConfigError("config: missing \"data\"");
  }
  if (const auto* a = top.object("arch")) {
    detail::ObjectReader r(*a, "arch");
    r.get("hidden", c.hidden);
    r.get("activation", c.activation);
    r.get("leaky_alpha", c.leaky_alpha);
    r.get("mode", c.mode);
    r.finish();
  }
  if (const auto* i = top.object("init")) {
    detail::ObjectReader r(*i, "init");
    r.get("weight_scale", c.weight_scale);
    r.get("bias", c.bias_init);
    r.finish();
  }
  if (const auto* l = top.object("loss")) {
    detail::ObjectReader r(*l, "loss");
    r.get("kind", c.loss);
    r.get("beta", c.beta);
    r.finish();
  }
  top.get("target", c.target);
  top.get("noise", c.noise);
  top.get("p", c.p);
  top.get("learning_rate", c.learning_rate);
  if (const auto* s = top.object("schedule")) {
    detail::ObjectReader r(*s, "schedule");
    std::string kind = "constant";
    r.get("kind", kind);
    detail::require_one_of(kind, {"constant", "halve_every"}, "schedule.kind");
    r.get("epochs", c.halve_every_epochs);
    r.finish();
    if (kind == "constant") c.halve_every_epochs = 0;
    else if (c.halve_every_epochs <= 0) throw ConfigError("schedule.epochs must be positive");
  }
  top.get("epoch_length", c.epoch_length);
  top.get("steps", c.steps);
  top.get("epochs", c.epochs);
  if (const auto* s = top.object("stop")) {
    detail::ObjectReader r(*s, "stop");
    std::string kind = "fixed";
    r.get("kind", kind);
    detail::require_one_of(kind, {"fixed", "zero_error_doubling"}, "stop.kind");
    std::int64_t every = 1000;
    r.get("check_every", every);
    r.finish();
    c.zero_error_check = kind == "fixed" ? 0 : every;
    if (kind != "fixed" && every <= 0) throw ConfigError("stop.check_every must be positive");
  }
  top.get("runs", c.runs);
  top.get("seed", c.seed);
  top.get("metric_every", c.metric_every);
  top.get("parallel", c.parallel);
  top.finish();
  validate(c);
  return c;
}

inline ExperimentConfig parse_experiment_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_experiment(j);
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_text(ss.str());
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json data = {{"kind", c.data.kind}, {"d", c.data.d}, {"eps", c.data.eps},
                         {"train_size", c.data.train_size}, {"test_size", c.data.test_size}};
  if (!c.data.dir.empty()) data["dir"] = c.data.dir;
  nlohmann::json j = {
      {"name", c.name},
      {"data", data},
      {"arch", {{"hidden", c.hidden}, {"activation", c.activation}, {"leaky_alpha", c.leaky_alpha}, {"mode", c.mode}}},
      {"init", {{"weight_scale", c.weight_scale}, {"bias", c.bias_init}}},
      {"loss", {{"kind", c.loss}, {"beta", c.beta}}},
      {"target", c.target},
      {"noise", c.noise},
      {"p", c.p},
      {"learning_rate", c.learning_rate},
      {"epoch_length", c.epoch_length},
      {"steps", c.steps},
      {"epochs", c.epochs},
      {"runs", c.runs},
      {"seed", c.seed},
      {"metric_every", c.metric_every},
      {"parallel", c.parallel}};
  j["schedule"] = c.halve_every_epochs > 0
                      ? nlohmann::json{{"kind", "halve_every"}, {"epochs", c.halve_every_epochs}}
                      : nlohmann::json{{"kind", "constant"}};
  j["stop"] = c.zero_error_check > 0
                  ? nlohmann::json{{"kind", "zero_error_doubling"}, {"check_every", c.zero_error_check}}
                  : nlohmann::json{{"kind", "fixed"}};
  return j;
}

/// Train/test sets shared by every run that uses them. Hypercube sets are per run.
struct SharedData {
  std::shared_ptr<const LabeledDataset> train;
  std::shared_ptr<const LabeledDataset> test;
};

class MissingDataError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

inline constexpr const char* kMnistInstructions =
    "MNIST IDX files not found. Place train-images-idx3-ubyte, train-labels-idx1-ubyte, "
    "t10k-images-idx3-ubyte and t10k-labels-idx1-ubyte in a directory and set NOISYSGD_DATA_DIR "
    "to it (or set data.dir), e.g. by running scripts/fetch_mnist.sh.";

inline SharedData load_shared_data(const ExperimentConfig& c) {
  SharedData out;
  if (c.data.kind != "mnist") return out;
  const auto paths = mnist_paths(c.data.dir);
  if (!paths) throw MissingDataError(kMnistInstructions);
  const auto lim = [](std::size_t n) { return n > 0 ? std::optional<std::size_t>(n) : std::nullopt; };
  auto train = std::make_shared<LabeledDataset>(load_mnist_idx(paths->train_images, paths->train_labels,
                                                               lim(c.data.train_size)));
  train->name = "mnist-train";
  auto test = std::make_shared<LabeledDataset>(load_mnist_idx(paths->test_images, paths->test_labels,
                                                              lim(c.data.test_size)));
  test->name = "mnist-test";
  out.train = std::move(train);
  out.test = std::move(test);
  return out;
}

inline constexpr std::uint64_t kDataTrainPurpose = 2;
inline constexpr std::uint64_t kDataTestPurpose = 3;

inline std::shared_ptr<const LabeledDataset> unlabeled_probe(const Distribution& dist, std::size_t n,
                                                             RngStream& rng) {
  auto ds = std::make_shared<LabeledDataset>();
  ds->name = "probe";
  for (std::size_t i = 0; i < n; ++i) ds->inputs.push_back(sample(dist, rng).x);
  return ds;
}

/// The training configuration of run `run` in arm `arm` (index into c.p).
inline TrainConfig make_train_config(const ExperimentConfig& c, const SharedData& shared, std::size_t arm,
                                     std::size_t run) {
  TrainConfig tc;
  const std::size_t n_out = c.data.kind == "mnist" ? 10 : 1;
  RngStream train_rng(c.seed, derive_stream_id(run, kDataTrainPurpose));
  RngStream test_rng(c.seed, derive_stream_id(run, kDataTestPurpose));
  std::size_t train_size = 0;
  if (c.data.kind == "gaussian") {
    tc.source = Gaussian{c.data.d};
    if (c.data.test_size > 0) tc.eval_train = unlabeled_probe(tc.source, c.data.test_size, test_rng);
  } else if (c.data.kind == "standard_basis") {
    tc.source = StandardBasis{c.data.d};
    auto basis = std::make_shared<LabeledDataset>();
    basis->name = "basis";
    for (std::size_t i = 0; i < c.data.d; ++i) {
      Vector e(c.data.d);
      e[i] = 1.0;
      basis->inputs.push_back(std::move(e));
    }
    tc.eval_train = std::move(basis);
  } else if (c.data.kind == "hypercube") {
    auto train = std::make_shared<const LabeledDataset>(
        make_hypercube_dataset(c.data.d, c.data.eps, c.data.train_size, train_rng));
    tc.source = FixedSet{train};
    tc.eval_train = train;
    if (c.data.test_size > 0) {
      tc.eval_test = std::make_shared<const LabeledDataset>(
          make_hypercube_dataset(c.data.d, c.data.eps, c.data.test_size, test_rng));
    }
    train_size = train->size();
  } else {
    if (!shared.train) throw MissingDataError(kMnistInstructions);
    tc.source = FixedSet{shared.train};
    tc.eval_train = shared.train;
    tc.eval_test = shared.test;
    train_size = shared.train->size();
  }

  tc.arch.input_dim = input_dim(tc.source);
  tc.arch.hidden = c.hidden;
  tc.arch.output_width = n_out;
  tc.arch.activation = c.activation == "relu"         ? Activation::relu()
                       : c.activation == "leaky_relu" ? Activation::leaky_relu(c.leaky_alpha)
                                                      : Activation::identity();
  tc.arch.mode = c.mode == "with_bias" ? ModeKind::WithBias : ModeKind::AugmentedInput;
  tc.init.weight_scale = c.weight_scale;
  tc.init.bias = c.bias_init == "zero" ? BiasInit::Zero : BiasInit::Uniform;

  tc.loss = c.loss == "hinge" ? SurrogateLoss::hinge(c.beta) : SurrogateLoss::logistic();
  tc.target = c.target == "auto" ? TargetKind::Auto : c.target == "multilabel" ? TargetKind::MultiLabel
                                                                              : TargetKind::Softmax;
  const double p = c.p.at(arm);
  if (c.noise == "none") tc.noise = NoNoise{};
  else if (c.noise == "label") tc.noise = LabelNoise{p};
  else if (c.noise == "pure") tc.noise = PureNoise{};
  else tc.noise = Smoothing{p};

  tc.learning_rate = c.learning_rate;
  if (c.halve_every_epochs > 0) tc.schedule = HalveEvery{c.halve_every_epochs};
  tc.epoch_length = c.epoch_length;
  const std::int64_t epoch_len = c.epoch_length > 0 ? c.epoch_length : static_cast<std::int64_t>(train_size);
  if (c.epochs > 0 && epoch_len == 0) throw ConfigError("epochs need a finite training set or epoch_length");
  tc.steps = c.steps > 0 ? c.steps : c.epochs * epoch_len;
  if (c.zero_error_check > 0) tc.stop = ZeroErrorDoubling{c.zero_error_check};

  tc.master_seed = c.seed;
  tc.run_id = arm * c.runs + run;
  tc.metric_every = c.metric_every;
  return tc;
}

/// Every run of the experiment in (arm, run) order.
inline std::vector<TrainConfig> expand(const ExperimentConfig& c, const SharedData& shared) {
  std::vector<TrainConfig> out;
  for (std::size_t a = 0; a < c.p.size(); ++a) {
    for (std::size_t r = 0; r < c.runs; ++r) out.push_back(make_train_config(c, shared, a, r));
  }
  return out;
}

}  // namespace noisysgd::cli
