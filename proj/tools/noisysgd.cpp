// noisysgd: experiment runner, theorem checker and plotter.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "noisysgd/cli/config.hpp"
#include "noisysgd/cli/csv.hpp"
#include "noisysgd/cli/run.hpp"
#include "noisysgd/cli/svg.hpp"
#include "noisysgd/theorems.hpp"

namespace fs = std::filesystem;
using namespace noisysgd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitBadInput = 2;

struct RunOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<unsigned> parallel;
  std::optional<double> p;
  std::string data_dir;
};

void add_run_options(CLI::App* cmd, RunOptions& o, bool with_runs) {
  cmd->add_option("--config", o.config, "experiment config (JSON)")->required();
  cmd->add_option("--out", o.out, "output directory (default out/<name>)");
  cmd->add_option("--seed", o.seed, "master seed");
  if (with_runs) {
    cmd->add_option("--runs", o.runs, "runs per p");
    cmd->add_option("--parallel", o.parallel, "concurrent runs");
  }
  cmd->add_option("--p", o.p, "run only this noise level");
}

int run_command(const RunOptions& o, bool single, std::ostream& log) {
  cli::ExperimentConfig c = cli::load_experiment(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.runs) c.runs = *o.runs;
  if (o.parallel) c.parallel = *o.parallel;
  if (o.p) c.p = {*o.p};
  if (!o.data_dir.empty()) c.data.dir = o.data_dir;
  if (single) c.runs = 1;
  cli::validate(c);
  const fs::path out = o.out.empty() ? fs::path("out") / c.name : fs::path(o.out);
  const auto outcome = cli::run_experiment(c, out, log);
  log << "wrote " << out.string() << "\n";
  return outcome.exit_code();
}

struct VerifyOptions {
  std::string id;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k, d, runs, trials;
  std::optional<std::int64_t> steps;
  std::optional<double> h, norm;
  std::string loss;
};

SurrogateLoss parse_loss(const std::string& s) {
  if (s == "hinge" || s == "hinge0") return SurrogateLoss::hinge(0.0);
  if (s == "hinge1") return SurrogateLoss::hinge(1.0);
  if (s == "logistic") return SurrogateLoss::logistic();
  throw cli::ConfigError("unknown loss \"" + s + "\" (hinge, hinge1, logistic)");
}

TheoremReport run_verify(const VerifyOptions& o) {
  if (o.id == "thm1") {
    Theorem1Config c;
    if (o.trials) c.trials = *o.trials;
    if (o.h) c.h = *o.h;
    if (o.seed) c.seed = *o.seed;
    return check_theorem1(c);
  }
  if (o.id == "thm2") {
    Theorem2Config c;
    if (o.d) {
      c.d = *o.d;
      c.initial_norm = std::sqrt(static_cast<double>(c.d));
    }
    if (o.h) c.h = *o.h;
    if (o.norm) c.initial_norm = *o.norm;
    if (o.runs) {
      c.runs = *o.runs;
      c.required_successes = (*o.runs * 9 + 9) / 10;
    }
    if (!o.loss.empty()) c.loss = parse_loss(o.loss);
    if (o.seed) c.seed = *o.seed;
    return check_theorem2(c);
  }
  if (o.id == "thm3") {
    Theorem3Config c;
    if (o.k) c.k = *o.k;
    if (o.d) c.d = *o.d;
    if (o.h) c.h = *o.h;
    if (o.steps) c.steps = *o.steps;
    if (o.seed) c.seed = *o.seed;
    return check_theorem3(c);
  }
  if (o.id == "thm4") {
    Theorem4Config c;
    if (o.k) c.k = *o.k;
    if (o.d) c.d = *o.d;
    if (o.h) c.h = *o.h;
    if (o.steps) c.steps = *o.steps;
    if (o.seed) c.seed = *o.seed;
    return check_theorem4(c);
  }
  if (o.id == "ap-exact") {
    ApTinyConfig c = default_ap_config();
    if (o.h) c.h = *o.h;
    if (o.steps) c.steps = static_cast<std::size_t>(*o.steps);
    if (!o.loss.empty()) c.loss = parse_loss(o.loss);
    return check_ap_exact(c);
  }
  if (o.id == "decay-rate") {
    DecayRateConfig c;
    if (o.trials) c.samples = *o.trials;
    if (o.seed) c.seed = *o.seed;
    return check_decay_rate(c);
  }
  throw cli::ConfigError("unknown theorem id \"" + o.id + "\" (thm1, thm2, thm3, thm4, ap-exact, decay-rate)");
}

/// Fills options the command line left unset from the `id` entry of a
/// thm-defaults style file.
void apply_verify_defaults(VerifyOptions& o) {
  std::ifstream in(o.config);
  if (!in) throw cli::ConfigError("cannot open config " + o.config);
  nlohmann::json all;
  try {
    all = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw cli::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!all.is_object() || !all.contains(o.id)) return;
  const nlohmann::json& entry = all.at(o.id);
  cli::detail::ObjectReader r(entry, o.id);
  auto fill = [&](const char* key, auto& opt) {
    typename std::decay_t<decltype(opt)>::value_type v{};
    r.get(key, v);
    if (!opt && entry.contains(key)) opt = v;
  };
  fill("seed", o.seed);
  fill("k", o.k);
  fill("d", o.d);
  fill("runs", o.runs);
  fill("trials", o.trials);
  fill("steps", o.steps);
  fill("h", o.h);
  fill("norm", o.norm);
  std::string loss;
  r.get("loss", loss);
  if (o.loss.empty()) o.loss = loss;
  r.finish();
}

int verify_command(VerifyOptions o) {
  if (!o.config.empty()) apply_verify_defaults(o);
  const TheoremReport rep = run_verify(o);
  std::cout << rep.to_text();
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    cli::write_text_file(fs::path(o.out) / "report.txt", rep.to_text());
    cli::write_text_file(fs::path(o.out) / "report.json", rep.to_json().dump(2) + "\n");
  }
  return rep.pass() ? kExitOk : kExitFailure;
}

int plot_command(const std::string& kind, const std::vector<std::string>& files, const std::string& out) {
  const cli::PlotKind k = cli::parse_plot_kind(kind);
  std::vector<std::pair<std::string, cli::CsvTable>> tables;
  for (const auto& f : files) tables.emplace_back(f, cli::read_numeric_csv_file(f));
  const cli::LinePlot plot = cli::plot_from_tables(k, tables);
  const fs::path path = out.empty() ? fs::path(kind + ".svg") : fs::path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  cli::write_text_file(path, cli::render_svg(plot));
  std::cout << "wrote " << path.string() << " (" << plot.series.size() << " series)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-noise SGD experiments and theorem checks"};
  app.require_subcommand(1);

  RunOptions train_opts, sweep_opts, mnist_opts;
  auto* train_cmd = app.add_subcommand("train", "one run per p from a config");
  add_run_options(train_cmd, train_opts, false);
  auto* sweep_cmd = app.add_subcommand("sweep", "all runs of a config, summary.csv per sweep");
  add_run_options(sweep_cmd, sweep_opts, true);
  auto* mnist_cmd = app.add_subcommand("mnist", "MNIST runs with dead-unit census and digit association");
  add_run_options(mnist_cmd, mnist_opts, true);
  mnist_cmd->add_option("--data-dir", mnist_opts.data_dir, "IDX directory (default $NOISYSGD_DATA_DIR)");

  VerifyOptions vo;
  auto* verify_cmd = app.add_subcommand("verify", "check a theorem and print its report");
  verify_cmd->set_help_flag("--help", "print this help message and exit");
  verify_cmd->add_option("id", vo.id, "thm1 | thm2 | thm3 | thm4 | ap-exact | decay-rate")->required();
  verify_cmd->add_option("--config", vo.config, "theorem defaults file (e.g. configs/thm-defaults.json)");
  verify_cmd->add_option("--out", vo.out, "directory for report.txt and report.json");
  verify_cmd->add_option("--seed", vo.seed);
  verify_cmd->add_option("--k", vo.k, "units per side (thm3, thm4)");
  verify_cmd->add_option("--d", vo.d, "input dimension");
  verify_cmd->add_option("--h", vo.h, "learning rate");
  verify_cmd->add_option("--steps", vo.steps, "step budget (thm3, thm4) or T (ap-exact)");
  verify_cmd->add_option("--runs", vo.runs, "independent runs (thm2)");
  verify_cmd->add_option("--trials", vo.trials, "trials (thm1) or samples (decay-rate)");
  verify_cmd->add_option("--norm", vo.norm, "initial weight norm (thm2)");
  verify_cmd->add_option("--loss", vo.loss, "hinge | hinge1 | logistic");

  std::string plot_kind = "norm", plot_out;
  std::vector<std::string> plot_files;
  auto* plot_cmd = app.add_subcommand("plot", "SVG line plot from metrics.csv files");
  plot_cmd->add_option("--kind", plot_kind, "norm | active | error | bias");
  plot_cmd->add_option("--out", plot_out, "SVG path");
  plot_cmd->add_option("csv", plot_files, "metrics.csv files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadInput;
  }

  try {
    if (*train_cmd) return run_command(train_opts, true, std::cout);
    if (*sweep_cmd) return run_command(sweep_opts, false, std::cout);
    if (*mnist_cmd) return run_command(mnist_opts, false, std::cout);
    if (*verify_cmd) return verify_command(vo);
    if (*plot_cmd) return plot_command(plot_kind, plot_files, plot_out);
  } catch (const cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return *plot_cmd ? kExitFailure : kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitBadInput;
}
