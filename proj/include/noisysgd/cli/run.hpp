#pragma once

// Experiment execution and on-disk layout:
//
//   <out>/config.json               effective experiment config
//   <out>/summary.csv               one row per (p, aggregate)
//   <out>/p<p>/run<r>/metrics.csv   per-run metric stream
//   <out>/p<p>/run<r>/network.txt   final network
//   <out>/p<p>/run<r>/run.json      effective run parameters
//   <out>/p<p>/run<r>/digits.csv    per-unit class firing counts (multiclass data)

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "noisysgd/cli/config.hpp"
#include "noisysgd/cli/csv.hpp"
#include "noisysgd/serialize.hpp"
#include "noisysgd/theorems/digits.hpp"
#include "noisysgd/train.hpp"

namespace noisysgd::cli {

namespace fs = std::filesystem;

inline std::string arm_dir_name(double p) {
  char buf[48];
  const auto res = std::to_chars(buf, buf + sizeof buf, p);
  return "p" + std::string(buf, res.ptr);
}

inline std::string run_dir_name(std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run%03zu", r);
  return buf;
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

struct ArmResult {
  double p = 0.0;
  std::vector<RunResult> runs;
  std::vector<std::size_t> associated;  // digit-associated units per run (multiclass data)
  std::vector<std::size_t> dead;        // units silent on the whole test set
};

struct ExperimentOutcome {
  std::vector<ArmResult> arms;
  std::vector<SummaryRow> summary;
  std::size_t failures = 0;

  int exit_code() const { return failures == 0 ? 0 : 1; }
};

inline void write_digits_csv(const fs::path& path, const DigitAssociation& da) {
  std::ofstream out(path, std::ios::binary);
  std::vector<std::string> header = {"unit"};
  const std::size_t classes = da.histograms.empty() ? 0 : da.histograms.front().size();
  for (std::size_t c = 0; c < classes; ++c) header.push_back("class_" + std::to_string(c));
  header.emplace_back("associated");
  write_row(out, header);
  for (std::size_t u = 0; u < da.histograms.size(); ++u) {
    std::vector<std::string> row = {std::to_string(u)};
    for (std::size_t v : da.histograms[u]) row.push_back(std::to_string(v));
    row.push_back(da.associated[u] ? std::to_string(*da.associated[u]) : "-1");
    write_row(out, row);
  }
}

/// Runs every (p, run) of `c` and writes the layout above under `out`.
inline ExperimentOutcome run_experiment(const ExperimentConfig& c, const fs::path& out, std::ostream& log) {
  const SharedData shared = load_shared_data(c);
  const std::vector<TrainConfig> configs = expand(c, shared);
  std::vector<RunResult> results = sweep(configs, c.parallel);

  fs::create_directories(out);
  write_text_file(out / "config.json", to_json(c).dump(2) + "\n");

  ExperimentOutcome outcome;
  for (std::size_t a = 0; a < c.p.size(); ++a) {
    ArmResult arm;
    arm.p = c.p[a];
    for (std::size_t r = 0; r < c.runs; ++r) {
      RunResult& res = results[a * c.runs + r];
      const fs::path dir = out / arm_dir_name(arm.p) / run_dir_name(r);
      fs::create_directories(dir);
      nlohmann::json rj = {{"p", arm.p},
                           {"run", r},
                           {"run_id", res.config.run_id},
                           {"seed", res.config.master_seed},
                           {"step_budget", res.config.steps},
                           {"steps_run", res.steps_run}};
      rj["zero_error_step"] = res.zero_error_step ? nlohmann::json(*res.zero_error_step) : nlohmann::json(nullptr);
      if (!res.ok()) {
        rj["failure"] = *res.failure;
        ++outcome.failures;
        log << "run p=" << arm.p << " #" << r << " failed: " << *res.failure << "\n";
      }
      write_text_file(dir / "run.json", rj.dump(2) + "\n");
      if (res.ok()) {
        std::ostringstream m;
        write_metrics_csv(m, res.config.run_id, res.metrics, res.final_network.layer_count());
        write_text_file(dir / "metrics.csv", m.str());
        save_network((dir / "network.txt").string(), res.final_network);
        const auto* train = res.config.eval_train.get();
        if (train && train->kind == LabelKind::Multiclass && is_labeled(*train) &&
            res.final_network.hidden_layer_count() > 0) {
          const DigitAssociation da = digit_association(res.final_network, *train);
          write_digits_csv(dir / "digits.csv", da);
          arm.associated.push_back(da.associated_count);
        }
        const auto* probe = res.config.eval_test ? res.config.eval_test.get() : train;
        if (probe && res.final_network.hidden_layer_count() > 0) {
          arm.dead.push_back(dead_neurons(res.final_network, probe->inputs).size());
        }
      }
      arm.runs.push_back(std::move(res));
    }
    std::vector<RunResult> ok;
    for (const auto& r : arm.runs) {
      if (r.ok()) ok.push_back(r);
    }
    if (!ok.empty()) {
      auto rows = summary_rows(arm.p, ok);
      const auto add_count = [&](const char* name, const std::vector<std::size_t>& v) {
        if (v.size() != ok.size()) return;
        std::vector<double> d(v.begin(), v.end());
        const auto ms = mean_stderr(d);
        rows.push_back({arm.p, name, d.size(), ms.mean, ms.stderr_});
      };
      add_count("dead_units", arm.dead);
      add_count("associated_units", arm.associated);
      outcome.summary.insert(outcome.summary.end(), rows.begin(), rows.end());
    }
    outcome.arms.push_back(std::move(arm));
  }
  std::ostringstream s;
  write_summary_csv(s, outcome.summary);
  write_text_file(out / "summary.csv", s.str());

  for (const auto& row : outcome.summary) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "p=%-6g %-17s mean=%-14.6g", row.p, row.metric.c_str(), row.mean);
    log << buf;
    if (row.stderr_) {
      std::snprintf(buf, sizeof buf, " stderr=%.3g", *row.stderr_);
      log << buf;
    }
    log << "\n";
  }
  return outcome;
}

}  // namespace noisysgd::cli
