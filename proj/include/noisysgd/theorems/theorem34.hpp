#pragma once

// N(x) = V.ReLU(W x) with V = (1..1, -1..-1) frozen, hinge(0), pure label
// noise over the standard basis. An update on e_i only moves column i of W,
// so each column evolves on its own. For column i:
//   Pos = {r < k : W(r,i) > 0},  Neg = {r >= k : W(r,i) > 0},
//   N(e_i) = sum_Pos W(r,i) - sum_Neg W(r,i),   Delta = h (|Pos| + |Neg|).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "noisysgd/model.hpp"
#include "noisysgd/rng.hpp"
#include "noisysgd/theorems/report.hpp"
#include "noisysgd/train.hpp"

namespace noisysgd {

struct ColumnState {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  double output = 0.0;
};

inline ColumnState column_state(const Matrix& w, std::size_t col) {
  const std::size_t k = w.rows() / 2;
  ColumnState s;
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double v = w(r, col);
    if (v > 0.0) {
      (r < k ? s.pos : s.neg).push_back(r);
      s.output += r < k ? v : -v;
    }
  }
  return s;
}

/// One encounter of e_i.
struct PosNegEntry {
  std::int64_t step;
  bool updated;
  std::size_t pos_size;
  std::size_t neg_size;
  double delta;   // h (|Pos| + |Neg|) after the step
  double output;  // N(e_i) after the step
};

/// A snapshot taken whenever Pos or Neg changed.
struct PosNegChange {
  std::int64_t step;
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
};

struct ColumnHistory {
  ColumnState initial;
  std::vector<PosNegEntry> entries;
  std::vector<PosNegChange> changes;
  std::size_t updates = 0;
  std::optional<std::size_t> dead_after_updates;  // updates taken until every coordinate was <= 0
  std::size_t stable_updates = 0;  // trailing updates with fixed sets and alternating period-2 output
};

/// Per-column Pos/Neg time series with nesting and orthogonality checks.
class PosNegHistory {
 public:
  PosNegHistory(const Network& net, double h) : h_(h), prev_(net.weight(0)) {
    if (!net.fixed_top()) throw InvalidArgument("PosNegHistory: needs a fixed top layer");
    columns_.resize(prev_.cols());
    for (std::size_t c = 0; c < prev_.cols(); ++c) {
      auto& col = columns_[c];
      col.initial = column_state(prev_, c);
      col.changes.push_back({0, col.initial.pos, col.initial.neg});
      if (col.initial.pos.empty() && col.initial.neg.empty()) col.dead_after_updates = 0;
    }
  }

  /// Records the step just taken on input e_col.
  void record(std::int64_t step, std::size_t col, bool updated, const Matrix& w) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
      if (c == col) continue;
      for (std::size_t r = 0; r < w.rows(); ++r) {
        if (w(r, c) != prev_(r, c)) ++orthogonality_violations_;
      }
    }
    auto& hist = columns_[col];
    const ColumnState before = current(col);
    const ColumnState after = column_state(w, col);
    if (!std::includes(before.pos.begin(), before.pos.end(), after.pos.begin(), after.pos.end()) ||
        !std::includes(before.neg.begin(), before.neg.end(), after.neg.begin(), after.neg.end())) {
      ++nesting_violations_;
    }
    const bool changed = after.pos != before.pos || after.neg != before.neg;
    if (changed) hist.changes.push_back({step + 1, after.pos, after.neg});
    const double delta = h_ * static_cast<double>(after.pos.size() + after.neg.size());
    if (updated) {
      ++hist.updates;
      if (!hist.dead_after_updates && after.pos.empty() && after.neg.empty()) {
        hist.dead_after_updates = hist.updates;
      }
      const bool alternates = before.output * after.output < 0.0;
      bool periodic = true;
      if (const auto* two_back = last_update_output(hist, 1)) {
        periodic = std::abs(after.output - *two_back) <= 1e-9 * (1.0 + std::abs(after.output));
      }
      hist.stable_updates = !changed && alternates && periodic ? hist.stable_updates + 1 : 0;
    }
    hist.entries.push_back({step, updated, after.pos.size(), after.neg.size(), delta, after.output});
    for (std::size_t r = 0; r < w.rows(); ++r) prev_(r, col) = w(r, col);
  }

  const std::vector<ColumnHistory>& columns() const noexcept { return columns_; }
  std::size_t nesting_violations() const noexcept { return nesting_violations_; }
  std::size_t orthogonality_violations() const noexcept { return orthogonality_violations_; }
  ColumnState current(std::size_t col) const { return column_state(prev_, col); }
  double h() const noexcept { return h_; }

 private:
  // Output after the n-th most recent update (0 = latest) of a column.
  static const double* last_update_output(const ColumnHistory& hist, std::size_t n) {
    for (auto it = hist.entries.rbegin(); it != hist.entries.rend(); ++it) {
      if (!it->updated) continue;
      if (n == 0) return &it->output;
      --n;
    }
    return nullptr;
  }

  double h_;
  Matrix prev_;
  std::vector<ColumnHistory> columns_;
  std::size_t nesting_violations_ = 0;
  std::size_t orthogonality_violations_ = 0;
};

/// Fixed-top network with 2k hidden units on d inputs, W i.i.d. U[-scale, scale].
inline Network make_fixed_top_network(std::size_t k, std::size_t d, double scale, RngStream& rng) {
  ArchSpec spec{d, {2 * k}, 1, Activation::relu(), ModeKind::FixedTopLayer};
  return init_network(spec, InitLaw{scale, BiasInit::Zero}, rng);
}

inline std::size_t basis_index(std::span<const double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) return i;
  }
  throw InvalidArgument("basis_index: zero input");
}

/// Runs pure-noise training over the standard basis, feeding `history`.
/// `stop` is polled after every step; returns the number of steps taken.
template <class Stop>
std::int64_t run_basis_dynamics(const Network& init, double h, std::int64_t budget,
                                std::uint64_t seed, std::uint64_t run_id, PosNegHistory& history,
                                Network* final_net, Stop stop) {
  TrainConfig tc;
  tc.source = StandardBasis{init.input_width()};
  tc.initial_network = init;
  tc.loss = SurrogateLoss::hinge(0.0);
  tc.noise = PureNoise{};
  tc.learning_rate = h;
  tc.steps = budget;
  tc.master_seed = seed;
  tc.run_id = run_id;
  auto result = train(tc, [&](const StepInfo& s) {
    history.record(s.step, basis_index(s.x), s.updated, s.net.weight(0));
    return !stop(s.step + 1);
  });
  if (final_net != nullptr) *final_net = std::move(result.final_network);
  return result.steps_run;
}

/// Once a column's |N| falls below Delta after its last set change, it must stay there.
/// A dead column (N = 0, Delta = 0) counts as below.
inline bool stays_below_delta(const ColumnHistory& hist) {
  const std::int64_t settled = hist.changes.back().step;
  bool below = false;
  for (const auto& e : hist.entries) {
    if (e.step + 1 < settled) continue;
    const bool now = std::abs(e.output) < e.delta || (e.output == 0.0 && e.delta == 0.0);
    if (below && !now) return false;
    below = below || now;
  }
  return true;
}

struct Theorem3Config {
  std::size_t k = 20;
  std::size_t d = 10;
  double h = 0.01;
  std::int64_t steps = 200000;
  std::int64_t grace_steps = 0;  // extra steps after every column is below Delta; 0: 100 d
  double init_scale = 1.0;
  std::optional<Network> initial_network;
  std::uint64_t seed = 1;
};

inline TheoremReport check_theorem3(const Theorem3Config& cfg) {
  TheoremReport rep;
  rep.id = "thm3";
  rep.config = {{"k", cfg.k}, {"d", cfg.d}, {"h", cfg.h}, {"steps", cfg.steps},
                {"init_scale", cfg.init_scale}, {"seed", cfg.seed}};
  RngStream rng(cfg.seed, derive_stream_id(cfg.seed, 0x7433));
  const Network init = cfg.initial_network ? *cfg.initial_network
                                           : make_fixed_top_network(cfg.k, cfg.d, cfg.init_scale, rng);
  const std::size_t k = init.hidden_width(0) / 2;
  const std::size_t d = init.input_width();
  const double bound = 2.0 * static_cast<double>(k) * cfg.h;
  const std::int64_t grace = cfg.grace_steps > 0 ? cfg.grace_steps : static_cast<std::int64_t>(100 * d);

  PosNegHistory history(init, cfg.h);
  std::optional<std::int64_t> all_below_at;
  auto below = [&](std::size_t c) {
    const auto s = history.current(c);
    const double delta = cfg.h * static_cast<double>(s.pos.size() + s.neg.size());
    return std::abs(s.output) < delta || (s.output == 0.0 && delta == 0.0);
  };
  Network final_net = init;
  const std::int64_t steps = run_basis_dynamics(init, cfg.h, cfg.steps, cfg.seed, cfg.seed, history,
                                                &final_net, [&](std::int64_t done) {
    if (!all_below_at) {
      bool all = true;
      for (std::size_t c = 0; c < d && all; ++c) all = below(c);
      if (all) all_below_at = done;
      return false;
    }
    return done >= *all_below_at + grace;
  });

  std::vector<double> terminal;
  std::size_t within = 0, persistent = 0;
  for (std::size_t c = 0; c < d; ++c) {
    const double n = history.current(c).output;
    terminal.push_back(n);
    within += std::abs(n) < bound ? 1 : 0;
    persistent += stays_below_delta(history.columns()[c]) ? 1 : 0;
  }
  rep.evidence = {{"steps", steps},
                  {"bound_2kh", bound},
                  {"terminal_outputs", terminal},
                  {"columns_within_bound", within},
                  {"columns_stayed_below_delta", persistent},
                  {"nesting_violations", history.nesting_violations()},
                  {"orthogonality_violations", history.orthogonality_violations()}};
  if (all_below_at) rep.evidence["all_below_delta_at"] = *all_below_at;
  const bool ok = within == d && persistent == d && history.nesting_violations() == 0 &&
                  history.orthogonality_violations() == 0;
  rep.verdict = ok ? Verdict::Pass : Verdict::Fail;
  if (!all_below_at) rep.notes.push_back("budget exhausted before every column fell below Delta");
  return rep;
}

/// The five high-probability initialization events, per column:
/// 1-2: k/2 - k^0.6 < |Pos|, |Neg| < k/2 + k^0.6;  3: 3 < |N| < k^0.6 / 2;
/// 4-5: fewer than 2 k^0.6 live weights below k^-0.4 on either side.
inline std::vector<std::string> atypical_initialization(const Matrix& w) {
  const std::size_t k = w.rows() / 2;
  const double kd = static_cast<double>(k);
  const double k06 = std::pow(kd, 0.6);
  const double small = std::pow(kd, -0.4);
  std::vector<std::string> reasons;
  for (std::size_t c = 0; c < w.cols(); ++c) {
    const ColumnState s = column_state(w, c);
    const auto size_ok = [&](std::size_t n) {
      return static_cast<double>(n) > kd / 2 - k06 && static_cast<double>(n) < kd / 2 + k06;
    };
    const auto small_count = [&](const std::vector<std::size_t>& set) {
      std::size_t n = 0;
      for (std::size_t r : set) n += w(r, c) < small ? 1 : 0;
      return static_cast<double>(n);
    };
    const std::string col = "column " + std::to_string(c) + ": ";
    if (!size_ok(s.pos.size())) reasons.push_back(col + "|Pos| out of range");
    if (!size_ok(s.neg.size())) reasons.push_back(col + "|Neg| out of range");
    if (!(std::abs(s.output) > 3.0 && std::abs(s.output) < k06 / 2)) reasons.push_back(col + "|N| out of range");
    if (!(small_count(s.pos) < 2 * k06)) reasons.push_back(col + "too many small Pos weights");
    if (!(small_count(s.neg) < 2 * k06)) reasons.push_back(col + "too many small Neg weights");
  }
  return reasons;
}

struct Theorem4Config {
  std::size_t k = 500;
  std::size_t d = 5;
  double h = 1.0;
  std::int64_t steps = 200000;
  std::size_t max_reseeds = 100;
  std::size_t max_updates_to_die = 3;
  std::optional<Network> initial_network;  // skips the typicality screen
  std::uint64_t seed = 1;
};

inline double theorem4_zero_bound(std::size_t k) {
  return static_cast<double>(k) + 6.0 * std::pow(static_cast<double>(k), 0.6);
}

inline TheoremReport check_theorem4(const Theorem4Config& cfg) {
  TheoremReport rep;
  rep.id = "thm4";
  const bool large = cfg.h >= 1.0;
  const bool small = cfg.h <= 1.0 / static_cast<double>(cfg.k);
  rep.config = {{"k", cfg.k}, {"d", cfg.d}, {"h", cfg.h}, {"steps", cfg.steps}, {"seed", cfg.seed},
                {"branch", large ? "all-dead" : small ? "alive" : "none"}};
  if (!large && !small) {
    rep.verdict = Verdict::Inconclusive;
    rep.notes.push_back("h is neither >= 1 nor <= 1/k; the theorem says nothing here");
    return rep;
  }

  std::uint64_t seed = cfg.seed;
  std::optional<Network> chosen = cfg.initial_network;
  std::size_t reseeds = 0;
  std::vector<std::string> rejected;
  for (; !chosen; ++seed, ++reseeds) {
    RngStream rng(seed, derive_stream_id(seed, 0x7434));
    Network candidate = make_fixed_top_network(cfg.k, cfg.d, 1.0, rng);
    const auto reasons = large ? std::vector<std::string>{} : atypical_initialization(candidate.weight(0));
    if (reasons.empty()) {
      chosen = std::move(candidate);
      break;
    }
    rejected.push_back("seed " + std::to_string(seed) + ": " + reasons.front());
    if (reseeds >= cfg.max_reseeds) {
      rep.verdict = Verdict::Inconclusive;
      rep.notes.push_back("initialization atypical for every tried seed");
      rep.evidence = {{"rejected_seeds", rejected}};
      return rep;
    }
  }
  const Network& init = *chosen;
  const std::size_t k = init.hidden_width(0) / 2;
  const std::size_t d = init.input_width();
  const std::size_t stable_needed = 10 * d;

  PosNegHistory history(init, cfg.h);
  Network final_net = init;
  const std::int64_t steps = run_basis_dynamics(init, cfg.h, cfg.steps, seed, seed, history, &final_net,
                                                [&](std::int64_t) {
    for (const auto& col : history.columns()) {
      if (large && !col.dead_after_updates) return false;
      if (!large && col.stable_updates < stable_needed) return false;
    }
    return true;
  });

  std::vector<std::size_t> zero_counts, updates_to_die, stable;
  std::size_t alive = 0, dead = 0, fast_death = 0, within = 0, periodic = 0;
  for (std::size_t c = 0; c < d; ++c) {
    const auto& col = history.columns()[c];
    const auto s = history.current(c);
    const std::size_t zeros = 2 * k - s.pos.size() - s.neg.size();
    zero_counts.push_back(zeros);
    stable.push_back(col.stable_updates);
    if (s.pos.empty() && s.neg.empty()) ++dead; else ++alive;
    if (col.dead_after_updates) {
      updates_to_die.push_back(*col.dead_after_updates);
      fast_death += *col.dead_after_updates <= cfg.max_updates_to_die ? 1 : 0;
    }
    within += static_cast<double>(zeros) <= theorem4_zero_bound(k) ? 1 : 0;
    periodic += col.stable_updates >= stable_needed ? 1 : 0;
  }
  rep.evidence = {{"seed_used", seed},
                  {"reseeds", reseeds},
                  {"steps", steps},
                  {"dead_columns", dead},
                  {"alive_columns", alive},
                  {"zero_coordinates", zero_counts},
                  {"zero_bound", theorem4_zero_bound(k)},
                  {"updates_to_die", updates_to_die},
                  {"stable_updates", stable},
                  {"nesting_violations", history.nesting_violations()},
                  {"orthogonality_violations", history.orthogonality_violations()}};
  if (!rejected.empty()) rep.evidence["rejected_seeds"] = rejected;
  const bool structural = history.nesting_violations() == 0 && history.orthogonality_violations() == 0;
  const bool ok = large ? dead == d && fast_death == d
                        : alive == d && within == d && periodic == d;
  rep.verdict = ok && structural ? Verdict::Pass : Verdict::Fail;
  return rep;
}

}  // namespace noisysgd
