#pragma once

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace noisysgd {

enum class Verdict { Pass, Fail, Inconclusive };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

/// Outcome of one checker. `verdict` is derived from `evidence` and the
/// thresholds echoed in `config`; `notes` carry human-readable reasons.
struct TheoremReport {
  std::string id;
  Verdict verdict = Verdict::Inconclusive;
  nlohmann::json evidence = nlohmann::json::object();
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> notes;

  bool pass() const noexcept { return verdict == Verdict::Pass; }

  nlohmann::json to_json() const {
    return {{"id", id}, {"verdict", verdict_name(verdict)}, {"config", config},
            {"evidence", evidence}, {"notes", notes}};
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "[" << id << "] " << verdict_name(verdict) << '\n';
    for (const auto& [k, v] : config.items()) os << "  config." << k << " = " << v.dump() << '\n';
    for (const auto& [k, v] : evidence.items()) {
      const std::string s = v.dump();
      os << "  " << k << " = " << (s.size() > 400 ? s.substr(0, 400) + "..." : s) << '\n';
    }
    for (const auto& n : notes) os << "  note: " << n << '\n';
    return os.str();
  }
};

}  // namespace noisysgd
