// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mitest/mcum/mcum.hpp"
#include "mitest/profile/operational_profile.hpp"

namespace mitest::predict {

enum class Verdict { Pass, Fail };

struct TestOutcome {
  mcum::WalkSequence walk;
  Verdict verdict = Verdict::Pass;
};

struct SuspicionReport {
  std::map<std::string, double> scores;  // interior state -> score in [0, 1]
  double lambda = 0.8;
  std::vector<std::string> ranked;  // descending score, ties ascending id
};

struct TopK {
  std::size_t k = 1;
};
struct Threshold {
  double t = 0.5;
};
using SelectionPolicy = std::variant<TopK, Threshold>;

// Combines the fail ratio over walk membership with profile usage weight:
// score(s) = lambda * F(s) + (1 - lambda) * U(s) for each interior state.
// Throws on empty outcomes or lambda outside [0, 1].
SuspicionReport predict_suspicion(const mcum::Mcum& m,
                                  const profile::OperationalProfile& profile,
                                  const std::vector<TestOutcome>& outcomes, double lambda);

// TopK keeps the first k of ranked plus boundary ties; Threshold keeps all
// with score >= t.
std::set<std::string> select_for_rv(const SuspicionReport& report,
                                    const SelectionPolicy& policy);

// Service-level suspicion = max over that service's state scores.
double service_suspicion(const SuspicionReport& report);

nlohmann::json suspicion_report_to_json(const SuspicionReport& report,
                                        const std::optional<std::set<std::string>>& selected);

}  // namespace mitest::predict
