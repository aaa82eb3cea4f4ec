// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mitest/core/interface_spec.hpp"
#include "mitest/core/types.hpp"
#include "mitest/profile/operational_profile.hpp"

namespace mitest::mcum {

struct Arc {
  int from = 0;
  std::string stimulus;
  int to = 0;

  bool operator==(const Arc&) const = default;
};

// Usage-model state graph with a row-stochastic transition matrix.
// states[0] is Enter and states.back() is Exit; arcs are sorted by
// (from, stimulus). Probabilities live on arcs (arc_probs aligns with arcs);
// P aggregates parallel arcs per state pair and is the support's matrix form.
struct Mcum {
  std::string service_id;
  std::vector<std::string> states;
  std::vector<Arc> arcs;
  std::vector<double> arc_probs;
  Eigen::MatrixXd P;
  bool assigned = false;
  // True when the arc set itself contains the Exit->Enter recurrence arc.
  bool recurrence = false;

  int state_index(const std::string& state) const;
  int enter_index() const { return 0; }
  int exit_index() const { return static_cast<int>(states.size()) - 1; }
};

struct Uniform {};

// Explicit probability table covering exactly the arc set.
struct Direct {
  std::map<std::tuple<std::string, std::string, std::string>, double> table;
};

// Estimates arc probabilities from a profile's transition counts:
// (count + alpha) / (row total + alpha * outdegree).
struct FromProfile {
  const profile::OperationalProfile* profile = nullptr;
  std::optional<core::UsageContext> context;  // nullopt = Global
  double smoothing_alpha = 1.0;
};

using AssignmentStrategy = std::variant<Uniform, Direct, FromProfile>;

// One random walk Enter -> ... -> Exit through the model.
struct WalkSequence {
  std::vector<std::string> stimuli;
  std::vector<std::string> states;  // visited states, Enter first
  double probability = 1.0;         // product of traversed arc probabilities
  bool truncated = false;           // hit the max_len guard before Exit
};

struct McumValidationEntry {
  enum class Kind { NonStochasticRow, ZeroProbabilityArc, Unreachable, NoExitPath };
  Kind kind;
  std::string message;
};

struct McumValidationReport {
  std::vector<McumValidationEntry> entries;
  bool ok() const { return entries.empty(); }
  std::string summary() const;
};

// Structural stage: copies states/arcs from a validated spec; P stays zero
// and unassigned. Throws std::invalid_argument on an invalid spec.
Mcum build_structure(const core::InterfaceSpec& spec);

// Statistical stage: returns a copy with P filled per the strategy.
Mcum assign_probabilities(const Mcum& m, const AssignmentStrategy& strategy);

McumValidationReport validate_mcum(const Mcum& m);

// Samples n walks by per-state categorical draws from P. max_len = 0 means
// 10 * state count. Identical inputs give identical outputs.
std::vector<WalkSequence> generate_tests(const Mcum& m, std::size_t n, std::uint64_t seed,
                                         std::size_t max_len = 0);

// Probability of the unique stimulus-determined path from Enter; 0 if some
// stimulus has no matching arc.
double sequence_probability(const Mcum& m, const std::vector<std::string>& stimuli);

// Stationary distribution of the chain with the Exit->Enter recurrence arc
// added (probability 1) when absent. Throws if the result is reducible.
Eigen::VectorXd stationary_distribution(const Mcum& m);

// Long-run stimulus flow per feature: sum over arcs carrying the stimulus of
// stationary(from) * arc probability. An alternative usage weight for test
// prioritization.
std::map<std::string, double> stationary_feature_weights(const Mcum& m);

nlohmann::json mcum_to_json(const Mcum& m);
Mcum mcum_from_json(const nlohmann::json& j);
nlohmann::json walk_to_json(const WalkSequence& walk);
WalkSequence walk_from_json(const nlohmann::json& j);

// Direct tables persist as a JSON object mapping "from/stimulus/to" -> p.
Direct direct_table_from_json(const nlohmann::json& j);

}  // namespace mitest::mcum
