// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mitest/core/interface_spec.hpp"

namespace mitest::rv {

enum class Abstraction { ControlOnly, ControlAndData };

// A deterministic checker FSM derived from an interface spec.
struct MonitorSpec {
  std::string derived_from;  // service_id
  Abstraction abstraction = Abstraction::ControlOnly;
  std::set<std::string> states;
  std::string initial;    // Enter
  std::string accepting;  // Exit
  // (state, stimulus) -> (next state, optional payload predicate).
  std::map<std::pair<std::string, std::string>,
           std::pair<std::string, std::optional<core::PayloadRule>>>
      transitions;
};

enum class ViolationKind { IllegalTransition, IncompleteTrace, DataPredicateFail };

struct Violation {
  std::size_t index = 0;  // 0-based trace position; = length for IncompleteTrace
  std::string state_at;
  std::string observed;            // stimulus (empty for IncompleteTrace)
  std::set<std::string> expected;  // stimuli legal at state_at
  ViolationKind kind = ViolationKind::IllegalTransition;
};

struct CheckResult {
  bool ok = false;
  std::vector<Violation> violations;  // stop-at-first: at most one entry
  std::string final_state;
};

// Throws std::invalid_argument when the spec fails validation. ControlOnly
// drops payload rules; ControlAndData keeps them.
MonitorSpec derive_monitor(const core::InterfaceSpec& spec, Abstraction abstraction);

// Simulates the machine over (stimulus, payload) steps. First illegal
// stimulus yields IllegalTransition and stops the check; a failed payload
// predicate yields DataPredicateFail and stops; ending outside Exit yields
// IncompleteTrace at index = length.
CheckResult check_trace(const MonitorSpec& monitor,
                        const std::vector<std::pair<std::string, std::string>>& trace);

std::string to_string(ViolationKind kind);
nlohmann::json monitor_spec_to_json(const MonitorSpec& monitor);
MonitorSpec monitor_spec_from_json(const nlohmann::json& j);
nlohmann::json violations_to_json(const CheckResult& result);

}  // namespace mitest::rv
