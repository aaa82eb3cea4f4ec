// SPDX-License-Identifier: Apache-2.0
#include "mitest/rv/monitor.hpp"

#include <charconv>
#include <stdexcept>

#include <json.hpp>

namespace mitest::rv {

using nlohmann::json;

namespace {

// Full-string numeric parse; anything else fails the predicate.
bool rule_holds(const core::PayloadRule& rule, const std::string& payload) {
  if (rule.kind == core::PayloadRule::Kind::Equals) return payload == rule.value;
  double value = 0.0;
  const char* begin = payload.data();
  const char* end = begin + payload.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return false;
  return rule.lo <= value && value <= rule.hi;
}

}  // namespace

MonitorSpec derive_monitor(const core::InterfaceSpec& spec, Abstraction abstraction) {
  auto report = core::validate_interface_spec(spec);
  if (!report.ok())
    throw std::invalid_argument("invalid interface spec for " + spec.service_id + ": " +
                                report.summary());

  MonitorSpec monitor;
  monitor.derived_from = spec.service_id;
  monitor.abstraction = abstraction;
  monitor.states = spec.states;
  monitor.initial = core::kEnterState;
  monitor.accepting = core::kExitState;
  for (const auto& t : spec.transitions) {
    std::optional<core::PayloadRule> rule;
    if (abstraction == Abstraction::ControlAndData) rule = t.rule;
    monitor.transitions[{t.from, t.stimulus}] = {t.to, std::move(rule)};
  }
  return monitor;
}

CheckResult check_trace(const MonitorSpec& monitor,
                        const std::vector<std::pair<std::string, std::string>>& trace) {
  CheckResult result;
  std::string state = monitor.initial;
  auto expected_at = [&monitor](const std::string& at) {
    std::set<std::string> expected;
    for (const auto& [key, _] : monitor.transitions) {
      if (key.first == at) expected.insert(key.second);
    }
    return expected;
  };

  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& [stimulus, payload] = trace[i];
    auto it = monitor.transitions.find({state, stimulus});
    if (it == monitor.transitions.end()) {
      Violation v;
      v.index = i;
      v.state_at = state;
      v.observed = stimulus;
      v.expected = expected_at(state);
      v.kind = ViolationKind::IllegalTransition;
      result.violations.push_back(std::move(v));
      result.final_state = state;
      return result;
    }
    const auto& [next, rule] = it->second;
    if (rule && !rule_holds(*rule, payload)) {
      Violation v;
      v.index = i;
      v.state_at = state;
      v.observed = stimulus;
      v.expected = expected_at(state);
      v.kind = ViolationKind::DataPredicateFail;
      result.violations.push_back(std::move(v));
      result.final_state = state;
      return result;
    }
    state = next;
  }

  if (state != monitor.accepting) {
    Violation v;
    v.index = trace.size();
    v.state_at = state;
    v.expected = expected_at(state);
    v.kind = ViolationKind::IncompleteTrace;
    result.violations.push_back(std::move(v));
    result.final_state = state;
    return result;
  }
  result.ok = true;
  result.final_state = state;
  return result;
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::IllegalTransition: return "IllegalTransition";
    case ViolationKind::IncompleteTrace: return "IncompleteTrace";
    case ViolationKind::DataPredicateFail: return "DataPredicateFail";
  }
  throw std::logic_error("unknown ViolationKind");
}

nlohmann::json monitor_spec_to_json(const MonitorSpec& monitor) {
  json states = json::array();
  for (const auto& s : monitor.states) states.push_back(s);
  json transitions = json::array();
  for (const auto& [key, value] : monitor.transitions) {
    json t{{"from", key.first}, {"stimulus", key.second}, {"to", value.first}};
    if (value.second) {
      const auto& rule = *value.second;
      if (rule.kind == core::PayloadRule::Kind::Equals)
        t["rule"] = json{{"equals", rule.value}};
      else
        t["rule"] = json{{"range", json::array({rule.lo, rule.hi})}};
    }
    transitions.push_back(std::move(t));
  }
  return json{{"derived_from", monitor.derived_from},
              {"abstraction",
               monitor.abstraction == Abstraction::ControlOnly ? "control" : "control+data"},
              {"states", std::move(states)},
              {"initial", monitor.initial},
              {"accepting", monitor.accepting},
              {"transitions", std::move(transitions)}};
}

MonitorSpec monitor_spec_from_json(const nlohmann::json& j) {
  MonitorSpec monitor;
  monitor.derived_from = j.at("derived_from").get<std::string>();
  const std::string abstraction = j.at("abstraction").get<std::string>();
  if (abstraction == "control")
    monitor.abstraction = Abstraction::ControlOnly;
  else if (abstraction == "control+data")
    monitor.abstraction = Abstraction::ControlAndData;
  else
    throw std::invalid_argument("unknown abstraction: " + abstraction);
  for (const auto& s : j.at("states")) monitor.states.insert(s.get<std::string>());
  monitor.initial = j.at("initial").get<std::string>();
  monitor.accepting = j.at("accepting").get<std::string>();
  for (const auto& t : j.at("transitions")) {
    std::optional<core::PayloadRule> rule;
    if (t.contains("rule")) {
      core::PayloadRule r;
      if (t.at("rule").contains("equals")) {
        r.kind = core::PayloadRule::Kind::Equals;
        r.value = t.at("rule").at("equals").get<std::string>();
      } else {
        r.kind = core::PayloadRule::Kind::Range;
        r.lo = t.at("rule").at("range").at(0).get<double>();
        r.hi = t.at("rule").at("range").at(1).get<double>();
      }
      rule = std::move(r);
    }
    auto key = std::make_pair(t.at("from").get<std::string>(),
                              t.at("stimulus").get<std::string>());
    if (!monitor.transitions
             .emplace(std::move(key),
                      std::make_pair(t.at("to").get<std::string>(), std::move(rule)))
             .second)
      throw std::invalid_argument("nondeterministic monitor transitions");
  }
  return monitor;
}

nlohmann::json violations_to_json(const CheckResult& result) {
  json violations = json::array();
  for (const auto& v : result.violations) {
    json expected = json::array();
    for (const auto& s : v.expected) expected.push_back(s);
    violations.push_back(json{{"index", v.index},
                              {"state_at", v.state_at},
                              {"observed", v.observed},
                              {"expected", std::move(expected)},
                              {"kind", to_string(v.kind)}});
  }
  return json{{"ok", result.ok},
              {"final_state", result.final_state},
              {"violations", std::move(violations)}};
}

}  // namespace mitest::rv
