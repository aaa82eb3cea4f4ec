// SPDX-License-Identifier: Apache-2.0
#include "mitest/core/interface_spec.hpp"

#include <deque>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace mitest::core {

using nlohmann::json;

std::string SpecValidationReport::summary() const {
  if (entries.empty()) return "ok";
  std::string out;
  for (const auto& v : entries) {
    if (!out.empty()) out += "; ";
    out += v.message;
  }
  return out;
}

SpecValidationReport validate_interface_spec(const InterfaceSpec& spec) {
  SpecValidationReport report;
  auto add = [&report](SpecViolationKind kind, std::string message) {
    report.entries.push_back({kind, std::move(message)});
  };

  if (spec.states.count(kEnterState) == 0)
    add(SpecViolationKind::MissingDistinguishedState, "missing state: Enter");
  if (spec.states.count(kExitState) == 0)
    add(SpecViolationKind::MissingDistinguishedState, "missing state: Exit");

  std::set<std::pair<std::string, std::string>> seen_pairs;
  for (const auto& t : spec.transitions) {
    if (spec.states.count(t.from) == 0) add(SpecViolationKind::UnknownEndpoint, "unknown state: " + t.from);
    if (spec.states.count(t.to) == 0) add(SpecViolationKind::UnknownEndpoint, "unknown state: " + t.to);
    if (spec.stimuli.count(t.stimulus) == 0)
      add(SpecViolationKind::UnknownStimulus, "unknown stimulus: " + t.stimulus);
    if (!seen_pairs.emplace(t.from, t.stimulus).second)
      add(SpecViolationKind::NondeterministicArc,
          "nondeterministic: (" + t.from + ", " + t.stimulus + ")");
    // Exit must stay terminal except for a declared Exit->Enter recurrence arc.
    if (t.from == kExitState && t.to != kEnterState)
      add(SpecViolationKind::IllegalExitArc, "outgoing arc from Exit: stimulus " + t.stimulus);
  }

  // Reachability and exit-path checks only make sense on a structurally sound arc set.
  if (!report.entries.empty()) return report;

  std::map<std::string, std::set<std::string>> fwd, rev;
  for (const auto& t : spec.transitions) {
    fwd[t.from].insert(t.to);
    rev[t.to].insert(t.from);
  }
  auto closure = [&spec](const std::map<std::string, std::set<std::string>>& adj,
                         const std::string& origin) {
    std::set<std::string> seen{origin};
    std::deque<std::string> queue{origin};
    while (!queue.empty()) {
      std::string cur = queue.front();
      queue.pop_front();
      auto it = adj.find(cur);
      if (it == adj.end()) continue;
      for (const auto& next : it->second) {
        if (seen.insert(next).second) queue.push_back(next);
      }
    }
    (void)spec;
    return seen;
  };

  const std::set<std::string> from_enter = closure(fwd, kEnterState);
  const std::set<std::string> to_exit = closure(rev, kExitState);
  for (const auto& state : spec.states) {
    if (from_enter.count(state) == 0)
      add(SpecViolationKind::Unreachable, "unreachable: " + state);
    if (state != kExitState && to_exit.count(state) == 0)
      add(SpecViolationKind::NoExitPath, "no exit path: " + state);
  }
  return report;
}

namespace {

json rule_to_json(const PayloadRule& rule) {
  if (rule.kind == PayloadRule::Kind::Equals) return json{{"equals", rule.value}};
  return json{{"range", json::array({rule.lo, rule.hi})}};
}

PayloadRule rule_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("payload rule must be an object");
  PayloadRule rule;
  if (j.contains("equals")) {
    if (!j.at("equals").is_string())
      throw std::invalid_argument("'equals' rule value must be a string");
    rule.kind = PayloadRule::Kind::Equals;
    rule.value = j.at("equals").get<std::string>();
    return rule;
  }
  if (j.contains("range")) {
    const json& r = j.at("range");
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
      throw std::invalid_argument("'range' rule value must be [lo, hi]");
    rule.kind = PayloadRule::Kind::Range;
    rule.lo = r[0].get<double>();
    rule.hi = r[1].get<double>();
    if (rule.lo > rule.hi) throw std::invalid_argument("'range' rule requires lo <= hi");
    return rule;
  }
  throw std::invalid_argument("payload rule must contain 'equals' or 'range'");
}

}  // namespace

nlohmann::json interface_spec_to_json(const InterfaceSpec& spec) {
  json states = json::array();
  for (const auto& s : spec.states) states.push_back(s);
  json stimuli = json::array();
  for (const auto& s : spec.stimuli) stimuli.push_back(s);
  json transitions = json::array();
  for (const auto& t : spec.transitions) {
    json arc{{"from", t.from}, {"stimulus", t.stimulus}, {"to", t.to}};
    if (t.rule) arc["rule"] = rule_to_json(*t.rule);
    transitions.push_back(std::move(arc));
  }
  return json{{"service", spec.service_id},
              {"states", std::move(states)},
              {"stimuli", std::move(stimuli)},
              {"transitions", std::move(transitions)}};
}

InterfaceSpec interface_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("interface spec must be a JSON object");
  InterfaceSpec spec;
  if (!j.contains("service") || !j.at("service").is_string() ||
      j.at("service").get<std::string>().empty())
    throw std::invalid_argument("interface spec requires a non-empty 'service'");
  spec.service_id = j.at("service").get<std::string>();
  for (const char* key : {"states", "stimuli", "transitions"}) {
    if (!j.contains(key) || !j.at(key).is_array())
      throw std::invalid_argument(std::string("interface spec requires array '") + key + "'");
  }
  for (const auto& s : j.at("states")) {
    if (!s.is_string() || s.get<std::string>().empty())
      throw std::invalid_argument("states must be non-empty strings");
    spec.states.insert(s.get<std::string>());
  }
  for (const auto& s : j.at("stimuli")) {
    if (!s.is_string() || s.get<std::string>().empty())
      throw std::invalid_argument("stimuli must be non-empty strings");
    spec.stimuli.insert(s.get<std::string>());
  }
  for (const auto& arc : j.at("transitions")) {
    if (!arc.is_object()) throw std::invalid_argument("transitions must be objects");
    Transition t;
    for (const char* key : {"from", "stimulus", "to"}) {
      if (!arc.contains(key) || !arc.at(key).is_string())
        throw std::invalid_argument(std::string("transition requires string '") + key + "'");
    }
    t.from = arc.at("from").get<std::string>();
    t.stimulus = arc.at("stimulus").get<std::string>();
    t.to = arc.at("to").get<std::string>();
    if (arc.contains("rule")) t.rule = rule_from_json(arc.at("rule"));
    spec.transitions.push_back(std::move(t));
  }
  return spec;
}

}  // namespace mitest::core
