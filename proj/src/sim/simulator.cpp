// SPDX-License-Identifier: Apache-2.0
#include "mitest/sim/simulator.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "mitest/core/event_log.hpp"
#include "mitest/core/random.hpp"

namespace mitest::sim {

using nlohmann::json;

namespace {

constexpr const char* kResourceFeature = "!resource";
constexpr const char* kCorruptMarker = "!corrupt";
constexpr const char* kSyntheticState = "!state";
constexpr const char* kSyntheticStimulus = "!fault";
constexpr double kSyntheticCpuPerEvent = 0.01;  // reported probe overhead, ms

std::string format_event_id(std::uint64_t counter) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "e%010" PRIu64, counter);
  return buf;
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

// Arcs of a spec indexed by from-state, in (stimulus) order.
struct ArcIndex {
  std::map<std::string, std::vector<const core::Transition*>> by_from;

  explicit ArcIndex(const core::InterfaceSpec& spec) {
    for (const auto& t : spec.transitions) by_from[t.from].push_back(&t);
    for (auto& [_, arcs] : by_from) {
      std::sort(arcs.begin(), arcs.end(),
                [](const core::Transition* a, const core::Transition* b) {
                  return a->stimulus < b->stimulus;
                });
    }
  }
};

// Payload a healthy service emits for an arc: satisfies the arc's rule.
std::string data_payload(const core::Transition& arc, std::mt19937_64& rng) {
  if (arc.rule) {
    if (arc.rule->kind == core::PayloadRule::Kind::Equals) return arc.rule->value;
    const double u = core::unit_draw(rng);
    return format_number(arc.rule->lo + u * (arc.rule->hi - arc.rule->lo));
  }
  return "v:" + arc.stimulus;
}

// First stimulus of the spec alphabet that is illegal at `state`.
std::string illegal_stimulus(const core::InterfaceSpec& spec, const ArcIndex& index,
                             const std::string& state) {
  std::set<std::string> legal;
  auto it = index.by_from.find(state);
  if (it != index.by_from.end()) {
    for (const auto* arc : it->second) legal.insert(arc->stimulus);
  }
  for (const auto& stimulus : spec.stimuli) {
    if (legal.count(stimulus) == 0) return stimulus;
  }
  return kSyntheticStimulus;
}

// First state that is not a legal successor of `state` (wrong-transition target).
std::string illegal_successor(const core::InterfaceSpec& spec, const ArcIndex& index,
                              const std::string& state) {
  std::set<std::string> legal;
  auto it = index.by_from.find(state);
  if (it != index.by_from.end()) {
    for (const auto* arc : it->second) legal.insert(arc->to);
  }
  for (const auto& candidate : spec.states) {
    if (legal.count(candidate) == 0) return candidate;
  }
  return kSyntheticState;
}

// First fault whose trigger matches and whose Bernoulli draw fires. Every
// candidate consumes one draw so firing decisions are independent.
const FaultInjection* pick_fault(const std::vector<FaultInjection>& faults,
                                 const std::string& service_id, const std::string& state,
                                 std::mt19937_64& rng) {
  for (const auto& fault : faults) {
    if (fault.service_id != service_id || fault.trigger_state != state) continue;
    if (core::unit_draw(rng) < fault.probability) return &fault;
  }
  return nullptr;
}

void validate_config(const SimConfig& config) {
  if (config.services.empty()) throw std::invalid_argument("config names no services");
  if (config.steps_per_service <= 0)
    throw std::invalid_argument("steps_per_service must be positive");
  std::set<std::string> ids;
  for (const auto& service : config.services) {
    if (!ids.insert(service.spec.service_id).second)
      throw std::invalid_argument("duplicate service id: " + service.spec.service_id);
    auto report = core::validate_interface_spec(service.spec);
    if (!report.ok())
      throw std::invalid_argument("invalid interface spec for " + service.spec.service_id +
                                  ": " + report.summary());
    for (const auto& [stimulus, weight] : service.stimulus_weights) {
      if (weight <= 0.0)
        throw std::invalid_argument("non-positive stimulus weight for " + stimulus);
    }
  }
  for (const auto& fault : config.faults) {
    if (ids.count(fault.service_id) == 0)
      throw std::invalid_argument("fault references unknown service: " + fault.service_id);
    if (fault.probability <= 0.0 || fault.probability > 1.0)
      throw std::invalid_argument("fault probability must lie in (0, 1]");
  }
}

}  // namespace

std::pair<core::EventLog, RunReport> run_simulation(const SimConfig& config) {
  validate_config(config);

  struct ServiceState {
    const SimService* service;
    ArcIndex index;
    std::mt19937_64 rng;
    std::string state = core::kEnterState;
    std::size_t session = 0;
    std::size_t step_in_session = 0;
  };
  std::vector<ServiceState> states;
  states.reserve(config.services.size());
  for (const auto& service : config.services) {
    states.push_back({&service, ArcIndex(service.spec),
                      std::mt19937_64(core::derive_seed(config.seed, service.spec.service_id))});
  }
  std::mt19937_64 resource_rng(core::derive_seed(config.seed, kResourceFeature));

  core::EventLog log;
  RunReport report;
  report.event_counts = {{"control", 0}, {"data", 0}, {"resource", 0}};
  for (const auto& service : config.services)
    report.fault_firings[service.spec.service_id] = 0;

  std::uint64_t event_counter = 0;
  std::int64_t clock_ms = 0;
  const std::int64_t period = config.resource_sampling_period_ms;

  auto emit = [&log, &event_counter](core::ProbeEvent ev) {
    ev.event_id = format_event_id(event_counter++);
    log.events.push_back(std::move(ev));
  };

  for (std::int64_t step = 0; step < config.steps_per_service; ++step) {
    for (auto& svc : states) {
      if (period > 0 && clock_ms % period == 0) {
        // Sampling tick: every service reports one resource measurement.
        for (const auto& other : config.services) {
          core::ProbeEvent ev;
          ev.timestamp_ms = clock_ms;
          ev.service_id = other.spec.service_id;
          ev.feature_id = kResourceFeature;
          ev.flow = core::FlowKind::ResourceFlow;
          ev.context = other.context;
          ev.payload = "";
          core::ResourceSample sample;
          sample.cpu_fraction = core::unit_draw(resource_rng);
          sample.memory_bytes = 1u << 20;
          sample.network_bytes = 256 * (event_counter + 1);
          ev.resource = sample;
          emit(std::move(ev));
          ++report.event_counts["resource"];
        }
      }

      const auto& spec = svc.service->spec;
      const FaultInjection* fault =
          pick_fault(config.faults, spec.service_id, svc.state, svc.rng);

      std::string stimulus, to, payload;
      bool emit_data = true;
      if (fault != nullptr && fault->kind == FaultKind::WrongTransition) {
        stimulus = illegal_stimulus(spec, svc.index, svc.state);
        to = illegal_successor(spec, svc.index, svc.state);
        payload = "v:" + stimulus;
      } else {
        // Weighted choice over the state's outgoing arcs.
        const auto& arcs = svc.index.by_from.at(svc.state);
        std::vector<double> weights;
        weights.reserve(arcs.size());
        for (const auto* arc : arcs) {
          auto it = svc.service->stimulus_weights.find(arc->stimulus);
          weights.push_back(it == svc.service->stimulus_weights.end() ? 1.0 : it->second);
        }
        const auto* arc = arcs[core::weighted_index(weights, svc.rng)];
        stimulus = arc->stimulus;
        to = arc->to;
        payload = data_payload(*arc, svc.rng);
        if (fault != nullptr && fault->kind == FaultKind::DroppedOutput) emit_data = false;
        if (fault != nullptr && fault->kind == FaultKind::CorruptedPayload)
          payload = kCorruptMarker;
      }

      if (fault != nullptr) {
        ++report.fault_firings[spec.service_id];
        report.firings.push_back(
            {spec.service_id, svc.session, svc.step_in_session, fault->kind, clock_ms});
      }

      core::ProbeEvent control;
      control.timestamp_ms = clock_ms;
      control.service_id = spec.service_id;
      control.feature_id = stimulus;
      control.flow = core::FlowKind::ControlFlow;
      control.context = svc.service->context;
      control.payload = core::make_control_payload(svc.state, to);
      emit(std::move(control));
      ++report.event_counts["control"];

      if (emit_data) {
        core::ProbeEvent data;
        data.timestamp_ms = clock_ms;
        data.service_id = spec.service_id;
        data.feature_id = stimulus;
        data.flow = core::FlowKind::DataFlow;
        data.context = svc.service->context;
        data.payload = payload;
        emit(std::move(data));
        ++report.event_counts["data"];
      }

      ++svc.step_in_session;
      if (to == core::kExitState || to == kSyntheticState) {
        // Session over (normally or by a wrong transition): restart at Enter.
        svc.state = core::kEnterState;
        ++svc.session;
        svc.step_in_session = 0;
      } else {
        svc.state = to;
      }
      ++clock_ms;
    }
  }

  log.normalize();
  report.probe_events_total = report.event_counts["control"] + report.event_counts["data"] +
                              report.event_counts["resource"];
  report.synthetic_cpu_ms =
      kSyntheticCpuPerEvent * static_cast<double>(report.probe_events_total);
  return {std::move(log), std::move(report)};
}

SimConfig inject_fault(const SimConfig& config, const FaultInjection& fault) {
  bool known = false;
  for (const auto& service : config.services)
    known = known || service.spec.service_id == fault.service_id;
  if (!known) throw std::invalid_argument("fault references unknown service: " + fault.service_id);
  SimConfig out = config;
  out.faults.push_back(fault);
  return out;
}

WalkExecution execute_walk(const core::InterfaceSpec& spec,
                           const std::vector<FaultInjection>& faults,
                           const std::vector<std::string>& stimuli, std::mt19937_64& rng) {
  const ArcIndex index(spec);
  WalkExecution result;
  std::string state = core::kEnterState;
  for (std::size_t i = 0; i < stimuli.size(); ++i) {
    const FaultInjection* fault = pick_fault(faults, spec.service_id, state, rng);
    if (fault != nullptr && !result.fault_index) {
      result.fault_index = i;
      result.fault_kind = fault->kind;
    }
    if (fault != nullptr && fault->kind == FaultKind::WrongTransition) {
      result.trace.emplace_back(illegal_stimulus(spec, index, state), "v:" + stimuli[i]);
      return result;  // the session breaks at the wrong transition
    }

    auto it = index.by_from.find(state);
    const core::Transition* arc = nullptr;
    if (it != index.by_from.end()) {
      for (const auto* candidate : it->second) {
        if (candidate->stimulus == stimuli[i]) {
          arc = candidate;
          break;
        }
      }
    }
    if (arc == nullptr) break;  // stimulus impossible here; stop the replay

    std::string payload = data_payload(*arc, rng);
    if (fault != nullptr && fault->kind == FaultKind::DroppedOutput) payload = "";
    if (fault != nullptr && fault->kind == FaultKind::CorruptedPayload)
      payload = kCorruptMarker;
    result.trace.emplace_back(arc->stimulus, std::move(payload));
    state = arc->to;
  }
  return result;
}

std::string to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::WrongTransition: return "wrong_transition";
    case FaultKind::DroppedOutput: return "dropped_output";
    case FaultKind::CorruptedPayload: return "corrupted_payload";
  }
  throw std::logic_error("unknown FaultKind");
}

FaultKind fault_kind_from_string(const std::string& s) {
  if (s == "wrong_transition") return FaultKind::WrongTransition;
  if (s == "dropped_output") return FaultKind::DroppedOutput;
  if (s == "corrupted_payload") return FaultKind::CorruptedPayload;
  throw std::invalid_argument("unknown fault kind: " + s);
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("sim config must be a JSON object");
  SimConfig config;
  for (const auto& s : j.at("services")) {
    SimService service;
    service.spec = core::interface_spec_from_json(s.at("spec"));
    service.layer = core::layer_from_string(s.at("layer").get<std::string>());
    const auto& ctx = s.at("context");
    service.context.device_variant = ctx.at("device").get<std::string>();
    service.context.os = ctx.at("os").get<std::string>();
    service.context.location = ctx.at("location").get<std::string>();
    if (ctx.contains("prefs")) {
      for (const auto& p : ctx.at("prefs"))
        service.context.preference_tags.insert(p.get<std::string>());
    }
    if (s.contains("weights")) {
      for (const auto& [stimulus, weight] : s.at("weights").items())
        service.stimulus_weights[stimulus] = weight.get<double>();
    }
    config.services.push_back(std::move(service));
  }
  config.steps_per_service = j.at("steps_per_service").get<std::int64_t>();
  if (j.contains("resource_period_ms"))
    config.resource_sampling_period_ms = j.at("resource_period_ms").get<std::int64_t>();
  if (j.contains("faults")) {
    for (const auto& f : j.at("faults")) {
      FaultInjection fault;
      fault.service_id = f.at("service").get<std::string>();
      fault.kind = fault_kind_from_string(f.at("kind").get<std::string>());
      fault.trigger_state = f.at("trigger_state").get<std::string>();
      fault.probability = f.at("probability").get<double>();
      config.faults.push_back(std::move(fault));
    }
  }
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  validate_config(config);  // a config straight from a file must already be runnable
  return config;
}

nlohmann::json run_report_to_json(const RunReport& report) {
  json counts = json::object();
  for (const auto& [flow, count] : report.event_counts) counts[flow] = count;
  json firings_per_service = json::object();
  for (const auto& [service, count] : report.fault_firings) firings_per_service[service] = count;
  json firings = json::array();
  for (const auto& firing : report.firings) {
    firings.push_back(json{{"service", firing.service_id},
                           {"session", firing.session_index},
                           {"step_in_session", firing.step_in_session},
                           {"kind", to_string(firing.kind)},
                           {"ts", firing.timestamp_ms}});
  }
  return json{{"event_counts", std::move(counts)},
              {"fault_firings", std::move(firings_per_service)},
              {"firings", std::move(firings)},
              {"probe_events_total", report.probe_events_total},
              {"synthetic_cpu_ms", report.synthetic_cpu_ms}};
}

}  // namespace mitest::sim
