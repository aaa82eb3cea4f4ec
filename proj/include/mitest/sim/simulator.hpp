// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mitest/core/interface_spec.hpp"
#include "mitest/core/types.hpp"

namespace mitest::sim {

// A virtual-sensor-driven service instance inside the simulated network.
struct SimService {
  core::InterfaceSpec spec;
  core::Layer layer = core::Layer::Perception;
  core::UsageContext context;
  // Relative emission likelihood per stimulus, renormalized per state over
  // that state's outgoing stimuli; stimuli absent from the map weigh 1.
  std::map<std::string, double> stimulus_weights;
};

enum class FaultKind { WrongTransition, DroppedOutput, CorruptedPayload };

struct FaultInjection {
  std::string service_id;
  FaultKind kind = FaultKind::WrongTransition;
  std::string trigger_state;
  double probability = 1.0;  // in (0, 1]
};

struct SimConfig {
  std::vector<SimService> services;
  std::int64_t steps_per_service = 0;  // must be positive
  std::int64_t resource_sampling_period_ms = 0;  // <= 0 disables sampling
  std::vector<FaultInjection> faults;
  std::uint64_t seed = 0;
};

struct FaultFiring {
  std::string service_id;
  std::size_t session_index = 0;
  std::size_t step_in_session = 0;
  FaultKind kind = FaultKind::WrongTransition;
  std::int64_t timestamp_ms = 0;
};

struct RunReport {
  std::map<std::string, std::int64_t> event_counts;   // "control"/"data"/"resource"
  std::map<std::string, std::int64_t> fault_firings;  // service -> firing count
  std::vector<FaultFiring> firings;
  std::int64_t probe_events_total = 0;
  // Probe overhead is reported, never compensated: a fixed synthetic cost
  // per emitted event.
  double synthetic_cpu_ms = 0.0;
};

// Deterministic discrete-event run: services interleave round-robin, one
// stimulus per turn, the logical clock advancing 1 ms per stimulus. Each
// stimulus emits a ControlFlow and a DataFlow probe event; resource samples
// for every service are emitted when the clock hits the sampling period.
// Identical configs produce byte-identical logs.
std::pair<core::EventLog, RunReport> run_simulation(const SimConfig& config);

// Returns a copy of config with fault appended; the original is unchanged.
SimConfig inject_fault(const SimConfig& config, const FaultInjection& fault);

// Replay of one stimulus sequence against a (possibly fault-injected)
// service, as the predict stage does when executing generated tests.
struct WalkExecution {
  std::vector<std::pair<std::string, std::string>> trace;  // (stimulus, payload)
  std::optional<std::size_t> fault_index;  // position of the first firing
  std::optional<FaultKind> fault_kind;
};

// Walks the spec from Enter feeding it `stimuli`; fault draws come from rng.
// A WrongTransition firing replaces the step's stimulus with an illegal one
// and ends the trace there.
WalkExecution execute_walk(const core::InterfaceSpec& spec,
                           const std::vector<FaultInjection>& faults,
                           const std::vector<std::string>& stimuli, std::mt19937_64& rng);

std::string to_string(FaultKind kind);
FaultKind fault_kind_from_string(const std::string& s);
SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json run_report_to_json(const RunReport& report);

}  // namespace mitest::sim
