// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace mitest::core {

/// Monitoring record categories emitted by in-line probes.
enum class FlowKind { DataFlow, ControlFlow, ResourceFlow };

/// Architectural layer a service or infrastructure node belongs to.
enum class Layer { Perception, Middleware, Application };

std::string to_string(FlowKind kind);
FlowKind flow_kind_from_string(const std::string& s);
std::string to_string(Layer layer);
Layer layer_from_string(const std::string& s);

/// Deployment context an event was observed under. Profiles condition their
/// frequency tables on this tuple, so it must order and compare cheaply.
struct UsageContext {
  std::string device_variant;
  std::string os;
  std::string location;
  std::set<std::string> preference_tags;

  friend bool operator==(const UsageContext&, const UsageContext&) = default;
  friend bool operator<(const UsageContext& a, const UsageContext& b) {
    return std::tie(a.device_variant, a.os, a.location, a.preference_tags) <
           std::tie(b.device_variant, b.os, b.location, b.preference_tags);
  }
};

struct ResourceSample {
  double cpu_fraction = 0.0;  // [0, 1]
  std::uint64_t memory_bytes = 0;
  std::uint64_t network_bytes = 0;

  friend bool operator==(const ResourceSample&, const ResourceSample&) = default;
};

/// One timestamped monitoring record. `resource` is present exactly when
/// flow == ResourceFlow.
struct ProbeEvent {
  std::int64_t timestamp_ms = 0;
  std::string service_id;
  std::string feature_id;
  FlowKind flow = FlowKind::ControlFlow;
  std::string event_id;
  UsageContext context;
  std::string payload;
  std::optional<ResourceSample> resource;

  friend bool operator==(const ProbeEvent&, const ProbeEvent&) = default;
};

/// Probe events in canonical (timestamp, event_id) order.
struct EventLog {
  std::vector<ProbeEvent> events;

  /// Sorts events into canonical order. Ties on timestamp break by
  /// lexicographic event_id so downstream pipelines see a total order.
  void normalize();

  friend bool operator==(const EventLog&, const EventLog&) = default;
};

}  // namespace mitest::core
