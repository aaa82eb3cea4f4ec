// SPDX-License-Identifier: Apache-2.0
#include "mitest/rv/trace.hpp"

#include <map>
#include <tuple>

#include "mitest/core/event_log.hpp"
#include "mitest/core/interface_spec.hpp"

namespace mitest::rv {

std::vector<SessionTrace> extract_service_traces(const core::EventLog& log) {
  // Data payload lookup per service, keyed by the (timestamp, feature) the
  // probes share when a stimulus emits its control/data pair.
  std::map<std::tuple<std::string, std::int64_t, std::string>, std::string> data_payloads;
  for (const auto& ev : log.events) {
    if (ev.flow != core::FlowKind::DataFlow) continue;
    data_payloads[{ev.service_id, ev.timestamp_ms, ev.feature_id}] = ev.payload;
  }

  std::vector<SessionTrace> traces;
  std::map<std::string, std::size_t> open;  // service -> index into traces
  std::map<std::string, std::size_t> session_counter;
  std::map<std::string, std::string> prev_to;

  for (const auto& ev : log.events) {
    if (ev.flow != core::FlowKind::ControlFlow) continue;
    const auto arc = core::parse_control_payload(ev.payload);
    const std::string from = arc ? arc->first : std::string();
    const std::string to = arc ? arc->second : std::string();

    auto it = open.find(ev.service_id);
    const bool continues = it != open.end() && prev_to[ev.service_id] != core::kExitState &&
                           from == prev_to[ev.service_id];
    if (!continues) {
      SessionTrace trace;
      trace.service_id = ev.service_id;
      trace.session_index = session_counter[ev.service_id]++;
      traces.push_back(std::move(trace));
      open[ev.service_id] = traces.size() - 1;
      it = open.find(ev.service_id);
    }

    std::string payload;
    auto data_it = data_payloads.find({ev.service_id, ev.timestamp_ms, ev.feature_id});
    if (data_it != data_payloads.end()) payload = data_it->second;

    SessionTrace& trace = traces[it->second];
    trace.steps.emplace_back(ev.feature_id, std::move(payload));
    trace.completed = (to == core::kExitState);
    prev_to[ev.service_id] = to;
  }
  return traces;
}

}  // namespace mitest::rv
