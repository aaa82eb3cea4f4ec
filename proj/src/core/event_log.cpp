// SPDX-License-Identifier: Apache-2.0
#include "mitest/core/event_log.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include <json.hpp>

namespace mitest::core {

using nlohmann::json;

std::string to_string(FlowKind kind) {
  switch (kind) {
    case FlowKind::DataFlow: return "data";
    case FlowKind::ControlFlow: return "control";
    case FlowKind::ResourceFlow: return "resource";
  }
  throw std::logic_error("unknown FlowKind");
}

FlowKind flow_kind_from_string(const std::string& s) {
  if (s == "data") return FlowKind::DataFlow;
  if (s == "control") return FlowKind::ControlFlow;
  if (s == "resource") return FlowKind::ResourceFlow;
  throw std::invalid_argument("unknown flow kind: " + s);
}

std::string to_string(Layer layer) {
  switch (layer) {
    case Layer::Perception: return "perception";
    case Layer::Middleware: return "middleware";
    case Layer::Application: return "application";
  }
  throw std::logic_error("unknown Layer");
}

Layer layer_from_string(const std::string& s) {
  if (s == "perception") return Layer::Perception;
  if (s == "middleware") return Layer::Middleware;
  if (s == "application") return Layer::Application;
  throw std::invalid_argument("unknown layer: " + s);
}

void EventLog::normalize() {
  std::stable_sort(events.begin(), events.end(), [](const ProbeEvent& a, const ProbeEvent& b) {
    return std::tie(a.timestamp_ms, a.event_id) < std::tie(b.timestamp_ms, b.event_id);
  });
}

namespace {

const json& require_field(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return *it;
}

std::string require_identifier(const json& record, const char* key) {
  const json& v = require_field(record, key);
  if (!v.is_string() || v.get<std::string>().empty())
    throw std::invalid_argument(std::string("field '") + key + "' must be a non-empty string");
  return v.get<std::string>();
}

UsageContext context_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("field 'context' must be an object");
  UsageContext ctx;
  ctx.device_variant = require_identifier(j, "device");
  ctx.os = require_identifier(j, "os");
  ctx.location = require_identifier(j, "location");
  if (auto it = j.find("prefs"); it != j.end()) {
    if (!it->is_array()) throw std::invalid_argument("field 'prefs' must be an array");
    for (const auto& p : *it) {
      if (!p.is_string() || p.get<std::string>().empty())
        throw std::invalid_argument("preference tags must be non-empty strings");
      ctx.preference_tags.insert(p.get<std::string>());
    }
  }
  return ctx;
}

json context_to_json(const UsageContext& ctx) {
  json prefs = json::array();
  for (const auto& p : ctx.preference_tags) prefs.push_back(p);
  return json{{"device", ctx.device_variant},
              {"os", ctx.os},
              {"location", ctx.location},
              {"prefs", std::move(prefs)}};
}

ProbeEvent event_from_json(const json& record) {
  if (!record.is_object()) throw std::invalid_argument("record must be a JSON object");
  ProbeEvent ev;
  const json& ts = require_field(record, "ts");
  if (!ts.is_number_integer() || ts.get<std::int64_t>() < 0)
    throw std::invalid_argument("field 'ts' must be a non-negative integer");
  ev.timestamp_ms = ts.get<std::int64_t>();
  ev.service_id = require_identifier(record, "service");
  ev.feature_id = require_identifier(record, "feature");
  ev.flow = flow_kind_from_string(require_identifier(record, "flow"));
  ev.event_id = require_identifier(record, "event_id");
  ev.context = context_from_json(require_field(record, "context"));
  const json& payload = require_field(record, "payload");
  if (!payload.is_string()) throw std::invalid_argument("field 'payload' must be a string");
  ev.payload = payload.get<std::string>();

  const bool has_resource = record.contains("resource");
  if (ev.flow == FlowKind::ResourceFlow) {
    if (!has_resource)
      throw std::invalid_argument("resource-flow record requires field 'resource'");
    const json& r = record.at("resource");
    if (!r.is_object()) throw std::invalid_argument("field 'resource' must be an object");
    ResourceSample sample;
    const json& cpu = require_field(r, "cpu");
    if (!cpu.is_number()) throw std::invalid_argument("field 'cpu' must be a number");
    sample.cpu_fraction = cpu.get<double>();
    if (sample.cpu_fraction < 0.0 || sample.cpu_fraction > 1.0)
      throw std::invalid_argument("field 'cpu' must lie in [0, 1]");
    const json& mem = require_field(r, "mem");
    const json& net = require_field(r, "net");
    if (!mem.is_number_unsigned() && !(mem.is_number_integer() && mem.get<std::int64_t>() >= 0))
      throw std::invalid_argument("field 'mem' must be a non-negative integer");
    if (!net.is_number_unsigned() && !(net.is_number_integer() && net.get<std::int64_t>() >= 0))
      throw std::invalid_argument("field 'net' must be a non-negative integer");
    sample.memory_bytes = mem.get<std::uint64_t>();
    sample.network_bytes = net.get<std::uint64_t>();
    ev.resource = sample;
  } else if (has_resource) {
    throw std::invalid_argument("field 'resource' is only valid on resource-flow records");
  }
  return ev;
}

json event_to_json(const ProbeEvent& ev) {
  json record{{"ts", ev.timestamp_ms},
              {"service", ev.service_id},
              {"feature", ev.feature_id},
              {"flow", to_string(ev.flow)},
              {"event_id", ev.event_id},
              {"context", context_to_json(ev.context)},
              {"payload", ev.payload}};
  if (ev.resource) {
    record["resource"] = json{{"cpu", ev.resource->cpu_fraction},
                              {"mem", ev.resource->memory_bytes},
                              {"net", ev.resource->network_bytes}};
  }
  return record;
}

}  // namespace

EventLog parse_event_log(std::string_view text) {
  EventLog log;
  std::map<std::string, std::size_t> seen_ids;  // event_id -> first line
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line =
        nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    json record = json::parse(line, nullptr, false);
    if (record.is_discarded()) throw ParseError(line_no, "invalid JSON");
    ProbeEvent ev;
    try {
      ev = event_from_json(record);
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
    auto [it, inserted] = seen_ids.emplace(ev.event_id, line_no);
    if (!inserted) throw ParseError(line_no, "duplicate event_id: " + ev.event_id);
    log.events.push_back(std::move(ev));
  }
  log.normalize();
  return log;
}

std::string serialize_event_log(const EventLog& log) {
  std::string out;
  for (const auto& ev : log.events) {
    out += event_to_json(ev).dump();
    out += '\n';
  }
  return out;
}

std::string make_control_payload(const std::string& from, const std::string& to) {
  return json{{"from", from}, {"to", to}}.dump();
}

std::optional<std::pair<std::string, std::string>> parse_control_payload(
    const std::string& payload) {
  json j = json::parse(payload, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto from = j.find("from");
  auto to = j.find("to");
  if (from == j.end() || to == j.end() || !from->is_string() || !to->is_string())
    return std::nullopt;
  return std::make_pair(from->get<std::string>(), to->get<std::string>());
}

}  // namespace mitest::core
