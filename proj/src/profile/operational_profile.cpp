// SPDX-License-Identifier: Apache-2.0
#include "mitest/profile/operational_profile.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "mitest/core/event_log.hpp"

namespace mitest::profile {

using nlohmann::json;

namespace {

std::string feature_key(const std::string& service_id, const std::string& feature_id) {
  return service_id + "/" + feature_id;
}

void validate_config(const ProfileConfig& config) {
  if (config.window_ms < 0) throw std::invalid_argument("window_ms must be non-negative");
  if (config.smoothing_alpha < 0.0)
    throw std::invalid_argument("smoothing_alpha must be non-negative");
}

bool retained_order(const RetainedEvent& a, const RetainedEvent& b) {
  return std::tie(a.timestamp_ms, a.event_id) < std::tie(b.timestamp_ms, b.event_id);
}

}  // namespace

OperationalProfile::OperationalProfile(ProfileConfig config, std::set<std::string> declared)
    : config_(config), declared_features_(std::move(declared)) {
  validate_config(config_);
}

OperationalProfile OperationalProfile::updated(const core::EventLog& batch,
                                               std::int64_t now_ms) const {
  if (now_ms < last_update_ms_)
    throw std::invalid_argument("profile updates must not move backwards in time");
  for (const auto& ev : batch.events) {
    if (ev.timestamp_ms > now_ms)
      throw std::invalid_argument("batch contains events newer than now");
  }

  OperationalProfile next = *this;
  next.last_update_ms_ = now_ms;
  const bool bounded = config_.window_ms > 0;
  const std::int64_t cutoff = bounded ? now_ms - config_.window_ms : 0;

  // Evict first so a batch straddling the boundary cannot resurrect old keys.
  if (bounded) {
    std::erase_if(next.retained_,
                  [cutoff](const RetainedEvent& ev) { return ev.timestamp_ms < cutoff; });
  }

  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& ev : next.retained_) seen.emplace(ev.service_id, ev.event_id);

  std::vector<const core::ProbeEvent*> ordered;
  ordered.reserve(batch.events.size());
  for (const auto& ev : batch.events) ordered.push_back(&ev);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const core::ProbeEvent* a, const core::ProbeEvent* b) {
                     return std::tie(a->timestamp_ms, a->event_id) <
                            std::tie(b->timestamp_ms, b->event_id);
                   });

  for (const core::ProbeEvent* ev : ordered) {
    if (ev->flow != core::FlowKind::ControlFlow) continue;
    if (bounded && ev->timestamp_ms < cutoff) continue;
    if (!seen.emplace(ev->service_id, ev->event_id).second) continue;
    RetainedEvent kept;
    kept.timestamp_ms = ev->timestamp_ms;
    kept.service_id = ev->service_id;
    kept.event_id = ev->event_id;
    kept.context = ev->context;
    kept.feature_id = ev->feature_id;
    kept.arc = core::parse_control_payload(ev->payload);
    next.retained_.push_back(std::move(kept));
  }
  std::sort(next.retained_.begin(), next.retained_.end(), retained_order);
  return next;
}

double OperationalProfile::conditional_frequency(
    const std::string& service_id, const std::string& feature_id,
    const std::optional<core::UsageContext>& context) const {
  if (!knows_feature(service_id, feature_id))
    throw std::invalid_argument("unknown feature: " + feature_key(service_id, feature_id));
  std::int64_t total = 0;
  std::int64_t hits = 0;
  for (const auto& ev : retained_) {
    if (ev.service_id != service_id) continue;
    if (context && !(ev.context == *context)) continue;
    ++total;
    if (ev.feature_id == feature_id) ++hits;
  }
  if (total == 0) return 0.0;
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::int64_t OperationalProfile::transition_count(
    const std::string& service_id, const std::string& from, const std::string& stimulus,
    const std::string& to, const std::optional<core::UsageContext>& context) const {
  std::int64_t count = 0;
  for (const auto& ev : retained_) {
    if (ev.service_id != service_id || !ev.arc) continue;
    if (context && !(ev.context == *context)) continue;
    if (ev.feature_id == stimulus && ev.arc->first == from && ev.arc->second == to) ++count;
  }
  return count;
}

bool OperationalProfile::knows_feature(const std::string& service_id,
                                       const std::string& feature_id) const {
  if (declared_features_.count(feature_key(service_id, feature_id)) > 0) return true;
  for (const auto& ev : retained_) {
    if (ev.service_id == service_id && ev.feature_id == feature_id) return true;
  }
  return false;
}

std::set<std::string> OperationalProfile::services() const {
  std::set<std::string> out;
  for (const auto& ev : retained_) out.insert(ev.service_id);
  for (const auto& key : declared_features_) {
    auto slash = key.find('/');
    if (slash != std::string::npos) out.insert(key.substr(0, slash));
  }
  return out;
}

std::set<std::string> declared_features_from_specs(
    const std::vector<core::InterfaceSpec>& specs) {
  std::set<std::string> declared;
  for (const auto& spec : specs) {
    for (const auto& stimulus : spec.stimuli) declared.insert(feature_key(spec.service_id, stimulus));
  }
  return declared;
}

OperationalProfile build_profile(const core::EventLog& log,
                                 const std::vector<core::InterfaceSpec>& specs,
                                 ProfileConfig config) {
  OperationalProfile profile(config, declared_features_from_specs(specs));
  std::int64_t now = 0;
  for (const auto& ev : log.events) now = std::max(now, ev.timestamp_ms);
  return profile.updated(log, now);
}

namespace {

json context_to_json(const core::UsageContext& ctx) {
  json prefs = json::array();
  for (const auto& p : ctx.preference_tags) prefs.push_back(p);
  return json{{"device", ctx.device_variant},
              {"os", ctx.os},
              {"location", ctx.location},
              {"prefs", std::move(prefs)}};
}

core::UsageContext context_from_json(const json& j) {
  core::UsageContext ctx;
  ctx.device_variant = j.at("device").get<std::string>();
  ctx.os = j.at("os").get<std::string>();
  ctx.location = j.at("location").get<std::string>();
  for (const auto& p : j.at("prefs")) ctx.preference_tags.insert(p.get<std::string>());
  return ctx;
}

std::string context_label(const core::UsageContext& ctx) {
  std::string label = ctx.device_variant + "|" + ctx.os + "|" + ctx.location;
  for (const auto& p : ctx.preference_tags) label += "|" + p;
  return label;
}

}  // namespace

nlohmann::json profile_to_json(const OperationalProfile& profile) {
  json retained = json::array();
  for (const auto& ev : profile.retained()) {
    json record{{"ts", ev.timestamp_ms},
                {"service", ev.service_id},
                {"event_id", ev.event_id},
                {"context", context_to_json(ev.context)},
                {"feature", ev.feature_id}};
    if (ev.arc) record["arc"] = json{{"from", ev.arc->first}, {"to", ev.arc->second}};
    retained.push_back(std::move(record));
  }
  json declared = json::array();
  for (const auto& key : profile.declared_features()) declared.push_back(key);

  // Derived tables are a convenience for downstream readers; the retained
  // ring is the source of truth on reload.
  std::map<std::string, std::map<std::string, std::map<std::string, std::int64_t>>> by_context;
  std::map<std::string, std::map<std::string, std::int64_t>> global;
  for (const auto& ev : profile.retained()) {
    ++by_context[ev.service_id][context_label(ev.context)][ev.feature_id];
    ++global[ev.service_id][ev.feature_id];
  }
  auto table_to_json = [](const std::map<std::string, std::int64_t>& counts) {
    std::int64_t total = 0;
    for (const auto& [_, c] : counts) total += c;
    json out = json::object();
    for (const auto& [feature, c] : counts)
      out[feature] = static_cast<double>(c) / static_cast<double>(total);
    return out;
  };
  json frequencies = json::object();
  for (const auto& [service, contexts] : by_context) {
    json per_service = json::object();
    per_service["global"] = table_to_json(global.at(service));
    json per_context = json::object();
    for (const auto& [label, counts] : contexts) per_context[label] = table_to_json(counts);
    per_service["by_context"] = std::move(per_context);
    frequencies[service] = std::move(per_service);
  }

  return json{{"config",
               json{{"window_ms", profile.config().window_ms},
                    {"smoothing_alpha", profile.config().smoothing_alpha}}},
              {"declared_features", std::move(declared)},
              {"last_update_ms", profile.last_update_ms()},
              {"retained", std::move(retained)},
              {"frequencies", std::move(frequencies)}};
}

OperationalProfile profile_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("profile JSON must be an object");
  ProfileConfig config;
  config.window_ms = j.at("config").at("window_ms").get<std::int64_t>();
  config.smoothing_alpha = j.at("config").at("smoothing_alpha").get<double>();
  std::set<std::string> declared;
  for (const auto& key : j.at("declared_features")) declared.insert(key.get<std::string>());

  // Rebuild through updated() so ordering and dedup invariants are re-established.
  core::EventLog log;
  for (const auto& record : j.at("retained")) {
    core::ProbeEvent ev;
    ev.timestamp_ms = record.at("ts").get<std::int64_t>();
    ev.service_id = record.at("service").get<std::string>();
    ev.event_id = record.at("event_id").get<std::string>();
    ev.context = context_from_json(record.at("context"));
    ev.feature_id = record.at("feature").get<std::string>();
    ev.flow = core::FlowKind::ControlFlow;
    if (record.contains("arc")) {
      ev.payload = core::make_control_payload(record.at("arc").at("from").get<std::string>(),
                                              record.at("arc").at("to").get<std::string>());
    } else {
      ev.payload = "";
    }
    log.events.push_back(std::move(ev));
  }
  OperationalProfile profile(config, std::move(declared));
  return profile.updated(log, j.at("last_update_ms").get<std::int64_t>());
}

}  // namespace mitest::profile
