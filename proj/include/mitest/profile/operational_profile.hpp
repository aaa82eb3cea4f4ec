// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mitest/core/interface_spec.hpp"
#include "mitest/core/types.hpp"

namespace mitest::profile {

struct ProfileConfig {
  // Sliding-window width in logical milliseconds; events older than
  // last_update - window_ms are evicted. 0 means unbounded (no eviction).
  std::int64_t window_ms = 0;
  // Laplace pseudo-count consumed by usage-model probability estimation only;
  // frequencies reported by this class stay unsmoothed.
  double smoothing_alpha = 1.0;

  bool operator==(const ProfileConfig&) const = default;
};

// A control-flow observation retained inside the sliding window.
struct RetainedEvent {
  std::int64_t timestamp_ms = 0;
  std::string service_id;
  std::string event_id;
  core::UsageContext context;
  std::string feature_id;  // the stimulus that fired
  // Present when the control payload parsed as a (from, to) state pair.
  std::optional<std::pair<std::string, std::string>> arc;

  bool operator==(const RetainedEvent&) const = default;
};

// Context-conditional usage frequencies over a sliding window of control-flow
// events. Value-semantic: updated() returns a new profile, inputs unchanged.
class OperationalProfile {
 public:
  OperationalProfile() = default;
  explicit OperationalProfile(ProfileConfig config, std::set<std::string> declared_features = {});

  const ProfileConfig& config() const { return config_; }
  const std::set<std::string>& declared_features() const { return declared_features_; }
  std::int64_t last_update_ms() const { return last_update_ms_; }
  const std::vector<RetainedEvent>& retained() const { return retained_; }

  // Ingests a batch observed up to now_ms, evicting retained events that fall
  // out of the window. Only control-flow events are counted; duplicates
  // (same service_id + event_id) are ignored.
  OperationalProfile updated(const core::EventLog& batch, std::int64_t now_ms) const;

  // Relative frequency of feature among service's retained events under
  // context; nullopt context aggregates over all contexts (Global). Returns 0
  // when the denominator is empty. Unknown features (neither declared nor
  // observed for the service) are an error.
  double conditional_frequency(const std::string& service_id, const std::string& feature_id,
                               const std::optional<core::UsageContext>& context) const;

  // Retained count of (from --stimulus--> to) for service; nullopt context
  // aggregates over all contexts.
  std::int64_t transition_count(const std::string& service_id, const std::string& from,
                                const std::string& stimulus, const std::string& to,
                                const std::optional<core::UsageContext>& context) const;

  // True if the feature was declared up front or has been observed in-window.
  bool knows_feature(const std::string& service_id, const std::string& feature_id) const;

  // Services with at least one retained event or declared feature.
  std::set<std::string> services() const;

  bool operator==(const OperationalProfile&) const = default;

 private:
  ProfileConfig config_;
  std::set<std::string> declared_features_;  // keys "service/feature"
  std::int64_t last_update_ms_ = 0;
  std::vector<RetainedEvent> retained_;  // sorted by (timestamp, event_id)
};

// Declared-feature keys ("service/stimulus") harvested from interface specs.
std::set<std::string> declared_features_from_specs(const std::vector<core::InterfaceSpec>& specs);

// Builds a profile from a single batch; now is the batch's max timestamp
// (or 0 for an empty log).
OperationalProfile build_profile(const core::EventLog& log,
                                 const std::vector<core::InterfaceSpec>& specs,
                                 ProfileConfig config);

nlohmann::json profile_to_json(const OperationalProfile& profile);
OperationalProfile profile_from_json(const nlohmann::json& j);

}  // namespace mitest::profile
