// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mitest/core/types.hpp"
#include "mitest/profile/operational_profile.hpp"

namespace mitest::prio {

struct TestCaseEntry {
  std::string test_id;
  std::string service_id;  // the service whose features the test exercises
  std::set<std::string> covered_features;
};

struct TestSuite {
  std::vector<TestCaseEntry> tests;
};

// (test_id, fault_id) -> detects.
struct FaultMatrix {
  std::map<std::pair<std::string, std::string>, bool> detects;

  std::set<std::string> fault_ids() const;
  bool detected_by(const std::string& test_id, const std::string& fault_id) const;
};

// Orders tests by descending summed covered-feature frequency under the
// given context (nullopt = Global); ties break by ascending test_id.
// Throws when a covered feature is unknown to the profile.
std::vector<std::string> prioritize(const TestSuite& suite,
                                    const profile::OperationalProfile& profile,
                                    const std::optional<core::UsageContext>& context);

// Same ordering rule with explicit per-service feature weights (e.g. the
// long-run stimulus flow of a usage model) instead of profile frequencies.
std::vector<std::string> prioritize_by_weights(
    const TestSuite& suite,
    const std::map<std::string, std::map<std::string, double>>& weights_by_service);

// Average Percentage of Faults Detected for the given order:
// 1 - sum(TF_i) / (n*m) + 1/(2n). Throws when a fault is detected by no test.
double apfd(const std::vector<std::string>& order, const FaultMatrix& faults);

TestSuite suite_from_json(const nlohmann::json& j);
nlohmann::json suite_to_json(const TestSuite& suite);
FaultMatrix fault_matrix_from_json(const nlohmann::json& j);

}  // namespace mitest::prio
