// SPDX-License-Identifier: Apache-2.0
#include "mitest/prio/prioritizer.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

namespace mitest::prio {

using nlohmann::json;

std::set<std::string> FaultMatrix::fault_ids() const {
  std::set<std::string> out;
  for (const auto& [key, _] : detects) out.insert(key.second);
  return out;
}

bool FaultMatrix::detected_by(const std::string& test_id, const std::string& fault_id) const {
  auto it = detects.find({test_id, fault_id});
  return it != detects.end() && it->second;
}

std::vector<std::string> prioritize(const TestSuite& suite,
                                    const profile::OperationalProfile& profile,
                                    const std::optional<core::UsageContext>& context) {
  std::set<std::string> ids;
  for (const auto& test : suite.tests) {
    if (!ids.insert(test.test_id).second)
      throw std::invalid_argument("duplicate test id: " + test.test_id);
    if (test.covered_features.empty())
      throw std::invalid_argument("test covers no features: " + test.test_id);
  }

  std::vector<std::pair<double, std::string>> scored;
  scored.reserve(suite.tests.size());
  for (const auto& test : suite.tests) {
    double score = 0.0;
    for (const auto& feature : test.covered_features) {
      if (!profile.knows_feature(test.service_id, feature))
        throw std::invalid_argument("test " + test.test_id + " covers unknown feature " +
                                    feature);
      score += profile.conditional_frequency(test.service_id, feature, context);
    }
    scored.emplace_back(score, test.test_id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> order;
  order.reserve(scored.size());
  for (auto& [_, id] : scored) order.push_back(std::move(id));
  return order;
}

std::vector<std::string> prioritize_by_weights(
    const TestSuite& suite,
    const std::map<std::string, std::map<std::string, double>>& weights_by_service) {
  std::vector<std::pair<double, std::string>> scored;
  scored.reserve(suite.tests.size());
  for (const auto& test : suite.tests) {
    auto service_it = weights_by_service.find(test.service_id);
    if (service_it == weights_by_service.end())
      throw std::invalid_argument("no weights for service " + test.service_id);
    double score = 0.0;
    for (const auto& feature : test.covered_features) {
      auto it = service_it->second.find(feature);
      if (it == service_it->second.end())
        throw std::invalid_argument("test " + test.test_id + " covers unknown feature " +
                                    feature);
      score += it->second;
    }
    scored.emplace_back(score, test.test_id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> order;
  order.reserve(scored.size());
  for (auto& [_, id] : scored) order.push_back(std::move(id));
  return order;
}

double apfd(const std::vector<std::string>& order, const FaultMatrix& faults) {
  if (order.empty()) throw std::invalid_argument("order must be non-empty");
  std::set<std::string> seen;
  for (const auto& id : order) {
    if (!seen.insert(id).second) throw std::invalid_argument("duplicate test in order: " + id);
  }

  const auto n = static_cast<double>(order.size());
  const auto fault_ids = faults.fault_ids();
  if (fault_ids.empty()) throw std::invalid_argument("fault matrix names no faults");
  const auto m = static_cast<double>(fault_ids.size());

  double tf_sum = 0.0;
  for (const auto& fault : fault_ids) {
    std::size_t first = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (faults.detected_by(order[i], fault)) {
        first = i + 1;  // 1-based position
        break;
      }
    }
    if (first == 0) throw std::invalid_argument("fault detected by no test: " + fault);
    tf_sum += static_cast<double>(first);
  }
  return 1.0 - tf_sum / (n * m) + 1.0 / (2.0 * n);
}

TestSuite suite_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("tests") || !j.at("tests").is_array())
    throw std::invalid_argument("suite JSON must be an object with a 'tests' array");
  TestSuite suite;
  for (const auto& t : j.at("tests")) {
    TestCaseEntry entry;
    entry.test_id = t.at("test_id").get<std::string>();
    entry.service_id = t.at("service").get<std::string>();
    for (const auto& f : t.at("features")) entry.covered_features.insert(f.get<std::string>());
    if (entry.covered_features.empty())
      throw std::invalid_argument("test covers no features: " + entry.test_id);
    suite.tests.push_back(std::move(entry));
  }
  return suite;
}

nlohmann::json suite_to_json(const TestSuite& suite) {
  json tests = json::array();
  for (const auto& t : suite.tests) {
    json features = json::array();
    for (const auto& f : t.covered_features) features.push_back(f);
    tests.push_back(json{{"test_id", t.test_id},
                         {"service", t.service_id},
                         {"features", std::move(features)}});
  }
  return json{{"tests", std::move(tests)}};
}

FaultMatrix fault_matrix_from_json(const nlohmann::json& j) {
  // {"faults": [{"fault_id": ..., "detected_by": [test ids]}]}
  if (!j.is_object() || !j.contains("faults") || !j.at("faults").is_array())
    throw std::invalid_argument("fault matrix JSON must be an object with a 'faults' array");
  FaultMatrix matrix;
  for (const auto& f : j.at("faults")) {
    const std::string fault_id = f.at("fault_id").get<std::string>();
    for (const auto& t : f.at("detected_by"))
      matrix.detects[{t.get<std::string>(), fault_id}] = true;
  }
  return matrix;
}

}  // namespace mitest::prio
