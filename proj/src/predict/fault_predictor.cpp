// SPDX-License-Identifier: Apache-2.0
#include "mitest/predict/fault_predictor.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

namespace mitest::predict {

using nlohmann::json;

SuspicionReport predict_suspicion(const mcum::Mcum& m,
                                  const profile::OperationalProfile& profile,
                                  const std::vector<TestOutcome>& outcomes, double lambda) {
  if (outcomes.empty()) throw std::invalid_argument("at least one outcome is required");
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("lambda must lie in [0, 1]");

  // Interior states only: Enter/Exit are structural, not suspects.
  std::vector<std::string> interior(m.states.begin() + 1, m.states.end() - 1);

  std::map<std::string, std::int64_t> pass_visits, fail_visits;
  for (const auto& outcome : outcomes) {
    std::set<std::string> visited(outcome.walk.states.begin(), outcome.walk.states.end());
    for (const auto& state : visited) {
      if (outcome.verdict == Verdict::Fail)
        ++fail_visits[state];
      else
        ++pass_visits[state];
    }
  }

  // U(s): summed Global usage frequency of s's incoming stimuli, then
  // max-normalized across states so U shares F's [0, 1] scale.
  std::map<std::string, double> usage;
  double max_usage = 0.0;
  for (const auto& state : interior) {
    double u = 0.0;
    const int idx = m.state_index(state);
    for (const auto& arc : m.arcs) {
      if (arc.to != idx) continue;
      if (!profile.knows_feature(m.service_id, arc.stimulus)) continue;
      u += profile.conditional_frequency(m.service_id, arc.stimulus, std::nullopt);
    }
    usage[state] = u;
    max_usage = std::max(max_usage, u);
  }

  SuspicionReport report;
  report.lambda = lambda;
  for (const auto& state : interior) {
    const auto fail = static_cast<double>(fail_visits.count(state) ? fail_visits[state] : 0);
    const auto pass = static_cast<double>(pass_visits.count(state) ? pass_visits[state] : 0);
    const double f = (fail + pass) > 0.0 ? fail / (fail + pass) : 0.0;
    const double u = max_usage > 0.0 ? usage[state] / max_usage : 0.0;
    report.scores[state] = lambda * f + (1.0 - lambda) * u;
  }

  report.ranked.assign(interior.begin(), interior.end());
  std::sort(report.ranked.begin(), report.ranked.end(),
            [&report](const std::string& a, const std::string& b) {
              const double sa = report.scores.at(a);
              const double sb = report.scores.at(b);
              if (sa != sb) return sa > sb;
              return a < b;
            });
  return report;
}

std::set<std::string> select_for_rv(const SuspicionReport& report,
                                    const SelectionPolicy& policy) {
  std::set<std::string> selected;
  if (const auto* top_k = std::get_if<TopK>(&policy)) {
    if (top_k->k == 0 || report.ranked.empty()) return selected;
    const std::size_t k = std::min(top_k->k, report.ranked.size());
    for (std::size_t i = 0; i < k; ++i) selected.insert(report.ranked[i]);
    // Boundary ties: anything scoring equal to the k-th entry is included.
    const double boundary = report.scores.at(report.ranked[k - 1]);
    for (std::size_t i = k; i < report.ranked.size(); ++i) {
      if (report.scores.at(report.ranked[i]) == boundary)
        selected.insert(report.ranked[i]);
      else
        break;
    }
  } else {
    const auto& threshold = std::get<Threshold>(policy);
    for (const auto& [state, score] : report.scores) {
      if (score >= threshold.t) selected.insert(state);
    }
  }
  return selected;
}

double service_suspicion(const SuspicionReport& report) {
  double best = 0.0;
  for (const auto& [_, score] : report.scores) best = std::max(best, score);
  return best;
}

nlohmann::json suspicion_report_to_json(const SuspicionReport& report,
                                        const std::optional<std::set<std::string>>& selected) {
  json scores = json::object();
  for (const auto& [state, score] : report.scores) scores[state] = score;
  json ranked = json::array();
  for (const auto& state : report.ranked) ranked.push_back(state);
  json out{{"scores", std::move(scores)},
           {"lambda", report.lambda},
           {"ranked", std::move(ranked)}};
  if (selected) {
    json sel = json::array();
    for (const auto& state : *selected) sel.push_back(state);
    out["selected"] = std::move(sel);
  }
  return out;
}

}  // namespace mitest::predict
