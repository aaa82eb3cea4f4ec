// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "mitest/core/event_log.hpp"
#include "mitest/mcum/mcum.hpp"
#include "mitest/predict/fault_predictor.hpp"
#include "mitest/profile/operational_profile.hpp"
#include "support/generators.hpp"

using namespace mitest;

namespace {

// Two-branch model: Enter -> X or Y -> Exit; incoming stimuli sx / sy.
core::InterfaceSpec xy_spec() {
  core::InterfaceSpec spec;
  spec.service_id = "svc";
  spec.states = {"Enter", "X", "Y", "Exit"};
  spec.stimuli = {"sx", "sy", "outx", "outy"};
  spec.transitions = {{"Enter", "sx", "X", {}},
                      {"Enter", "sy", "Y", {}},
                      {"X", "outx", "Exit", {}},
                      {"Y", "outy", "Exit", {}}};
  return spec;
}

profile::OperationalProfile profile_counts(const core::InterfaceSpec& spec, int sx, int sy) {
  core::EventLog log;
  int id = 0;
  auto add = [&](const std::string& stim, const std::string& from, const std::string& to,
                 int count) {
    for (int i = 0; i < count; ++i) {
      core::ProbeEvent e;
      e.timestamp_ms = id;
      e.service_id = spec.service_id;
      e.feature_id = stim;
      e.flow = core::FlowKind::ControlFlow;
      e.event_id = "e" + std::to_string(id++);
      e.context = {"d", "o", "l", {}};
      e.payload = core::make_control_payload(from, to);
      log.events.push_back(e);
    }
  };
  add("sx", "Enter", "X", sx);
  add("sy", "Enter", "Y", sy);
  return profile::build_profile(log, {spec}, {});
}

mcum::WalkSequence walk_through(const std::vector<std::string>& states,
                                const std::vector<std::string>& stimuli) {
  mcum::WalkSequence walk;
  walk.states = states;
  walk.stimuli = stimuli;
  walk.probability = 1.0;
  return walk;
}

predict::TestOutcome outcome(const mcum::WalkSequence& walk, predict::Verdict verdict) {
  return {walk, verdict};
}

}  // namespace

TEST_SUITE("predict") {

TEST_CASE("all pass: F vanishes, ranking follows usage alone") {
  const auto spec = xy_spec();
  const auto m = mcum::assign_probabilities(mcum::build_structure(spec), mcum::Uniform{});
  const auto p = profile_counts(spec, 3, 1);  // X used more than Y
  std::vector<predict::TestOutcome> outcomes{
      outcome(walk_through({"Enter", "X", "Exit"}, {"sx", "outx"}), predict::Verdict::Pass),
      outcome(walk_through({"Enter", "Y", "Exit"}, {"sy", "outy"}), predict::Verdict::Pass)};
  const auto report = predict::predict_suspicion(m, p, outcomes, 0.8);
  CHECK(report.scores.at("X") == doctest::Approx(0.2 * 1.0));
  CHECK(report.scores.at("Y") == doctest::Approx(0.2 * (1.0 / 3)));
  CHECK(report.ranked.front() == "X");
}

TEST_CASE("lambda=1: isolated failure pins the score on the visited state") {
  const auto spec = xy_spec();
  const auto m = mcum::assign_probabilities(mcum::build_structure(spec), mcum::Uniform{});
  const auto p = profile_counts(spec, 1, 1);
  std::vector<predict::TestOutcome> outcomes{
      outcome(walk_through({"Enter", "X", "Exit"}, {"sx", "outx"}), predict::Verdict::Fail),
      outcome(walk_through({"Enter", "Y", "Exit"}, {"sy", "outy"}), predict::Verdict::Pass)};
  const auto report = predict::predict_suspicion(m, p, outcomes, 1.0);
  CHECK(report.scores.at("X") == doctest::Approx(1.0));
  CHECK(report.scores.at("Y") == doctest::Approx(0.0));
}

TEST_CASE("lambda=0.5 with F=1 and U=0.5 scores 0.75") {
  const auto spec = xy_spec();
  const auto m = mcum::assign_probabilities(mcum::build_structure(spec), mcum::Uniform{});
  const auto p = profile_counts(spec, 1, 2);  // U(X) = 0.5 after max-normalization
  std::vector<predict::TestOutcome> outcomes{
      outcome(walk_through({"Enter", "X", "Exit"}, {"sx", "outx"}), predict::Verdict::Fail),
      outcome(walk_through({"Enter", "Y", "Exit"}, {"sy", "outy"}), predict::Verdict::Pass)};
  const auto report = predict::predict_suspicion(m, p, outcomes, 0.5);
  CHECK(report.scores.at("X") == doctest::Approx(0.75));
}

TEST_CASE("scores stay within [0,1] under fuzz") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    const auto spec = testgen::random_interface_spec(rng, {10, 6, 0.0, 0.0}, "svc");
    const auto m = mcum::assign_probabilities(mcum::build_structure(spec), mcum::Uniform{});
    const auto batch = testgen::random_control_batch(rng, {spec}, 40, 0, 400,
                                                     "pz" + std::to_string(trial));
    const auto p = profile::build_profile(batch, {spec}, {});
    const auto walks = mcum::generate_tests(m, 30, 100 + trial);
    std::vector<predict::TestOutcome> outcomes;
    for (const auto& walk : walks)
      outcomes.push_back(outcome(walk, testgen::pick(rng, 4) == 0 ? predict::Verdict::Fail
                                                                  : predict::Verdict::Pass));
    const double lambda = core::unit_draw(rng);
    const auto report = predict::predict_suspicion(m, p, outcomes, lambda);
    for (const auto& [state, score] : report.scores) {
      CHECK(score >= 0.0);
      CHECK(score <= 1.0);
    }
  }
}

TEST_CASE("lambda=0 ignores outcomes; lambda=1 ignores the profile") {
  const auto spec = xy_spec();
  const auto m = mcum::assign_probabilities(mcum::build_structure(spec), mcum::Uniform{});
  const auto p1 = profile_counts(spec, 3, 1);
  const auto p2 = profile_counts(spec, 1, 3);  // perturbed usage
  std::vector<predict::TestOutcome> set_a{
      outcome(walk_through({"Enter", "X", "Exit"}, {"sx", "outx"}), predict::Verdict::Fail),
      outcome(walk_through({"Enter", "Y", "Exit"}, {"sy", "outy"}), predict::Verdict::Pass)};
  std::vector<predict::TestOutcome> set_b{
      outcome(walk_through({"Enter", "X", "Exit"}, {"sx", "outx"}), predict::Verdict::Pass),
      outcome(walk_through({"Enter", "Y", "Exit"}, {"sy", "outy"}), predict::Verdict::Fail)};

  const auto zero_a = predict::predict_suspicion(m, p1, set_a, 0.0);
  const auto zero_b = predict::predict_suspicion(m, p1, set_b, 0.0);
  CHECK(zero_a.ranked == zero_b.ranked);
  CHECK(zero_a.scores == zero_b.scores);

  const auto one_a = predict::predict_suspicion(m, p1, set_a, 1.0);
  const auto one_b = predict::predict_suspicion(m, p2, set_a, 1.0);
  CHECK(one_a.ranked == one_b.ranked);
  CHECK(one_a.scores == one_b.scores);
}

TEST_CASE("an extra failing walk never decreases F") {
  const auto spec = xy_spec();
  const auto m = mcum::assign_probabilities(mcum::build_structure(spec), mcum::Uniform{});
  const auto p = profile_counts(spec, 1, 1);
  std::vector<predict::TestOutcome> outcomes{
      outcome(walk_through({"Enter", "X", "Exit"}, {"sx", "outx"}), predict::Verdict::Fail),
      outcome(walk_through({"Enter", "X", "Exit"}, {"sx", "outx"}), predict::Verdict::Pass),
      outcome(walk_through({"Enter", "Y", "Exit"}, {"sy", "outy"}), predict::Verdict::Pass)};
  const auto before = predict::predict_suspicion(m, p, outcomes, 1.0);
  outcomes.push_back(
      outcome(walk_through({"Enter", "X", "Exit"}, {"sx", "outx"}), predict::Verdict::Fail));
  const auto after = predict::predict_suspicion(m, p, outcomes, 1.0);
  CHECK(after.scores.at("X") >= before.scores.at("X"));
}

TEST_CASE("selection: top-k, threshold, and boundary ties") {
  predict::SuspicionReport report;
  report.scores = {{"X", 0.9}, {"Y", 0.5}, {"Z", 0.1}};
  report.ranked = {"X", "Y", "Z"};
  CHECK(predict::select_for_rv(report, predict::TopK{2}) ==
        std::set<std::string>{"X", "Y"});
  CHECK(predict::select_for_rv(report, predict::Threshold{0.95}).empty());
  CHECK(predict::select_for_rv(report, predict::Threshold{0.5}) ==
        std::set<std::string>{"X", "Y"});

  predict::SuspicionReport tied;
  tied.scores = {{"X", 0.9}, {"Y", 0.9}, {"Z", 0.1}};
  tied.ranked = {"X", "Y", "Z"};
  CHECK(predict::select_for_rv(tied, predict::TopK{1}) == std::set<std::string>{"X", "Y"});
}

TEST_CASE("service suspicion is the max state score") {
  predict::SuspicionReport report;
  report.scores = {{"X", 0.3}, {"Y", 0.8}, {"Z", 0.1}};
  report.ranked = {"Y", "X", "Z"};
  CHECK(predict::service_suspicion(report) == doctest::Approx(0.8));
}

TEST_CASE("error contracts: empty outcomes, lambda out of range") {
  const auto spec = xy_spec();
  const auto m = mcum::assign_probabilities(mcum::build_structure(spec), mcum::Uniform{});
  const auto p = profile_counts(spec, 1, 1);
  CHECK_THROWS_AS(predict::predict_suspicion(m, p, {}, 0.5), std::exception);
  std::vector<predict::TestOutcome> outcomes{
      outcome(walk_through({"Enter", "X", "Exit"}, {"sx", "outx"}), predict::Verdict::Pass)};
  CHECK_THROWS_AS(predict::predict_suspicion(m, p, outcomes, -0.1), std::exception);
  CHECK_THROWS_AS(predict::predict_suspicion(m, p, outcomes, 1.1), std::exception);
}

}  // TEST_SUITE
