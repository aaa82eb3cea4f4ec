// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mitest/core/event_log.hpp"
#include "mitest/mcum/mcum.hpp"
#include "mitest/profile/operational_profile.hpp"
#include "support/generators.hpp"

using namespace mitest;

namespace {

core::InterfaceSpec chain_spec() {
  core::InterfaceSpec spec;
  spec.service_id = "svc";
  spec.states = {"Enter", "A", "Exit"};
  spec.stimuli = {"s1", "s2"};
  spec.transitions = {{"Enter", "s1", "A", {}}, {"A", "s2", "Exit", {}}};
  return spec;
}

core::InterfaceSpec branch_spec() {
  core::InterfaceSpec spec;
  spec.service_id = "svc";
  spec.states = {"Enter", "A", "B", "Exit"};
  spec.stimuli = {"toA", "toB", "fromA", "fromB"};
  spec.transitions = {{"Enter", "toA", "A", {}},
                      {"Enter", "toB", "B", {}},
                      {"A", "fromA", "Exit", {}},
                      {"B", "fromB", "Exit", {}}};
  return spec;
}

double row_sum(const mcum::Mcum& m, int row) {
  double total = 0.0;
  for (int c = 0; c < m.P.cols(); ++c) total += m.P(row, c);
  return total;
}

// Test-local stationary oracle: damped power iteration on the recurrence-
// completed matrix, no linear algebra library involved. The 1/2-lazy chain
// shares the stationary vector and is aperiodic, so cyclic chains converge.
std::vector<double> power_iteration_oracle(const mcum::Mcum& m, double tol) {
  const auto n = static_cast<std::size_t>(m.states.size());
  std::vector<std::vector<double>> P(n, std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) P[r][c] = m.P(static_cast<int>(r), static_cast<int>(c));
  double exit_total = 0.0;
  const auto exit = static_cast<std::size_t>(m.exit_index());
  for (std::size_t c = 0; c < n; ++c) exit_total += P[exit][c];
  if (exit_total == 0.0) P[exit][0] = 1.0;

  std::vector<double> x(n, 1.0 / static_cast<double>(n));
  for (int iter = 0; iter < 2000000; ++iter) {
    std::vector<double> next(n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) next[c] += x[r] * P[r][c];
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = 0.5 * x[i] + 0.5 * next[i];
      norm += next[i];
    }
    for (double& v : next) v /= norm;
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) residual += std::abs(next[i] - x[i]);
    x = next;
    if (residual < tol) break;
  }
  return x;
}

}  // namespace

TEST_SUITE("mcum") {

TEST_CASE("build_structure: chain copy, Enter first, Exit last, unassigned") {
  const auto m = mcum::build_structure(chain_spec());
  REQUIRE(m.states.size() == 3);
  CHECK(m.states.front() == "Enter");
  CHECK(m.states.back() == "Exit");
  CHECK(m.arcs.size() == 2);
  CHECK_FALSE(m.assigned);
  CHECK(m.P.rows() == 3);
  CHECK(m.P.isZero(0.0));
}

TEST_CASE("build_structure: self-loop preserved") {
  auto spec = chain_spec();
  spec.stimuli.insert("again");
  spec.transitions.push_back({"A", "again", "A", {}});
  const auto m = mcum::build_structure(spec);
  bool found = false;
  for (const auto& arc : m.arcs)
    if (m.states[arc.from] == "A" && m.states[arc.to] == "A" && arc.stimulus == "again")
      found = true;
  CHECK(found);
}

TEST_CASE("build_structure: invalid spec rejected") {
  core::InterfaceSpec bad;
  bad.service_id = "svc";
  bad.states = {"Enter", "B", "Exit"};
  bad.stimuli = {"s1"};
  bad.transitions = {{"Enter", "s1", "Exit", {}}};  // B isolated
  CHECK_THROWS_AS(mcum::build_structure(bad), std::invalid_argument);
}

TEST_CASE("uniform: equal probability across outgoing arcs") {
  core::InterfaceSpec spec;
  spec.service_id = "svc";
  spec.states = {"Enter", "A", "B", "C", "Exit"};
  spec.stimuli = {"a", "b", "c", "xa", "xb", "xc"};
  spec.transitions = {{"Enter", "a", "A", {}},   {"Enter", "b", "B", {}},
                      {"Enter", "c", "C", {}},   {"A", "xa", "Exit", {}},
                      {"B", "xb", "Exit", {}},   {"C", "xc", "Exit", {}}};
  const auto m = mcum::assign_probabilities(mcum::build_structure(spec), mcum::Uniform{});
  REQUIRE(m.assigned);
  for (std::size_t i = 0; i < m.arcs.size(); ++i)
    if (m.states[m.arcs[i].from] == "Enter")
      CHECK(m.arc_probs[i] == doctest::Approx(1.0 / 3));
}

TEST_CASE("from-profile: Laplace arithmetic (3,1) with alpha=1 gives 2/3, 1/3") {
  core::InterfaceSpec spec;
  spec.service_id = "svc";
  spec.states = {"Enter", "A", "B", "C", "Exit"};
  spec.stimuli = {"in", "goB", "goC", "outB", "outC"};
  spec.transitions = {{"Enter", "in", "A", {}}, {"A", "goB", "B", {}},
                      {"A", "goC", "C", {}},    {"B", "outB", "Exit", {}},
                      {"C", "outC", "Exit", {}}};
  core::EventLog log;
  auto add = [&log](std::int64_t ts, const std::string& stim, const std::string& from,
                    const std::string& to, const std::string& id) {
    core::ProbeEvent e;
    e.timestamp_ms = ts;
    e.service_id = "svc";
    e.feature_id = stim;
    e.flow = core::FlowKind::ControlFlow;
    e.event_id = id;
    e.context = {"d", "o", "l", {}};
    e.payload = core::make_control_payload(from, to);
    log.events.push_back(e);
  };
  add(1, "goB", "A", "B", "e1");
  add(2, "goB", "A", "B", "e2");
  add(3, "goB", "A", "B", "e3");
  add(4, "goC", "A", "C", "e4");
  const auto profile = profile::build_profile(log, {spec}, {});
  const auto m = mcum::assign_probabilities(mcum::build_structure(spec),
                                            mcum::FromProfile{&profile, std::nullopt, 1.0});
  std::map<std::string, double> from_a;
  for (std::size_t i = 0; i < m.arcs.size(); ++i)
    if (m.states[m.arcs[i].from] == "A") from_a[m.arcs[i].stimulus] = m.arc_probs[i];
  CHECK(from_a.at("goB") == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(from_a.at("goC") == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("from-profile: alpha to zero converges to empirical frequencies") {
  core::InterfaceSpec spec;
  spec.service_id = "svc";
  spec.states = {"Enter", "A", "B", "C", "Exit"};
  spec.stimuli = {"in", "goB", "goC", "outB", "outC"};
  spec.transitions = {{"Enter", "in", "A", {}}, {"A", "goB", "B", {}},
                      {"A", "goC", "C", {}},    {"B", "outB", "Exit", {}},
                      {"C", "outC", "Exit", {}}};
  core::EventLog log;
  for (int i = 0; i < 4; ++i) {
    core::ProbeEvent e;
    e.timestamp_ms = i;
    e.service_id = "svc";
    e.feature_id = i < 3 ? "goB" : "goC";
    e.flow = core::FlowKind::ControlFlow;
    e.event_id = "e" + std::to_string(i);
    e.context = {"d", "o", "l", {}};
    e.payload = core::make_control_payload("A", i < 3 ? "B" : "C");
    log.events.push_back(e);
  }
  // The Enter row has observations too so alpha=0 stays well-defined there.
  core::ProbeEvent enter;
  enter.timestamp_ms = 5;
  enter.service_id = "svc";
  enter.feature_id = "in";
  enter.flow = core::FlowKind::ControlFlow;
  enter.event_id = "e-in";
  enter.context = {"d", "o", "l", {}};
  enter.payload = core::make_control_payload("Enter", "A");
  log.events.push_back(enter);
  core::ProbeEvent outb = enter;
  outb.timestamp_ms = 6;
  outb.feature_id = "outB";
  outb.event_id = "e-outb";
  outb.payload = core::make_control_payload("B", "Exit");
  log.events.push_back(outb);
  core::ProbeEvent outc = enter;
  outc.timestamp_ms = 7;
  outc.feature_id = "outC";
  outc.event_id = "e-outc";
  outc.payload = core::make_control_payload("C", "Exit");
  log.events.push_back(outc);

  const auto profile = profile::build_profile(log, {spec}, {});
  const auto m = mcum::assign_probabilities(mcum::build_structure(spec),
                                            mcum::FromProfile{&profile, std::nullopt, 1e-9});
  std::map<std::string, double> from_a;
  for (std::size_t i = 0; i < m.arcs.size(); ++i)
    if (m.states[m.arcs[i].from] == "A") from_a[m.arcs[i].stimulus] = m.arc_probs[i];
  CHECK(from_a.at("goB") == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(from_a.at("goC") == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("from-profile: zero observations with zero smoothing is an error") {
  const auto profile = profile::build_profile({}, {chain_spec()}, {});
  CHECK_THROWS_AS(mcum::assign_probabilities(mcum::build_structure(chain_spec()),
                                             mcum::FromProfile{&profile, std::nullopt, 0.0}),
                  std::exception);
}

TEST_CASE("direct: row summing 0.9 is an error naming the state") {
  mcum::Direct direct;
  direct.table[{"Enter", "s1", "A"}] = 1.0;
  direct.table[{"A", "s2", "Exit"}] = 0.9;
  try {
    mcum::assign_probabilities(mcum::build_structure(chain_spec()), direct);
    FAIL("expected error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("A") != std::string::npos);
  }
}

TEST_CASE("direct: table must cover the arc set exactly") {
  mcum::Direct missing;
  missing.table[{"Enter", "s1", "A"}] = 1.0;
  CHECK_THROWS_AS(mcum::assign_probabilities(mcum::build_structure(chain_spec()), missing),
                  std::exception);
  mcum::Direct extra;
  extra.table[{"Enter", "s1", "A"}] = 1.0;
  extra.table[{"A", "s2", "Exit"}] = 1.0;
  extra.table[{"A", "ghost", "Exit"}] = 1.0;
  CHECK_THROWS_AS(mcum::assign_probabilities(mcum::build_structure(chain_spec()), extra),
                  std::exception);
}

TEST_CASE("validate_mcum: clean chain, then tampered row sum") {
  auto m = mcum::assign_probabilities(mcum::build_structure(chain_spec()), mcum::Uniform{});
  CHECK(mcum::validate_mcum(m).ok());
  m.arc_probs[0] = 0.8;
  m.P(0, m.state_index("A")) = 0.8;
  const auto report = mcum::validate_mcum(m);
  REQUIRE_FALSE(report.ok());
  bool stochastic = false;
  for (const auto& entry : report.entries)
    if (entry.kind == mcum::McumValidationEntry::Kind::NonStochasticRow) stochastic = true;
  CHECK(stochastic);
}

TEST_CASE("validate_mcum: trap state flagged for absorption") {
  mcum::Mcum m;
  m.service_id = "svc";
  m.states = {"Enter", "Trap", "Exit"};
  m.arcs = {{0, "s1", 1}, {1, "loop", 1}};
  m.arc_probs = {1.0, 1.0};
  m.P = Eigen::MatrixXd::Zero(3, 3);
  m.P(0, 1) = 1.0;
  m.P(1, 1) = 1.0;
  m.assigned = true;
  const auto report = mcum::validate_mcum(m);
  REQUIRE_FALSE(report.ok());
  bool no_exit = false;
  for (const auto& entry : report.entries)
    if (entry.kind == mcum::McumValidationEntry::Kind::NoExitPath) no_exit = true;
  CHECK(no_exit);
}

TEST_CASE("generate_tests: deterministic chain yields the single walk") {
  const auto m = mcum::assign_probabilities(mcum::build_structure(chain_spec()), mcum::Uniform{});
  const auto walks = mcum::generate_tests(m, 5, 99);
  REQUIRE(walks.size() == 5);
  for (const auto& walk : walks) {
    CHECK(walk.states == std::vector<std::string>{"Enter", "A", "Exit"});
    CHECK(walk.stimuli == std::vector<std::string>{"s1", "s2"});
    CHECK(walk.probability == doctest::Approx(1.0));
    CHECK_FALSE(walk.truncated);
  }
}

TEST_CASE("generate_tests: n=0 yields empty") {
  const auto m = mcum::assign_probabilities(mcum::build_structure(chain_spec()), mcum::Uniform{});
  CHECK(mcum::generate_tests(m, 0, 1).empty());
}

TEST_CASE("generate_tests: 0.7/0.3 branch empirical frequency within 0.01") {
  mcum::Direct direct;
  direct.table[{"Enter", "toA", "A"}] = 0.7;
  direct.table[{"Enter", "toB", "B"}] = 0.3;
  direct.table[{"A", "fromA", "Exit"}] = 1.0;
  direct.table[{"B", "fromB", "Exit"}] = 1.0;
  const auto m = mcum::assign_probabilities(mcum::build_structure(branch_spec()), direct);
  const std::size_t n = 100000;
  const auto walks = mcum::generate_tests(m, n, 20260817);
  std::size_t through_a = 0;
  for (const auto& walk : walks)
    if (walk.stimuli.front() == "toA") ++through_a;
  const double fraction = static_cast<double>(through_a) / static_cast<double>(n);
  CHECK(fraction == doctest::Approx(0.7).epsilon(0.015));
  CHECK(std::abs(fraction - 0.7) <= 0.01);
}

TEST_CASE("generate_tests: determinism and the max_len guard") {
  std::mt19937_64 rng(31);
  const auto spec = testgen::random_interface_spec(rng, {10, 8, 0.0, 0.0}, "svc");
  const auto m = mcum::assign_probabilities(mcum::build_structure(spec), mcum::Uniform{});
  const auto a = mcum::generate_tests(m, 50, 7);
  const auto b = mcum::generate_tests(m, 50, 7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].stimuli == b[i].stimuli);
    CHECK(a[i].probability == b[i].probability);
  }
  const auto clipped = mcum::generate_tests(m, 50, 7, 1);
  for (const auto& walk : clipped) {
    CHECK(walk.stimuli.size() <= 1);
    if (walk.states.back() != "Exit") CHECK(walk.truncated);
  }
}

TEST_CASE("sequence_probability: trivial chains and impossible walks") {
  const auto chain =
      mcum::assign_probabilities(mcum::build_structure(chain_spec()), mcum::Uniform{});
  CHECK(mcum::sequence_probability(chain, {"s1", "s2"}) == doctest::Approx(1.0));
  CHECK(mcum::sequence_probability(chain, {"s2"}) == 0.0);

  mcum::Direct direct;
  direct.table[{"Enter", "toA", "A"}] = 0.7;
  direct.table[{"Enter", "toB", "B"}] = 0.3;
  direct.table[{"A", "fromA", "Exit"}] = 1.0;
  direct.table[{"B", "fromB", "Exit"}] = 1.0;
  const auto m = mcum::assign_probabilities(mcum::build_structure(branch_spec()), direct);
  CHECK(mcum::sequence_probability(m, {"toA"}) == doctest::Approx(0.7));
  CHECK(mcum::sequence_probability(m, {"toA", "fromA"}) == doctest::Approx(0.7));
}

TEST_CASE("walk probability equals sequence_probability") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const auto spec = testgen::random_interface_spec(rng, {12, 8, 0.2, 0.0},
                                                     "svc" + std::to_string(trial));
    auto structure = mcum::build_structure(spec);
    const auto m = mcum::assign_probabilities(structure, testgen::random_direct_table(structure, rng));
    for (const auto& walk : mcum::generate_tests(m, 25, 1000 + trial)) {
      if (walk.truncated) continue;
      CHECK(walk.probability ==
            doctest::Approx(mcum::sequence_probability(m, walk.stimuli)).epsilon(1e-12));
    }
  }
}

TEST_CASE("stationary: 3-cycle is uniform") {
  core::InterfaceSpec spec = chain_spec();
  spec.stimuli.insert("s3");
  spec.transitions.push_back({"Exit", "s3", "Enter", {}});
  const auto m = mcum::assign_probabilities(mcum::build_structure(spec), mcum::Uniform{});
  CHECK(m.recurrence);
  const auto pi = mcum::stationary_distribution(m);
  REQUIRE(pi.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(pi(i) == doctest::Approx(1.0 / 3).epsilon(1e-9));
}

TEST_CASE("stationary: 2-state swap chain is half/half") {
  core::InterfaceSpec spec;
  spec.service_id = "svc";
  spec.states = {"Enter", "Exit"};
  spec.stimuli = {"go", "back"};
  spec.transitions = {{"Enter", "go", "Exit", {}}, {"Exit", "back", "Enter", {}}};
  const auto m = mcum::assign_probabilities(mcum::build_structure(spec), mcum::Uniform{});
  const auto pi = mcum::stationary_distribution(m);
  CHECK(pi(0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(pi(1) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("stationary: asymmetric chain matches the power-iteration oracle") {
  mcum::Direct direct;
  direct.table[{"Enter", "toA", "A"}] = 0.9;
  direct.table[{"Enter", "toB", "B"}] = 0.1;
  direct.table[{"A", "fromA", "Exit"}] = 1.0;
  direct.table[{"B", "fromB", "Exit"}] = 1.0;
  const auto m = mcum::assign_probabilities(mcum::build_structure(branch_spec()), direct);
  const auto pi = mcum::stationary_distribution(m);
  const auto oracle = power_iteration_oracle(m, 1e-13);
  double residual = 0.0;
  for (int i = 0; i < pi.size(); ++i) residual += std::abs(pi(i) - oracle[static_cast<std::size_t>(i)]);
  CHECK(residual <= 1e-8);
}

TEST_CASE("stationary: reducible chain rejected") {
  mcum::Mcum m;
  m.service_id = "svc";
  m.states = {"Enter", "A", "Exit"};
  m.arcs = {{0, "s1", 2}, {1, "s2", 1}};
  m.arc_probs = {1.0, 1.0};
  m.P = Eigen::MatrixXd::Zero(3, 3);
  m.P(0, 2) = 1.0;
  m.P(1, 1) = 1.0;
  m.assigned = true;
  CHECK_THROWS_AS(mcum::stationary_distribution(m), std::exception);
}

TEST_CASE("stationary_feature_weights: 3-cycle gives each stimulus a third") {
  core::InterfaceSpec spec = chain_spec();
  spec.stimuli.insert("s3");
  spec.transitions.push_back({"Exit", "s3", "Enter", {}});
  const auto m = mcum::assign_probabilities(mcum::build_structure(spec), mcum::Uniform{});
  const auto weights = mcum::stationary_feature_weights(m);
  CHECK(weights.at("s1") == doctest::Approx(1.0 / 3).epsilon(1e-9));
  CHECK(weights.at("s2") == doctest::Approx(1.0 / 3).epsilon(1e-9));
  CHECK(weights.at("s3") == doctest::Approx(1.0 / 3).epsilon(1e-9));
}

TEST_CASE("JSON round-trips for models and walks") {
  std::mt19937_64 rng(33);
  const auto spec = testgen::random_interface_spec(rng, {10, 6, 0.3, 0.0}, "svc");
  auto structure = mcum::build_structure(spec);
  const auto m = mcum::assign_probabilities(structure, testgen::random_direct_table(structure, rng));
  const auto back = mcum::mcum_from_json(mcum::mcum_to_json(m));
  CHECK(back.service_id == m.service_id);
  CHECK(back.states == m.states);
  CHECK(back.arcs == m.arcs);
  CHECK(back.assigned == m.assigned);
  CHECK(back.recurrence == m.recurrence);
  REQUIRE(back.arc_probs.size() == m.arc_probs.size());
  for (std::size_t i = 0; i < m.arc_probs.size(); ++i)
    CHECK(back.arc_probs[i] == doctest::Approx(m.arc_probs[i]).epsilon(1e-15));
  CHECK((back.P - m.P).cwiseAbs().maxCoeff() <= 1e-15);

  const auto walks = mcum::generate_tests(m, 3, 5);
  for (const auto& walk : walks) {
    const auto w = mcum::walk_from_json(mcum::walk_to_json(walk));
    CHECK(w.stimuli == walk.stimuli);
    CHECK(w.states == walk.states);
    CHECK(w.probability == doctest::Approx(walk.probability).epsilon(1e-15));
    CHECK(w.truncated == walk.truncated);
  }
}

TEST_CASE("assign rows always stochastic (fuzz)") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    const auto spec = testgen::random_interface_spec(rng, {20, 12, 0.3, 0.0}, "svc");
    auto structure = mcum::build_structure(spec);
    const auto strategies = {mcum::AssignmentStrategy{mcum::Uniform{}},
                             mcum::AssignmentStrategy{testgen::random_direct_table(structure, rng)}};
    for (const auto& strategy : strategies) {
      const auto m = mcum::assign_probabilities(structure, strategy);
      std::set<int> has_out;
      for (const auto& arc : m.arcs) has_out.insert(arc.from);
      for (int row : has_out) CHECK(std::abs(row_sum(m, row) - 1.0) <= 1e-9);
    }
  }
}

}  // TEST_SUITE
