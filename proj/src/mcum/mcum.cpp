// SPDX-License-Identifier: Apache-2.0
#include "mitest/mcum/mcum.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "mitest/core/random.hpp"

namespace mitest::mcum {

using nlohmann::json;

namespace {

constexpr double kRowSumTolerance = 1e-9;
constexpr double kDirectRowTolerance = 1e-6;

// Outgoing arc indices per state, in (from, stimulus) order.
std::vector<std::vector<std::size_t>> outgoing_arcs(const Mcum& m) {
  std::vector<std::vector<std::size_t>> out(m.states.size());
  for (std::size_t i = 0; i < m.arcs.size(); ++i) out[m.arcs[i].from].push_back(i);
  return out;
}

std::set<int> reachable(const Mcum& m, int origin, bool forward) {
  std::set<int> seen{origin};
  std::deque<int> queue{origin};
  while (!queue.empty()) {
    int cur = queue.front();
    queue.pop_front();
    for (const auto& arc : m.arcs) {
      int src = forward ? arc.from : arc.to;
      int dst = forward ? arc.to : arc.from;
      if (src == cur && seen.insert(dst).second) queue.push_back(dst);
    }
  }
  return seen;
}

// Rebuilds the aggregate matrix from per-arc probabilities.
void refresh_matrix(Mcum& m) {
  m.P.setZero();
  for (std::size_t i = 0; i < m.arcs.size(); ++i)
    m.P(m.arcs[i].from, m.arcs[i].to) += m.arc_probs[i];
}

}  // namespace

int Mcum::state_index(const std::string& state) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == state) return static_cast<int>(i);
  }
  return -1;
}

std::string McumValidationReport::summary() const {
  if (entries.empty()) return "ok";
  std::string out;
  for (const auto& e : entries) {
    if (!out.empty()) out += "; ";
    out += e.message;
  }
  return out;
}

Mcum build_structure(const core::InterfaceSpec& spec) {
  auto report = core::validate_interface_spec(spec);
  if (!report.ok())
    throw std::invalid_argument("invalid interface spec for " + spec.service_id + ": " +
                                report.summary());

  Mcum m;
  m.service_id = spec.service_id;
  // Enter first, Exit last, interior states in sorted order for determinism.
  m.states.push_back(core::kEnterState);
  for (const auto& state : spec.states) {
    if (state != core::kEnterState && state != core::kExitState) m.states.push_back(state);
  }
  m.states.push_back(core::kExitState);

  for (const auto& t : spec.transitions) {
    Arc arc;
    arc.from = m.state_index(t.from);
    arc.stimulus = t.stimulus;
    arc.to = m.state_index(t.to);
    m.arcs.push_back(arc);
    if (t.from == core::kExitState && t.to == core::kEnterState) m.recurrence = true;
  }
  std::sort(m.arcs.begin(), m.arcs.end(), [](const Arc& a, const Arc& b) {
    return std::tie(a.from, a.stimulus) < std::tie(b.from, b.stimulus);
  });

  const auto n = static_cast<Eigen::Index>(m.states.size());
  m.arc_probs.assign(m.arcs.size(), 0.0);
  m.P = Eigen::MatrixXd::Zero(n, n);
  m.assigned = false;
  return m;
}

Mcum assign_probabilities(const Mcum& m, const AssignmentStrategy& strategy) {
  if (m.states.empty()) throw std::invalid_argument("structure not built");
  Mcum out = m;
  out.arc_probs.assign(out.arcs.size(), 0.0);
  const auto outgoing = outgoing_arcs(out);

  if (std::holds_alternative<Uniform>(strategy)) {
    for (std::size_t s = 0; s < out.states.size(); ++s) {
      if (outgoing[s].empty()) continue;
      const double p = 1.0 / static_cast<double>(outgoing[s].size());
      for (std::size_t idx : outgoing[s]) out.arc_probs[idx] = p;
    }
  } else if (const auto* direct = std::get_if<Direct>(&strategy)) {
    if (direct->table.size() != out.arcs.size())
      throw std::invalid_argument("direct table must cover exactly the arc set");
    std::vector<double> arc_prob(out.arcs.size());
    for (std::size_t i = 0; i < out.arcs.size(); ++i) {
      const Arc& arc = out.arcs[i];
      auto key = std::make_tuple(out.states[arc.from], arc.stimulus, out.states[arc.to]);
      auto it = direct->table.find(key);
      if (it == direct->table.end())
        throw std::invalid_argument("direct table missing arc " + out.states[arc.from] + "/" +
                                    arc.stimulus + "/" + out.states[arc.to]);
      if (it->second < 0.0 || it->second > 1.0)
        throw std::invalid_argument("direct table probabilities must lie in [0, 1]");
      arc_prob[i] = it->second;
    }
    for (std::size_t s = 0; s < out.states.size(); ++s) {
      if (outgoing[s].empty()) continue;
      double sum = 0.0;
      for (std::size_t idx : outgoing[s]) sum += arc_prob[idx];
      if (std::abs(sum - 1.0) > kDirectRowTolerance)
        throw std::invalid_argument("direct table row for state " + out.states[s] +
                                    " does not sum to 1");
      // Renormalize so row sums are exact despite the input tolerance.
      for (std::size_t idx : outgoing[s]) out.arc_probs[idx] = arc_prob[idx] / sum;
    }
  } else {
    const auto& from_profile = std::get<FromProfile>(strategy);
    if (from_profile.profile == nullptr)
      throw std::invalid_argument("FromProfile strategy requires a profile");
    if (from_profile.smoothing_alpha < 0.0)
      throw std::invalid_argument("smoothing_alpha must be non-negative");
    const double alpha = from_profile.smoothing_alpha;
    for (std::size_t s = 0; s < out.states.size(); ++s) {
      if (outgoing[s].empty()) continue;
      std::vector<std::int64_t> counts;
      counts.reserve(outgoing[s].size());
      std::int64_t total = 0;
      for (std::size_t idx : outgoing[s]) {
        const Arc& arc = out.arcs[idx];
        std::int64_t c = from_profile.profile->transition_count(
            out.service_id, out.states[arc.from], arc.stimulus, out.states[arc.to],
            from_profile.context);
        counts.push_back(c);
        total += c;
      }
      const double outdeg = static_cast<double>(outgoing[s].size());
      const double denom = static_cast<double>(total) + alpha * outdeg;
      if (denom <= 0.0)
        throw std::invalid_argument("no observations and no smoothing for state " +
                                    out.states[s]);
      for (std::size_t k = 0; k < outgoing[s].size(); ++k)
        out.arc_probs[outgoing[s][k]] = (static_cast<double>(counts[k]) + alpha) / denom;
    }
  }
  refresh_matrix(out);
  out.assigned = true;
  return out;
}

McumValidationReport validate_mcum(const Mcum& m) {
  if (!m.assigned) throw std::invalid_argument("probabilities not assigned");
  McumValidationReport report;
  auto add = [&report](McumValidationEntry::Kind kind, std::string message) {
    report.entries.push_back({kind, std::move(message)});
  };

  const auto outgoing = outgoing_arcs(m);
  for (std::size_t s = 0; s < m.states.size(); ++s) {
    if (outgoing[s].empty()) continue;
    double sum = 0.0;
    for (std::size_t idx : outgoing[s]) sum += m.arc_probs[idx];
    if (std::abs(sum - 1.0) > kRowSumTolerance)
      add(McumValidationEntry::Kind::NonStochasticRow, "non-stochastic row: " + m.states[s]);
  }
  for (std::size_t i = 0; i < m.arcs.size(); ++i) {
    if (m.arc_probs[i] == 0.0)
      add(McumValidationEntry::Kind::ZeroProbabilityArc,
          "zero-probability arc: " + m.states[m.arcs[i].from] + " -" + m.arcs[i].stimulus +
              "-> " + m.states[m.arcs[i].to]);
  }
  const std::set<int> from_enter = reachable(m, m.enter_index(), true);
  const std::set<int> to_exit = reachable(m, m.exit_index(), false);
  for (std::size_t s = 0; s < m.states.size(); ++s) {
    const int idx = static_cast<int>(s);
    if (from_enter.count(idx) == 0)
      add(McumValidationEntry::Kind::Unreachable, "unreachable: " + m.states[s]);
    if (idx != m.exit_index() && to_exit.count(idx) == 0)
      add(McumValidationEntry::Kind::NoExitPath, "no exit path: " + m.states[s]);
  }
  return report;
}

std::vector<WalkSequence> generate_tests(const Mcum& m, std::size_t n, std::uint64_t seed,
                                         std::size_t max_len) {
  if (!m.assigned) throw std::invalid_argument("probabilities not assigned");
  if (max_len == 0) max_len = 10 * m.states.size();

  const auto outgoing = outgoing_arcs(m);
  std::mt19937_64 rng(seed);
  std::vector<WalkSequence> walks;
  walks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    WalkSequence walk;
    int cur = m.enter_index();
    walk.states.push_back(m.states[cur]);
    while (cur != m.exit_index()) {
      if (walk.stimuli.size() >= max_len || outgoing[cur].empty()) {
        walk.truncated = true;
        break;
      }
      const double u = core::unit_draw(rng);
      double cumulative = 0.0;
      std::size_t chosen = outgoing[cur].back();
      for (std::size_t idx : outgoing[cur]) {
        cumulative += m.arc_probs[idx];
        if (u < cumulative) {
          chosen = idx;
          break;
        }
      }
      const Arc& arc = m.arcs[chosen];
      walk.stimuli.push_back(arc.stimulus);
      walk.states.push_back(m.states[arc.to]);
      walk.probability *= m.arc_probs[chosen];
      cur = arc.to;
    }
    walks.push_back(std::move(walk));
  }
  return walks;
}

double sequence_probability(const Mcum& m, const std::vector<std::string>& stimuli) {
  if (!m.assigned) throw std::invalid_argument("probabilities not assigned");
  const auto outgoing = outgoing_arcs(m);
  int cur = m.enter_index();
  double probability = 1.0;
  for (const auto& stimulus : stimuli) {
    const std::size_t miss = m.arcs.size();
    std::size_t match = miss;
    for (std::size_t idx : outgoing[cur]) {
      if (m.arcs[idx].stimulus == stimulus) {
        match = idx;
        break;
      }
    }
    if (match == miss) return 0.0;
    probability *= m.arc_probs[match];
    cur = m.arcs[match].to;
  }
  return probability;
}

Eigen::VectorXd stationary_distribution(const Mcum& m) {
  if (!m.assigned) throw std::invalid_argument("probabilities not assigned");
  const auto n = static_cast<Eigen::Index>(m.states.size());
  Eigen::MatrixXd P = m.P;
  if (P.row(m.exit_index()).sum() == 0.0) {
    P(m.exit_index(), m.enter_index()) = 1.0;  // recurrence arc for long-run analysis
  }

  // Irreducibility = strong connectivity of the support digraph.
  auto closure = [&P, n](Eigen::Index origin, bool forward) {
    std::set<Eigen::Index> seen{origin};
    std::deque<Eigen::Index> queue{origin};
    while (!queue.empty()) {
      Eigen::Index cur = queue.front();
      queue.pop_front();
      for (Eigen::Index next = 0; next < n; ++next) {
        const double p = forward ? P(cur, next) : P(next, cur);
        if (p > 0.0 && seen.insert(next).second) queue.push_back(next);
      }
    }
    return seen;
  };
  if (closure(0, true).size() != static_cast<std::size_t>(n) ||
      closure(0, false).size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("chain is reducible; no unique stationary distribution");

  Eigen::VectorXd pi;
  if (n <= 512) {
    // Solve (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(n, n);
    A.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    pi = A.partialPivLu().solve(b);
  } else {
    pi = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  }

  // Polish with the lazy chain (P + I) / 2, which converges for any
  // irreducible P regardless of periodicity.
  const Eigen::MatrixXd lazy = 0.5 * (P + Eigen::MatrixXd::Identity(n, n));
  for (int iter = 0; iter < 200000; ++iter) {
    const double residual = (pi.transpose() * P - pi.transpose()).cwiseAbs().sum();
    if (residual <= 1e-12) break;
    pi = (pi.transpose() * lazy).transpose();
    pi /= pi.sum();
  }
  const double residual = (pi.transpose() * P - pi.transpose()).cwiseAbs().sum();
  if (residual > 1e-10)
    throw std::runtime_error("stationary solve did not reach the required residual");
  return pi;
}

std::map<std::string, double> stationary_feature_weights(const Mcum& m) {
  const Eigen::VectorXd pi = stationary_distribution(m);
  std::map<std::string, double> weights;
  for (std::size_t i = 0; i < m.arcs.size(); ++i)
    weights[m.arcs[i].stimulus] += pi(m.arcs[i].from) * m.arc_probs[i];
  return weights;
}

nlohmann::json mcum_to_json(const Mcum& m) {
  json states = json::array();
  for (const auto& s : m.states) states.push_back(s);
  json arcs = json::array();
  for (std::size_t i = 0; i < m.arcs.size(); ++i) {
    const Arc& arc = m.arcs[i];
    json a{{"from", m.states[arc.from]},
           {"stimulus", arc.stimulus},
           {"to", m.states[arc.to]}};
    if (m.assigned) a["p"] = m.arc_probs[i];
    arcs.push_back(std::move(a));
  }
  return json{{"service", m.service_id},
              {"states", std::move(states)},
              {"arcs", std::move(arcs)},
              {"assigned", m.assigned},
              {"recurrence", m.recurrence}};
}

Mcum mcum_from_json(const nlohmann::json& j) {
  Mcum m;
  m.service_id = j.at("service").get<std::string>();
  for (const auto& s : j.at("states")) m.states.push_back(s.get<std::string>());
  if (m.states.size() < 2 || m.states.front() != core::kEnterState ||
      m.states.back() != core::kExitState)
    throw std::invalid_argument("states must start with Enter and end with Exit");
  const auto n = static_cast<Eigen::Index>(m.states.size());
  m.P = Eigen::MatrixXd::Zero(n, n);
  m.assigned = j.at("assigned").get<bool>();
  m.recurrence = j.at("recurrence").get<bool>();
  struct Loaded {
    Arc arc;
    double p;
  };
  std::vector<Loaded> loaded;
  for (const auto& a : j.at("arcs")) {
    Loaded entry;
    entry.arc.from = m.state_index(a.at("from").get<std::string>());
    entry.arc.to = m.state_index(a.at("to").get<std::string>());
    entry.arc.stimulus = a.at("stimulus").get<std::string>();
    if (entry.arc.from < 0 || entry.arc.to < 0)
      throw std::invalid_argument("arc references unknown state");
    entry.p = 0.0;
    if (m.assigned) {
      entry.p = a.at("p").get<double>();
      if (entry.p < 0.0 || entry.p > 1.0)
        throw std::invalid_argument("arc probability out of [0, 1]");
    }
    loaded.push_back(std::move(entry));
  }
  std::sort(loaded.begin(), loaded.end(), [](const Loaded& a, const Loaded& b) {
    return std::tie(a.arc.from, a.arc.stimulus) < std::tie(b.arc.from, b.arc.stimulus);
  });
  for (auto& entry : loaded) {
    m.arcs.push_back(entry.arc);
    m.arc_probs.push_back(entry.p);
  }
  refresh_matrix(m);
  return m;
}

nlohmann::json walk_to_json(const WalkSequence& walk) {
  json stimuli = json::array();
  for (const auto& s : walk.stimuli) stimuli.push_back(s);
  json states = json::array();
  for (const auto& s : walk.states) states.push_back(s);
  return json{{"stimuli", std::move(stimuli)},
              {"states", std::move(states)},
              {"probability", walk.probability},
              {"truncated", walk.truncated}};
}

WalkSequence walk_from_json(const nlohmann::json& j) {
  WalkSequence walk;
  for (const auto& s : j.at("stimuli")) walk.stimuli.push_back(s.get<std::string>());
  for (const auto& s : j.at("states")) walk.states.push_back(s.get<std::string>());
  walk.probability = j.at("probability").get<double>();
  walk.truncated = j.at("truncated").get<bool>();
  return walk;
}

Direct direct_table_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("direct table must be a JSON object");
  Direct direct;
  for (const auto& [key, value] : j.items()) {
    const auto first = key.find('/');
    const auto second = key.find('/', first + 1);
    if (first == std::string::npos || second == std::string::npos ||
        key.find('/', second + 1) != std::string::npos)
      throw std::invalid_argument("direct table keys must look like from/stimulus/to: " + key);
    if (!value.is_number())
      throw std::invalid_argument("direct table values must be numbers");
    auto tuple = std::make_tuple(key.substr(0, first), key.substr(first + 1, second - first - 1),
                                 key.substr(second + 1));
    if (!direct.table.emplace(std::move(tuple), value.get<double>()).second)
      throw std::invalid_argument("duplicate direct table key: " + key);
  }
  return direct;
}

}  // namespace mitest::mcum
