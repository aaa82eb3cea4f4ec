// SPDX-License-Identifier: Apache-2.0
#include "mitest/alloc/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "mitest/core/random.hpp"

namespace mitest::alloc {

using nlohmann::json;

int TestNetworkGraph::node_index(const std::string& node_id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].node_id == node_id) return static_cast<int>(i);
  }
  return -1;
}

double WorkloadSpec::demand_between(const std::string& u, const std::string& v) const {
  if (u == v) return 0.0;
  auto key = u < v ? std::make_pair(u, v) : std::make_pair(v, u);
  auto it = demand.find(key);
  return it == demand.end() ? 0.0 : it->second;
}

void validate_graph(const TestNetworkGraph& graph) {
  if (graph.nodes.empty()) throw std::invalid_argument("graph has no nodes");
  std::set<std::string> ids;
  for (const auto& node : graph.nodes) {
    if (!ids.insert(node.node_id).second)
      throw std::invalid_argument("duplicate node id: " + node.node_id);
    if (node.capacity <= 0)
      throw std::invalid_argument("non-positive capacity at node " + node.node_id);
  }
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& edge : graph.edges) {
    if (edge.a == edge.b) throw std::invalid_argument("self-edge at node " + edge.a);
    if (ids.count(edge.a) == 0 || ids.count(edge.b) == 0)
      throw std::invalid_argument("edge references unknown node");
    auto key = edge.a < edge.b ? std::make_pair(edge.a, edge.b)
                               : std::make_pair(edge.b, edge.a);
    if (!pairs.insert(key).second)
      throw std::invalid_argument("duplicate edge between " + edge.a + " and " + edge.b);
    if (edge.qos.bandwidth_mbps <= 0.0)
      throw std::invalid_argument("bandwidth must be positive on edge " + edge.a + "-" + edge.b);
    if (edge.qos.latency_ms < 0.0)
      throw std::invalid_argument("latency must be non-negative on edge " + edge.a + "-" +
                                  edge.b);
    if (edge.qos.failure < 0.0 || edge.qos.failure >= 1.0)
      throw std::invalid_argument("failure must lie in [0, 1) on edge " + edge.a + "-" + edge.b);
  }

  // Connectivity over the undirected edge set.
  std::map<std::string, std::vector<std::string>> adjacency;
  for (const auto& edge : graph.edges) {
    adjacency[edge.a].push_back(edge.b);
    adjacency[edge.b].push_back(edge.a);
  }
  std::set<std::string> seen{graph.nodes.front().node_id};
  std::deque<std::string> queue{graph.nodes.front().node_id};
  while (!queue.empty()) {
    std::string cur = queue.front();
    queue.pop_front();
    for (const auto& next : adjacency[cur]) {
      if (seen.insert(next).second) queue.push_back(next);
    }
  }
  if (seen.size() != graph.nodes.size())
    throw std::invalid_argument("graph is not connected");
}

void validate_weights(const CostWeights& weights) {
  if (weights.w_latency < 0.0 || weights.w_failure < 0.0 || weights.w_bandwidth < 0.0)
    throw std::invalid_argument("cost weights must be non-negative");
  if (weights.w_latency + weights.w_failure + weights.w_bandwidth <= 0.0)
    throw std::invalid_argument("at least one cost weight must be positive");
  if (weights.latency_ref_ms <= 0.0 || weights.bandwidth_ref_mbps <= 0.0)
    throw std::invalid_argument("reference latency and bandwidth must be positive");
}

void validate_workload(const WorkloadSpec& workload) {
  if (workload.vms.empty()) throw std::invalid_argument("workload names no VMs");
  std::set<std::string> ids;
  for (const auto& vm : workload.vms) {
    if (!ids.insert(vm.vm_id).second)
      throw std::invalid_argument("duplicate vm id: " + vm.vm_id);
  }
  for (const auto& [key, volume] : workload.demand) {
    if (ids.count(key.first) == 0 || ids.count(key.second) == 0)
      throw std::invalid_argument("demand references unknown vm");
    if (key.first >= key.second)
      throw std::invalid_argument("demand keys must be stored with a < b");
    if (volume < 0.0) throw std::invalid_argument("demand volumes must be non-negative");
  }
}

double edge_cost(const QoS& qos, const CostWeights& weights) {
  if (qos.bandwidth_mbps <= 0.0) throw std::invalid_argument("bandwidth must be positive");
  return weights.w_latency * (qos.latency_ms / weights.latency_ref_ms) +
         weights.w_failure * qos.failure +
         weights.w_bandwidth * (weights.bandwidth_ref_mbps / qos.bandwidth_mbps);
}

Eigen::MatrixXd distance_matrix(const TestNetworkGraph& graph, const CostWeights& weights) {
  const auto n = static_cast<Eigen::Index>(graph.nodes.size());
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, inf);
  for (Eigen::Index i = 0; i < n; ++i) d(i, i) = 0.0;
  for (const auto& edge : graph.edges) {
    const auto a = static_cast<Eigen::Index>(graph.node_index(edge.a));
    const auto b = static_cast<Eigen::Index>(graph.node_index(edge.b));
    const double cost = edge_cost(edge.qos, weights);
    d(a, b) = std::min(d(a, b), cost);
    d(b, a) = std::min(d(b, a), cost);
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (d(i, k) + d(k, j) < d(i, j)) d(i, j) = d(i, k) + d(k, j);
      }
    }
  }
  return d;
}

namespace {

// Internal solver state: VM order, node lookup, per-node load.
struct Instance {
  const TestNetworkGraph& graph;
  const WorkloadSpec& workload;
  Eigen::MatrixXd dist;
  std::vector<std::string> vm_order;  // sorted vm ids
  std::vector<std::optional<core::Layer>> pins;
  std::vector<std::vector<double>> pair_demand;  // by vm_order index

  Instance(const TestNetworkGraph& g, const WorkloadSpec& w, const CostWeights& weights)
      : graph(g), workload(w), dist(distance_matrix(g, weights)) {
    for (const auto& vm : w.vms) vm_order.push_back(vm.vm_id);
    std::sort(vm_order.begin(), vm_order.end());
    pins.resize(vm_order.size());
    for (const auto& vm : w.vms) {
      auto at = std::find(vm_order.begin(), vm_order.end(), vm.vm_id) - vm_order.begin();
      pins[static_cast<std::size_t>(at)] = vm.pinned_layer;
    }
    pair_demand.assign(vm_order.size(), std::vector<double>(vm_order.size(), 0.0));
    for (std::size_t i = 0; i < vm_order.size(); ++i) {
      for (std::size_t j = i + 1; j < vm_order.size(); ++j) {
        pair_demand[i][j] = pair_demand[j][i] = w.demand_between(vm_order[i], vm_order[j]);
      }
    }
  }

  bool allowed(std::size_t vm, std::size_t node) const {
    return !pins[vm] || graph.nodes[node].layer == *pins[vm];
  }

  double cost_of(const std::vector<int>& placement) const {
    double total = 0.0;
    for (std::size_t i = 0; i < placement.size(); ++i) {
      for (std::size_t j = i + 1; j < placement.size(); ++j) {
        if (pair_demand[i][j] > 0.0)
          total += pair_demand[i][j] * dist(placement[i], placement[j]);
      }
    }
    return total;
  }
};

void check_feasible(const Instance& inst) {
  std::map<core::Layer, int> layer_capacity;
  int total_capacity = 0;
  for (const auto& node : inst.graph.nodes) {
    layer_capacity[node.layer] += node.capacity;
    total_capacity += node.capacity;
  }
  std::map<core::Layer, int> pinned_count;
  for (const auto& pin : inst.pins) {
    if (pin) ++pinned_count[*pin];
  }
  for (const auto& [layer, count] : pinned_count) {
    if (layer_capacity[layer] < count)
      throw std::invalid_argument("infeasible: layer " + core::to_string(layer) +
                                  " lacks capacity for its pinned VMs");
  }
  if (total_capacity < static_cast<int>(inst.vm_order.size()))
    throw std::invalid_argument("infeasible: total capacity below VM count");
}

Allocation finish(const Instance& inst, const std::vector<int>& placement,
                  const std::string& solver, std::uint64_t seed) {
  Allocation allocation;
  for (std::size_t i = 0; i < inst.vm_order.size(); ++i)
    allocation.assignment[inst.vm_order[i]] = inst.graph.nodes[placement[i]].node_id;
  allocation.cost = inst.cost_of(placement);
  allocation.solver = solver;
  allocation.seed = seed;
  return allocation;
}

std::vector<int> greedy_seed(const Instance& inst) {
  const std::size_t vm_count = inst.vm_order.size();
  std::vector<double> total_demand(vm_count, 0.0);
  for (std::size_t i = 0; i < vm_count; ++i) {
    for (std::size_t j = 0; j < vm_count; ++j) total_demand[i] += inst.pair_demand[i][j];
  }
  // Pinned first (they have the tightest feasibility), then by demand.
  std::vector<std::size_t> order(vm_count);
  for (std::size_t i = 0; i < vm_count; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&inst, &total_demand](std::size_t a, std::size_t b) {
    const bool pa = inst.pins[a].has_value();
    const bool pb = inst.pins[b].has_value();
    if (pa != pb) return pa;
    if (total_demand[a] != total_demand[b]) return total_demand[a] > total_demand[b];
    return inst.vm_order[a] < inst.vm_order[b];
  });

  std::vector<int> placement(vm_count, -1);
  std::vector<int> load(inst.graph.nodes.size(), 0);
  for (std::size_t vm : order) {
    int best_node = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t node = 0; node < inst.graph.nodes.size(); ++node) {
      if (!inst.allowed(vm, node)) continue;
      if (load[node] >= inst.graph.nodes[node].capacity) continue;
      double marginal = 0.0;
      for (std::size_t other = 0; other < vm_count; ++other) {
        if (placement[other] < 0 || inst.pair_demand[vm][other] <= 0.0) continue;
        marginal += inst.pair_demand[vm][other] *
                    inst.dist(static_cast<Eigen::Index>(node), placement[other]);
      }
      if (marginal < best_cost) {
        best_cost = marginal;
        best_node = static_cast<int>(node);
      }
    }
    if (best_node < 0) throw std::invalid_argument("infeasible: no node for vm " +
                                                   inst.vm_order[vm]);
    placement[vm] = best_node;
    ++load[best_node];
  }
  return placement;
}

// Uniform feasible placement. Pinned VMs go first, so unpinned fills cannot
// strand a pinned layer; check_feasible guarantees a slot always exists.
std::vector<int> random_feasible_placement(const Instance& inst, std::mt19937_64& rng) {
  const std::size_t vm_count = inst.vm_order.size();
  const std::size_t node_count = inst.graph.nodes.size();
  std::vector<int> placement(vm_count, -1);
  std::vector<int> load(node_count, 0);
  std::vector<std::size_t> order;
  for (std::size_t vm = 0; vm < vm_count; ++vm)
    if (inst.pins[vm]) order.push_back(vm);
  for (std::size_t vm = 0; vm < vm_count; ++vm)
    if (!inst.pins[vm]) order.push_back(vm);
  for (std::size_t vm : order) {
    std::vector<std::size_t> open;
    for (std::size_t node = 0; node < node_count; ++node) {
      if (inst.allowed(vm, node) && load[node] < inst.graph.nodes[node].capacity)
        open.push_back(node);
    }
    const auto at = static_cast<std::size_t>(core::unit_draw(rng) * open.size()) % open.size();
    placement[vm] = static_cast<int>(open[at]);
    ++load[open[at]];
  }
  return placement;
}

}  // namespace

double allocation_cost(const TestNetworkGraph& graph, const WorkloadSpec& workload,
                       const std::map<std::string, std::string>& assignment,
                       const CostWeights& weights) {
  validate_graph(graph);
  validate_weights(weights);
  validate_workload(workload);
  Instance inst(graph, workload, weights);

  std::vector<int> placement(inst.vm_order.size(), -1);
  std::vector<int> load(graph.nodes.size(), 0);
  for (std::size_t i = 0; i < inst.vm_order.size(); ++i) {
    const auto& vm = inst.vm_order[i];
    auto it = assignment.find(vm);
    if (it == assignment.end())
      throw std::invalid_argument("assignment missing vm " + vm);
    const int node = graph.node_index(it->second);
    if (node < 0) throw std::invalid_argument("assignment of vm " + vm + " names unknown node");
    if (!inst.allowed(i, static_cast<std::size_t>(node)))
      throw std::invalid_argument("pinning violated for vm " + vm);
    if (++load[node] > graph.nodes[node].capacity)
      throw std::invalid_argument("capacity exceeded placing vm " + vm);
    placement[i] = node;
  }
  return inst.cost_of(placement);
}

Allocation allocate_exact(const TestNetworkGraph& graph, const WorkloadSpec& workload,
                          const CostWeights& weights) {
  validate_graph(graph);
  validate_weights(weights);
  validate_workload(workload);
  Instance inst(graph, workload, weights);
  check_feasible(inst);

  const std::size_t vm_count = inst.vm_order.size();
  const std::size_t node_count = graph.nodes.size();
  double combos = 1.0;
  for (std::size_t i = 0; i < vm_count; ++i) {
    combos *= static_cast<double>(node_count);
    if (combos > 1e7)
      throw std::invalid_argument("instance too large for exact enumeration");
  }

  std::vector<int> placement(vm_count, 0);
  std::vector<int> load(node_count, 0);
  std::vector<int> best;
  double best_cost = std::numeric_limits<double>::infinity();

  // Depth-first in lexicographic (vm, node index) order; first strict
  // improvement wins, so ties resolve to the smallest assignment.
  auto recurse = [&](auto&& self, std::size_t vm, double partial) -> void {
    if (partial >= best_cost) return;  // cost only grows with depth
    if (vm == vm_count) {
      best = placement;
      best_cost = partial;
      return;
    }
    for (std::size_t node = 0; node < node_count; ++node) {
      if (!inst.allowed(vm, node)) continue;
      if (load[node] >= graph.nodes[node].capacity) continue;
      double added = 0.0;
      for (std::size_t prev = 0; prev < vm; ++prev) {
        if (inst.pair_demand[vm][prev] > 0.0)
          added += inst.pair_demand[vm][prev] *
                   inst.dist(static_cast<Eigen::Index>(node), placement[prev]);
      }
      placement[vm] = static_cast<int>(node);
      ++load[node];
      self(self, vm + 1, partial + added);
      --load[node];
    }
  };
  recurse(recurse, 0, 0.0);
  if (best.empty()) throw std::invalid_argument("infeasible: no assignment satisfies pins");
  return finish(inst, best, "exact", 0);
}

Allocation allocate_heuristic(const TestNetworkGraph& graph, const WorkloadSpec& workload,
                              const CostWeights& weights, std::uint64_t seed,
                              std::size_t iterations) {
  validate_graph(graph);
  validate_weights(weights);
  validate_workload(workload);
  Instance inst(graph, workload, weights);
  check_feasible(inst);

  std::vector<int> placement = greedy_seed(inst);
  std::vector<int> load(graph.nodes.size(), 0);
  for (int node : placement) ++load[node];
  double cost = inst.cost_of(placement);
  std::vector<int> best = placement;
  double best_cost = cost;

  const std::size_t vm_count = inst.vm_order.size();
  const std::size_t node_count = graph.nodes.size();
  std::mt19937_64 rng(seed);
  // A chain that rejects two neighborhoods' worth of proposals is stalled in
  // a local optimum; kick it to a fresh placement and keep searching. Single
  // moves and swaps cannot relocate a co-located pair jointly, so kicks are
  // what let the search cross between co-location basins.
  const std::size_t kick_period =
      std::max<std::size_t>(2 * (vm_count * node_count + vm_count * vm_count), 32);
  std::size_t stale = 0;  // rejected proposals since the last new best
  while (stale < iterations) {
    // Propose a random move or swap; keep it only on strict improvement.
    const bool swap = vm_count >= 2 && core::unit_draw(rng) < 0.5;
    bool improved = false;
    if (swap) {
      const auto u = static_cast<std::size_t>(core::unit_draw(rng) * vm_count) % vm_count;
      auto v = static_cast<std::size_t>(core::unit_draw(rng) * vm_count) % vm_count;
      if (u != v && placement[u] != placement[v] &&
          inst.allowed(u, static_cast<std::size_t>(placement[v])) &&
          inst.allowed(v, static_cast<std::size_t>(placement[u]))) {
        std::swap(placement[u], placement[v]);
        const double next = inst.cost_of(placement);
        if (next < cost) {
          cost = next;
          improved = true;
        } else {
          std::swap(placement[u], placement[v]);
        }
      }
    } else {
      const auto vm = static_cast<std::size_t>(core::unit_draw(rng) * vm_count) % vm_count;
      const auto node = static_cast<std::size_t>(core::unit_draw(rng) * node_count) % node_count;
      const int old_node = placement[vm];
      if (static_cast<int>(node) != old_node && inst.allowed(vm, node) &&
          load[node] < graph.nodes[node].capacity) {
        placement[vm] = static_cast<int>(node);
        const double next = inst.cost_of(placement);
        if (next < cost) {
          cost = next;
          --load[old_node];
          ++load[node];
          improved = true;
        } else {
          placement[vm] = old_node;
        }
      }
    }
    if (improved) {
      if (cost < best_cost) {
        best = placement;
        best_cost = cost;
        stale = 0;
      }
      // An accepted move that does not set a new best leaves the budget
      // draining, so chains that only rediscover known ground still end.
    } else if (++stale < iterations && stale % kick_period == 0) {
      placement = random_feasible_placement(inst, rng);
      std::fill(load.begin(), load.end(), 0);
      for (int node : placement) ++load[node];
      cost = inst.cost_of(placement);
      if (cost < best_cost) {
        best = placement;
        best_cost = cost;
        stale = 0;
      }
    }
  }
  return finish(inst, best, "heuristic", seed);
}

TestNetworkGraph graph_from_json(const nlohmann::json& j) {
  TestNetworkGraph graph;
  for (const auto& n : j.at("nodes")) {
    Node node;
    node.node_id = n.at("node_id").get<std::string>();
    node.layer = core::layer_from_string(n.at("layer").get<std::string>());
    node.capacity = n.at("capacity").get<int>();
    graph.nodes.push_back(std::move(node));
  }
  for (const auto& e : j.at("edges")) {
    Edge edge;
    edge.a = e.at("a").get<std::string>();
    edge.b = e.at("b").get<std::string>();
    const auto& qos = e.at("qos");
    edge.qos.bandwidth_mbps = qos.at("bandwidth").get<double>();
    edge.qos.latency_ms = qos.at("latency").get<double>();
    edge.qos.failure = qos.at("failure").get<double>();
    graph.edges.push_back(std::move(edge));
  }
  validate_graph(graph);
  return graph;
}

CostWeights weights_from_json(const nlohmann::json& j) {
  CostWeights weights;
  if (j.contains("w_latency")) weights.w_latency = j.at("w_latency").get<double>();
  if (j.contains("w_failure")) weights.w_failure = j.at("w_failure").get<double>();
  if (j.contains("w_bandwidth")) weights.w_bandwidth = j.at("w_bandwidth").get<double>();
  if (j.contains("latency_ref")) weights.latency_ref_ms = j.at("latency_ref").get<double>();
  if (j.contains("bandwidth_ref"))
    weights.bandwidth_ref_mbps = j.at("bandwidth_ref").get<double>();
  validate_weights(weights);
  return weights;
}

WorkloadSpec workload_from_json(const nlohmann::json& j) {
  WorkloadSpec workload;
  for (const auto& v : j.at("vms")) {
    VmSpec vm;
    vm.vm_id = v.at("vm_id").get<std::string>();
    if (v.contains("pinned_layer") && !v.at("pinned_layer").is_null())
      vm.pinned_layer = core::layer_from_string(v.at("pinned_layer").get<std::string>());
    workload.vms.push_back(std::move(vm));
  }
  if (j.contains("demand")) {
    for (const auto& d : j.at("demand")) {
      std::string a = d.at("a").get<std::string>();
      std::string b = d.at("b").get<std::string>();
      const double volume = d.at("volume").get<double>();
      if (a == b && volume != 0.0)
        throw std::invalid_argument("self-demand must be zero for vm " + a);
      if (a == b) continue;
      if (b < a) std::swap(a, b);
      workload.demand[{std::move(a), std::move(b)}] += volume;
    }
  }
  validate_workload(workload);
  return workload;
}

nlohmann::json allocation_to_json(const Allocation& allocation) {
  json assignment = json::object();
  for (const auto& [vm, node] : allocation.assignment) assignment[vm] = node;
  return json{{"assignment", std::move(assignment)},
              {"cost", allocation.cost},
              {"solver", allocation.solver},
              {"seed", allocation.seed}};
}

}  // namespace mitest::alloc
