// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mitest/core/types.hpp"

namespace mitest::alloc {

struct QoS {
  double bandwidth_mbps = 1.0;  // > 0
  double latency_ms = 0.0;      // >= 0
  double failure = 0.0;         // in [0, 1)
};

struct Node {
  std::string node_id;
  core::Layer layer = core::Layer::Perception;
  int capacity = 1;  // VM slots, positive
};

struct Edge {
  std::string a;
  std::string b;
  QoS qos;
};

// Undirected, connected QoS-weighted graph of the test infrastructure.
struct TestNetworkGraph {
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  int node_index(const std::string& node_id) const;
};

struct CostWeights {
  double w_latency = 1.0;
  double w_failure = 1.0;
  double w_bandwidth = 1.0;
  double latency_ref_ms = 1.0;      // > 0
  double bandwidth_ref_mbps = 1.0;  // > 0
};

struct VmSpec {
  std::string vm_id;
  std::optional<core::Layer> pinned_layer;
};

struct WorkloadSpec {
  std::vector<VmSpec> vms;
  // Symmetric pairwise data volume; keys stored with a < b.
  std::map<std::pair<std::string, std::string>, double> demand;

  double demand_between(const std::string& u, const std::string& v) const;
};

struct Allocation {
  std::map<std::string, std::string> assignment;  // vm_id -> node_id
  double cost = 0.0;
  std::string solver;  // "exact" or "heuristic"
  std::uint64_t seed = 0;
};

// Throws std::invalid_argument when the graph violates its invariants
// (disconnected, self-edge, duplicate pair, non-positive capacity).
void validate_graph(const TestNetworkGraph& graph);
void validate_weights(const CostWeights& weights);
void validate_workload(const WorkloadSpec& workload);

// w_l * (latency/latency_ref) + w_f * failure + w_b * (bandwidth_ref/bandwidth).
double edge_cost(const QoS& qos, const CostWeights& weights);

// All-pairs shortest-path distances under edge_cost (Floyd-Warshall).
Eigen::MatrixXd distance_matrix(const TestNetworkGraph& graph, const CostWeights& weights);

// Sum over unordered VM pairs of demand * distance; throws (naming the VM)
// when the assignment breaks pinning or capacity.
double allocation_cost(const TestNetworkGraph& graph, const WorkloadSpec& workload,
                       const std::map<std::string, std::string>& assignment,
                       const CostWeights& weights);

// Exhaustive enumeration; guard: node_count^vm_count <= 1e7. Ties resolve to
// the lexicographically smallest assignment over (sorted vm, node index).
Allocation allocate_exact(const TestNetworkGraph& graph, const WorkloadSpec& workload,
                          const CostWeights& weights);

// Pinned-first greedy seeding plus seeded first-improvement local search
// (single-VM moves and pairwise swaps). A stalled chain is kicked to a random
// feasible placement; the best placement seen is kept. Stops after
// `iterations` rejected proposals without a new best; iterations = 0 returns
// the greedy allocation. Deterministic for a fixed seed.
Allocation allocate_heuristic(const TestNetworkGraph& graph, const WorkloadSpec& workload,
                              const CostWeights& weights, std::uint64_t seed,
                              std::size_t iterations);

TestNetworkGraph graph_from_json(const nlohmann::json& j);
CostWeights weights_from_json(const nlohmann::json& j);
WorkloadSpec workload_from_json(const nlohmann::json& j);
nlohmann::json allocation_to_json(const Allocation& allocation);

}  // namespace mitest::alloc
