// SPDX-License-Identifier: Apache-2.0
#include "mitest/pipeline/stages.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "mitest/alloc/allocation.hpp"
#include "mitest/core/event_log.hpp"
#include "mitest/core/random.hpp"
#include "mitest/mcum/mcum.hpp"
#include "mitest/prio/prioritizer.hpp"
#include "mitest/profile/operational_profile.hpp"
#include "mitest/rv/trace.hpp"
#include "mitest/sim/simulator.hpp"

namespace mitest::pipeline {

using nlohmann::json;

nlohmann::json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json parsed = json::parse(text, nullptr, false);
  if (parsed.is_discarded()) throw InputError("invalid JSON in " + path.string());
  return parsed;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StageError("write", "cannot write " + path.string());
  out << content;
  if (!out) throw StageError("write", "failed writing " + path.string());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw InputError("pipeline config must be a JSON object");
  auto resolve = [&base_dir](const std::string& raw) {
    std::filesystem::path p(raw);
    return p.is_absolute() ? p : base_dir / p;
  };
  PipelineConfig config;
  try {
    config.sim_config_path = resolve(j.at("sim_config").get<std::string>());
    config.graph_path = resolve(j.at("graph").get<std::string>());
    config.workload_path = resolve(j.at("workload").get<std::string>());
    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("lambda")) config.lambda = j.at("lambda").get<double>();
    if (j.contains("top_k")) config.top_k = j.at("top_k").get<std::size_t>();
    if (j.contains("threshold")) config.threshold = j.at("threshold").get<double>();
    if (j.contains("strategy")) config.strategy = j.at("strategy").get<std::string>();
    if (j.contains("direct_tables")) {
      for (const auto& [service, path] : j.at("direct_tables").items())
        config.direct_tables[service] = resolve(path.get<std::string>());
    }
    if (j.contains("tests_per_service"))
      config.tests_per_service = j.at("tests_per_service").get<std::size_t>();
    if (j.contains("window_ms")) config.window_ms = j.at("window_ms").get<std::int64_t>();
    if (j.contains("alpha")) config.alpha = j.at("alpha").get<double>();
    if (j.contains("iterations")) config.iterations = j.at("iterations").get<std::size_t>();
    if (j.contains("scoring")) config.scoring = j.at("scoring").get<std::string>();
  } catch (const json::exception& e) {
    throw InputError(std::string("pipeline config: ") + e.what());
  }
  if (config.strategy != "uniform" && config.strategy != "direct" &&
      config.strategy != "profile")
    throw InputError("unknown strategy: " + config.strategy);
  if (config.scoring != "profile" && config.scoring != "stationary")
    throw InputError("unknown scoring: " + config.scoring);
  if (config.lambda < 0.0 || config.lambda > 1.0)
    throw InputError("lambda must lie in [0, 1]");
  if (config.window_ms < 0) throw InputError("window_ms must be non-negative");
  if (config.alpha < 0.0) throw InputError("alpha must be non-negative");
  return config;
}

predict::Verdict verdict_of(const rv::CheckResult& result) {
  for (const auto& v : result.violations) {
    if (v.kind == rv::ViolationKind::IllegalTransition ||
        v.kind == rv::ViolationKind::DataPredicateFail)
      return predict::Verdict::Fail;
  }
  return predict::Verdict::Pass;
}

namespace {

std::string test_id_of(const std::string& service_id, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "t%03zu", index);
  return service_id + "/" + buf;
}

}  // namespace

void run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir,
                  std::ostream& diag) {
  // Inputs load before any stage runs so bad files fail fast with status 2.
  const json sim_json = read_json_file(config.sim_config_path);
  const json graph_json = read_json_file(config.graph_path);
  const json workload_json = read_json_file(config.workload_path);
  std::map<std::string, json> direct_jsons;
  for (const auto& [service, path] : config.direct_tables)
    direct_jsons[service] = read_json_file(path);

  std::filesystem::create_directories(out_dir);

  // --- simulate ---
  core::EventLog log;
  sim::SimConfig sim_config;
  sim::RunReport report;
  try {
    sim_config = sim::sim_config_from_json(sim_json);
    sim_config.seed = core::derive_seed(config.seed, "simulate");
    auto [sim_log, sim_report] = sim::run_simulation(sim_config);
    log = std::move(sim_log);
    report = std::move(sim_report);
    write_text_file(out_dir / "events.jsonl", core::serialize_event_log(log));
    write_json_file(out_dir / "sim_report.json", sim::run_report_to_json(report));
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("simulate", e.what());
  }
  diag << "simulate: " << log.events.size() << " events\n";

  // --- profile ---
  profile::OperationalProfile prof;
  std::vector<core::InterfaceSpec> specs;
  try {
    for (const auto& service : sim_config.services) specs.push_back(service.spec);
    profile::ProfileConfig profile_config;
    profile_config.window_ms = config.window_ms;
    profile_config.smoothing_alpha = config.alpha;
    prof = profile::build_profile(log, specs, profile_config);
    write_json_file(out_dir / "profile.json", profile::profile_to_json(prof));
  } catch (const std::exception& e) {
    throw StageError("profile", e.what());
  }
  diag << "profile: " << prof.retained().size() << " retained events\n";

  // --- mcum ---
  std::map<std::string, mcum::Mcum> models;
  try {
    for (const auto& spec : specs) {
      mcum::Mcum structure = mcum::build_structure(spec);
      mcum::AssignmentStrategy strategy = mcum::Uniform{};
      if (config.strategy == "profile") {
        strategy = mcum::FromProfile{&prof, std::nullopt, config.alpha};
      } else if (config.strategy == "direct") {
        auto it = direct_jsons.find(spec.service_id);
        if (it == direct_jsons.end())
          throw std::invalid_argument("no direct table for service " + spec.service_id);
        strategy = mcum::direct_table_from_json(it->second);
      }
      mcum::Mcum assigned = mcum::assign_probabilities(structure, strategy);
      auto validation = mcum::validate_mcum(assigned);
      if (!validation.ok())
        throw std::invalid_argument("model for " + spec.service_id + " invalid: " +
                                    validation.summary());
      write_json_file(out_dir / "mcum" / (spec.service_id + ".json"),
                      mcum::mcum_to_json(assigned));
      models.emplace(spec.service_id, std::move(assigned));
    }
  } catch (const std::exception& e) {
    throw StageError("mcum", e.what());
  }
  diag << "mcum: " << models.size() << " models\n";

  // --- testgen ---
  std::map<std::string, std::vector<mcum::WalkSequence>> walks;
  prio::TestSuite suite;
  try {
    json tests_json = json::object();
    for (const auto& [service_id, model] : models) {
      auto generated = mcum::generate_tests(
          model, config.tests_per_service, core::derive_seed(config.seed, "testgen/" + service_id));
      json per_service = json::array();
      for (std::size_t i = 0; i < generated.size(); ++i) {
        per_service.push_back(mcum::walk_to_json(generated[i]));
        prio::TestCaseEntry entry;
        entry.test_id = test_id_of(service_id, i);
        entry.service_id = service_id;
        entry.covered_features.insert(generated[i].stimuli.begin(), generated[i].stimuli.end());
        if (!entry.covered_features.empty()) suite.tests.push_back(std::move(entry));
      }
      tests_json[service_id] = std::move(per_service);
      walks.emplace(service_id, std::move(generated));
    }
    write_json_file(out_dir / "tests.json", json{{"services", std::move(tests_json)}});
    write_json_file(out_dir / "suite.json", prio::suite_to_json(suite));
  } catch (const std::exception& e) {
    throw StageError("testgen", e.what());
  }
  diag << "testgen: " << suite.tests.size() << " tests\n";

  // --- prioritize ---
  try {
    std::vector<std::string> order;
    if (config.scoring == "stationary") {
      std::map<std::string, std::map<std::string, double>> weights;
      for (const auto& [service_id, model] : models)
        weights[service_id] = mcum::stationary_feature_weights(model);
      order = prio::prioritize_by_weights(suite, weights);
    } else {
      order = prio::prioritize(suite, prof, std::nullopt);
    }
    json order_json = json::array();
    for (const auto& id : order) order_json.push_back(id);
    write_json_file(out_dir / "priority.json", order_json);
  } catch (const std::exception& e) {
    throw StageError("prioritize", e.what());
  }
  diag << "prioritize: done\n";

  // --- predict ---
  std::set<std::string> selected_services;
  try {
    json outcomes_json = json::object();
    json suspicion_json = json::object();
    predict::SuspicionReport service_report;
    service_report.lambda = config.lambda;
    for (const auto& [service_id, model] : models) {
      const core::InterfaceSpec* spec = nullptr;
      for (const auto& s : specs) {
        if (s.service_id == service_id) spec = &s;
      }
      const auto monitor = rv::derive_monitor(*spec, rv::Abstraction::ControlAndData);
      std::mt19937_64 rng(core::derive_seed(config.seed, "predict/" + service_id));
      std::vector<predict::TestOutcome> outcomes;
      json outcome_rows = json::array();
      const auto& service_walks = walks.at(service_id);
      for (std::size_t i = 0; i < service_walks.size(); ++i) {
        const auto execution =
            sim::execute_walk(*spec, sim_config.faults, service_walks[i].stimuli, rng);
        const auto check = rv::check_trace(monitor, execution.trace);
        predict::TestOutcome outcome;
        outcome.walk = service_walks[i];
        outcome.verdict = verdict_of(check);
        outcomes.push_back(outcome);
        json row{{"test_id", test_id_of(service_id, i)},
                 {"verdict", outcome.verdict == predict::Verdict::Fail ? "fail" : "pass"},
                 {"walk", mcum::walk_to_json(service_walks[i])}};
        if (execution.fault_index) row["fault_index"] = *execution.fault_index;
        if (!check.violations.empty())
          row["violation"] = rv::to_string(check.violations.front().kind);
        outcome_rows.push_back(std::move(row));
      }
      const auto state_report =
          predict::predict_suspicion(model, prof, outcomes, config.lambda);
      service_report.scores[service_id] = predict::service_suspicion(state_report);
      const auto selected_states =
          predict::select_for_rv(state_report, predict::TopK{config.top_k});
      suspicion_json[service_id] =
          predict::suspicion_report_to_json(state_report, selected_states);
      outcomes_json[service_id] = std::move(outcome_rows);
    }
    for (const auto& [service_id, _] : service_report.scores)
      service_report.ranked.push_back(service_id);
    std::sort(service_report.ranked.begin(), service_report.ranked.end(),
              [&service_report](const std::string& a, const std::string& b) {
                const double sa = service_report.scores.at(a);
                const double sb = service_report.scores.at(b);
                if (sa != sb) return sa > sb;
                return a < b;
              });
    predict::SelectionPolicy policy = predict::TopK{config.top_k};
    if (config.threshold) policy = predict::Threshold{*config.threshold};
    selected_services = predict::select_for_rv(service_report, policy);

    json ranking = json::array();
    for (const auto& id : service_report.ranked) ranking.push_back(id);
    json scores = json::object();
    for (const auto& [id, score] : service_report.scores) scores[id] = score;
    json selected = json::array();
    for (const auto& id : selected_services) selected.push_back(id);
    json policy_json = config.threshold
                           ? json{{"threshold", *config.threshold}}
                           : json{{"top_k", config.top_k}};
    write_json_file(out_dir / "outcomes.json", json{{"services", std::move(outcomes_json)}});
    write_json_file(out_dir / "suspicion.json",
                    json{{"services", std::move(suspicion_json)},
                         {"service_scores", std::move(scores)},
                         {"service_ranking", std::move(ranking)},
                         {"selected_services", std::move(selected)},
                         {"lambda", config.lambda},
                         {"policy", std::move(policy_json)}});
  } catch (const std::exception& e) {
    throw StageError("predict", e.what());
  }
  diag << "predict: " << selected_services.size() << " services selected for rv\n";

  // --- monitor ---
  try {
    const auto traces = rv::extract_service_traces(log);
    json services_json = json::object();
    for (const auto& service_id : selected_services) {
      const core::InterfaceSpec* spec = nullptr;
      for (const auto& s : specs) {
        if (s.service_id == service_id) spec = &s;
      }
      if (spec == nullptr) continue;
      const auto monitor = rv::derive_monitor(*spec, rv::Abstraction::ControlAndData);
      json sessions = json::array();
      std::int64_t violation_count = 0;
      for (const auto& trace : traces) {
        if (trace.service_id != service_id) continue;
        const auto result = rv::check_trace(monitor, trace.steps);
        if (!result.ok) violation_count += static_cast<std::int64_t>(result.violations.size());
        sessions.push_back(json{{"session", trace.session_index},
                                {"completed", trace.completed},
                                {"result", rv::violations_to_json(result)}});
      }
      services_json[service_id] =
          json{{"sessions", std::move(sessions)}, {"violations", violation_count}};
    }
    write_json_file(out_dir / "monitor_report.json",
                    json{{"services", std::move(services_json)}});
  } catch (const std::exception& e) {
    throw StageError("monitor", e.what());
  }
  diag << "monitor: done\n";

  // --- allocate ---
  try {
    const auto graph = alloc::graph_from_json(graph_json);
    const auto workload = alloc::workload_from_json(workload_json);
    alloc::CostWeights weights;
    if (graph_json.contains("weights"))
      weights = alloc::weights_from_json(graph_json.at("weights"));
    const auto allocation = alloc::allocate_heuristic(
        graph, workload, weights, core::derive_seed(config.seed, "allocate"),
        config.iterations);
    write_json_file(out_dir / "allocation.json", alloc::allocation_to_json(allocation));
    diag << "allocate: cost " << allocation.cost << "\n";
  } catch (const std::exception& e) {
    throw StageError("allocate", e.what());
  }
}

}  // namespace mitest::pipeline
