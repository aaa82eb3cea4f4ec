// SPDX-License-Identifier: Apache-2.0
//
// Command-line front-end: one subcommand per toolkit capability plus a
// composite pipeline. Exit codes: 0 success, 1 stage failure, 2 usage or
// input error.
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mitest/alloc/allocation.hpp"
#include "mitest/core/event_log.hpp"
#include "mitest/core/random.hpp"
#include "mitest/mcum/mcum.hpp"
#include "mitest/pipeline/stages.hpp"
#include "mitest/predict/fault_predictor.hpp"
#include "mitest/prio/prioritizer.hpp"
#include "mitest/profile/operational_profile.hpp"
#include "mitest/rv/monitor.hpp"
#include "mitest/rv/trace.hpp"
#include "mitest/sim/simulator.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mitest;

constexpr int kOk = 0;
constexpr int kStageFailure = 1;
constexpr int kInputError = 2;

// Parses a just-read input file; any failure is an input error carrying the
// path, which the CLI maps to exit status 2.
template <typename Parser>
auto parse_input(const fs::path& path, Parser parser) {
  try {
    return parser(pipeline::read_json_file(path));
  } catch (const pipeline::InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw pipeline::InputError(path.string() + ": " + e.what());
  }
}

core::UsageContext context_from_pairs(const std::vector<std::string>& pairs) {
  core::UsageContext ctx;
  ctx.device_variant = "any";
  ctx.os = "any";
  ctx.location = "any";
  for (const auto& pair : pairs) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos)
      throw pipeline::InputError("--context expects KEY=VALUE, got: " + pair);
    const std::string key = pair.substr(0, eq);
    const std::string value = pair.substr(eq + 1);
    if (key == "device")
      ctx.device_variant = value;
    else if (key == "os")
      ctx.os = value;
    else if (key == "location")
      ctx.location = value;
    else if (key == "pref")
      ctx.preference_tags.insert(value);
    else
      throw pipeline::InputError("unknown context key: " + key);
  }
  return ctx;
}

std::vector<core::InterfaceSpec> specs_from_sim_config(const fs::path& path) {
  const auto parsed = pipeline::read_json_file(path);
  std::vector<core::InterfaceSpec> specs;
  try {
    const auto config = sim::sim_config_from_json(parsed);
    for (const auto& service : config.services) specs.push_back(service.spec);
  } catch (const std::exception& e) {
    throw pipeline::InputError(path.string() + ": " + e.what());
  }
  return specs;
}

core::InterfaceSpec find_spec(const std::vector<core::InterfaceSpec>& specs,
                              const std::string& service_id) {
  for (const auto& spec : specs) {
    if (spec.service_id == service_id) return spec;
  }
  throw pipeline::InputError("no such service in sim config: " + service_id);
}

core::EventLog load_events(const fs::path& path) {
  const std::string text = pipeline::read_text_file(path);
  try {
    return core::parse_event_log(text);
  } catch (const core::ParseError& e) {
    throw pipeline::InputError(path.string() + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"usage-model testing toolkit for simulated IoT service networks"};
  app.require_subcommand(1);

  // --- simulate ---
  auto* cmd_simulate = app.add_subcommand("simulate", "run the network simulator");
  fs::path sim_config_path, sim_out_dir;
  std::optional<std::uint64_t> sim_seed;
  cmd_simulate->add_option("--config", sim_config_path, "sim config JSON")->required();
  cmd_simulate->add_option("--out", sim_out_dir, "output directory")->required();
  cmd_simulate->add_option("--seed", sim_seed, "override the config seed");

  // --- profile build / update ---
  auto* cmd_profile = app.add_subcommand("profile", "operational-profile operations");
  cmd_profile->require_subcommand(1);
  auto* cmd_profile_build = cmd_profile->add_subcommand("build", "build a profile from a log");
  fs::path pb_events, pb_sim_config, pb_out;
  std::int64_t pb_window = 0;
  double pb_alpha = 1.0;
  cmd_profile_build->add_option("--events", pb_events, "event log (JSON lines)")->required();
  cmd_profile_build->add_option("--sim-config", pb_sim_config, "sim config declaring features")
      ->required();
  cmd_profile_build->add_option("--out", pb_out, "profile JSON output")->required();
  cmd_profile_build->add_option("--window", pb_window, "window in ms (0 = unbounded)");
  cmd_profile_build->add_option("--alpha", pb_alpha, "smoothing pseudo-count");

  auto* cmd_profile_update = cmd_profile->add_subcommand("update", "fold a batch into a profile");
  fs::path pu_profile, pu_events, pu_out;
  std::int64_t pu_now = 0;
  cmd_profile_update->add_option("--profile", pu_profile, "existing profile JSON")->required();
  cmd_profile_update->add_option("--events", pu_events, "batch event log")->required();
  cmd_profile_update->add_option("--now", pu_now, "batch horizon timestamp (ms)")->required();
  cmd_profile_update->add_option("--out", pu_out, "profile JSON output")->required();

  // --- mcum build ---
  auto* cmd_mcum = app.add_subcommand("mcum", "usage-model operations");
  cmd_mcum->require_subcommand(1);
  auto* cmd_mcum_build = cmd_mcum->add_subcommand("build", "build and assign a usage model");
  fs::path mb_sim_config, mb_profile, mb_table, mb_out;
  std::string mb_service, mb_strategy = "uniform";
  double mb_alpha = 1.0;
  std::vector<std::string> mb_context;
  cmd_mcum_build->add_option("--sim-config", mb_sim_config, "sim config with service specs")
      ->required();
  cmd_mcum_build->add_option("--service", mb_service, "service id")->required();
  cmd_mcum_build->add_option("--strategy", mb_strategy, "uniform | direct | profile")
      ->check(CLI::IsMember({"uniform", "direct", "profile"}));
  cmd_mcum_build->add_option("--profile", mb_profile, "profile JSON (strategy=profile)");
  cmd_mcum_build->add_option("--table", mb_table, "direct table JSON (strategy=direct)");
  cmd_mcum_build->add_option("--alpha", mb_alpha, "smoothing pseudo-count");
  cmd_mcum_build->add_option("--context", mb_context,
                             "KEY=VALUE context filter (device/os/location/pref)");
  cmd_mcum_build->add_option("--out", mb_out, "model JSON output")->required();

  // --- testgen ---
  auto* cmd_testgen = app.add_subcommand("testgen", "generate random-walk tests");
  fs::path tg_mcum, tg_out, tg_suite;
  std::size_t tg_n = 0, tg_max_len = 0;
  std::uint64_t tg_seed = 0;
  cmd_testgen->add_option("--mcum", tg_mcum, "model JSON")->required();
  cmd_testgen->add_option("-n,--count", tg_n, "number of walks")->required();
  cmd_testgen->add_option("--seed", tg_seed, "generator seed");
  cmd_testgen->add_option("--max-len", tg_max_len, "walk length guard (0 = 10x states)");
  cmd_testgen->add_option("--out", tg_out, "walks JSON output")->required();
  cmd_testgen->add_option("--suite", tg_suite, "also emit a test suite JSON");

  // --- prioritize ---
  auto* cmd_prioritize = app.add_subcommand("prioritize", "order a suite by usage frequency");
  fs::path pr_suite, pr_profile, pr_out, pr_mcum_dir;
  std::string pr_scoring = "profile";
  std::vector<std::string> pr_context;
  cmd_prioritize->add_option("--suite", pr_suite, "suite JSON")->required();
  cmd_prioritize->add_option("--profile", pr_profile, "profile JSON");
  cmd_prioritize->add_option("--scoring", pr_scoring, "profile | stationary")
      ->check(CLI::IsMember({"profile", "stationary"}));
  cmd_prioritize->add_option("--mcum-dir", pr_mcum_dir,
                             "directory of <service>.json models (scoring=stationary)");
  cmd_prioritize->add_option("--context", pr_context, "KEY=VALUE context filter");
  cmd_prioritize->add_option("--out", pr_out, "priority JSON output")->required();

  // --- predict ---
  auto* cmd_predict = app.add_subcommand("predict", "suspicion scores from test outcomes");
  fs::path pd_mcum, pd_profile, pd_outcomes, pd_out;
  std::string pd_service;
  double pd_lambda = 0.8;
  std::size_t pd_top_k = 3;
  std::optional<double> pd_threshold;
  cmd_predict->add_option("--mcum", pd_mcum, "model JSON")->required();
  cmd_predict->add_option("--profile", pd_profile, "profile JSON")->required();
  cmd_predict->add_option("--outcomes", pd_outcomes, "outcomes JSON")->required();
  cmd_predict->add_option("--service", pd_service, "service id inside the outcomes file")
      ->required();
  cmd_predict->add_option("--lambda", pd_lambda, "failure-vs-usage weight");
  cmd_predict->add_option("--top-k", pd_top_k, "TopK selection size");
  cmd_predict->add_option("--threshold", pd_threshold, "Threshold selection cutoff");
  cmd_predict->add_option("--out", pd_out, "suspicion JSON output")->required();

  // --- monitor check ---
  auto* cmd_monitor = app.add_subcommand("monitor", "runtime-verification operations");
  cmd_monitor->require_subcommand(1);
  auto* cmd_monitor_check = cmd_monitor->add_subcommand("check", "check a log against a spec");
  fs::path mc_sim_config, mc_events, mc_out;
  std::string mc_service, mc_abstraction = "control";
  cmd_monitor_check->add_option("--sim-config", mc_sim_config, "sim config with service specs")
      ->required();
  cmd_monitor_check->add_option("--service", mc_service, "service id")->required();
  cmd_monitor_check->add_option("--events", mc_events, "event log (JSON lines)")->required();
  cmd_monitor_check->add_option("--abstraction", mc_abstraction, "control | control+data")
      ->check(CLI::IsMember({"control", "control+data"}));
  cmd_monitor_check->add_option("--out", mc_out, "report JSON output")->required();

  // --- allocate ---
  auto* cmd_allocate = app.add_subcommand("allocate", "place test VMs on the network graph");
  fs::path al_graph, al_workload, al_out;
  std::string al_solver = "heuristic";
  std::uint64_t al_seed = 0;
  std::size_t al_iterations = 200;
  cmd_allocate->add_option("--graph", al_graph, "network graph JSON")->required();
  cmd_allocate->add_option("--workload", al_workload, "workload JSON")->required();
  cmd_allocate->add_option("--solver", al_solver, "exact | heuristic")
      ->check(CLI::IsMember({"exact", "heuristic"}));
  cmd_allocate->add_option("--seed", al_seed, "local-search seed");
  cmd_allocate->add_option("--iterations", al_iterations, "non-improving proposals before stop");
  cmd_allocate->add_option("--out", al_out, "allocation JSON output")->required();

  // --- pipeline ---
  auto* cmd_pipeline = app.add_subcommand("pipeline", "run every stage end to end");
  fs::path pl_config, pl_out_dir;
  std::optional<std::uint64_t> pl_seed;
  cmd_pipeline->add_option("--config", pl_config, "pipeline config JSON")->required();
  cmd_pipeline->add_option("--out", pl_out_dir, "artifact directory")->required();
  cmd_pipeline->add_option("--seed", pl_seed, "override the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (cmd_simulate->parsed()) {
      auto config =
          parse_input(sim_config_path, [](const json& j) { return sim::sim_config_from_json(j); });
      if (sim_seed) config.seed = *sim_seed;
      auto [log, report] = sim::run_simulation(config);
      pipeline::write_text_file(sim_out_dir / "events.jsonl", core::serialize_event_log(log));
      pipeline::write_json_file(sim_out_dir / "sim_report.json",
                                sim::run_report_to_json(report));
      std::cout << "simulate: " << log.events.size() << " events\n";
    } else if (cmd_profile_build->parsed()) {
      const auto specs = specs_from_sim_config(pb_sim_config);
      const auto log = load_events(pb_events);
      profile::ProfileConfig config{pb_window, pb_alpha};
      const auto prof = profile::build_profile(log, specs, config);
      pipeline::write_json_file(pb_out, profile::profile_to_json(prof));
      std::cout << "profile: " << prof.retained().size() << " retained events\n";
    } else if (cmd_profile_update->parsed()) {
      const auto prof = profile::profile_from_json(pipeline::read_json_file(pu_profile));
      const auto batch = load_events(pu_events);
      const auto updated = prof.updated(batch, pu_now);
      pipeline::write_json_file(pu_out, profile::profile_to_json(updated));
      std::cout << "profile: " << updated.retained().size() << " retained events\n";
    } else if (cmd_mcum_build->parsed()) {
      const auto spec = find_spec(specs_from_sim_config(mb_sim_config), mb_service);
      const auto structure = mcum::build_structure(spec);
      mcum::AssignmentStrategy strategy = mcum::Uniform{};
      profile::OperationalProfile prof;
      if (mb_strategy == "profile") {
        if (mb_profile.empty())
          throw pipeline::InputError("--strategy profile requires --profile");
        prof = parse_input(mb_profile, [](const json& j) { return profile::profile_from_json(j); });
        std::optional<core::UsageContext> context;
        if (!mb_context.empty()) context = context_from_pairs(mb_context);
        strategy = mcum::FromProfile{&prof, context, mb_alpha};
      } else if (mb_strategy == "direct") {
        if (mb_table.empty()) throw pipeline::InputError("--strategy direct requires --table");
        strategy =
            parse_input(mb_table, [](const json& j) { return mcum::direct_table_from_json(j); });
      }
      const auto model = mcum::assign_probabilities(structure, strategy);
      pipeline::write_json_file(mb_out, mcum::mcum_to_json(model));
      std::cout << "mcum: " << model.states.size() << " states, " << model.arcs.size()
                << " arcs\n";
    } else if (cmd_testgen->parsed()) {
      const auto model =
          parse_input(tg_mcum, [](const json& j) { return mcum::mcum_from_json(j); });
      const auto walks = mcum::generate_tests(model, tg_n, tg_seed, tg_max_len);
      json walks_json = json::array();
      for (const auto& walk : walks) walks_json.push_back(mcum::walk_to_json(walk));
      pipeline::write_json_file(tg_out,
                                json{{"service", model.service_id}, {"walks", walks_json}});
      if (!tg_suite.empty()) {
        prio::TestSuite suite;
        for (std::size_t i = 0; i < walks.size(); ++i) {
          prio::TestCaseEntry entry;
          char buf[16];
          std::snprintf(buf, sizeof(buf), "t%03zu", i);
          entry.test_id = model.service_id + "/" + buf;
          entry.service_id = model.service_id;
          entry.covered_features.insert(walks[i].stimuli.begin(), walks[i].stimuli.end());
          suite.tests.push_back(std::move(entry));
        }
        pipeline::write_json_file(tg_suite, prio::suite_to_json(suite));
      }
      std::cout << "testgen: " << walks.size() << " walks\n";
    } else if (cmd_prioritize->parsed()) {
      const auto suite =
          parse_input(pr_suite, [](const json& j) { return prio::suite_from_json(j); });
      std::vector<std::string> order;
      if (pr_scoring == "stationary") {
        if (pr_mcum_dir.empty())
          throw pipeline::InputError("--scoring stationary requires --mcum-dir");
        std::map<std::string, std::map<std::string, double>> weights;
        for (const auto& test : suite.tests) {
          if (weights.count(test.service_id) > 0) continue;
          const auto model = parse_input(pr_mcum_dir / (test.service_id + ".json"),
                                         [](const json& j) { return mcum::mcum_from_json(j); });
          weights[test.service_id] = mcum::stationary_feature_weights(model);
        }
        order = prio::prioritize_by_weights(suite, weights);
      } else {
        if (pr_profile.empty())
          throw pipeline::InputError("--scoring profile requires --profile");
        const auto prof =
            parse_input(pr_profile, [](const json& j) { return profile::profile_from_json(j); });
        std::optional<core::UsageContext> context;
        if (!pr_context.empty()) context = context_from_pairs(pr_context);
        order = prio::prioritize(suite, prof, context);
      }
      json order_json = json::array();
      for (const auto& id : order) order_json.push_back(id);
      pipeline::write_json_file(pr_out, order_json);
      std::cout << "prioritize: " << order.size() << " tests\n";
    } else if (cmd_predict->parsed()) {
      const auto model =
          parse_input(pd_mcum, [](const json& j) { return mcum::mcum_from_json(j); });
      const auto prof =
          parse_input(pd_profile, [](const json& j) { return profile::profile_from_json(j); });
      const auto outcomes_json = pipeline::read_json_file(pd_outcomes);
      std::vector<predict::TestOutcome> outcomes;
      try {
        for (const auto& row : outcomes_json.at("services").at(pd_service)) {
          predict::TestOutcome outcome;
          outcome.walk = mcum::walk_from_json(row.at("walk"));
          outcome.verdict = row.at("verdict").get<std::string>() == "fail"
                                ? predict::Verdict::Fail
                                : predict::Verdict::Pass;
          outcomes.push_back(std::move(outcome));
        }
      } catch (const json::exception& e) {
        throw pipeline::InputError(pd_outcomes.string() + ": " + e.what());
      }
      const auto report = predict::predict_suspicion(model, prof, outcomes, pd_lambda);
      predict::SelectionPolicy policy = predict::TopK{pd_top_k};
      if (pd_threshold) policy = predict::Threshold{*pd_threshold};
      const auto selected = predict::select_for_rv(report, policy);
      pipeline::write_json_file(pd_out, predict::suspicion_report_to_json(report, selected));
      std::cout << "predict: " << selected.size() << " states selected\n";
    } else if (cmd_monitor_check->parsed()) {
      const auto spec = find_spec(specs_from_sim_config(mc_sim_config), mc_service);
      const auto abstraction = mc_abstraction == "control" ? rv::Abstraction::ControlOnly
                                                           : rv::Abstraction::ControlAndData;
      const auto monitor = rv::derive_monitor(spec, abstraction);
      const auto log = load_events(mc_events);
      const auto traces = rv::extract_service_traces(log);
      json sessions = json::array();
      std::int64_t violations = 0;
      for (const auto& trace : traces) {
        if (trace.service_id != mc_service) continue;
        const auto result = rv::check_trace(monitor, trace.steps);
        if (!result.ok) violations += static_cast<std::int64_t>(result.violations.size());
        sessions.push_back(json{{"session", trace.session_index},
                                {"completed", trace.completed},
                                {"result", rv::violations_to_json(result)}});
      }
      pipeline::write_json_file(
          mc_out, json{{"service", mc_service},
                       {"abstraction", mc_abstraction},
                       {"sessions", std::move(sessions)},
                       {"violations", violations}});
      std::cout << "monitor: " << violations << " violations\n";
    } else if (cmd_allocate->parsed()) {
      const auto graph_json = pipeline::read_json_file(al_graph);
      const auto graph =
          parse_input(al_graph, [](const json& j) { return alloc::graph_from_json(j); });
      const auto workload =
          parse_input(al_workload, [](const json& j) { return alloc::workload_from_json(j); });
      alloc::CostWeights weights;
      if (graph_json.contains("weights"))
        weights = parse_input(al_graph,
                              [](const json& j) { return alloc::weights_from_json(j.at("weights")); });
      const auto allocation =
          al_solver == "exact"
              ? alloc::allocate_exact(graph, workload, weights)
              : alloc::allocate_heuristic(graph, workload, weights, al_seed, al_iterations);
      pipeline::write_json_file(al_out, alloc::allocation_to_json(allocation));
      std::cout << "allocate: cost " << allocation.cost << "\n";
    } else if (cmd_pipeline->parsed()) {
      auto config =
          pipeline::pipeline_config_from_json(pipeline::read_json_file(pl_config),
                                              pl_config.parent_path());
      if (pl_seed) config.seed = *pl_seed;
      pipeline::run_pipeline(config, pl_out_dir, std::cout);
    }
  } catch (const pipeline::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const core::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kStageFailure;
  }
  return kOk;
}
