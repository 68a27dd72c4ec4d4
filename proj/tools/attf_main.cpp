#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "attf/grid.hpp"
#include "attf/instance_io.hpp"
#include "attf/simulator.hpp"

namespace {

using attf::RunConfig;

int cmd_run(const RunConfig& config, bool baseline) {
  std::ofstream trace;
  attf::RunHooks hooks;
  if (!config.trace_out.empty()) {
    trace.open(config.trace_out);
    if (!trace) throw std::runtime_error("cannot write " + config.trace_out);
    hooks.trace = &trace;
  }
  const auto result = baseline ? attf::random_assign_baseline(config, hooks) : attf::run(config, hooks);
  const auto json = attf::metrics_json(result);
  if (!config.metrics_out.empty()) attf::write_text_file(config.metrics_out, json + "\n");
  std::cout << json << "\n";
  return result.metrics.incomplete ? 3 : 0;
}

std::string frequency_text(const nlohmann::json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

int cmd_bench(const std::string& matrix_path, const std::string& csv_out, int threads) {
  const auto spec = nlohmann::json::parse(attf::read_text_file(matrix_path));
  const int seeds = spec.value("seeds", 25);
  const int n_tasks = spec.value("tasks", 500);
  const std::uint64_t master = spec.value("seed", 1ULL);
  std::vector<attf::MatrixCell> cells;
  for (const auto& map : spec.at("maps")) {
    for (const auto& agents : spec.at("agents")) {
      for (const auto& freq : spec.at("freqs")) {
        for (const auto& p : spec.value("delay_p", nlohmann::json::array({0.0}))) {
          RunConfig cfg;
          cfg.map_path = map.get<std::string>();
          cfg.n_agents = agents.get<int>();
          cfg.frequency = attf::Frequency::parse(frequency_text(freq));
          cfg.gen_tasks = n_tasks;
          cfg.delay_p = p.get<double>();
          cfg.seed = master;
          cfg.max_iters = spec.value("max_iters", 0LL);
          cfg.guidance = attf::parse_guidance_spec(spec.value("guidance", std::string("zero")));
          std::ostringstream label;
          label << cfg.map_path << "|m=" << cfg.n_agents << "|f=" << cfg.frequency.to_string() << "|p=" << cfg.delay_p;
          cells.push_back({label.str(), cfg});
        }
      }
    }
  }
  const auto rows = attf::run_matrix(cells, seeds, threads);
  const auto csv = attf::matrix_csv(rows);
  if (!csv_out.empty()) attf::write_text_file(csv_out, csv);
  std::cout << csv;
  for (const auto& r : rows)
    for (const auto& e : r.errors) std::cerr << r.label << ": " << e << "\n";
  return 0;
}

int cmd_check(const std::string& map_path, int agents) {
  const auto map = attf::parse_map(attf::read_text_file(map_path));
  const auto report = attf::check_well_formed(map, agents);
  std::cout << map.width() << "x" << map.height() << ", " << map.task_endpoints().size() << " task endpoints, "
            << map.non_task_endpoints().size() << " non-task endpoints\n";
  if (report.ok) {
    std::cout << "well-formed for " << agents << " agents\n";
    return 0;
  }
  const std::size_t shown = std::min<std::size_t>(report.violations.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) std::cout << "violation: " << report.violations[i] << "\n";
  if (report.violations.size() > shown) std::cout << "... " << report.violations.size() - shown << " more\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifelong multi-agent pickup-and-delivery engine"};
  app.require_subcommand(1);

  RunConfig config;
  std::string freq_text = "1";
  std::string guidance_text = "zero";
  std::string termination = "drain";
  bool baseline = false;
  bool lenient = false;

  auto* run = app.add_subcommand("run", "simulate one instance");
  run->add_option("--map", config.map_path, "map file")->required();
  auto* tasks_opt = run->add_option("--tasks", config.task_path, "task file");
  auto* gen_opt = run->add_option("--gen-tasks", config.gen_tasks, "number of generated tasks");
  tasks_opt->excludes(gen_opt);
  run->add_option("--freq", freq_text, "tasks per timestep for generated tasks (decimal or a/b)");
  run->add_option("--agents", config.n_agents, "number of agents")->check(CLI::PositiveNumber);
  run->add_option("--delay-p", config.delay_p, "per-step delay probability")->check(CLI::Range(0.0, 1.0));
  run->add_option("--seed", config.seed, "random seed");
  run->add_option("--guidance", guidance_text, "zero | file:DIR | remote:CMD");
  run->add_option("--max-iters", config.max_iters, "search budget per leg (0 = 20|V|)");
  run->add_option("--recovery-radius", config.recovery_radius, "deadlock recovery radius");
  run->add_option("--horizon", config.horizon, "timestep cap (0 = default in drain mode)");
  run->add_option("--termination", termination, "drain | fixed")->check(CLI::IsMember({"drain", "fixed"}));
  run->add_flag("--random-assign", baseline, "random fresh task per free agent (needs --termination fixed)");
  run->add_flag("--lenient", lenient, "truncate instead of aborting on internal conflicts");
  run->add_flag("--require-well-formed", config.require_well_formed, "refuse instances that are not well-formed");
  run->add_option("--metrics-out", config.metrics_out, "metrics JSON path");
  run->add_option("--trace-out", config.trace_out, "replay trace path");

  std::string matrix_path;
  std::string csv_out;
  int threads = 0;
  auto* bench = app.add_subcommand("bench", "run an experiment matrix");
  bench->add_option("--matrix", matrix_path, "matrix JSON file")->required();
  bench->add_option("--csv-out", csv_out, "results CSV path");
  bench->add_option("--threads", threads, "worker threads (0 = hardware)");

  std::string check_map;
  int check_agents = 1;
  auto* check = app.add_subcommand("check", "well-formedness check");
  check->add_option("--map", check_map, "map file")->required();
  check->add_option("--agents", check_agents, "number of agents");

  std::string warehouse_out;
  auto* warehouse = app.add_subcommand("warehouse-map", "write the built-in small warehouse map");
  warehouse->add_option("--out", warehouse_out, "output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      config.frequency = attf::Frequency::parse(freq_text);
      config.guidance = attf::parse_guidance_spec(guidance_text);
      config.termination =
          termination == "fixed" ? attf::TerminationMode::FixedHorizon : attf::TerminationMode::DrainTasks;
      config.assignment = baseline ? attf::AssignmentMode::RandomBaseline : attf::AssignmentMode::PriorityGuided;
      config.strict = !lenient;
      return cmd_run(config, baseline);
    }
    if (*bench) return cmd_bench(matrix_path, csv_out, threads);
    if (*check) return cmd_check(check_map, check_agents);
    if (*warehouse) {
      attf::write_text_file(warehouse_out, attf::serialize_map(attf::make_small_warehouse()));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
