#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "attf/instance_io.hpp"
#include "attf/token.hpp"

namespace attf {

struct TaskRecord {
  TaskId id = 0;
  int release = 0;
  AgentId agent = kNone;
  int assigned_at = -1;
  int picked_up_at = -1;
  int completed_at = -1;
};

struct Metrics {
  std::optional<double> service_time_mean;  // absent when nothing completed
  double runtime_per_timestep_ms = 0.0;
  double throughput = 0.0;
  double total_expanded_millions = 0.0;
  std::int64_t expanded = 0;
  int completed = 0;
  int total_tasks = 0;
  int elapsed = 0;
  bool incomplete = false;
  std::int64_t delays = 0;
  std::int64_t truncations = 0;
  std::int64_t recoveries = 0;
  std::int64_t yields = 0;
  std::int64_t forced_waits = 0;
  std::int64_t plan_failures = 0;
  std::vector<TaskRecord> records;
};

struct SimulationResult {
  Metrics metrics;
  RunConfig config;
  std::uint64_t seed = 0;
  std::vector<AgentState> final_agents;
  std::vector<std::string> events;
};

struct RunHooks {
  // Called after every advance with the post-move token and task table.
  std::function<void(const Token&, const std::vector<Task>&)> after_step;
  std::ostream* trace = nullptr;
  bool log_events = false;
};

// Loads the instance named by the config and simulates it.
SimulationResult run(const RunConfig& config, const RunHooks& hooks = {});
SimulationResult run(const Instance& instance, const RunConfig& config, const RunHooks& hooks = {});

// Same loop with random fresh tasks handed to every agent that becomes free.
SimulationResult random_assign_baseline(const RunConfig& config, const RunHooks& hooks = {});
SimulationResult random_assign_baseline(const Instance& instance, const RunConfig& config,
                                        const RunHooks& hooks = {});

int default_horizon(const GridMap& map, int n_agents);

std::string metrics_json(const SimulationResult& result);

struct MatrixRow {
  std::string label;
  RunConfig config;
  int runs = 0;
  int failures = 0;
  int incomplete = 0;
  double st = 0.0;  // mean over runs that completed at least one task
  double tp = 0.0;
  double rt = 0.0;
  double iters = 0.0;
  std::vector<std::string> errors;
};

struct MatrixCell {
  std::string label;
  RunConfig config;
};

// Runs every cell over `seeds` derived seeds; run k of a cell uses derive_seed(cell.config.seed, k).
std::vector<MatrixRow> run_matrix(const std::vector<MatrixCell>& cells, int seeds = 25, int threads = 0);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

std::string matrix_csv(const std::vector<MatrixRow>& rows);

}  // namespace attf
