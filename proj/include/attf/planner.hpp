#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <unordered_set>
#include <vector>

#include "attf/grid.hpp"
#include "attf/guidance.hpp"
#include "attf/token.hpp"

namespace attf {

struct SearchStats {
  std::int64_t expanded = 0;
  bool success = false;
  int path_length = 0;  // timesteps from start to arrival
};

// What must stay free after the agent reaches the goal.
enum class GoalHold : std::uint8_t {
  None,    // intermediate goal, the path continues
  Buffer,  // goal at arrival + 1
  Rest,    // goal forever after arrival
};

struct PlanOptions {
  std::int64_t max_iters = 0;  // 0 -> 20 * passable cells
  int horizon = -1;            // absolute last timestep; -1 -> start + 4(H+W) + pending reservations
  GoalHold hold = GoalHold::Buffer;
};

struct PlanResult {
  std::optional<Path> path;  // empty on deadlock
  SearchStats stats;
};

std::int64_t default_max_iters(const GridMap& map);

// Space-time A* from (start, start_t) to goal against every reservation except self's.
PlanResult plan(Cell start, Cell goal, int start_t, const Token& token, AgentId self, const GuidanceMap& guidance,
                const PlanOptions& options = {});

struct PlanTaskResult {
  bool committed = false;
  SearchStats stats;  // summed over both legs
};

// Plans agent -> pickup -> delivery from now and commits it. An agent that already carries
// the task plans only the delivery leg.
PlanTaskResult plan_task(AgentId agent, const Task& task, Token& token, const GuidancePair& guidance,
                         std::int64_t max_iters);

enum class IdleAction : std::uint8_t { Continue, StayPut, RouteTo, Recovery, Yield, Wait };

const char* to_string(IdleAction action);

struct IdleContext {
  std::unordered_set<int> open_endpoints;  // pickups and deliveries of released unassigned tasks
  std::int64_t max_iters = 0;
  int recovery_radius = 5;
  int max_endpoint_tries = 8;
  int max_recovery_tries = 8;
};

struct IdleResult {
  IdleAction action = IdleAction::StayPut;
  SearchStats stats;
};

// Keeps a task-less agent out of everyone's way: stay if safe, else park at the nearest free
// non-task endpoint, else recover to a random nearby cell. If that fails too, the agents planned
// through its cell are cut back and moved aside before one more attempt (Yield); the last
// resort is waiting in place.
IdleResult handle_idle(AgentId agent, Token& token, const IdleContext& context, std::mt19937_64& rng);

// Routes the agent to a random reachable free cell near it; doubles the radius on failure.
// stats.success reports whether a path was committed.
SearchStats deadlock_recovery(AgentId agent, Token& token, const IdleContext& context,
                                             std::mt19937_64& rng);

}  // namespace attf
