#pragma once

#include <optional>
#include <vector>

#include "attf/grid.hpp"
#include "attf/instance_io.hpp"

namespace attf {

struct DelayedEntry {
  AgentId agent = kNone;
  TaskId task = kNone;
};

struct IdleEntry {
  AgentId agent = kNone;
  Cell location;
};

struct OpenTask {
  TaskId task = kNone;
  Cell pickup;
};

struct QueueEntry {
  AgentId agent = kNone;
  std::optional<TaskId> task;
  bool delayed = false;

  bool operator==(const QueueEntry&) const = default;
};

using AssignmentQueue = std::vector<QueueEntry>;

// Delayed agents keep their tasks and go first (ascending id). Idle agents then take tasks
// greedily by ascending heuristic(agent, pickup), ties by (agent id, task id). Leftover idle
// agents get no task.
AssignmentQueue assign(const std::vector<DelayedEntry>& delayed, const std::vector<IdleEntry>& idle,
                       const std::vector<OpenTask>& unassigned);

}  // namespace attf
