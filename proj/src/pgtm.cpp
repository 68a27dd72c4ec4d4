#include "attf/pgtm.hpp"

#include <algorithm>
#include <tuple>
#include <unordered_set>

namespace attf {

AssignmentQueue assign(const std::vector<DelayedEntry>& delayed, const std::vector<IdleEntry>& idle,
                       const std::vector<OpenTask>& unassigned) {
  AssignmentQueue queue;
  queue.reserve(delayed.size() + idle.size());

  auto sorted_delayed = delayed;
  std::sort(sorted_delayed.begin(), sorted_delayed.end(),
            [](const DelayedEntry& a, const DelayedEntry& b) { return a.agent < b.agent; });
  for (const auto& d : sorted_delayed) queue.push_back({d.agent, d.task, true});

  struct Pair {
    double h;
    AgentId agent;
    TaskId task;
  };
  std::vector<Pair> pairs;
  pairs.reserve(idle.size() * unassigned.size());
  for (const auto& a : idle)
    for (const auto& t : unassigned) pairs.push_back({heuristic(a.location, t.pickup), a.agent, t.task});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.h, a.agent, a.task) < std::tie(b.h, b.agent, b.task);
  });

  std::unordered_set<AgentId> agent_taken;
  std::unordered_set<TaskId> task_taken;
  const std::size_t limit = std::min(idle.size(), unassigned.size());
  for (const auto& p : pairs) {
    if (agent_taken.size() == limit) break;
    if (agent_taken.count(p.agent) || task_taken.count(p.task)) continue;
    agent_taken.insert(p.agent);
    task_taken.insert(p.task);
    queue.push_back({p.agent, p.task, false});
  }

  std::vector<AgentId> rest;
  for (const auto& a : idle)
    if (!agent_taken.count(a.agent)) rest.push_back(a.agent);
  std::sort(rest.begin(), rest.end());
  for (AgentId a : rest) queue.push_back({a, std::nullopt, false});
  return queue;
}

}  // namespace attf
