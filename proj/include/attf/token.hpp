#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "attf/grid.hpp"
#include "attf/instance_io.hpp"

namespace attf {

using Path = std::vector<Cell>;

struct AgentState {
  AgentId id = 0;
  Cell location;
  Path path;            // path[k] is the planned cell at path_start_t + k
  int path_start_t = 0;
  TaskId assigned_task = kNone;  // index into the simulator's task list
  // Reservation at the path end lasts forever instead of one step.
  bool resting = false;
  bool delayed = false;        // failed its planned move in the last step
  bool needs_replan = false;   // path was shifted or truncated under it

  int path_end_t() const { return path_start_t + static_cast<int>(path.size()) - 1; }
  // Reserved cell at time t under the one-step idle buffer, if any.
  std::optional<Cell> reserved_at(int t) const;
};

struct Conflict {
  AgentId agent = kNone;   // the agent already holding the reservation
  Cell cell;
  int t = 0;
  bool edge = false;
};

class ConflictError : public std::runtime_error {
 public:
  explicit ConflictError(const Conflict& c);
  const Conflict& conflict() const { return conflict_; }

 private:
  Conflict conflict_;
};

class SafetyViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdvanceResult {
  std::vector<AgentId> delayed;    // randomly delayed agents plus those blocked behind them
  std::vector<AgentId> truncated;  // paths cut to restore conflict-freedom
};

struct TaskEvent {
  TaskId task = kNone;
  AgentId agent = kNone;
  bool completed = false;  // false: picked up
};

// Global record of every agent's committed path with space-time conflict queries.
class Token {
 public:
  Token(const GridMap& map, std::vector<Cell> starts, bool strict = true);

  const GridMap& map() const { return *map_; }
  int now() const { return now_; }
  int agent_count() const { return static_cast<int>(agents_.size()); }
  const AgentState& agent(AgentId a) const { return agents_[a]; }
  std::span<const AgentState> agents() const { return agents_; }
  bool strict() const { return strict_; }

  void set_task(AgentId a, TaskId task) { agents_[a].assigned_task = task; }
  void clear_flags(AgentId a) {
    agents_[a].delayed = false;
    agents_[a].needs_replan = false;
  }
  void mark_needs_replan(AgentId a) { agents_[a].needs_replan = true; }

  // Agent reserving `cell` at time t, other than `self`.
  std::optional<AgentId> occupant(int cell, int t, AgentId self = kNone) const;
  bool is_move_free(Cell from, Cell to, int t_arrive, AgentId self) const;
  bool is_move_free(int from, int to, int t_arrive, AgentId self) const;
  // Latest time any agent other than self reserves cell; INT_MAX if someone rests there,
  // -1 if never (from now on).
  int last_reserved(int cell, AgentId self) const;
  // Agents other than self reserving cell at some time > after_t, ascending id.
  std::vector<AgentId> agents_through(int cell, int after_t, AgentId self) const;
  // Latest time any non-resting agent's reservation ends (path end + buffer).
  int reservation_horizon() const;

  // Replaces the agent's reservations from start_t on. The prefix between now and start_t is kept.
  // Conflicts throw ConflictError in strict mode; lenient mode commits the conflict-free prefix.
  std::optional<Conflict> commit_path(AgentId a, Path path, int start_t, bool rest_at_end = false);
  // First conflict the path would have, if committed.
  std::optional<Conflict> find_conflict(AgentId a, const Path& path, int start_t, bool rest_at_end) const;

  // Holds the agent in place through now+1, truncating whoever planned into its cell.
  std::vector<AgentId> force_wait(AgentId a);
  // Cuts the agent's path so that it stops at the cell it holds at time t-1.
  void truncate_before(AgentId a, int t);

  // Executes one timestep with per-agent delay probability.
  AdvanceResult advance(std::mt19937_64& rng, double delay_p);

  // Pickup / delivery transitions for agents standing on their task cells at `now`.
  std::vector<TaskEvent> update_completed(std::vector<Task>& tasks);

  // Throws SafetyViolation if two agents share a cell now.
  void check_locations() const;
  // Rebuilds the reservation index from the agent paths and compares.
  bool index_consistent() const;
  // Every agent holds a reservation for now+1.
  bool covers_next_step() const;

  void write_trace(std::ostream& out, const std::vector<Task>& tasks) const;

 private:
  static std::uint64_t vertex_key(int cell, int t) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)) << 32) | static_cast<std::uint32_t>(cell);
  }
  std::uint64_t edge_key(int from, int to, int t) const;

  void unindex(AgentId a);
  void index(AgentId a);
  // Truncates paths until no two reservations at times > now collide. The protected agent
  // is only cut when nothing else resolves a conflict.
  std::vector<AgentId> repair(AgentId protect = kNone);
  std::vector<AgentId> repair_from(int from_t, AgentId protect);

  const GridMap* map_;
  bool strict_;
  int now_ = 0;
  std::vector<AgentState> agents_;
  std::unordered_map<std::uint64_t, AgentId> vertex_;
  std::unordered_map<std::uint64_t, AgentId> edge_;
  std::vector<AgentId> rest_owner_;  // per cell
};

}  // namespace attf
