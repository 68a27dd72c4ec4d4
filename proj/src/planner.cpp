#include "attf/planner.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <queue>
#include <unordered_set>

namespace attf {

namespace {

struct Node {
  int cell;
  int t;
  int parent;  // arena index, -1 for the start
};

struct Entry {
  double f;
  double h;
  std::uint64_t seq;
  int node;
};

struct EntryAfter {
  bool operator()(const Entry& a, const Entry& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.h != b.h) return a.h > b.h;
    return a.seq > b.seq;
  }
};

std::uint64_t node_key(int cell, int t) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)) << 32) | static_cast<std::uint32_t>(cell);
}

}  // namespace

std::int64_t default_max_iters(const GridMap& map) { return 20LL * map.passable_count(); }

PlanResult plan(Cell start, Cell goal, int start_t, const Token& token, AgentId self, const GuidanceMap& guidance,
                const PlanOptions& options) {
  const GridMap& map = token.map();
  if (!map.passable(start)) throw ContractError("plan: start " + to_string(start) + " is not passable");
  if (!map.passable(goal)) throw ContractError("plan: goal " + to_string(goal) + " is not passable");
  if (!guidance.is_zero() && (guidance.width != map.width() || guidance.height != map.height() ||
                              guidance.values.size() != static_cast<std::size_t>(map.size())))
    throw ContractError("plan: guidance dims do not match the map");

  const std::int64_t max_iters = options.max_iters > 0 ? options.max_iters : default_max_iters(map);
  const int horizon = options.horizon >= 0
                          ? options.horizon
                          : start_t + 4 * (map.width() + map.height()) +
                                std::max(0, token.reservation_horizon() - start_t);
  const int goal_idx = map.index(goal);

  int rest_clear_from = 0;
  if (options.hold == GoalHold::Rest) {
    const int last = token.last_reserved(goal_idx, self);
    rest_clear_from = last == INT_MAX ? INT_MAX : last;
  }
  auto holds = [&](int t) {
    switch (options.hold) {
      case GoalHold::None: return true;
      case GoalHold::Buffer: return !token.occupant(goal_idx, t + 1, self).has_value();
      case GoalHold::Rest: return rest_clear_from != INT_MAX && rest_clear_from <= t;
    }
    return true;
  };

  PlanResult result;
  std::vector<Node> arena;
  std::priority_queue<Entry, std::vector<Entry>, EntryAfter> open;
  std::unordered_set<std::uint64_t> closed;
  std::uint64_t seq = 0;

  const int start_idx = map.index(start);
  arena.push_back({start_idx, start_t, -1});
  const double h0 = heuristic(start, goal);
  open.push({h0, h0, seq++, 0});

  while (!open.empty() && result.stats.expanded < max_iters) {
    const Entry top = open.top();
    open.pop();
    const Node current = arena[top.node];
    if (!closed.insert(node_key(current.cell, current.t)).second) continue;
    ++result.stats.expanded;

    if (current.cell == goal_idx && holds(current.t)) {
      Path path(static_cast<std::size_t>(current.t - start_t + 1));
      for (int k = top.node; k >= 0; k = arena[k].parent) path[arena[k].t - start_t] = map.cell(arena[k].cell);
      result.stats.success = true;
      result.stats.path_length = current.t - start_t;
      result.path = std::move(path);
      return result;
    }
    if (current.t >= horizon) continue;

    const int t_next = current.t + 1;
    const auto& adj = map.adjacent(current.cell);
    std::array<int, 5> moves = {adj[0], adj[1], adj[2], adj[3], current.cell};
    for (int next : moves) {
      if (next == GridMap::kNoCell) continue;
      if (closed.count(node_key(next, t_next))) continue;
      if (!token.is_move_free(current.cell, next, t_next, self)) continue;
      const double h = heuristic(map.cell(next), goal);
      const double f = static_cast<double>(t_next - start_t) + h + guidance.at(next);
      arena.push_back({next, t_next, top.node});
      open.push({f, h, seq++, static_cast<int>(arena.size()) - 1});
    }
  }
  return result;
}

PlanTaskResult plan_task(AgentId agent, const Task& task, Token& token, const GuidancePair& guidance,
                         std::int64_t max_iters) {
  PlanTaskResult out;
  const auto& state = token.agent(agent);
  const int now = token.now();
  const bool carrying = task.phase == TaskPhase::PickedUp;

  Path path;
  int leg2_start = now;
  Cell leg2_from = state.location;
  if (!carrying) {
    PlanOptions leg1{max_iters, -1, GoalHold::None};
    auto first = plan(state.location, task.pickup, now, token, agent, guidance.to_pickup, leg1);
    out.stats.expanded += first.stats.expanded;
    if (!first.path) return out;
    path = std::move(*first.path);
    leg2_start = now + static_cast<int>(path.size()) - 1;
    leg2_from = task.pickup;
  }
  PlanOptions leg2{max_iters, -1, GoalHold::Buffer};
  auto second = plan(leg2_from, task.delivery, leg2_start, token, agent, guidance.to_delivery, leg2);
  out.stats.expanded += second.stats.expanded;
  if (!second.path) return out;
  if (path.empty()) {
    path = std::move(*second.path);
  } else {
    path.insert(path.end(), second.path->begin() + 1, second.path->end());
  }
  out.stats.success = true;
  out.stats.path_length = static_cast<int>(path.size()) - 1;
  token.commit_path(agent, std::move(path), now, false);
  out.committed = true;
  return out;
}

const char* to_string(IdleAction action) {
  switch (action) {
    case IdleAction::Continue: return "continue";
    case IdleAction::StayPut: return "stay";
    case IdleAction::RouteTo: return "route";
    case IdleAction::Recovery: return "recovery";
    case IdleAction::Yield: return "yield";
    case IdleAction::Wait: return "wait";
  }
  return "?";
}

namespace {

bool try_escape(AgentId agent, Token& token, const IdleContext& context, std::mt19937_64& rng, IdleResult& out) {
  const GridMap& map = token.map();
  const int now = token.now();
  const Cell here = token.agent(agent).location;
  const int here_idx = map.index(here);

  std::unordered_set<int> claimed;
  for (const auto& other : token.agents())
    if (other.id != agent) claimed.insert(map.index(other.path.back()));

  std::vector<std::pair<double, int>> parking;
  for (int e : map.non_task_endpoints()) {
    if (e == here_idx || claimed.count(e)) continue;
    parking.emplace_back(heuristic(here, map.cell(e)), e);
  }
  std::sort(parking.begin(), parking.end());
  const auto zero = GuidanceMap::zero(map.width(), map.height());
  const int tries = std::min<int>(context.max_endpoint_tries, static_cast<int>(parking.size()));
  for (int k = 0; k < tries; ++k) {
    const int e = parking[k].second;
    if (token.last_reserved(e, agent) == INT_MAX) continue;
    auto r = plan(here, map.cell(e), now, token, agent, zero, {context.max_iters, -1, GoalHold::Rest});
    out.stats.expanded += r.stats.expanded;
    if (r.path) {
      out.stats.success = true;
      out.stats.path_length = r.stats.path_length;
      token.commit_path(agent, std::move(*r.path), now, true);
      out.action = IdleAction::RouteTo;
      return true;
    }
  }

  auto recovery = deadlock_recovery(agent, token, context, rng);
  out.stats.expanded += recovery.expanded;
  if (recovery.success) {
    out.stats.success = true;
    out.stats.path_length = recovery.path_length;
    out.action = IdleAction::Recovery;
    return true;
  }
  return false;
}

}  // namespace

IdleResult handle_idle(AgentId agent, Token& token, const IdleContext& context, std::mt19937_64& rng) {
  IdleResult out;
  const GridMap& map = token.map();
  const auto& state = token.agent(agent);
  const int now = token.now();
  const Cell here = state.location;
  const int here_idx = map.index(here);

  if (state.path_end_t() > now) {
    out.action = IdleAction::Continue;
    return out;
  }

  const bool safe = token.last_reserved(here_idx, agent) <= now && !context.open_endpoints.count(here_idx);
  if (safe) {
    const bool parking = map.kind(here_idx) == CellKind::NonTaskEndpoint;
    if (!(state.resting && parking)) token.commit_path(agent, {here}, now, parking);
    out.action = IdleAction::StayPut;
    return out;
  }

  if (try_escape(agent, token, context, rng, out)) return out;

  // Whoever planned through this cell may be what keeps the agent boxed in.
  const auto intruders = token.agents_through(here_idx, now, agent);
  if (!intruders.empty()) {
    for (AgentId j : intruders) token.truncate_before(j, now + 1);
    token.force_wait(agent);
    if (token.last_reserved(here_idx, agent) <= now) {
      token.commit_path(agent, {here}, now, true);
      for (AgentId j : intruders) {
        auto moved = deadlock_recovery(j, token, context, rng);
        out.stats.expanded += moved.expanded;
      }
      if (try_escape(agent, token, context, rng, out)) {
        out.action = IdleAction::Yield;
        return out;
      }
    }
  }

  token.force_wait(agent);
  out.action = IdleAction::Wait;
  return out;
}

SearchStats deadlock_recovery(AgentId agent, Token& token, const IdleContext& context, std::mt19937_64& rng) {
  SearchStats stats;
  const GridMap& map = token.map();
  const int now = token.now();
  const Cell here = token.agent(agent).location;
  const int diameter = map.width() + map.height();
  const std::int64_t budget =
      std::max<std::int64_t>(1, (context.max_iters > 0 ? context.max_iters : default_max_iters(map)) / 4);
  const auto zero = GuidanceMap::zero(map.width(), map.height());

  for (int radius = std::max(1, context.recovery_radius);; radius = std::min(radius * 2, diameter)) {
    std::vector<int> candidates;
    for (int y = std::max(0, here.y - radius); y <= std::min(map.height() - 1, here.y + radius); ++y) {
      for (int x = std::max(0, here.x - radius); x <= std::min(map.width() - 1, here.x + radius); ++x) {
        const Cell c{x, y};
        const int idx = map.index(c);
        if (c == here || !map.passable(idx) || context.open_endpoints.count(idx)) continue;
        if (token.last_reserved(idx, agent) > now) continue;
        candidates.push_back(idx);
      }
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);
    const int tries = std::min<int>(context.max_recovery_tries, static_cast<int>(candidates.size()));
    for (int k = 0; k < tries; ++k) {
      auto r = plan(here, map.cell(candidates[k]), now, token, agent, zero, {budget, now + 4 * radius, GoalHold::Buffer});
      stats.expanded += r.stats.expanded;
      if (r.path) {
        stats.success = true;
        stats.path_length = r.stats.path_length;
        token.commit_path(agent, std::move(*r.path), now, false);
        return stats;
      }
    }
    if (radius >= diameter) break;
  }
  return stats;
}

}  // namespace attf
