#include "attf/token.hpp"

#include <algorithm>
#include <climits>
#include <cstdlib>
#include <unordered_set>

namespace attf {

std::optional<Cell> AgentState::reserved_at(int t) const {
  if (path.empty() || t < path_start_t) return std::nullopt;
  const int end = path_end_t();
  if (t <= end) return path[t - path_start_t];
  if (t == end + 1 || resting) return path.back();
  return std::nullopt;
}

ConflictError::ConflictError(const Conflict& c)
    : std::runtime_error("path conflicts with agent " + std::to_string(c.agent) + (c.edge ? " (edge) " : " (vertex) ") +
                         "at " + to_string(c.cell) + " t=" + std::to_string(c.t)),
      conflict_(c) {}

Token::Token(const GridMap& map, std::vector<Cell> starts, bool strict)
    : map_(&map), strict_(strict), rest_owner_(map.size(), kNone) {
  agents_.resize(starts.size());
  std::unordered_set<int> used;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (!map.passable(starts[i])) throw ContractError("agent start " + to_string(starts[i]) + " is not passable");
    if (!used.insert(map.index(starts[i])).second)
      throw ContractError("two agents start at " + to_string(starts[i]));
    auto& a = agents_[i];
    a.id = static_cast<AgentId>(i);
    a.location = starts[i];
    a.path = {starts[i]};
    a.path_start_t = 0;
    index(a.id);
  }
}

std::uint64_t Token::edge_key(int from, int to, int t) const {
  const auto& adj = map_->adjacent(from);
  int dir = 0;
  while (dir < 4 && adj[dir] != to) ++dir;
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)) << 32) |
         static_cast<std::uint32_t>(from * 4 + dir);
}

void Token::index(AgentId a) {
  const auto& s = agents_[a];
  for (std::size_t k = 0; k < s.path.size(); ++k) {
    const int t = s.path_start_t + static_cast<int>(k);
    vertex_[vertex_key(map_->index(s.path[k]), t)] = a;
    if (k > 0 && s.path[k] != s.path[k - 1])
      edge_[edge_key(map_->index(s.path[k - 1]), map_->index(s.path[k]), t)] = a;
  }
  const int last = map_->index(s.path.back());
  if (s.resting) {
    rest_owner_[last] = a;
  } else {
    vertex_[vertex_key(last, s.path_end_t() + 1)] = a;
  }
}

void Token::unindex(AgentId a) {
  const auto& s = agents_[a];
  auto erase_if_mine = [a](auto& table, std::uint64_t key) {
    if (auto it = table.find(key); it != table.end() && it->second == a) table.erase(it);
  };
  for (std::size_t k = 0; k < s.path.size(); ++k) {
    const int t = s.path_start_t + static_cast<int>(k);
    erase_if_mine(vertex_, vertex_key(map_->index(s.path[k]), t));
    if (k > 0 && s.path[k] != s.path[k - 1])
      erase_if_mine(edge_, edge_key(map_->index(s.path[k - 1]), map_->index(s.path[k]), t));
  }
  const int last = map_->index(s.path.back());
  if (rest_owner_[last] == a) rest_owner_[last] = kNone;
  erase_if_mine(vertex_, vertex_key(last, s.path_end_t() + 1));
}

std::optional<AgentId> Token::occupant(int cell, int t, AgentId self) const {
  if (auto it = vertex_.find(vertex_key(cell, t)); it != vertex_.end() && it->second != self) return it->second;
  const AgentId r = rest_owner_[cell];
  if (r != kNone && r != self && t > agents_[r].path_end_t()) return r;
  return std::nullopt;
}

bool Token::is_move_free(int from, int to, int t_arrive, AgentId self) const {
  if (occupant(to, t_arrive, self)) return false;
  if (from != to) {
    if (auto it = edge_.find(edge_key(to, from, t_arrive)); it != edge_.end() && it->second != self) return false;
  }
  return true;
}

bool Token::is_move_free(Cell from, Cell to, int t_arrive, AgentId self) const {
  return is_move_free(map_->index(from), map_->index(to), t_arrive, self);
}

int Token::last_reserved(int cell, AgentId self) const {
  int last = -1;
  for (const auto& s : agents_) {
    if (s.id == self) continue;
    const int end = s.path_end_t();
    if (map_->index(s.path.back()) == cell) {
      if (s.resting) return INT_MAX;
      last = std::max(last, end + 1);
      continue;
    }
    for (int k = static_cast<int>(s.path.size()) - 1; k >= 0; --k) {
      const int t = s.path_start_t + k;
      if (t < now_) break;
      if (map_->index(s.path[k]) == cell) {
        last = std::max(last, t);
        break;
      }
    }
  }
  return last;
}

std::vector<AgentId> Token::agents_through(int cell, int after_t, AgentId self) const {
  std::vector<AgentId> out;
  for (const auto& s : agents_) {
    if (s.id == self) continue;
    const int last = s.path_end_t() + 1;
    for (int t = std::max(after_t + 1, s.path_start_t); t <= last; ++t) {
      if (auto c = s.reserved_at(t); c && map_->index(*c) == cell) {
        out.push_back(s.id);
        break;
      }
    }
  }
  return out;
}

int Token::reservation_horizon() const {
  int h = now_;
  for (const auto& s : agents_)
    if (!s.resting) h = std::max(h, s.path_end_t() + 1);
  return h;
}

std::optional<Conflict> Token::find_conflict(AgentId a, const Path& path, int start_t, bool rest_at_end) const {
  for (std::size_t k = 0; k < path.size(); ++k) {
    const int t = start_t + static_cast<int>(k);
    const int c = map_->index(path[k]);
    if (auto o = occupant(c, t, a)) return Conflict{*o, path[k], t, false};
    if (k > 0 && path[k] != path[k - 1]) {
      const int from = map_->index(path[k - 1]);
      if (auto it = edge_.find(edge_key(c, from, t)); it != edge_.end() && it->second != a)
        return Conflict{it->second, path[k], t, true};
    }
  }
  const int end_t = start_t + static_cast<int>(path.size()) - 1;
  const int last = map_->index(path.back());
  if (auto o = occupant(last, end_t + 1, a)) return Conflict{*o, path.back(), end_t + 1, false};
  if (rest_at_end) {
    const int until = last_reserved(last, a);
    if (until > end_t) {
      const AgentId owner = rest_owner_[last] != kNone && rest_owner_[last] != a ? rest_owner_[last] : kNone;
      AgentId who = owner;
      if (who == kNone)
        for (const auto& s : agents_)
          if (s.id != a)
            for (int t = end_t + 1; t <= until && who == kNone; ++t)
              if (auto c = s.reserved_at(t); c && map_->index(*c) == last) who = s.id;
      return Conflict{who, path.back(), std::min(until, end_t + 1), false};
    }
  }
  return std::nullopt;
}

std::optional<Conflict> Token::commit_path(AgentId a, Path path, int start_t, bool rest_at_end) {
  auto& s = agents_.at(a);
  if (path.empty()) throw ContractError("commit_path: empty path");
  if (start_t < now_) throw ContractError("commit_path: start time lies in the past");
  const auto anchor = s.reserved_at(start_t);
  if (!anchor || *anchor != path.front())
    throw ContractError("commit_path: path for agent " + std::to_string(a) + " starts at " + to_string(path.front()) +
                        " but the agent is not there at t=" + std::to_string(start_t));
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (!map_->passable(path[k])) throw ContractError("commit_path: path enters obstacle " + to_string(path[k]));
    if (k > 0 && std::abs(path[k].x - path[k - 1].x) + std::abs(path[k].y - path[k - 1].y) > 1)
      throw ContractError("commit_path: non-adjacent step " + to_string(path[k - 1]) + " -> " + to_string(path[k]));
  }

  auto conflict = find_conflict(a, path, start_t, rest_at_end);
  if (conflict && strict_) throw ConflictError(*conflict);
  if (conflict) {
    // Lenient mode: keep the conflict-free prefix and let repair settle the buffer.
    const int keep = std::max(1, conflict->t - start_t);
    path.resize(std::min<std::size_t>(path.size(), keep));
    rest_at_end = false;
    s.needs_replan = true;
  }

  Path merged;
  for (int t = now_; t < start_t; ++t) merged.push_back(*s.reserved_at(t));
  merged.insert(merged.end(), path.begin(), path.end());
  unindex(a);
  s.path = std::move(merged);
  s.path_start_t = now_;
  s.resting = rest_at_end;
  index(a);
  if (conflict) repair(a);
  return conflict;
}

std::vector<AgentId> Token::force_wait(AgentId a) {
  auto& s = agents_.at(a);
  unindex(a);
  s.path = {s.location};
  s.path_start_t = now_;
  s.resting = false;
  // repair() rebuilds the index
  index(a);
  return repair(a);
}

void Token::truncate_before(AgentId a, int t) {
  auto& s = agents_.at(a);
  if (t <= now_ || t > s.path_end_t()) return;
  unindex(a);
  s.path.resize(static_cast<std::size_t>(t - s.path_start_t));
  s.resting = false;
  s.needs_replan = true;
  index(a);
  repair(a);
}

std::vector<AgentId> Token::repair(AgentId protect) { return repair_from(now_ + 1, protect); }

std::vector<AgentId> Token::repair_from(int from_t, AgentId protect) {
  std::vector<AgentId> cut;
  const int n = agent_count();
  std::vector<int> cur_owner(map_->size(), kNone);
  std::vector<int> prev_owner(map_->size(), kNone);
  std::vector<int> touched;

  auto horizon = [&] {
    int h = from_t;
    for (const auto& s : agents_) h = std::max(h, s.path_end_t() + 1);
    return h;
  };
  auto flagged = [&](AgentId x) { return agents_[x].needs_replan || agents_[x].delayed; };
  auto choose = [&](AgentId i, AgentId j) {
    if (i == protect) return j;
    if (j == protect) return i;
    if (flagged(i) != flagged(j)) return flagged(i) ? i : j;
    return std::max(i, j);
  };
  auto cut_at = [&](AgentId x, int t) {
    auto& s = agents_[x];
    s.path.resize(static_cast<std::size_t>(t - s.path_start_t));
    s.resting = false;
    s.needs_replan = true;
    if (std::find(cut.begin(), cut.end(), x) == cut.end()) cut.push_back(x);
  };

  for (int t = from_t; t <= horizon(); ++t) {
    for (bool changed = true; changed;) {
      changed = false;
      for (int c : touched) cur_owner[c] = prev_owner[c] = kNone;
      touched.clear();
      for (AgentId i = 0; i < n; ++i) {
        if (auto p = agents_[i].reserved_at(t - 1)) {
          const int c = map_->index(*p);
          prev_owner[c] = i;
          touched.push_back(c);
        }
      }
      for (AgentId i = 0; i < n && !changed; ++i) {
        const auto here = agents_[i].reserved_at(t);
        if (!here) continue;
        const int c = map_->index(*here);
        const AgentId j = cur_owner[c];
        if (j != kNone) {
          // vertex conflict: whoever was already on the cell keeps it
          AgentId loser;
          if (prev_owner[c] == j) loser = i;
          else if (prev_owner[c] == i) loser = j;
          else loser = choose(i, j);
          cut_at(loser, t);
          changed = true;
          break;
        }
        cur_owner[c] = i;
        touched.push_back(c);
        const auto before = agents_[i].reserved_at(t - 1);
        if (before && *before != *here) {
          const AgentId k = prev_owner[c];
          if (k != kNone && k != i) {
            const auto k_now = agents_[k].reserved_at(t);
            if (k_now && *k_now == *before) {
              cut_at(choose(i, k), t);
              changed = true;
              break;
            }
          }
        }
      }
    }
  }

  vertex_.clear();
  edge_.clear();
  std::fill(rest_owner_.begin(), rest_owner_.end(), kNone);
  for (AgentId i = 0; i < n; ++i) index(i);
  return cut;
}

AdvanceResult Token::advance(std::mt19937_64& rng, double delay_p) {
  const int n = agent_count();
  std::vector<Cell> current(n);
  std::vector<Cell> next(n);
  std::vector<char> stays(n, 0);
  std::vector<char> wanted_move(n, 0);
  AdvanceResult result;

  for (AgentId i = 0; i < n; ++i) {
    current[i] = agents_[i].location;
    const auto r = agents_[i].reserved_at(now_ + 1);
    if (!r) {
      if (strict_)
        throw SafetyViolation("agent " + std::to_string(i) + " holds no reservation for t=" + std::to_string(now_ + 1));
      next[i] = current[i];
    } else {
      next[i] = *r;
    }
    wanted_move[i] = next[i] != current[i];
    stays[i] = !wanted_move[i];
  }

  if (delay_p > 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (AgentId i = 0; i < n; ++i) {
      const double u = unit(rng);
      if (wanted_move[i] && u < delay_p) {
        stays[i] = 1;
        next[i] = current[i];
        result.delayed.push_back(i);
      }
    }
  }

  // An agent may not enter a cell whose holder is staying put.
  if (!result.delayed.empty()) {
    std::vector<AgentId> at(map_->size(), kNone);
    for (AgentId i = 0; i < n; ++i) at[map_->index(current[i])] = i;
    for (bool changed = true; changed;) {
      changed = false;
      for (AgentId i = 0; i < n; ++i) {
        if (stays[i]) continue;
        const AgentId holder = at[map_->index(next[i])];
        if (holder != kNone && holder != i && stays[holder]) {
          stays[i] = 1;
          next[i] = current[i];
          result.delayed.push_back(i);
          changed = true;
        }
      }
    }
    std::sort(result.delayed.begin(), result.delayed.end());
  }

  for (AgentId i : result.delayed) {
    auto& s = agents_[i];
    unindex(i);
    const auto k = static_cast<std::size_t>(now_ - s.path_start_t);
    s.path.insert(s.path.begin() + static_cast<std::ptrdiff_t>(k) + 1, current[i]);
    s.delayed = true;
    s.needs_replan = true;
    index(i);
  }

  for (AgentId i = 0; i < n; ++i) agents_[i].location = next[i];
  ++now_;

  if (!result.delayed.empty()) result.truncated = repair(kNone);

  check_locations();
  for (AgentId i = 0; i < n; ++i) {
    if (current[i] == next[i]) continue;
    for (AgentId j = i + 1; j < n; ++j)
      if (next[j] == current[i] && current[j] == next[i])
        throw SafetyViolation("agents " + std::to_string(i) + " and " + std::to_string(j) + " swapped across " +
                              to_string(current[i]) + "-" + to_string(next[i]) + " at t=" + std::to_string(now_));
  }
  return result;
}

std::vector<TaskEvent> Token::update_completed(std::vector<Task>& tasks) {
  std::vector<TaskEvent> events;
  for (auto& s : agents_) {
    if (s.assigned_task == kNone) continue;
    auto& task = tasks.at(s.assigned_task);
    if (task.phase == TaskPhase::Assigned && s.location == task.pickup) {
      task.phase = TaskPhase::PickedUp;
      task.picked_up_at = now_;
      events.push_back({s.assigned_task, s.id, false});
    }
    if (task.phase == TaskPhase::PickedUp && s.location == task.delivery) {
      task.phase = TaskPhase::Completed;
      task.completed_at = now_;
      events.push_back({s.assigned_task, s.id, true});
      s.assigned_task = kNone;
      s.delayed = false;
      s.needs_replan = false;
    }
  }
  return events;
}

void Token::check_locations() const {
  std::unordered_map<int, AgentId> seen;
  for (const auto& s : agents_) {
    auto [it, fresh] = seen.emplace(map_->index(s.location), s.id);
    if (!fresh)
      throw SafetyViolation("agents " + std::to_string(it->second) + " and " + std::to_string(s.id) + " share " +
                            to_string(s.location) + " at t=" + std::to_string(now_));
  }
}

bool Token::index_consistent() const {
  Token copy(*this);
  copy.vertex_.clear();
  copy.edge_.clear();
  std::fill(copy.rest_owner_.begin(), copy.rest_owner_.end(), kNone);
  for (AgentId i = 0; i < agent_count(); ++i) copy.index(i);
  return copy.vertex_ == vertex_ && copy.edge_ == edge_ && copy.rest_owner_ == rest_owner_;
}

bool Token::covers_next_step() const {
  return std::all_of(agents_.begin(), agents_.end(), [&](const AgentState& s) { return s.reserved_at(now_ + 1).has_value(); });
}

void Token::write_trace(std::ostream& out, const std::vector<Task>& tasks) const {
  for (const auto& s : agents_) {
    const char* phase = s.resting ? "rest" : "idle";
    int task_id = -1;
    if (s.assigned_task != kNone) {
      const auto& task = tasks[s.assigned_task];
      task_id = task.id;
      phase = task.phase == TaskPhase::PickedUp ? "deliver" : "pickup";
    }
    out << now_ << ' ' << s.id << ' ' << s.location.x << ' ' << s.location.y << ' ' << task_id << ' ' << phase << '\n';
  }
}

}  // namespace attf
