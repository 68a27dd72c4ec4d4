#include "attf/grid.hpp"

#include <cmath>
#include <cstdlib>
#include <deque>
#include <sstream>

namespace attf {

std::string to_string(Cell c) {
  return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")";
}

GridMap::GridMap(int width, int height, std::vector<CellKind> kinds)
    : width_(width), height_(height), kinds_(std::move(kinds)) {
  if (width <= 0 || height <= 0) throw ContractError("GridMap: zero dimensions");
  if (static_cast<int>(kinds_.size()) != width * height)
    throw ContractError("GridMap: kind vector does not match dimensions");

  adjacency_.resize(kinds_.size());
  for (int i = 0; i < size(); ++i) {
    const Cell c = cell(i);
    const std::array<Cell, 4> around{Cell{c.x - 1, c.y}, Cell{c.x + 1, c.y}, Cell{c.x, c.y - 1},
                                     Cell{c.x, c.y + 1}};
    for (int d = 0; d < 4; ++d)
      adjacency_[i][d] = passable(around[d]) ? index(around[d]) : kNoCell;

    switch (kinds_[i]) {
      case CellKind::Obstacle:
        break;
      case CellKind::TaskEndpoint:
        task_endpoints_.push_back(i);
        ++passable_count_;
        break;
      case CellKind::NonTaskEndpoint:
        non_task_endpoints_.push_back(i);
        ++passable_count_;
        break;
      case CellKind::Free:
        ++passable_count_;
        break;
    }
  }
}

std::vector<Cell> neighbors(const GridMap& map, Cell c) {
  if (!map.in_bounds(c)) throw ContractError("neighbors: cell " + to_string(c) + " out of bounds");
  if (!map.passable(c)) throw ContractError("neighbors: cell " + to_string(c) + " is an obstacle");
  std::vector<Cell> out;
  out.reserve(4);
  for (int n : map.adjacent(map.index(c)))
    if (n != GridMap::kNoCell) out.push_back(map.cell(n));
  return out;
}

double heuristic(Cell a, Cell b) {
  const int dx = std::abs(a.x - b.x);
  const int dy = std::abs(a.y - b.y);
  return static_cast<double>(dx + dy) + kTieBreakWeight * std::sqrt(static_cast<double>(dx * dx + dy * dy));
}

std::vector<int> bfs_distances(const GridMap& map, Cell source) {
  std::vector<int> dist(map.size(), kUnreachable);
  if (!map.passable(source)) throw ContractError("bfs: source " + to_string(source) + " is not passable");
  std::deque<int> queue{map.index(source)};
  dist[map.index(source)] = 0;
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    for (int n : map.adjacent(cur)) {
      if (n == GridMap::kNoCell || dist[n] != kUnreachable) continue;
      dist[n] = dist[cur] + 1;
      queue.push_back(n);
    }
  }
  return dist;
}

int bfs_distance(const GridMap& map, Cell a, Cell b) {
  if (!map.passable(b)) throw ContractError("bfs: target " + to_string(b) + " is not passable");
  return bfs_distances(map, a)[map.index(b)];
}

bool is_connected(const GridMap& map) {
  int first = GridMap::kNoCell;
  for (int i = 0; i < map.size() && first == GridMap::kNoCell; ++i)
    if (map.passable(i)) first = i;
  if (first == GridMap::kNoCell) return false;
  const auto dist = bfs_distances(map, map.cell(first));
  int reached = 0;
  for (int d : dist) reached += d != kUnreachable;
  return reached == map.passable_count();
}

WellFormedReport check_well_formed(const GridMap& map, int n_agents) {
  WellFormedReport report;
  std::vector<int> endpoints = map.task_endpoints();
  endpoints.insert(endpoints.end(), map.non_task_endpoints().begin(), map.non_task_endpoints().end());

  // From each endpoint, search through non-endpoint cells only; an endpoint is reachable
  // without crossing a third endpoint iff it borders the explored region.
  std::vector<int> seen(map.size(), -1);
  std::vector<int> touched(map.size(), -1);
  for (int source : endpoints) {
    std::deque<int> queue{source};
    seen[source] = source;
    while (!queue.empty()) {
      const int cur = queue.front();
      queue.pop_front();
      for (int n : map.adjacent(cur)) {
        if (n == GridMap::kNoCell) continue;
        if (map.is_endpoint(n)) {
          touched[n] = source;
        } else if (seen[n] != source) {
          seen[n] = source;
          queue.push_back(n);
        }
      }
    }
    for (int target : endpoints) {
      if (target == source || touched[target] == source) continue;
      report.unreachable_pairs.emplace_back(map.cell(source), map.cell(target));
    }
  }

  for (const auto& [a, b] : report.unreachable_pairs)
    report.violations.push_back("no endpoint-avoiding path " + to_string(a) + " -> " + to_string(b));

  const int parking = static_cast<int>(map.non_task_endpoints().size());
  if (parking < n_agents) {
    report.endpoint_deficit = n_agents - parking;
    report.violations.push_back("only " + std::to_string(parking) + " non-task endpoints for " +
                                std::to_string(n_agents) + " agents");
  }
  report.ok = report.violations.empty();
  return report;
}

}  // namespace attf
