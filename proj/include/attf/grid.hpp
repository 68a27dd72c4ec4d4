#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace attf {

// Tie-break weight on the Euclidean term of the search / matching heuristic.
inline constexpr double kTieBreakWeight = 0.001;

struct Cell {
  int x = 0;  // column
  int y = 0;  // row, origin top-left
  auto operator<=>(const Cell&) const = default;
};

std::string to_string(Cell c);

enum class CellKind : std::uint8_t { Obstacle, Free, TaskEndpoint, NonTaskEndpoint };

// Raised when a caller breaks an operation's precondition.
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Static 4-connected world. Immutable after construction.
class GridMap {
 public:
  static constexpr int kNoCell = -1;

  GridMap() = default;
  GridMap(int width, int height, std::vector<CellKind> kinds);

  int width() const { return width_; }
  int height() const { return height_; }
  int size() const { return width_ * height_; }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.x < width_ && c.y >= 0 && c.y < height_; }
  int index(Cell c) const { return c.y * width_ + c.x; }
  Cell cell(int index) const { return {index % width_, index / width_}; }

  CellKind kind(Cell c) const { return kinds_[index(c)]; }
  CellKind kind(int index) const { return kinds_[index]; }
  bool passable(int index) const { return kinds_[index] != CellKind::Obstacle; }
  bool passable(Cell c) const { return in_bounds(c) && passable(index(c)); }
  bool is_endpoint(int index) const {
    return kinds_[index] == CellKind::TaskEndpoint || kinds_[index] == CellKind::NonTaskEndpoint;
  }

  // Passable 4-neighbors by index, in the order left, right, up, down; kNoCell where absent.
  const std::array<int, 4>& adjacent(int index) const { return adjacency_[index]; }

  const std::vector<int>& task_endpoints() const { return task_endpoints_; }
  const std::vector<int>& non_task_endpoints() const { return non_task_endpoints_; }
  int passable_count() const { return passable_count_; }
  const std::vector<CellKind>& kinds() const { return kinds_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<CellKind> kinds_;
  std::vector<std::array<int, 4>> adjacency_;
  std::vector<int> task_endpoints_;
  std::vector<int> non_task_endpoints_;
  int passable_count_ = 0;
};

// Orthogonal passable neighbors of c. Never contains c itself.
std::vector<Cell> neighbors(const GridMap& map, Cell c);

// Manhattan distance plus a small Euclidean tie-break term.
double heuristic(Cell a, Cell b);

inline constexpr int kUnreachable = -1;

// Exact 4-connected shortest path length ignoring agents; kUnreachable when none exists.
int bfs_distance(const GridMap& map, Cell a, Cell b);

// Single-source distances to every cell (kUnreachable for unreachable cells).
std::vector<int> bfs_distances(const GridMap& map, Cell source);

// True when the passable cells form one 4-connected component.
bool is_connected(const GridMap& map);

struct WellFormedReport {
  bool ok = true;
  std::vector<std::pair<Cell, Cell>> unreachable_pairs;  // ordered endpoint pairs
  int endpoint_deficit = 0;  // agents minus non-task endpoints, when positive
  std::vector<std::string> violations;
};

// Every ordered endpoint pair must be joined by a path that touches no third endpoint,
// and there must be at least n_agents non-task endpoints.
WellFormedReport check_well_formed(const GridMap& map, int n_agents);

}  // namespace attf
