#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "attf/grid.hpp"
#include "attf/guidance.hpp"

namespace attf {

using TaskId = int;
using AgentId = int;
inline constexpr int kNone = -1;

// Parse or validation failure with a location (1-based line/column, 0 when not applicable).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line = 0, int column = 0);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

enum class TaskPhase : std::uint8_t { Unreleased, Unassigned, Assigned, PickedUp, Completed };

struct Task {
  TaskId id = 0;
  Cell pickup;
  Cell delivery;
  int release = 0;
  TaskPhase phase = TaskPhase::Unreleased;
  AgentId agent = kNone;  // set while Assigned / PickedUp
  int assigned_at = -1;
  int picked_up_at = -1;
  int completed_at = -1;
};

// Tasks per timestep as an exact rational.
struct Frequency {
  std::int64_t num = 1;
  std::int64_t den = 1;

  // Accepts decimal ("0.2", "5") or fraction ("1/3") notation.
  static Frequency parse(std::string_view text);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  // floor(f * t)
  std::int64_t released_by(std::int64_t t) const { return t * num / den; }
  // Smallest t with floor(f * t) >= k + 1.
  std::int64_t release_of(std::int64_t k) const { return ((k + 1) * den + num - 1) / num; }
  std::string to_string() const;
};

struct TaskStream {
  std::vector<Task> tasks;  // sorted by release, ids assigned in order
  std::optional<Frequency> frequency;
};

// Map text: a header ("height H" / "width W" / "map" lines, optionally preceded by a
// "type ..." line, or a single "H W" line) followed by H rows of W glyphs:
// '@' obstacle, '.' free, 'E' task endpoint, 'P' non-task endpoint.
GridMap parse_map(std::string_view text);
std::string serialize_map(const GridMap& map);

// One task per line: "release px py dx dy". Blank lines and '#' comments are skipped.
TaskStream parse_tasks(std::string_view text, const GridMap& map);
std::string serialize_tasks(const TaskStream& stream);

TaskStream generate_instance(const GridMap& map, int n_tasks, Frequency frequency, std::uint64_t seed);

// Binary guidance file: "GMAP", u8 version 1, u32 LE height, u32 LE width, then
// height*width float32 LE row-major. Values within 1e-3 of [0,1] are clamped with a warning.
GuidanceMap read_guidance_file(const std::string& path, const GridMap& map,
                               std::vector<std::string>* warnings = nullptr);
GuidanceMap decode_guidance(const std::vector<std::uint8_t>& bytes, const GridMap& map,
                            std::vector<std::string>* warnings = nullptr);
std::vector<std::uint8_t> encode_guidance(const GuidanceMap& guidance);
void write_guidance_file(const std::string& path, const GuidanceMap& guidance);

// Agents start on the first n non-task endpoints in row-major order.
std::vector<Cell> initial_placement(const GridMap& map, int n_agents);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Warehouse layout used for the small-warehouse experiments: 35 x 21, five rows of paired
// 10-cell shelves flanked by task endpoints, parking columns on both sides.
GridMap make_small_warehouse();

// Random map in the style of random-32-32-10: obstacles placed with the given density while
// keeping connectivity, every free cell a task endpoint except n_parking non-task endpoints.
GridMap make_random_map(int width, int height, double obstacle_density, int n_parking, std::uint64_t seed);

enum class TerminationMode { DrainTasks, FixedHorizon };
enum class AssignmentMode { PriorityGuided, RandomBaseline };

struct RunConfig {
  std::string map_path;
  std::string task_path;       // empty -> generated tasks
  int gen_tasks = 0;
  Frequency frequency;
  int n_agents = 1;
  double delay_p = 0.0;
  std::int64_t max_iters = 0;  // per search leg; 0 -> 20 * |V|
  int recovery_radius = 5;
  GuidanceSpec guidance;
  int horizon = 0;             // 0 -> 10 * (|V| + m * (H + W)) in drain mode
  TerminationMode termination = TerminationMode::DrainTasks;
  AssignmentMode assignment = AssignmentMode::PriorityGuided;
  bool strict = true;
  bool require_well_formed = false;
  std::string metrics_out;
  std::string trace_out;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Instance {
  GridMap map;
  TaskStream tasks;
  std::vector<Cell> starts;
};

Instance load_instance(const RunConfig& config);

}  // namespace attf
