#include "attf/instance_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace attf {

ParseError::ParseError(const std::string& what, int line, int column)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) +
                                        (column > 0 ? ", column " + std::to_string(column) : std::string()) +
                                        ": " + what
                                  : what),
      line_(line),
      column_(column) {}

Frequency Frequency::parse(std::string_view text) {
  const std::string s(text);
  Frequency f;
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    try {
      f.num = std::stoll(s.substr(0, slash));
      f.den = std::stoll(s.substr(slash + 1));
    } catch (const std::exception&) {
      throw ParseError("bad frequency '" + s + "'");
    }
  } else {
    const auto dot = s.find('.');
    const std::string digits = dot == std::string::npos ? s : s.substr(0, dot) + s.substr(dot + 1);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw ParseError("bad frequency '" + s + "'");
    const std::size_t decimals = dot == std::string::npos ? 0 : s.size() - dot - 1;
    if (digits.size() > 17) throw ParseError("frequency '" + s + "' has too many digits");
    f.num = std::stoll(digits);
    f.den = 1;
    for (std::size_t i = 0; i < decimals; ++i) f.den *= 10;
  }
  if (f.num <= 0 || f.den <= 0) throw ParseError("frequency must be positive, got '" + s + "'");
  const auto g = std::gcd(f.num, f.den);
  f.num /= g;
  f.den /= g;
  return f;
}

std::string Frequency::to_string() const {
  if (den == 1) return std::to_string(num);
  std::ostringstream out;
  out << value();
  return out.str();
}

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  return lines;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view s, long long& out) {
  if (s.empty()) return false;
  std::size_t i = 0;
  bool neg = false;
  if (s[0] == '-' || s[0] == '+') {
    neg = s[0] == '-';
    i = 1;
  }
  if (i == s.size()) return false;
  long long v = 0;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
    if (v > (1LL << 40)) return false;
  }
  out = neg ? -v : v;
  return true;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

char glyph_of(CellKind k) {
  switch (k) {
    case CellKind::Obstacle: return '@';
    case CellKind::Free: return '.';
    case CellKind::TaskEndpoint: return 'E';
    case CellKind::NonTaskEndpoint: return 'P';
  }
  return '?';
}

}  // namespace

GridMap parse_map(std::string_view text) {
  const auto lines = split_lines(text);
  std::size_t row = 0;
  long long height = -1;
  long long width = -1;

  // Header.
  while (row < lines.size()) {
    const auto line = trim(lines[row]);
    const auto fields = split_ws(line);
    const int line_no = static_cast<int>(row) + 1;
    if (fields.empty()) {
      ++row;
      continue;
    }
    if (fields[0] == "type") {
      ++row;
      continue;
    }
    if (fields[0] == "height" || fields[0] == "width") {
      long long v = 0;
      if (fields.size() != 2 || !parse_int(fields[1], v)) throw ParseError("malformed header line", line_no, 1);
      (fields[0] == "height" ? height : width) = v;
      ++row;
      continue;
    }
    if (fields[0] == "map") {
      ++row;
      break;
    }
    long long a = 0;
    long long b = 0;
    if (height < 0 && width < 0 && fields.size() == 2 && parse_int(fields[0], a) && parse_int(fields[1], b)) {
      height = a;
      width = b;
      ++row;
      break;
    }
    throw ParseError("malformed header", line_no, 1);
  }
  if (height < 0 && width < 0 && row >= lines.size()) throw ParseError("zero dimensions: empty map text");
  if (height < 0 || width < 0) throw ParseError("missing height/width header");
  if (height == 0 || width == 0) throw ParseError("zero dimensions");
  if (height > 100000 || width > 100000) throw ParseError("map dimensions too large");

  std::vector<CellKind> kinds;
  kinds.reserve(static_cast<std::size_t>(height * width));
  long long body_rows = 0;
  for (; row < lines.size(); ++row) {
    const auto line = lines[row];
    const int line_no = static_cast<int>(row) + 1;
    if (trim(line).empty()) {
      // trailing blank lines are fine; blank lines inside the body are not
      bool rest_blank = true;
      for (std::size_t r = row; r < lines.size(); ++r) rest_blank = rest_blank && trim(lines[r]).empty();
      if (rest_blank) break;
      throw ParseError("blank line inside map body", line_no, 1);
    }
    if (body_rows == height) throw ParseError("more rows than declared height", line_no, 1);
    if (static_cast<long long>(line.size()) != width)
      throw ParseError("ragged row: expected " + std::to_string(width) + " glyphs, found " +
                           std::to_string(line.size()),
                       line_no, static_cast<int>(std::min<long long>(line.size(), width)) + 1);
    for (std::size_t col = 0; col < line.size(); ++col) {
      switch (line[col]) {
        case '@': kinds.push_back(CellKind::Obstacle); break;
        case '.': kinds.push_back(CellKind::Free); break;
        case 'E': kinds.push_back(CellKind::TaskEndpoint); break;
        case 'P': kinds.push_back(CellKind::NonTaskEndpoint); break;
        default:
          throw ParseError(std::string("unknown glyph '") + line[col] + "'", line_no, static_cast<int>(col) + 1);
      }
    }
    ++body_rows;
  }
  if (body_rows == 0) throw ParseError("zero dimensions: empty map body");
  if (body_rows != height)
    throw ParseError("expected " + std::to_string(height) + " rows, found " + std::to_string(body_rows));

  GridMap map(static_cast<int>(width), static_cast<int>(height), std::move(kinds));
  if (map.passable_count() == 0) throw ParseError("map has no passable cells");
  if (!is_connected(map)) throw ParseError("passable cells are not 4-connected (disconnected map)");
  return map;
}

std::string serialize_map(const GridMap& map) {
  std::string out = "height " + std::to_string(map.height()) + "\nwidth " + std::to_string(map.width()) + "\nmap\n";
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) out.push_back(glyph_of(map.kind(Cell{x, y})));
    out.push_back('\n');
  }
  return out;
}

TaskStream parse_tasks(std::string_view text, const GridMap& map) {
  TaskStream stream;
  const auto lines = split_lines(text);
  int record = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const int line_no = static_cast<int>(i) + 1;
    const auto where = "task record " + std::to_string(record) + ": ";
    const auto fields = split_ws(line);
    if (fields.size() != 5) throw ParseError(where + "expected 'release px py dx dy'", line_no);
    long long v[5];
    for (int f = 0; f < 5; ++f)
      if (!parse_int(fields[f], v[f])) throw ParseError(where + "non-integer field '" + std::string(fields[f]) + "'", line_no);
    if (v[0] < 0) throw ParseError(where + "negative release time", line_no);
    const Cell pickup{static_cast<int>(v[1]), static_cast<int>(v[2])};
    const Cell delivery{static_cast<int>(v[3]), static_cast<int>(v[4])};
    for (const auto& [name, c] : {std::pair{"pickup", pickup}, std::pair{"delivery", delivery}}) {
      if (!map.in_bounds(c)) throw ParseError(where + name + " " + to_string(c) + " out of bounds", line_no);
      if (map.kind(c) != CellKind::TaskEndpoint)
        throw ParseError(where + name + " " + to_string(c) + " is not a task endpoint", line_no);
    }
    if (pickup == delivery) throw ParseError(where + "pickup equals delivery", line_no);
    Task t;
    t.id = record++;
    t.pickup = pickup;
    t.delivery = delivery;
    t.release = static_cast<int>(v[0]);
    stream.tasks.push_back(t);
  }
  std::stable_sort(stream.tasks.begin(), stream.tasks.end(),
                   [](const Task& a, const Task& b) { return a.release < b.release; });
  return stream;
}

std::string serialize_tasks(const TaskStream& stream) {
  std::ostringstream out;
  for (const auto& t : stream.tasks)
    out << t.release << ' ' << t.pickup.x << ' ' << t.pickup.y << ' ' << t.delivery.x << ' ' << t.delivery.y << '\n';
  return out.str();
}

TaskStream generate_instance(const GridMap& map, int n_tasks, Frequency frequency, std::uint64_t seed) {
  const auto& endpoints = map.task_endpoints();
  if (n_tasks > 0 && endpoints.size() < 2)
    throw ContractError("generate_instance: need at least two task endpoints");
  if (frequency.num <= 0 || frequency.den <= 0) throw ContractError("generate_instance: frequency must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, endpoints.empty() ? 0 : endpoints.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_other(0, endpoints.size() < 2 ? 0 : endpoints.size() - 2);
  TaskStream stream;
  stream.frequency = frequency;
  stream.tasks.reserve(n_tasks);
  for (int k = 0; k < n_tasks; ++k) {
    const std::size_t p = pick(rng);
    std::size_t d = pick_other(rng);
    if (d >= p) ++d;
    Task t;
    t.id = k;
    t.pickup = map.cell(endpoints[p]);
    t.delivery = map.cell(endpoints[d]);
    t.release = static_cast<int>(frequency.release_of(k));
    stream.tasks.push_back(t);
  }
  return stream;
}

namespace {

constexpr char kGuidanceMagic[4] = {'G', 'M', 'A', 'P'};
constexpr std::uint8_t kGuidanceVersion = 1;
constexpr float kClampTolerance = 1e-3f;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_guidance(const GuidanceMap& guidance) {
  std::vector<std::uint8_t> out(kGuidanceMagic, kGuidanceMagic + 4);
  out.push_back(kGuidanceVersion);
  put_u32(out, static_cast<std::uint32_t>(guidance.height));
  put_u32(out, static_cast<std::uint32_t>(guidance.width));
  const std::size_t n = static_cast<std::size_t>(guidance.height) * guidance.width;
  out.reserve(out.size() + 4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const float v = guidance.values.empty() ? 0.0f : guidance.values[i];
    put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

GuidanceMap decode_guidance(const std::vector<std::uint8_t>& bytes, const GridMap& map,
                            std::vector<std::string>* warnings) {
  if (bytes.size() < 13 || std::memcmp(bytes.data(), kGuidanceMagic, 4) != 0)
    throw ParseError("guidance file: bad magic or truncated header");
  if (bytes[4] != kGuidanceVersion)
    throw ParseError("guidance file: unsupported version " + std::to_string(bytes[4]));
  const std::uint32_t h = get_u32(bytes.data() + 5);
  const std::uint32_t w = get_u32(bytes.data() + 9);
  if (h != static_cast<std::uint32_t>(map.height()) || w != static_cast<std::uint32_t>(map.width()))
    throw ParseError("guidance file: dims " + std::to_string(h) + "x" + std::to_string(w) + " do not match map " +
                     std::to_string(map.height()) + "x" + std::to_string(map.width()));
  const std::size_t n = static_cast<std::size_t>(h) * w;
  if (bytes.size() != 13 + 4 * n)
    throw ParseError("guidance file: payload has " + std::to_string(bytes.size() - 13) + " bytes, expected " +
                     std::to_string(4 * n));
  GuidanceMap g{static_cast<int>(w), static_cast<int>(h), std::vector<float>(n)};
  int clamped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    float v = std::bit_cast<float>(get_u32(bytes.data() + 13 + 4 * i));
    if (!std::isfinite(v)) throw ParseError("guidance file: non-finite value at cell " + std::to_string(i));
    if (v < 0.0f || v > 1.0f) {
      if (v < -kClampTolerance || v > 1.0f + kClampTolerance)
        throw ParseError("guidance file: value " + std::to_string(v) + " outside [0,1] at cell " + std::to_string(i));
      v = std::clamp(v, 0.0f, 1.0f);
      ++clamped;
    }
    g.values[i] = v;
  }
  if (clamped > 0 && warnings)
    warnings->push_back("guidance file: clamped " + std::to_string(clamped) + " values into [0,1]");
  return g;
}

GuidanceMap read_guidance_file(const std::string& path, const GridMap& map, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open guidance file " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_guidance(bytes, map, warnings);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_guidance_file(const std::string& path, const GuidanceMap& guidance) {
  const auto bytes = encode_guidance(guidance);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write guidance file " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<Cell> initial_placement(const GridMap& map, int n_agents) {
  const auto& parking = map.non_task_endpoints();
  if (n_agents < 0 || n_agents > static_cast<int>(parking.size()))
    throw ContractError("initial_placement: " + std::to_string(n_agents) + " agents but only " +
                        std::to_string(parking.size()) + " non-task endpoints");
  std::vector<Cell> starts;
  for (int i = 0; i < n_agents; ++i) starts.push_back(map.cell(parking[i]));
  return starts;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

GridMap make_small_warehouse() {
  constexpr int kWidth = 35;
  constexpr int kHeight = 21;
  std::vector<CellKind> kinds(kWidth * kHeight, CellKind::Free);
  auto set = [&](int x, int y, CellKind k) { kinds[y * kWidth + x] = k; };
  const auto aisle = [](int y) { return y % 4 == 0; };
  for (int y = 0; y < kHeight; ++y) {
    if (aisle(y)) continue;
    for (int x : {0, 2, 4, 6, 28, 30, 32, 34}) set(x, y, CellKind::NonTaskEndpoint);
    const bool shelf_row = y % 4 == 2;
    for (int x = 7; x <= 27; ++x) {
      if (x == 17) continue;
      set(x, y, shelf_row ? CellKind::Obstacle : CellKind::TaskEndpoint);
    }
  }
  return GridMap(kWidth, kHeight, std::move(kinds));
}

GridMap make_random_map(int width, int height, double obstacle_density, int n_parking, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = width * height;
  std::vector<CellKind> kinds(n, CellKind::TaskEndpoint);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int target = static_cast<int>(std::lround(obstacle_density * n));
  int placed = 0;
  for (int idx : order) {
    if (placed == target) break;
    kinds[idx] = CellKind::Obstacle;
    if (is_connected(GridMap(width, height, kinds))) {
      ++placed;
    } else {
      kinds[idx] = CellKind::TaskEndpoint;
    }
  }
  std::vector<int> free_cells;
  for (int i = 0; i < n; ++i)
    if (kinds[i] != CellKind::Obstacle) free_cells.push_back(i);
  std::shuffle(free_cells.begin(), free_cells.end(), rng);
  if (n_parking > static_cast<int>(free_cells.size())) throw ContractError("make_random_map: too many parking cells");
  for (int i = 0; i < n_parking; ++i) kinds[free_cells[i]] = CellKind::NonTaskEndpoint;
  return GridMap(width, height, std::move(kinds));
}

void RunConfig::validate() const {
  if (!(delay_p >= 0.0 && delay_p <= 1.0)) throw ContractError("delay probability must lie in [0,1]");
  if (n_agents < 1) throw ContractError("need at least one agent");
  if (gen_tasks < 0) throw ContractError("task count must be non-negative");
  if (recovery_radius < 1) throw ContractError("recovery radius must be at least 1");
  if (max_iters < 0) throw ContractError("max iterations must be non-negative");
  if (horizon < 0) throw ContractError("horizon must be non-negative");
  if (termination == TerminationMode::FixedHorizon && horizon == 0)
    throw ContractError("fixed-horizon runs need an explicit horizon");
}

Instance load_instance(const RunConfig& config) {
  config.validate();
  Instance inst;
  try {
    inst.map = parse_map(read_text_file(config.map_path));
  } catch (const ParseError& e) {
    throw ParseError(config.map_path + ": " + e.what(), e.line(), e.column());
  }
  if (!config.task_path.empty()) {
    try {
      inst.tasks = parse_tasks(read_text_file(config.task_path), inst.map);
    } catch (const ParseError& e) {
      throw ParseError(config.task_path + ": " + e.what(), e.line(), e.column());
    }
  } else {
    inst.tasks = generate_instance(inst.map, config.gen_tasks, config.frequency, config.seed);
  }
  if (config.require_well_formed) {
    const auto report = check_well_formed(inst.map, config.n_agents);
    if (!report.ok) throw ContractError("instance is not well-formed: " + report.violations.front());
  }
  inst.starts = initial_placement(inst.map, config.n_agents);
  return inst;
}

}  // namespace attf
