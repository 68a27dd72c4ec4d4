#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include "attf/instance_io.hpp"
#include "test_support.hpp"

using namespace attf;
using testing_util::raw_grid;

namespace {

const char* kSmall = "height 3\nwidth 3\nmap\n@.E\n.P.\nE.@\n";

int count_kind(const GridMap& map, CellKind k) {
  int n = 0;
  for (auto x : map.kinds()) n += x == k;
  return n;
}

std::vector<std::uint8_t> gmap_bytes(int h, int w, const std::vector<float>& values) {
  std::vector<std::uint8_t> out{'G', 'M', 'A', 'P', 1};
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  u32(h);
  u32(w);
  for (float v : values) u32(std::bit_cast<std::uint32_t>(v));
  return out;
}

GridMap endpoints_row(int n) {
  return raw_grid({std::string(n, 'E'), std::string(n, '.'), std::string(n, 'P')});
}

}  // namespace

TEST_CASE("parse_map maps glyphs") {
  const auto map = parse_map(kSmall);
  CHECK(map.width() == 3);
  CHECK(map.height() == 3);
  CHECK(count_kind(map, CellKind::Obstacle) == 2);
  CHECK(count_kind(map, CellKind::TaskEndpoint) == 2);
  CHECK(count_kind(map, CellKind::NonTaskEndpoint) == 1);
  CHECK(map.kind(Cell{2, 0}) == CellKind::TaskEndpoint);
  CHECK(map.kind(Cell{1, 1}) == CellKind::NonTaskEndpoint);
}

TEST_CASE("parse_map accepts the short header and a type line") {
  CHECK(parse_map("3 3\n@.E\n.P.\nE.@\n").kinds() == parse_map(kSmall).kinds());
  CHECK(parse_map(std::string("type octile\n") + kSmall).kinds() == parse_map(kSmall).kinds());
}

TEST_CASE("parse_map errors") {
  CHECK_THROWS_WITH_AS(parse_map(""), doctest::Contains("zero dimensions"), ParseError);
  CHECK_THROWS_WITH_AS(parse_map("height 0\nwidth 3\nmap\n"), doctest::Contains("zero dimensions"), ParseError);
  try {
    parse_map("height 2\nwidth 3\nmap\n...\n.X.\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("'X'") != std::string::npos);
    CHECK(e.line() == 5);
    CHECK(e.column() == 2);
  }
  CHECK_THROWS_WITH_AS(parse_map("height 2\nwidth 3\nmap\n...\n..\n"), doctest::Contains("ragged"), ParseError);
  CHECK_THROWS_WITH_AS(parse_map("height 1\nwidth 3\nmap\n.@.\n"), doctest::Contains("disconnected"), ParseError);
  CHECK_THROWS_AS(parse_map("height 3\nwidth 3\nmap\n...\n"), ParseError);
  CHECK_THROWS_AS(parse_map("what is this\n"), ParseError);
}

TEST_CASE("serialize_map round trips") {
  const auto map = parse_map(kSmall);
  const auto again = parse_map(serialize_map(map));
  CHECK(again.kinds() == map.kinds());
  const auto wh = make_small_warehouse();
  CHECK(parse_map(serialize_map(wh)).kinds() == wh.kinds());
}

TEST_CASE("shipped warehouse map matches the generator") {
  const auto text = read_text_file(std::string(ATTF_SOURCE_DIR) + "/data/maps/small_warehouse.map");
  CHECK(parse_map(text).kinds() == make_small_warehouse().kinds());
}

TEST_CASE("parse_tasks fields, sorting and errors") {
  const auto map = raw_grid({"E@EEEE", "......", "P....P"});
  const auto one = parse_tasks("0 1 0 5 0\n", raw_grid({"EEEEEE", "......"}));
  REQUIRE(one.tasks.size() == 1);
  CHECK(one.tasks[0].release == 0);
  CHECK(one.tasks[0].pickup == Cell{1, 0});
  CHECK(one.tasks[0].delivery == Cell{5, 0});
  CHECK(one.tasks[0].phase == TaskPhase::Unreleased);

  const auto sorted = parse_tasks("# header\n7 0 0 2 0\n\n3 2 0 3 0\n", map);
  REQUIRE(sorted.tasks.size() == 2);
  CHECK(sorted.tasks[0].release == 3);
  CHECK(sorted.tasks[0].id == 1);
  CHECK(sorted.tasks[1].release == 7);
  CHECK(sorted.tasks[1].id == 0);

  CHECK_THROWS_WITH_AS(parse_tasks("0 1 0 2 0\n", map), doctest::Contains("not a task endpoint"), ParseError);
  CHECK_THROWS_WITH_AS(parse_tasks("0 0 2 2 0\n", map), doctest::Contains("not a task endpoint"), ParseError);
  CHECK_THROWS_WITH_AS(parse_tasks("0 2 0 2 0\n", map), doctest::Contains("pickup equals delivery"), ParseError);
  CHECK_THROWS_WITH_AS(parse_tasks("-1 0 0 2 0\n", map), doctest::Contains("negative"), ParseError);
  CHECK_THROWS_WITH_AS(parse_tasks("0 0 0 2\n", map), doctest::Contains("record 0"), ParseError);
  CHECK_THROWS_WITH_AS(parse_tasks("0 0 0 2 0\n1 0 0 9 0\n", map), doctest::Contains("record 1"), ParseError);
}

TEST_CASE("serialize_tasks round trips") {
  const auto map = make_small_warehouse();
  const auto stream = generate_instance(map, 40, Frequency{1, 3}, 5);
  const auto again = parse_tasks(serialize_tasks(stream), map);
  REQUIRE(again.tasks.size() == stream.tasks.size());
  for (std::size_t i = 0; i < stream.tasks.size(); ++i) {
    CHECK(again.tasks[i].pickup == stream.tasks[i].pickup);
    CHECK(again.tasks[i].delivery == stream.tasks[i].delivery);
    CHECK(again.tasks[i].release == stream.tasks[i].release);
  }
}

TEST_CASE("Frequency parsing") {
  CHECK(Frequency::parse("0.2").value() == doctest::Approx(0.2));
  CHECK(Frequency::parse("1/3").released_by(9) == 3);
  CHECK(Frequency::parse("5").value() == 5.0);
  CHECK_THROWS_AS(Frequency::parse("0"), ParseError);
  CHECK_THROWS_AS(Frequency::parse("-1"), ParseError);
  CHECK_THROWS_AS(Frequency::parse("abc"), ParseError);
}

TEST_CASE("generated releases") {
  const auto map = endpoints_row(6);
  SUBCASE("f = 0.2") {
    const auto s = generate_instance(map, 3, Frequency::parse("0.2"), 1);
    REQUIRE(s.tasks.size() == 3);
    CHECK(s.tasks[0].release == 5);
    CHECK(s.tasks[1].release == 10);
    CHECK(s.tasks[2].release == 15);
  }
  SUBCASE("f = 50") {
    const auto s = generate_instance(map, 100, Frequency::parse("50"), 1);
    int at1 = 0;
    int at2 = 0;
    for (const auto& t : s.tasks) {
      at1 += t.release == 1;
      at2 += t.release == 2;
    }
    CHECK(at1 == 50);
    CHECK(at2 == 50);
  }
}

TEST_CASE("released count equals floor(f t) for generated streams") {
  const auto map = endpoints_row(6);
  const Frequency freqs[] = {{1, 5}, {1, 3}, {2, 3}, {1, 1}, {7, 2}, {50, 1}};
  for (const auto f : freqs) {
    const auto s = generate_instance(map, 200, f, 2);
    for (int t = 0; t < 150; ++t) {
      long long released = 0;
      for (const auto& task : s.tasks) released += task.release <= t;
      const long long expected = std::min<long long>(200, static_cast<long long>(std::floor(f.value() * t + 1e-9)));
      CHECK(released == expected);
    }
  }
}

TEST_CASE("generated tasks are valid and deterministic") {
  const auto map = make_small_warehouse();
  const auto a = generate_instance(map, 300, Frequency{1, 1}, 42);
  const auto b = generate_instance(map, 300, Frequency{1, 1}, 42);
  const auto c = generate_instance(map, 300, Frequency{1, 1}, 43);
  CHECK(serialize_tasks(a) == serialize_tasks(b));
  CHECK(serialize_tasks(a) != serialize_tasks(c));
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    const auto& t = a.tasks[i];
    CHECK(t.id == static_cast<int>(i));
    CHECK(t.pickup != t.delivery);
    CHECK(map.kind(t.pickup) == CellKind::TaskEndpoint);
    CHECK(map.kind(t.delivery) == CellKind::TaskEndpoint);
    if (i > 0) CHECK(t.release >= a.tasks[i - 1].release);
  }
}

TEST_CASE("generate_instance needs two task endpoints") {
  CHECK_THROWS_AS(generate_instance(raw_grid({"E.P"}), 1, Frequency{1, 1}, 0), ContractError);
  CHECK(generate_instance(raw_grid({"E.P"}), 0, Frequency{1, 1}, 0).tasks.empty());
}

TEST_CASE("guidance files") {
  const auto map = raw_grid({"..", ".."});
  SUBCASE("all-zero payload") {
    const auto g = decode_guidance(gmap_bytes(2, 2, {0, 0, 0, 0}), map);
    CHECK(g.width == 2);
    CHECK(g.height == 2);
    for (int i = 0; i < 4; ++i) CHECK(g.at(i) == 0.0);
  }
  SUBCASE("NaN") {
    CHECK_THROWS_AS(decode_guidance(gmap_bytes(2, 2, {0, std::numeric_limits<float>::quiet_NaN(), 0, 0}), map),
                    ParseError);
  }
  SUBCASE("dims mismatch") {
    const auto big = raw_grid({"....", "....", "....", "...."});
    CHECK_THROWS_WITH_AS(decode_guidance(gmap_bytes(3, 3, std::vector<float>(9, 0.f)), big),
                         doctest::Contains("do not match"), ParseError);
  }
  SUBCASE("truncated payload") {
    auto bytes = gmap_bytes(2, 2, {0, 0, 0, 0});
    bytes.pop_back();
    CHECK_THROWS_AS(decode_guidance(bytes, map), ParseError);
    CHECK_THROWS_AS(decode_guidance({'G', 'M'}, map), ParseError);
  }
  SUBCASE("marginal values are clamped with a warning") {
    std::vector<std::string> warnings;
    const auto g = decode_guidance(gmap_bytes(2, 2, {-0.0005f, 1.0005f, 0.5f, 1.f}), map, &warnings);
    CHECK(g.at(0) == 0.0);
    CHECK(g.at(1) == 1.0);
    CHECK(g.at(2) == 0.5);
    CHECK(warnings.size() == 1);
    CHECK_THROWS_AS(decode_guidance(gmap_bytes(2, 2, {1.5f, 0, 0, 0}), map), ParseError);
  }
  SUBCASE("file round trip") {
    const auto path = (std::filesystem::temp_directory_path() / "attf_test_rt.gmap").string();
    const GuidanceMap g{2, 2, {0.f, 0.25f, 0.5f, 1.f}};
    write_guidance_file(path, g);
    std::vector<std::string> warnings;
    const auto back = read_guidance_file(path, map, &warnings);
    CHECK(back.values == g.values);
    CHECK(warnings.empty());
    CHECK(encode_guidance(g) == gmap_bytes(2, 2, g.values));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_guidance_file(path, map), ParseError);
  }
}

TEST_CASE("initial placement uses parking cells in row-major order") {
  const auto map = raw_grid({"P.E", "E.P", "P.."});
  const auto starts = initial_placement(map, 2);
  CHECK(starts == std::vector<Cell>{{0, 0}, {2, 1}});
  CHECK_THROWS_AS(initial_placement(map, 4), ContractError);
}

TEST_CASE("run config validation") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.delay_p = 1.5;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c.delay_p = 0.0;
  c.termination = TerminationMode::FixedHorizon;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c.horizon = 10;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("load_instance with the well-formed gate") {
  const auto dir = std::filesystem::temp_directory_path() / "attf_io_test";
  std::filesystem::create_directories(dir);
  write_text_file((dir / "bad.map").string(), "height 1\nwidth 3\nmap\nPEP\n");
  write_text_file((dir / "bad.tasks").string(), "0 1 0 1 0\n");
  RunConfig c;
  c.map_path = (dir / "bad.map").string();
  c.gen_tasks = 0;
  c.n_agents = 1;
  CHECK_NOTHROW(load_instance(c));
  c.require_well_formed = true;
  CHECK_THROWS_AS(load_instance(c), ContractError);
  c.require_well_formed = false;
  c.task_path = (dir / "bad.tasks").string();
  CHECK_THROWS_AS(load_instance(c), ParseError);
  c.map_path = (dir / "missing.map").string();
  CHECK_THROWS(load_instance(c));
  std::filesystem::remove_all(dir);
}
