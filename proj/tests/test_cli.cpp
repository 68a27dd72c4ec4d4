#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <sys/wait.h>

#include "attf/instance_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status = -1;
  std::string out;
};

Outcome sh(const std::string& args) {
  const std::string cmd = std::string(ATTF_CLI) + " " + args + " 2>&1";
  Outcome o;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) o.out += buf.data();
  const int raw = pclose(p);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "attf_cli_test";
  fs::create_directories(dir);
  return dir;
}

const std::string kWarehouse = std::string(ATTF_SOURCE_DIR) + "/data/maps/small_warehouse.map";

}  // namespace

TEST_CASE("check reports the warehouse well formed") {
  const auto o = sh("check --map " + kWarehouse + " --agents 50");
  CHECK(o.status == 0);
  CHECK(o.out.find("well-formed for 50 agents") != std::string::npos);
  const auto bad = sh("check --map " + kWarehouse + " --agents 500");
  CHECK(bad.status == 1);
  CHECK(bad.out.find("violation") != std::string::npos);
}

TEST_CASE("warehouse-map writes the shipped map") {
  const auto out = (scratch() / "wh.map").string();
  REQUIRE(sh("warehouse-map --out " + out).status == 0);
  CHECK(attf::read_text_file(out) == attf::read_text_file(kWarehouse));
}

TEST_CASE("run prints metrics and writes outputs") {
  const auto dir = scratch();
  const auto metrics = (dir / "m.json").string();
  const auto trace = (dir / "t.txt").string();
  const auto o = sh("run --map " + kWarehouse + " --gen-tasks 20 --freq 0.5 --agents 5 --seed 3 --metrics-out " +
                    metrics + " --trace-out " + trace);
  REQUIRE(o.status == 0);
  const auto j = nlohmann::json::parse(attf::read_text_file(metrics));
  CHECK(j["completed"] == 20);
  CHECK(j["st"].is_number());
  CHECK(j["config"]["agents"] == 5);
  CHECK(j["config"]["frequency"] == "0.5");
  CHECK(j["incomplete"] == false);
  CHECK(nlohmann::json::parse(o.out) == j);
  const auto lines = attf::read_text_file(trace);
  CHECK(lines.rfind("0 0 ", 0) == 0);

  // same seed, same metrics apart from wall time
  const auto again = nlohmann::json::parse(sh("run --map " + kWarehouse + " --gen-tasks 20 --freq 0.5 --agents 5 --seed 3").out);
  CHECK(again["st"] == j["st"]);
  CHECK(again["iters"] == j["iters"]);
}

TEST_CASE("run with a task file") {
  const auto dir = scratch();
  const auto map = (dir / "line.map").string();
  const auto tasks = (dir / "line.tasks").string();
  attf::write_text_file(map, "height 2\nwidth 5\nmap\nP.E.E\n.....\n");
  attf::write_text_file(tasks, "0 2 0 4 0\n");
  const auto o = sh("run --map " + map + " --tasks " + tasks + " --agents 1");
  REQUIRE(o.status == 0);
  const auto j = nlohmann::json::parse(o.out);
  CHECK(j["st"] == 5.0);
  CHECK(j["elapsed"] == 5);
}

TEST_CASE("run exits 3 when the horizon cuts it short") {
  const auto o = sh("run --map " + kWarehouse + " --gen-tasks 50 --agents 2 --horizon 20");
  CHECK(o.status == 3);
  CHECK(nlohmann::json::parse(o.out)["incomplete"] == true);
}

TEST_CASE("random baseline needs a fixed horizon") {
  CHECK(sh("run --map " + kWarehouse + " --agents 3 --random-assign").status == 1);
  const auto o = sh("run --map " + kWarehouse + " --agents 3 --random-assign --termination fixed --horizon 100");
  REQUIRE(o.status == 0);
  const auto j = nlohmann::json::parse(o.out);
  CHECK(j["elapsed"] == 100);
  CHECK(j["completed"].get<int>() > 0);
}

TEST_CASE("bad input is reported") {
  CHECK(sh("run --map /nonexistent.map").status == 1);
  CHECK(sh("run --map " + kWarehouse + " --guidance bogus").status == 1);
  CHECK(sh("run --map " + kWarehouse + " --delay-p 2").status != 0);
  CHECK(sh("").status != 0);
  const auto dir = scratch();
  const auto map = (dir / "bad.map").string();
  attf::write_text_file(map, "height 1\nwidth 3\nmap\nPEP\n");
  const auto o = sh("run --map " + map + " --require-well-formed");
  CHECK(o.status == 1);
  CHECK(o.out.find("not well-formed") != std::string::npos);
}

TEST_CASE("bench runs a matrix") {
  const auto dir = scratch();
  const auto spec = (dir / "matrix.json").string();
  const auto csv = (dir / "out.csv").string();
  nlohmann::json m;
  m["maps"] = {kWarehouse};
  m["agents"] = {2, 4};
  m["freqs"] = {"0.5", 1};
  m["tasks"] = 10;
  m["seeds"] = 2;
  m["seed"] = 9;
  attf::write_text_file(spec, m.dump());
  const auto o = sh("bench --matrix " + spec + " --csv-out " + csv + " --threads 2");
  REQUIRE(o.status == 0);
  const auto text = attf::read_text_file(csv);
  int lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 5);
  CHECK(text.find("|m=4|f=0.5|") != std::string::npos);
}
