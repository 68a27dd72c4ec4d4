#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "attf/grid.hpp"

namespace attf {

// Per-cell search guidance in [0,1], added to f-values. An empty value vector is the all-zero map.
struct GuidanceMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  static GuidanceMap zero(int width, int height) { return {width, height, {}}; }
  bool is_zero() const { return values.empty(); }
  double at(int index) const { return values.empty() ? 0.0 : static_cast<double>(values[index]); }
};

// One assigned agent-task pair as seen by the guidance encoder.
struct GuidanceRequest {
  std::vector<std::uint8_t> environment;  // H*W, 1 = blocked (obstacles and idle agents)
  int agent = 0;     // cell index of the agent's current location
  int pickup = 0;    // cell index of the task pickup
  int delivery = 0;  // cell index of the task delivery
};

// Two maps per request: agent -> pickup, then pickup -> delivery.
struct GuidancePair {
  GuidanceMap to_pickup;
  GuidanceMap to_delivery;
};

enum class GuidanceMode { Zero, FileStore, Remote };

struct GuidanceSpec {
  GuidanceMode mode = GuidanceMode::Zero;
  std::string argument;  // directory for FileStore, command line for Remote
};

// Parses "zero", "file:DIR" or "remote:CMD".
GuidanceSpec parse_guidance_spec(const std::string& text);
std::string to_string(const GuidanceSpec& spec);

class GuidanceProvider {
 public:
  virtual ~GuidanceProvider() = default;

  // Fulfils a whole timestep's batch. Results are cached per (start, goal, environment) leg
  // until begin_timestep() is called again.
  std::vector<GuidancePair> fetch(const GridMap& map, const std::vector<GuidanceRequest>& batch);
  void begin_timestep() { cache_.clear(); }

  std::int64_t cache_hits() const { return cache_hits_; }
  std::int64_t legs_served() const { return legs_served_; }

 protected:
  struct Leg {
    const GuidanceRequest* request;
    int start;
    int goal;
  };
  // Produces one map per leg, in order.
  virtual std::vector<GuidanceMap> produce(const GridMap& map, const std::vector<Leg>& legs) = 0;

 private:
  std::unordered_map<std::string, GuidanceMap> cache_;
  std::int64_t cache_hits_ = 0;
  std::int64_t legs_served_ = 0;
};

class ZeroGuidance final : public GuidanceProvider {
 protected:
  std::vector<GuidanceMap> produce(const GridMap& map, const std::vector<Leg>& legs) override;
};

// Reads g_<sx>_<sy>_<gx>_<gy>.gmap files from a directory; a missing file yields the zero map.
class FileStoreGuidance final : public GuidanceProvider {
 public:
  explicit FileStoreGuidance(std::string directory) : directory_(std::move(directory)) {}
  std::int64_t missing_files() const { return missing_; }
  static std::string file_name(Cell start, Cell goal);

 protected:
  std::vector<GuidanceMap> produce(const GridMap& map, const std::vector<Leg>& legs) override;

 private:
  std::string directory_;
  std::int64_t missing_ = 0;
};

class Subprocess;

// Talks the GREQ/GRSP framed protocol to a child process over its stdin/stdout.
class RemoteGuidance final : public GuidanceProvider {
 public:
  explicit RemoteGuidance(const std::string& command);
  ~RemoteGuidance() override;

 protected:
  std::vector<GuidanceMap> produce(const GridMap& map, const std::vector<Leg>& legs) override;

 private:
  std::unique_ptr<Subprocess> child_;
};

std::unique_ptr<GuidanceProvider> make_guidance_provider(const GuidanceSpec& spec);

// GREQ/GRSP frame codecs.
namespace wire {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RequestItem {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> environment;
  std::uint32_t start = 0;   // task pickup
  std::uint32_t goal = 0;    // task delivery
  std::uint32_t agent = 0;   // agent's current location
};

std::vector<std::uint8_t> encode_request(const std::vector<RequestItem>& items);
std::vector<RequestItem> decode_request(const std::vector<std::uint8_t>& frame);

std::vector<std::uint8_t> encode_response(const std::vector<GuidanceMap>& maps);
// Decodes maps of the given dims; throws on malformed frames or out-of-range values.
std::vector<GuidanceMap> decode_response(const std::vector<std::uint8_t>& frame,
                                         const std::vector<std::pair<std::uint32_t, std::uint32_t>>& dims);

}  // namespace wire

}  // namespace attf
