#include "attf/guidance.hpp"

#include <bit>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string_view>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "attf/instance_io.hpp"

namespace attf {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

constexpr float kValueTolerance = 1e-3f;

}  // namespace

GuidanceSpec parse_guidance_spec(const std::string& text) {
  if (text == "zero") return {GuidanceMode::Zero, ""};
  if (text.rfind("file:", 0) == 0 && text.size() > 5) return {GuidanceMode::FileStore, text.substr(5)};
  if (text.rfind("remote:", 0) == 0 && text.size() > 7) return {GuidanceMode::Remote, text.substr(7)};
  throw std::runtime_error("guidance must be zero, file:DIR or remote:CMD, got '" + text + "'");
}

std::string to_string(const GuidanceSpec& spec) {
  switch (spec.mode) {
    case GuidanceMode::Zero: return "zero";
    case GuidanceMode::FileStore: return "file:" + spec.argument;
    case GuidanceMode::Remote: return "remote:" + spec.argument;
  }
  return "zero";
}

std::vector<GuidancePair> GuidanceProvider::fetch(const GridMap& map, const std::vector<GuidanceRequest>& batch) {
  auto key_of = [](const GuidanceRequest& r, int start, int goal) {
    const std::string_view env(reinterpret_cast<const char*>(r.environment.data()), r.environment.size());
    return std::to_string(start) + ':' + std::to_string(goal) + ':' + std::to_string(std::hash<std::string_view>{}(env));
  };

  std::vector<Leg> misses;
  std::vector<std::string> miss_keys;
  for (const auto& r : batch) {
    const std::pair<int, int> legs[2] = {{r.agent, r.pickup}, {r.pickup, r.delivery}};
    for (const auto& [s, g] : legs) {
      auto key = key_of(r, s, g);
      if (cache_.count(key) || std::find(miss_keys.begin(), miss_keys.end(), key) != miss_keys.end()) {
        ++cache_hits_;
        continue;
      }
      misses.push_back({&r, s, g});
      miss_keys.push_back(std::move(key));
    }
  }
  if (!misses.empty()) {
    auto maps = produce(map, misses);
    if (maps.size() != misses.size()) throw std::runtime_error("guidance provider returned the wrong number of maps");
    for (std::size_t i = 0; i < maps.size(); ++i) cache_[miss_keys[i]] = std::move(maps[i]);
    legs_served_ += static_cast<std::int64_t>(misses.size());
  }

  std::vector<GuidancePair> out;
  out.reserve(batch.size());
  for (const auto& r : batch)
    out.push_back({cache_.at(key_of(r, r.agent, r.pickup)), cache_.at(key_of(r, r.pickup, r.delivery))});
  return out;
}

std::vector<GuidanceMap> ZeroGuidance::produce(const GridMap& map, const std::vector<Leg>& legs) {
  return std::vector<GuidanceMap>(legs.size(), GuidanceMap::zero(map.width(), map.height()));
}

std::string FileStoreGuidance::file_name(Cell start, Cell goal) {
  return "g_" + std::to_string(start.x) + "_" + std::to_string(start.y) + "_" + std::to_string(goal.x) + "_" +
         std::to_string(goal.y) + ".gmap";
}

std::vector<GuidanceMap> FileStoreGuidance::produce(const GridMap& map, const std::vector<Leg>& legs) {
  std::vector<GuidanceMap> out;
  out.reserve(legs.size());
  for (const auto& leg : legs) {
    const auto path = std::filesystem::path(directory_) / file_name(map.cell(leg.start), map.cell(leg.goal));
    if (!std::filesystem::exists(path)) {
      ++missing_;
      out.push_back(GuidanceMap::zero(map.width(), map.height()));
      continue;
    }
    out.push_back(read_guidance_file(path.string(), map));
  }
  return out;
}

class Subprocess {
 public:
  explicit Subprocess(const std::string& command) {
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) throw std::runtime_error("guidance: pipe failed");
    pid_ = fork();
    if (pid_ < 0) throw std::runtime_error("guidance: fork failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    std::signal(SIGPIPE, SIG_IGN);
  }

  ~Subprocess() {
    if (write_fd_ >= 0) close(write_fd_);
    if (read_fd_ >= 0) close(read_fd_);
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
    }
  }

  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  void write_all(const std::vector<std::uint8_t>& bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
      const ssize_t n = ::write(write_fd_, bytes.data() + done, bytes.size() - done);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw std::runtime_error("guidance: child closed its input");
      done += static_cast<std::size_t>(n);
    }
  }

  void read_exact(std::uint8_t* out, std::size_t count) {
    std::size_t done = 0;
    while (done < count) {
      const ssize_t n = ::read(read_fd_, out + done, count - done);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw std::runtime_error("guidance: child closed its output mid-frame");
      done += static_cast<std::size_t>(n);
    }
  }

 private:
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
};

RemoteGuidance::RemoteGuidance(const std::string& command) : child_(std::make_unique<Subprocess>(command)) {}

RemoteGuidance::~RemoteGuidance() = default;

std::vector<GuidanceMap> RemoteGuidance::produce(const GridMap& map, const std::vector<Leg>& legs) {
  // One wire item per distinct request; each item yields the two legs of that request.
  std::vector<const GuidanceRequest*> requests;
  for (const auto& leg : legs)
    if (std::find(requests.begin(), requests.end(), leg.request) == requests.end()) requests.push_back(leg.request);

  std::vector<wire::RequestItem> items;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dims;
  for (const auto* r : requests) {
    wire::RequestItem item;
    item.height = static_cast<std::uint32_t>(map.height());
    item.width = static_cast<std::uint32_t>(map.width());
    item.environment = r->environment;
    item.start = static_cast<std::uint32_t>(r->pickup);
    item.goal = static_cast<std::uint32_t>(r->delivery);
    item.agent = static_cast<std::uint32_t>(r->agent);
    dims.emplace_back(item.height, item.width);
    dims.emplace_back(item.height, item.width);
    items.push_back(std::move(item));
  }
  child_->write_all(wire::encode_request(items));

  std::vector<std::uint8_t> frame(8);
  child_->read_exact(frame.data(), 8);
  std::size_t payload = 0;
  for (const auto& [h, w] : dims) payload += static_cast<std::size_t>(h) * w * 4;
  if (std::memcmp(frame.data(), "GRSP", 4) == 0 && get_u32(frame.data() + 4) == dims.size()) {
    frame.resize(8 + payload);
    child_->read_exact(frame.data() + 8, payload);
  }
  auto maps = wire::decode_response(frame, dims);

  std::vector<GuidanceMap> out;
  out.reserve(legs.size());
  for (const auto& leg : legs) {
    const auto pos = static_cast<std::size_t>(std::find(requests.begin(), requests.end(), leg.request) - requests.begin());
    const bool second = leg.start == leg.request->pickup && leg.goal == leg.request->delivery;
    out.push_back(maps[2 * pos + (second ? 1 : 0)]);
  }
  return out;
}

std::unique_ptr<GuidanceProvider> make_guidance_provider(const GuidanceSpec& spec) {
  switch (spec.mode) {
    case GuidanceMode::Zero: return std::make_unique<ZeroGuidance>();
    case GuidanceMode::FileStore: return std::make_unique<FileStoreGuidance>(spec.argument);
    case GuidanceMode::Remote: return std::make_unique<RemoteGuidance>(spec.argument);
  }
  return std::make_unique<ZeroGuidance>();
}

namespace wire {

std::vector<std::uint8_t> encode_request(const std::vector<RequestItem>& items) {
  std::vector<std::uint8_t> out = {'G', 'R', 'E', 'Q'};
  put_u32(out, static_cast<std::uint32_t>(items.size()));
  for (const auto& item : items) {
    if (item.environment.size() != static_cast<std::size_t>(item.height) * item.width)
      throw ProtocolError("request item environment size does not match its dims");
    put_u32(out, item.height);
    put_u32(out, item.width);
    out.insert(out.end(), item.environment.begin(), item.environment.end());
    put_u32(out, item.start);
    put_u32(out, item.goal);
    put_u32(out, item.agent);
  }
  return out;
}

std::vector<RequestItem> decode_request(const std::vector<std::uint8_t>& frame) {
  if (frame.size() < 8 || std::memcmp(frame.data(), "GREQ", 4) != 0) throw ProtocolError("request: bad magic");
  const std::uint32_t k = get_u32(frame.data() + 4);
  std::size_t pos = 8;
  std::vector<RequestItem> items;
  for (std::uint32_t i = 0; i < k; ++i) {
    if (frame.size() < pos + 8) throw ProtocolError("request: truncated item header");
    RequestItem item;
    item.height = get_u32(frame.data() + pos);
    item.width = get_u32(frame.data() + pos + 4);
    pos += 8;
    const std::size_t cells = static_cast<std::size_t>(item.height) * item.width;
    if (frame.size() < pos + cells + 12) throw ProtocolError("request: truncated item body");
    item.environment.assign(frame.begin() + static_cast<std::ptrdiff_t>(pos),
                            frame.begin() + static_cast<std::ptrdiff_t>(pos + cells));
    pos += cells;
    item.start = get_u32(frame.data() + pos);
    item.goal = get_u32(frame.data() + pos + 4);
    item.agent = get_u32(frame.data() + pos + 8);
    pos += 12;
    if (item.start >= cells || item.goal >= cells || item.agent >= cells)
      throw ProtocolError("request: cell index out of range");
    items.push_back(std::move(item));
  }
  if (pos != frame.size()) throw ProtocolError("request: trailing bytes");
  return items;
}

std::vector<std::uint8_t> encode_response(const std::vector<GuidanceMap>& maps) {
  std::vector<std::uint8_t> out = {'G', 'R', 'S', 'P'};
  put_u32(out, static_cast<std::uint32_t>(maps.size()));
  for (const auto& m : maps) {
    const std::size_t n = static_cast<std::size_t>(m.height) * m.width;
    for (std::size_t i = 0; i < n; ++i) put_u32(out, std::bit_cast<std::uint32_t>(m.values.empty() ? 0.0f : m.values[i]));
  }
  return out;
}

std::vector<GuidanceMap> decode_response(const std::vector<std::uint8_t>& frame,
                                         const std::vector<std::pair<std::uint32_t, std::uint32_t>>& dims) {
  if (frame.size() < 8 || std::memcmp(frame.data(), "GRSP", 4) != 0) throw ProtocolError("response: bad magic");
  const std::uint32_t count = get_u32(frame.data() + 4);
  if (count != dims.size())
    throw ProtocolError("response: " + std::to_string(count) + " maps, expected " + std::to_string(dims.size()));
  std::size_t pos = 8;
  std::vector<GuidanceMap> maps;
  for (const auto& [h, w] : dims) {
    const std::size_t n = static_cast<std::size_t>(h) * w;
    if (frame.size() < pos + 4 * n) throw ProtocolError("response: truncated payload");
    GuidanceMap m{static_cast<int>(w), static_cast<int>(h), std::vector<float>(n)};
    for (std::size_t i = 0; i < n; ++i, pos += 4) {
      float v = std::bit_cast<float>(get_u32(frame.data() + pos));
      if (!std::isfinite(v) || v < -kValueTolerance || v > 1.0f + kValueTolerance)
        throw ProtocolError("response: value out of range at cell " + std::to_string(i));
      m.values[i] = std::clamp(v, 0.0f, 1.0f);
    }
    maps.push_back(std::move(m));
  }
  if (pos != frame.size()) throw ProtocolError("response: trailing bytes");
  return maps;
}

}  // namespace wire

}  // namespace attf
