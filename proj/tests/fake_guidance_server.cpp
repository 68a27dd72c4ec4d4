// Test double for the remote guidance process: answers GREQ frames on stdin with GRSP
// frames on stdout. Each map is 0.25 everywhere except 0.75 on the leg's goal cell.
#include <cstdint>
#include <cstdio>
#include <vector>

#include "attf/guidance.hpp"

namespace {

bool read_exact(std::uint8_t* out, std::size_t n) {
  return std::fread(out, 1, n, stdin) == n;
}

std::uint32_t u32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

int main() {
  while (true) {
    std::vector<std::uint8_t> frame(8);
    if (!read_exact(frame.data(), 8)) return 0;
    const std::uint32_t k = u32(frame.data() + 4);
    for (std::uint32_t i = 0; i < k; ++i) {
      std::uint8_t dims[8];
      if (!read_exact(dims, 8)) return 1;
      frame.insert(frame.end(), dims, dims + 8);
      const std::size_t body = static_cast<std::size_t>(u32(dims)) * u32(dims + 4) + 12;
      std::vector<std::uint8_t> rest(body);
      if (!read_exact(rest.data(), body)) return 1;
      frame.insert(frame.end(), rest.begin(), rest.end());
    }
    const auto items = attf::wire::decode_request(frame);
    std::vector<attf::GuidanceMap> maps;
    for (const auto& item : items) {
      const std::size_t n = static_cast<std::size_t>(item.height) * item.width;
      for (std::uint32_t goal : {item.start, item.goal}) {
        attf::GuidanceMap m{static_cast<int>(item.width), static_cast<int>(item.height), std::vector<float>(n, 0.25f)};
        m.values[goal] = 0.75f;
        maps.push_back(std::move(m));
      }
    }
    const auto out = attf::wire::encode_response(maps);
    std::fwrite(out.data(), 1, out.size(), stdout);
    std::fflush(stdout);
  }
}
