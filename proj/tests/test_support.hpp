#pragma once

#include <string>
#include <vector>

#include "attf/grid.hpp"
#include "attf/instance_io.hpp"

namespace testing_util {

// Rows of map glyphs, top row first.
inline attf::GridMap grid(const std::vector<std::string>& rows) {
  std::string text = std::to_string(rows.size()) + " " + std::to_string(rows.front().size()) + "\n";
  for (const auto& r : rows) text += r + "\n";
  return attf::parse_map(text);
}

// Same without the connectivity check in parse_map.
inline attf::GridMap raw_grid(const std::vector<std::string>& rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.front().size());
  std::vector<attf::CellKind> kinds;
  for (const auto& r : rows) {
    for (char c : r) {
      switch (c) {
        case '@': kinds.push_back(attf::CellKind::Obstacle); break;
        case 'E': kinds.push_back(attf::CellKind::TaskEndpoint); break;
        case 'P': kinds.push_back(attf::CellKind::NonTaskEndpoint); break;
        default: kinds.push_back(attf::CellKind::Free); break;
      }
    }
  }
  return attf::GridMap(w, h, std::move(kinds));
}

inline attf::GridMap empty_grid(int w, int h) {
  return attf::GridMap(w, h, std::vector<attf::CellKind>(w * h, attf::CellKind::Free));
}

}  // namespace testing_util
