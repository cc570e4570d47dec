#pragma once

#include <algorithm>
#include <set>
#include <vector>

#include "selros/errors.hpp"
#include "selros/gridmap.hpp"
#include "selros/segmentation.hpp"

namespace selros {

// Per-room geometry handed to the semantic stage: exact area, axis-aligned
// bounding rectangle, centroid, and which rooms sit next to this one.
struct RoomRecord {
  int id = 0;
  long area_cells = 0;
  double area_m2 = 0.0;
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  double length_m = 0.0;  // larger bbox side
  double width_m = 0.0;   // smaller bbox side
  CellCoord centroid;
  std::vector<int> adjacent;  // sorted, never contains `id`
};

struct RoomArea {
  long cells = 0;
  double m2 = 0.0;
};

struct RoomShape {
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  double length_m = 0.0;
  double width_m = 0.0;
};

namespace detail {

inline void require_same_shape(const LabelMap& map, const OccupancyGrid& grid) {
  if (map.width != grid.width || map.height != grid.height)
    throw ShapeError("label map and occupancy grid dimensions differ");
}

}  // namespace detail

// Exact cell tally per room, scaled by resolution^2 for physical area.
// Index i holds room id i+1.
inline std::vector<RoomArea> compute_areas(const LabelMap& map, const OccupancyGrid& grid) {
  detail::require_same_shape(map, grid);
  const int k = map.room_count();
  std::vector<RoomArea> areas(static_cast<std::size_t>(k));
  for (int v : map.labels)
    if (v > 0) ++areas[static_cast<std::size_t>(v) - 1].cells;
  const double cell_area = grid.resolution * grid.resolution;
  for (RoomArea& a : areas) a.m2 = static_cast<double>(a.cells) * cell_area;
  return areas;
}

// Axis-aligned bounding rectangle per room; spans count cells inclusively,
// so a single-cell room is resolution x resolution.
inline std::vector<RoomShape> compute_shape(const LabelMap& map, const OccupancyGrid& grid) {
  detail::require_same_shape(map, grid);
  const int k = map.room_count();
  std::vector<RoomShape> shapes(static_cast<std::size_t>(k));
  std::vector<char> seen(static_cast<std::size_t>(k) + 1, 0);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      int id = map.at(x, y);
      if (id <= 0) continue;
      RoomShape& s = shapes[static_cast<std::size_t>(id) - 1];
      if (!seen[static_cast<std::size_t>(id)]) {
        seen[static_cast<std::size_t>(id)] = 1;
        s.min_x = s.max_x = x;
        s.min_y = s.max_y = y;
      } else {
        s.min_x = std::min(s.min_x, x);
        s.max_x = std::max(s.max_x, x);
        s.min_y = std::min(s.min_y, y);
        s.max_y = std::max(s.max_y, y);
      }
    }
  }
  for (RoomShape& s : shapes) {
    double span_x = (s.max_x - s.min_x + 1) * grid.resolution;
    double span_y = (s.max_y - s.min_y + 1) * grid.resolution;
    s.length_m = std::max(span_x, span_y);
    s.width_m = std::min(span_x, span_y);
  }
  return shapes;
}

// Dilates every room mask by `dilation` cells (8-connectivity, i.e. a
// Chebyshev ball) and calls two rooms adjacent when the dilated masks
// overlap. Rooms across a wall up to `dilation` cells thick therefore count
// as neighbors. Index i holds the sorted neighbor list of room id i+1.
inline std::vector<std::vector<int>> compute_adjacency(const LabelMap& map,
                                                       int dilation = 1) {
  if (dilation < 1) throw ConfigError("adjacency dilation must be >= 1");
  const int k = map.room_count();
  std::vector<std::set<int>> adj(static_cast<std::size_t>(k) + 1);
  std::vector<int> window;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      // rooms whose dilated mask covers (x, y)
      window.clear();
      for (int dy = -dilation; dy <= dilation; ++dy) {
        for (int dx = -dilation; dx <= dilation; ++dx) {
          int nx = x + dx, ny = y + dy;
          if (!map.in_bounds(nx, ny)) continue;
          int id = map.at(nx, ny);
          if (id > 0) window.push_back(id);
        }
      }
      std::sort(window.begin(), window.end());
      window.erase(std::unique(window.begin(), window.end()), window.end());
      for (std::size_t a = 0; a < window.size(); ++a) {
        for (std::size_t b = a + 1; b < window.size(); ++b) {
          adj[static_cast<std::size_t>(window[a])].insert(window[b]);
          adj[static_cast<std::size_t>(window[b])].insert(window[a]);
        }
      }
    }
  }
  std::vector<std::vector<int>> out(static_cast<std::size_t>(k));
  for (int id = 1; id <= k; ++id)
    out[static_cast<std::size_t>(id) - 1].assign(adj[static_cast<std::size_t>(id)].begin(),
                                                 adj[static_cast<std::size_t>(id)].end());
  return out;
}

// Full room interpretation: area + shape + adjacency + centroid, one record
// per room id 1..K.
inline std::vector<RoomRecord> interpret(const LabelMap& map, const OccupancyGrid& grid,
                                         int adjacency_dilation = 1) {
  detail::require_same_shape(map, grid);
  const int k = map.room_count();
  const std::vector<RoomArea> areas = compute_areas(map, grid);
  const std::vector<RoomShape> shapes = compute_shape(map, grid);
  const std::vector<std::vector<int>> adjacency = compute_adjacency(map, adjacency_dilation);
  const std::vector<std::pair<int, CellCoord>> centroids = room_centroids(map, grid);

  std::vector<RoomRecord> records(static_cast<std::size_t>(k));
  for (int id = 1; id <= k; ++id) {
    RoomRecord& r = records[static_cast<std::size_t>(id) - 1];
    const std::size_t i = static_cast<std::size_t>(id) - 1;
    r.id = id;
    r.area_cells = areas[i].cells;
    r.area_m2 = areas[i].m2;
    r.min_x = shapes[i].min_x;
    r.min_y = shapes[i].min_y;
    r.max_x = shapes[i].max_x;
    r.max_y = shapes[i].max_y;
    r.length_m = shapes[i].length_m;
    r.width_m = shapes[i].width_m;
    r.adjacent = adjacency[i];
  }
  for (const auto& [id, c] : centroids)
    records[static_cast<std::size_t>(id) - 1].centroid = c;
  return records;
}

}  // namespace selros
