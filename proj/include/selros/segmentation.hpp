#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "selros/errors.hpp"
#include "selros/gridmap.hpp"

namespace selros {

enum class SegAlgorithm { Morphological, Distance };

struct SegmentationParams {
  SegAlgorithm algorithm = SegAlgorithm::Morphological;
  double min_room_area = 1.0;   // m^2
  double max_room_area = 60.0;  // m^2
  int erosion_step = 1;         // cells stripped per iteration
  int max_iterations = 100;

  void validate() const {
    if (!(min_room_area > 0.0) || !(min_room_area < max_room_area))
      throw ConfigError("segmentation requires 0 < min_room_area < max_room_area");
    if (erosion_step < 1) throw ConfigError("erosion_step must be >= 1");
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  }
};

namespace detail {

using Mask = std::vector<char>;

inline Mask free_mask(const OccupancyGrid& grid) {
  Mask mask(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i)
    mask[i] = grid.cells[i] == CellState::Free ? 1 : 0;
  return mask;
}

inline bool mask_empty(const Mask& mask) {
  return std::find(mask.begin(), mask.end(), char(1)) == mask.end();
}

// One 4-connected erosion pass; cells outside the grid count as background.
inline Mask erode4(const Mask& mask, int w, int h) {
  Mask out(mask.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::size_t i = std::size_t(y) * w + x;
      if (!mask[i]) continue;
      bool keep = x > 0 && x < w - 1 && y > 0 && y < h - 1 &&
                  mask[i - 1] && mask[i + 1] && mask[i - w] && mask[i + w];
      out[i] = keep ? 1 : 0;
    }
  }
  return out;
}

struct Component {
  std::vector<std::size_t> cells;  // row-major discovery order of the seed cell
};

// 8-connected components of `mask`, discovered in row-major order.
inline std::vector<Component> components8(const Mask& mask, int w, int h) {
  std::vector<Component> comps;
  std::vector<char> visited(mask.size(), 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || visited[start]) continue;
    Component comp;
    visited[start] = 1;
    stack.assign(1, start);
    while (!stack.empty()) {
      std::size_t i = stack.back();
      stack.pop_back();
      comp.cells.push_back(i);
      int x = static_cast<int>(i % w);
      int y = static_cast<int>(i / w);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!dx && !dy) continue;
          int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          std::size_t ni = std::size_t(ny) * w + nx;
          if (mask[ni] && !visited[ni]) {
            visited[ni] = 1;
            stack.push_back(ni);
          }
        }
      }
    }
    comps.push_back(std::move(comp));
  }
  return comps;
}

// Grows all seeds simultaneously over the free mask, one BFS layer at a
// time, with 8-connected steps. A cell reached by several rooms in the same
// layer goes to the lowest id. Free cells no seed can reach become fresh
// rooms of their own so the partition stays total.
inline LabelMap grow_from_seeds(const Mask& free, std::vector<int> seeds, int w, int h,
                                int next_id) {
  LabelMap map(w, h);
  map.labels = std::move(seeds);

  std::vector<std::size_t> frontier;
  for (std::size_t i = 0; i < map.labels.size(); ++i)
    if (map.labels[i] > 0) frontier.push_back(i);

  std::vector<int> claim(map.labels.size(), 0);
  std::vector<std::size_t> touched;
  while (!frontier.empty()) {
    touched.clear();
    for (std::size_t i : frontier) {
      int x = static_cast<int>(i % w);
      int y = static_cast<int>(i / w);
      int id = map.labels[i];
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!dx && !dy) continue;
          int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          std::size_t ni = std::size_t(ny) * w + nx;
          if (!free[ni] || map.labels[ni] != 0) continue;
          if (claim[ni] == 0) {
            claim[ni] = id;
            touched.push_back(ni);
          } else {
            claim[ni] = std::min(claim[ni], id);
          }
        }
      }
    }
    frontier.clear();
    for (std::size_t i : touched) {
      map.labels[i] = claim[i];
      claim[i] = 0;
      frontier.push_back(i);
    }
  }

  // Isolated free pockets that contain no seed.
  Mask leftovers(map.labels.size(), 0);
  bool any_left = false;
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    if (free[i] && map.labels[i] == 0) {
      leftovers[i] = 1;
      any_left = true;
    }
  }
  if (any_left) {
    for (const Component& comp : components8(leftovers, w, h)) {
      for (std::size_t i : comp.cells) map.labels[i] = next_id;
      ++next_id;
    }
  }
  return map;
}

// Shared seed bookkeeping for both algorithms: a component becomes a seed
// the first time its physical area falls inside the configured band, unless
// it already contains seeded cells.
class SeedCollector {
 public:
  SeedCollector(std::size_t n, double cell_area, double min_area, double max_area)
      : seeds_(n, 0), cell_area_(cell_area), min_area_(min_area), max_area_(max_area) {}

  void offer(const Component& comp) {
    double area = static_cast<double>(comp.cells.size()) * cell_area_;
    if (area < min_area_ || area > max_area_) return;
    for (std::size_t i : comp.cells)
      if (seeds_[i] != 0) return;
    for (std::size_t i : comp.cells) seeds_[i] = next_id_;
    ++next_id_;
  }

  int count() const { return next_id_ - 1; }
  int next_id() const { return next_id_; }
  std::vector<int> take() { return std::move(seeds_); }

 private:
  std::vector<int> seeds_;
  double cell_area_;
  double min_area_;
  double max_area_;
  int next_id_ = 1;
};

// Exact squared Euclidean distance transform (Felzenszwalb-Huttenlocher) of
// mask cells to the nearest background cell; cells outside the grid count as
// background at distance 1 from the border.
inline std::vector<double> squared_distance_transform(const Mask& mask, int w, int h) {
  const double kInf = std::numeric_limits<double>::infinity();
  const int pw = w + 2, ph = h + 2;  // pad with a background ring
  std::vector<double> f(std::size_t(pw) * ph, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      f[std::size_t(y + 1) * pw + (x + 1)] = mask[std::size_t(y) * w + x] ? kInf : 0.0;

  auto transform_1d = [&](const std::vector<double>& src, std::vector<double>& dst) {
    const int n = static_cast<int>(src.size());
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
      if (src[q] == kInf) continue;  // parabola at infinity never wins
      double s;
      while (true) {
        if (src[v[k]] == kInf) {
          // previous vertex is at infinity; replace it outright
          s = -kInf;
        } else {
          s = ((src[q] + double(q) * q) - (src[v[k]] + double(v[k]) * v[k])) /
              (2.0 * q - 2.0 * v[k]);
        }
        if (s <= z[k]) {
          --k;
        } else {
          break;
        }
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
      while (z[k + 1] < q) ++k;
      double dq = q - v[k];
      dst[q] = dq * dq + src[v[k]];
    }
  };

  // columns, then rows
  std::vector<double> col_src(ph), col_dst(ph);
  for (int x = 0; x < pw; ++x) {
    for (int y = 0; y < ph; ++y) col_src[y] = f[std::size_t(y) * pw + x];
    transform_1d(col_src, col_dst);
    for (int y = 0; y < ph; ++y) f[std::size_t(y) * pw + x] = col_dst[y];
  }
  std::vector<double> row_src(pw), row_dst(pw);
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) row_src[x] = f[std::size_t(y) * pw + x];
    transform_1d(row_src, row_dst);
    for (int x = 0; x < pw; ++x) f[std::size_t(y) * pw + x] = row_dst[x];
  }

  std::vector<double> out(std::size_t(w) * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out[std::size_t(y) * w + x] = f[std::size_t(y + 1) * pw + (x + 1)];
  return out;
}

}  // namespace detail

// Squared distance (in cells) from each Free cell to the nearest non-Free
// cell; the map border counts as non-Free. Exposed for callers that want the
// raw field.
inline std::vector<double> distance_transform_squared(const OccupancyGrid& grid) {
  return detail::squared_distance_transform(detail::free_mask(grid), grid.width,
                                            grid.height);
}

// Iteratively erodes free space; components whose area enters the configured
// band become room seeds; all remaining free cells are claimed by a
// simultaneous wavefront from the seeds.
inline LabelMap segment_morphological(const OccupancyGrid& grid,
                                      const SegmentationParams& params) {
  params.validate();
  const int w = grid.width, h = grid.height;
  const double cell_area = grid.resolution * grid.resolution;
  detail::Mask free = detail::free_mask(grid);
  if (detail::mask_empty(free)) throw EmptyMapError("occupancy grid has no free cells");

  detail::SeedCollector collector(free.size(), cell_area, params.min_room_area,
                                  params.max_room_area);
  detail::Mask mask = free;
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    for (int s = 0; s < params.erosion_step; ++s) mask = detail::erode4(mask, w, h);
    if (detail::mask_empty(mask)) break;
    for (const detail::Component& comp : detail::components8(mask, w, h))
      collector.offer(comp);
  }
  if (collector.count() == 0)
    throw NoRoomsFoundError("no component entered the room-area band at any erosion level");

  int next_id = collector.next_id();
  return detail::grow_from_seeds(free, collector.take(), w, h, next_id);
}

// Thresholds the Euclidean distance transform downward from its maximum in
// one-cell steps; high-distance plateaus entering the area band become
// seeds, then the shared wavefront claims the rest.
inline LabelMap segment_distance(const OccupancyGrid& grid,
                                 const SegmentationParams& params) {
  params.validate();
  const int w = grid.width, h = grid.height;
  const double cell_area = grid.resolution * grid.resolution;
  detail::Mask free = detail::free_mask(grid);
  if (detail::mask_empty(free)) throw EmptyMapError("occupancy grid has no free cells");

  const std::vector<double> d2 = detail::squared_distance_transform(free, w, h);
  double max_d2 = 0.0;
  for (std::size_t i = 0; i < free.size(); ++i)
    if (free[i]) max_d2 = std::max(max_d2, d2[i]);

  detail::SeedCollector collector(free.size(), cell_area, params.min_room_area,
                                  params.max_room_area);
  detail::Mask level(free.size(), 0);
  for (double t = std::sqrt(max_d2); t > 1e-9; t -= 1.0) {
    const double cutoff = t * t - 1e-9;
    for (std::size_t i = 0; i < free.size(); ++i)
      level[i] = (free[i] && d2[i] >= cutoff) ? 1 : 0;
    for (const detail::Component& comp : detail::components8(level, w, h))
      collector.offer(comp);
  }
  if (collector.count() == 0)
    throw NoRoomsFoundError("no distance plateau entered the room-area band");

  int next_id = collector.next_id();
  return detail::grow_from_seeds(free, collector.take(), w, h, next_id);
}

inline LabelMap segment(const OccupancyGrid& grid, const SegmentationParams& params) {
  return params.algorithm == SegAlgorithm::Morphological
             ? segment_morphological(grid, params)
             : segment_distance(grid, params);
}

// Mean cell position per room, rounded to the nearest cell; when that cell
// is not part of the room, the result snaps to the member cell closest to
// the raw mean (row-major order breaks ties).
inline std::vector<std::pair<int, CellCoord>> room_centroids(const LabelMap& map,
                                                             const OccupancyGrid& grid) {
  if (map.width != grid.width || map.height != grid.height)
    throw ShapeError("label map and occupancy grid dimensions differ");
  const int k = map.room_count();
  std::vector<double> sum_x(std::size_t(k) + 1, 0.0), sum_y(std::size_t(k) + 1, 0.0);
  std::vector<long> count(std::size_t(k) + 1, 0);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      int id = map.at(x, y);
      if (id <= 0) continue;
      sum_x[id] += x;
      sum_y[id] += y;
      ++count[id];
    }
  }

  std::vector<std::pair<int, CellCoord>> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  for (int id = 1; id <= k; ++id) {
    if (count[id] == 0) continue;
    double mx = sum_x[id] / count[id];
    double my = sum_y[id] / count[id];
    CellCoord c{static_cast<int>(std::lround(mx)), static_cast<int>(std::lround(my))};
    if (!(map.in_bounds(c.x, c.y) && map.at(c.x, c.y) == id)) {
      double best = std::numeric_limits<double>::infinity();
      for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
          if (map.at(x, y) != id) continue;
          double d = (x - mx) * (x - mx) + (y - my) * (y - my);
          if (d < best) {
            best = d;
            c = CellCoord{x, y};
          }
        }
      }
    }
    centroids.emplace_back(id, c);
  }
  return centroids;
}

}  // namespace selros
