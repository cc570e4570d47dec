#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "selros/errors.hpp"
#include "selros/gridmap.hpp"

namespace selros {

struct ObjectAnnotation {
  std::string name;  // lowercase, trimmed
  CellCoord position;
};

// name -> count; ordered so serialized object lists come out alphabetical.
using ObjectCounts = std::map<std::string, int>;

// room id -> observed object multiset. Every room of the current map has a
// key, possibly with an empty multiset.
using ObservationSet = std::map<int, ObjectCounts>;

namespace detail {

inline std::string normalize_object_name(std::string name) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  name.erase(name.begin(), std::find_if(name.begin(), name.end(), not_space));
  name.erase(std::find_if(name.rbegin(), name.rend(), not_space).base(), name.end());
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return name;
}

}  // namespace detail

// Reads the object annotation file: {"objects":[{"name":str,"x":int,"y":int}, ...]}.
// Names are lowercased and trimmed; positions must fall inside the map.
inline std::vector<ObjectAnnotation> read_annotations(const std::string& path, int width,
                                                      int height) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotation file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed annotation JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("objects") || !doc["objects"].is_array())
    throw ParseError("annotation file must be an object with an \"objects\" array");

  std::vector<ObjectAnnotation> annotations;
  std::size_t index = 0;
  for (const auto& entry : doc["objects"]) {
    if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string() ||
        !entry.contains("x") || !entry["x"].is_number_integer() ||
        !entry.contains("y") || !entry["y"].is_number_integer())
      throw ParseError("annotation entry " + std::to_string(index) +
                       " must have string \"name\" and integer \"x\", \"y\"");
    ObjectAnnotation a;
    a.name = detail::normalize_object_name(entry["name"].get<std::string>());
    if (a.name.empty())
      throw ParseError("annotation entry " + std::to_string(index) + " has an empty name");
    a.position = CellCoord{entry["x"].get<int>(), entry["y"].get<int>()};
    if (a.position.x < 0 || a.position.y < 0 || a.position.x >= width ||
        a.position.y >= height)
      throw BoundsError("annotation entry " + std::to_string(index) + " (" + a.name +
                            ") lies outside the map",
                        index);
    annotations.push_back(std::move(a));
    ++index;
  }
  return annotations;
}

// Cells visited by the classic Bresenham line from a to b, endpoints included.
inline std::vector<CellCoord> bresenham_line(CellCoord a, CellCoord b) {
  std::vector<CellCoord> cells;
  int dx = std::abs(b.x - a.x), sx = a.x < b.x ? 1 : -1;
  int dy = -std::abs(b.y - a.y), sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  int x = a.x, y = a.y;
  while (true) {
    cells.push_back(CellCoord{x, y});
    if (x == b.x && y == b.y) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
  return cells;
}

// True when no Occupied cell lies strictly between `from` and `to` on the
// Bresenham line. Both endpoints are exempt, so an object sitting on a
// furniture cell does not occlude itself.
inline bool line_of_sight_clear(const OccupancyGrid& grid, CellCoord from, CellCoord to) {
  const std::vector<CellCoord> cells = bresenham_line(from, to);
  for (std::size_t i = 1; i + 1 < cells.size(); ++i)
    if (grid.at(cells[i].x, cells[i].y) == CellState::Occupied) return false;
  return true;
}

// An object is observed from a room when it lies within max_range meters of
// the room centroid and the sight line from the centroid is clear. Objects
// may be seen from several rooms; rooms may see nothing.
inline ObservationSet observe(const std::vector<ObjectAnnotation>& annotations,
                              const LabelMap& map, const OccupancyGrid& grid,
                              const std::vector<std::pair<int, CellCoord>>& centroids,
                              double max_range) {
  if (map.width != grid.width || map.height != grid.height)
    throw ShapeError("label map and occupancy grid dimensions differ");
  const int k = map.room_count();
  std::vector<char> covered(static_cast<std::size_t>(k) + 1, 0);
  for (const auto& [id, c] : centroids)
    if (id >= 1 && id <= k) covered[static_cast<std::size_t>(id)] = 1;
  for (int id = 1; id <= k; ++id)
    if (!covered[static_cast<std::size_t>(id)])
      throw std::invalid_argument("observe: no centroid for room " + std::to_string(id));

  const double range_cells = max_range / grid.resolution;
  const double range_sq = range_cells * range_cells;

  ObservationSet observations;
  for (const auto& [id, c] : centroids) observations[id];  // every room gets a key
  for (const auto& [id, c] : centroids) {
    for (const ObjectAnnotation& obj : annotations) {
      double dx = obj.position.x - c.x;
      double dy = obj.position.y - c.y;
      if (dx * dx + dy * dy > range_sq) continue;
      if (!line_of_sight_clear(grid, c, obj.position)) continue;
      ++observations[id][obj.name];
    }
  }
  return observations;
}

// Unions precomputed per-room object lists ({"rooms":{"<id>":["name", ...]}})
// into an existing observation set.
inline ObservationSet merge_predeclared(ObservationSet observations,
                                        const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open per-room object file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed per-room object JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("rooms") || !doc["rooms"].is_object())
    throw ParseError("per-room object file must be an object with a \"rooms\" object");

  for (const auto& [key, names] : doc["rooms"].items()) {
    int room_id = 0;
    try {
      std::size_t used = 0;
      room_id = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ParseError("room key '" + key + "' is not an integer");
    }
    if (!observations.count(room_id))
      throw UnknownRoomError("per-room object file references unknown room " + key,
                             room_id);
    if (!names.is_array())
      throw ParseError("room " + key + " must map to an array of object names");
    for (const auto& name : names) {
      if (!name.is_string())
        throw ParseError("room " + key + " contains a non-string object name");
      std::string normalized = detail::normalize_object_name(name.get<std::string>());
      if (normalized.empty())
        throw ParseError("room " + key + " contains an empty object name");
      ++observations[room_id][normalized];
    }
  }
  return observations;
}

}  // namespace selros
