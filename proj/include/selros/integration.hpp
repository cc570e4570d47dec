#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "selros/errors.hpp"
#include "selros/gridmap.hpp"
#include "selros/interpreter.hpp"
#include "selros/semantic.hpp"

namespace selros {

struct MergeEvent {
  std::vector<int> merged;  // original ids, ascending
  int into = 0;             // smallest original id
  std::string label;
};

struct MergedRoom {
  int new_id = 0;
  std::string label;
  std::vector<int> members;  // original ids, ascending
};

// The improved segmentation map plus the bookkeeping of what merged into what.
struct IntegrationResult {
  LabelMap improved_map;
  std::vector<MergedRoom> assignments;
  std::vector<MergeEvent> merge_log;
};

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      parent_[static_cast<std::size_t>(x)] =
          parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
      x = parent_[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

}  // namespace detail

// Merges adjacent rooms that carry the same semantic label: connected
// components of the "adjacent and same label" graph become single rooms.
// New ids follow the ascending order of each component's smallest original
// id. Merged rooms may end up not 8-connected (neighbors across a thin wall
// merge too); that is intended.
inline IntegrationResult integrate(const LabelMap& map, const std::vector<RoomRecord>& records,
                                   const std::vector<SemanticAssignment>& assignments) {
  const int k = map.room_count();
  std::vector<std::string> label_of(static_cast<std::size_t>(k) + 1);
  std::vector<char> have(static_cast<std::size_t>(k) + 1, 0);
  for (const SemanticAssignment& a : assignments) {
    if (a.room_id < 1 || a.room_id > k)
      throw UnknownRoomError("assignment references unknown room " + std::to_string(a.room_id),
                             a.room_id);
    label_of[static_cast<std::size_t>(a.room_id)] = a.label;
    have[static_cast<std::size_t>(a.room_id)] = 1;
  }
  for (int id = 1; id <= k; ++id)
    if (!have[static_cast<std::size_t>(id)])
      throw MissingAssignmentError("no semantic assignment for room " + std::to_string(id), id);

  detail::UnionFind uf(k + 1);
  for (const RoomRecord& r : records) {
    if (r.id < 1 || r.id > k) continue;
    for (int other : r.adjacent)
      if (other >= 1 && other <= k &&
          label_of[static_cast<std::size_t>(r.id)] == label_of[static_cast<std::size_t>(other)])
        uf.unite(r.id, other);
  }

  std::map<int, std::vector<int>> components;  // root -> members (ascending)
  for (int id = 1; id <= k; ++id) components[uf.find(id)].push_back(id);

  // components keyed by root = smallest member; std::map gives ascending order
  std::vector<int> new_id_of(static_cast<std::size_t>(k) + 1, 0);
  IntegrationResult result;
  int next_id = 1;
  for (const auto& [root, members] : components) {
    for (int m : members) new_id_of[static_cast<std::size_t>(m)] = next_id;
    MergedRoom room;
    room.new_id = next_id;
    room.label = label_of[static_cast<std::size_t>(root)];
    room.members = members;
    result.assignments.push_back(room);
    if (members.size() > 1)
      result.merge_log.push_back(MergeEvent{members, root, room.label});
    ++next_id;
  }

  result.improved_map = map;
  for (int& v : result.improved_map.labels)
    if (v > 0) v = new_id_of[static_cast<std::size_t>(v)];
  return result;
}

// JSON report: the improved room table (label, members, total area,
// adjacency recomputed on the improved map) plus the merge log.
inline void emit_report(const IntegrationResult& result, const std::vector<RoomRecord>& records,
                        const std::string& path, int adjacency_dilation = 1) {
  std::map<int, const RoomRecord*> record_of;
  for (const RoomRecord& r : records) record_of[r.id] = &r;

  const std::vector<std::vector<int>> adjacency =
      compute_adjacency(result.improved_map, adjacency_dilation);

  nlohmann::json rooms = nlohmann::json::array();
  for (const MergedRoom& room : result.assignments) {
    long cells = 0;
    double m2 = 0.0;
    for (int member : room.members) {
      auto it = record_of.find(member);
      if (it == record_of.end())
        throw UnknownRoomError("no record for merged member " + std::to_string(member), member);
      cells += it->second->area_cells;
      m2 += it->second->area_m2;
    }
    rooms.push_back({{"id", room.new_id},
                     {"label", room.label},
                     {"members", room.members},
                     {"area_cells", cells},
                     {"area_m2", m2},
                     {"adjacent", adjacency[static_cast<std::size_t>(room.new_id) - 1]}});
  }

  nlohmann::json merges = nlohmann::json::array();
  for (const MergeEvent& e : result.merge_log)
    merges.push_back({{"merged", e.merged}, {"into", e.into}, {"label", e.label}});

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << nlohmann::json{{"rooms", rooms}, {"merges", merges}}.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace selros
