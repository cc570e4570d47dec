#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "selros/errors.hpp"
#include "selros/gridmap.hpp"

namespace selros {

// One predicted room matched to a ground-truth room. Rank order within a
// ground-truth room is IoU descending, ties to the lower predicted id.
struct RoomMatch {
  int pred_id = 0;
  double iou = 0.0;
};

// Association of predicted rooms to ground-truth rooms. Every predicted room
// appears under exactly one ground-truth room (the one it overlaps most) or,
// when it overlaps none, in `unmatched_pred`.
struct MatchTable {
  int gt_rooms = 0;
  int pred_rooms = 0;
  std::vector<std::vector<RoomMatch>> matches;  // index i -> GT room i+1
  std::vector<double> best_iou;  // per GT room, best IoU over ALL predicted rooms
  std::vector<int> unmatched_pred;
};

inline double pairwise_iou(const std::vector<CellCoord>& a, const std::vector<CellCoord>& b) {
  if (a.empty() && b.empty()) throw UndefinedIoU("IoU of two empty cell sets");
  std::set<CellCoord> sa(a.begin(), a.end());
  std::size_t inter = 0;
  std::set<CellCoord> sb(b.begin(), b.end());
  for (const CellCoord& c : sb)
    if (sa.count(c)) ++inter;
  const std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Majority-overlap association: each predicted room goes to the ground-truth
// room it shares the most cells with (ties to the lower GT id). Also records
// every GT room's best IoU over all predicted rooms, which mean-IoU needs.
inline MatchTable associate(const LabelMap& gt, const LabelMap& pred) {
  if (gt.width != pred.width || gt.height != pred.height)
    throw ShapeError("ground truth and prediction dimensions differ");

  const int n_gt = gt.room_count();
  const int n_pred = pred.room_count();
  std::vector<long> gt_size(std::size_t(n_gt) + 1, 0);
  std::vector<long> pred_size(std::size_t(n_pred) + 1, 0);
  // overlap[g * (n_pred + 1) + p]
  std::vector<long> overlap(std::size_t(n_gt + 1) * (n_pred + 1), 0);
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    int g = gt.labels[i];
    int p = pred.labels[i];
    if (g > 0) ++gt_size[std::size_t(g)];
    if (p > 0) ++pred_size[std::size_t(p)];
    if (g > 0 && p > 0) ++overlap[std::size_t(g) * (n_pred + 1) + std::size_t(p)];
  }

  MatchTable table;
  table.gt_rooms = n_gt;
  table.pred_rooms = n_pred;
  table.matches.resize(std::size_t(n_gt));
  table.best_iou.assign(std::size_t(n_gt), 0.0);

  auto iou_of = [&](int g, int p) {
    long inter = overlap[std::size_t(g) * (n_pred + 1) + std::size_t(p)];
    long uni = gt_size[std::size_t(g)] + pred_size[std::size_t(p)] - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
  };

  for (int p = 1; p <= n_pred; ++p) {
    int best_gt = 0;
    long best_overlap = 0;
    for (int g = 1; g <= n_gt; ++g) {
      long ov = overlap[std::size_t(g) * (n_pred + 1) + std::size_t(p)];
      if (ov > best_overlap) {  // strict: ties keep the lower GT id
        best_overlap = ov;
        best_gt = g;
      }
    }
    if (best_gt == 0) {
      table.unmatched_pred.push_back(p);
      continue;
    }
    table.matches[std::size_t(best_gt) - 1].push_back(RoomMatch{p, iou_of(best_gt, p)});
  }

  for (auto& list : table.matches) {
    std::stable_sort(list.begin(), list.end(), [](const RoomMatch& a, const RoomMatch& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      return a.pred_id < b.pred_id;
    });
  }
  for (int g = 1; g <= n_gt; ++g) {
    double best = 0.0;
    for (int p = 1; p <= n_pred; ++p) best = std::max(best, iou_of(g, p));
    table.best_iou[std::size_t(g) - 1] = best;
  }
  return table;
}

// Rank weight for the j-th best match (1-based): 1.0, 0.9, ... floored at 0.1.
inline double msiou_alpha(int rank) {
  return std::max(1.0 - 0.1 * (rank - 1), 0.1);
}

// Match Scaled IoU: per ground-truth room, the ranked matches' IoUs weighted
// by the decrement factor, averaged over all ground-truth rooms. Rooms with
// no match contribute zero.
inline double compute_msiou(const MatchTable& table, int n_gt) {
  if (n_gt < 1) throw std::invalid_argument("compute_msiou requires n_gt >= 1");
  double total = 0.0;
  for (const auto& list : table.matches) {
    double room_sum = 0.0;
    for (std::size_t j = 0; j < list.size(); ++j)
      room_sum += list[j].iou * msiou_alpha(static_cast<int>(j) + 1);
    total += room_sum;
  }
  return total / n_gt;
}

// Mean over ground-truth rooms of the best IoU against any predicted room
// (association does not matter here).
inline double compute_mean_iou(const MatchTable& table, int n_gt) {
  if (n_gt < 1) throw std::invalid_argument("compute_mean_iou requires n_gt >= 1");
  double total = 0.0;
  for (double b : table.best_iou) total += b;
  return total / n_gt;
}

struct MetricReport {
  double mean_iou = 0.0;
  double msiou = 0.0;
  MatchTable table;
  std::vector<double> delta_alpha_schedule;
};

inline MetricReport evaluate_segmentation(const LabelMap& gt, const LabelMap& pred) {
  MetricReport report;
  report.table = associate(gt, pred);
  const int n_gt = report.table.gt_rooms;
  if (n_gt < 1) throw EmptyMapError("ground truth has no rooms");
  report.mean_iou = compute_mean_iou(report.table, n_gt);
  report.msiou = compute_msiou(report.table, n_gt);
  std::size_t max_matches = 0;
  for (const auto& list : report.table.matches)
    max_matches = std::max(max_matches, list.size());
  for (std::size_t j = 1; j <= max_matches; ++j)
    report.delta_alpha_schedule.push_back(msiou_alpha(static_cast<int>(j)));
  return report;
}

inline nlohmann::json metric_report_to_json(const MetricReport& report) {
  nlohmann::json per_room = nlohmann::json::array();
  for (std::size_t i = 0; i < report.table.matches.size(); ++i) {
    nlohmann::json matches = nlohmann::json::array();
    for (const RoomMatch& m : report.table.matches[i])
      matches.push_back({{"pred_id", m.pred_id}, {"iou", m.iou}});
    per_room.push_back({{"gt_id", static_cast<int>(i) + 1},
                        {"matches", matches},
                        {"best_iou", report.table.best_iou[i]}});
  }
  return nlohmann::json{{"mean_iou", report.mean_iou},
                        {"msiou", report.msiou},
                        {"gt_rooms", report.table.gt_rooms},
                        {"pred_rooms", report.table.pred_rooms},
                        {"per_room", per_room},
                        {"unmatched_pred", report.table.unmatched_pred},
                        {"delta_alpha_schedule", report.delta_alpha_schedule}};
}

}  // namespace selros
