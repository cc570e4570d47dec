#include <catch2/catch.hpp>

#include <random>

#include "selros/metrics.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace selros;
using testsupport::labels_from_ascii;

namespace {

std::vector<CellCoord> cells(int n, int offset = 0) {
  std::vector<CellCoord> out;
  for (int i = 0; i < n; ++i) out.push_back(CellCoord{i + offset, 0});
  return out;
}

// single ground-truth room of 100 cells split 60/40 in the prediction
struct SplitFixture {
  LabelMap gt{10, 10, 1};
  LabelMap pred{10, 10};
  SplitFixture() {
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) pred.at(x, y) = y < 6 ? 1 : 2;
  }
};

// two ground-truth rooms (40 and 60 cells) merged into one predicted room
struct MergeFixture {
  LabelMap gt{10, 10};
  LabelMap pred{10, 10, 1};
  MergeFixture() {
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) gt.at(x, y) = y < 4 ? 1 : 2;
  }
};

}  // namespace

TEST_CASE("pairwise IoU basics") {
  REQUIRE(pairwise_iou(cells(50), cells(50)) == 1.0);
  REQUIRE(pairwise_iou(cells(10), cells(10, 100)) == 0.0);
  REQUIRE(pairwise_iou(cells(60), cells(100)) == Approx(0.6).epsilon(1e-12));
  REQUIRE_THROWS_AS(pairwise_iou({}, {}), UndefinedIoU);
}

TEST_CASE("identical maps associate one to one") {
  LabelMap gt = labels_from_ascii({"aabb", "aabb"});
  MatchTable table = associate(gt, gt);
  REQUIRE(table.gt_rooms == 2);
  for (const auto& list : table.matches) {
    REQUIRE(list.size() == 1);
    REQUIRE(list[0].iou == 1.0);
  }
  REQUIRE(table.unmatched_pred.empty());
}

TEST_CASE("split prediction ranks fragments by IoU") {
  SplitFixture f;
  MatchTable table = associate(f.gt, f.pred);
  REQUIRE(table.matches[0].size() == 2);
  REQUIRE(table.matches[0][0].pred_id == 1);
  REQUIRE(table.matches[0][0].iou == Approx(0.6).epsilon(1e-12));
  REQUIRE(table.matches[0][1].iou == Approx(0.4).epsilon(1e-12));
}

TEST_CASE("straddling prediction goes to the majority room only") {
  MergeFixture f;  // pred has 40 cells on gt room 1, 60 on gt room 2
  MatchTable table = associate(f.gt, f.pred);
  REQUIRE(table.matches[0].empty());
  REQUIRE(table.matches[1].size() == 1);
  REQUIRE(table.matches[1][0].iou == Approx(0.6).epsilon(1e-12));
}

TEST_CASE("association requires matching dimensions") {
  REQUIRE_THROWS_AS(associate(LabelMap(3, 3, 1), LabelMap(4, 3, 1)), ShapeError);
}

TEST_CASE("MSIoU anchors") {
  LabelMap perfect = labels_from_ascii({"aabb", "aabb", "aabb"});
  MatchTable t0 = associate(perfect, perfect);
  REQUIRE(compute_msiou(t0, t0.gt_rooms) == Approx(1.0).margin(1e-12));

  SplitFixture split;
  MatchTable t1 = associate(split.gt, split.pred);
  REQUIRE(compute_msiou(t1, t1.gt_rooms) == Approx(0.96).margin(1e-12));

  MergeFixture merge;
  MatchTable t2 = associate(merge.gt, merge.pred);
  REQUIRE(compute_msiou(t2, t2.gt_rooms) == Approx(0.30).margin(1e-12));
}

TEST_CASE("mean IoU anchors") {
  LabelMap perfect = labels_from_ascii({"ab", "ab"});
  MatchTable t0 = associate(perfect, perfect);
  REQUIRE(compute_mean_iou(t0, t0.gt_rooms) == Approx(1.0).margin(1e-12));

  SplitFixture split;
  MatchTable t1 = associate(split.gt, split.pred);
  REQUIRE(compute_mean_iou(t1, t1.gt_rooms) == Approx(0.6).margin(1e-12));

  // the merged room is the best match for both ground-truth rooms
  MergeFixture merge;
  MatchTable t2 = associate(merge.gt, merge.pred);
  REQUIRE(compute_mean_iou(t2, t2.gt_rooms) == Approx(0.5).margin(1e-12));
}

TEST_CASE("alpha schedule decrements by 0.1 with a 0.1 floor") {
  REQUIRE(msiou_alpha(1) == 1.0);
  REQUIRE(msiou_alpha(2) == Approx(0.9));
  REQUIRE(msiou_alpha(10) == Approx(0.1));
  REQUIRE(msiou_alpha(11) == Approx(0.1));
  REQUIRE(msiou_alpha(100) == Approx(0.1));
}

TEST_CASE("matches the brute-force evaluator on random partitions") {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 80; ++trial) {
    int w = std::uniform_int_distribution<int>(2, 8)(rng);
    int h = std::uniform_int_distribution<int>(2, 8)(rng);
    LabelMap gt = testsupport::random_partition(rng, w, h, 4);
    LabelMap pred = testsupport::random_partition(rng, w, h, 5);
    if (gt.room_count() == 0) continue;
    MatchTable table = associate(gt, pred);
    REQUIRE(compute_msiou(table, table.gt_rooms) ==
            Approx(testsupport::oracle_msiou(gt, pred)).margin(1e-12));
    REQUIRE(compute_mean_iou(table, table.gt_rooms) ==
            Approx(testsupport::oracle_mean_iou(gt, pred)).margin(1e-12));
  }
}

TEST_CASE("metrics are invariant under room relabeling") {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    LabelMap gt = testsupport::random_partition(rng, 7, 7, 3);
    LabelMap pred = testsupport::random_partition(rng, 7, 7, 4);
    if (gt.room_count() < 2 || pred.room_count() < 2) continue;

    // permute ids: id -> K + 1 - id, then densify back
    LabelMap gt_perm = gt;
    int kg = gt.room_count();
    for (int& v : gt_perm.labels)
      if (v > 0) v = kg + 1 - v;
    densify(gt_perm);
    LabelMap pred_perm = pred;
    int kp = pred.room_count();
    for (int& v : pred_perm.labels)
      if (v > 0) v = kp + 1 - v;
    densify(pred_perm);

    MatchTable a = associate(gt, pred);
    MatchTable b = associate(gt_perm, pred_perm);
    REQUIRE(compute_msiou(a, a.gt_rooms) == Approx(compute_msiou(b, b.gt_rooms)).margin(1e-12));
    REQUIRE(compute_mean_iou(a, a.gt_rooms) ==
            Approx(compute_mean_iou(b, b.gt_rooms)).margin(1e-12));
  }
}

TEST_CASE("MSIoU is 1 exactly when the prediction is a relabeling") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    LabelMap gt = testsupport::random_partition(rng, 6, 6, 3);
    if (gt.room_count() < 1) continue;
    MatchTable self = associate(gt, gt);
    REQUIRE(compute_msiou(self, self.gt_rooms) == Approx(1.0).margin(1e-12));

    LabelMap off = gt;
    bool changed = false;
    for (int& v : off.labels)
      if (v > 0 && !changed) {
        v = 0;  // drop one labeled cell: no longer a relabeling
        changed = true;
      }
    if (!changed || off.room_count() == 0) continue;
    densify(off);
    MatchTable t = associate(gt, off);
    REQUIRE(compute_msiou(t, t.gt_rooms) < 1.0);
  }
}

TEST_CASE("splitting a matched fragment strictly lowers the contribution") {
  // ground truth: one 4x4 room; brute force over all 2-way splits
  LabelMap gt(4, 4, 1);
  LabelMap whole(4, 4, 1);
  MatchTable base = associate(gt, whole);
  const double before = compute_msiou(base, 1);
  REQUIRE(before == 1.0);

  for (unsigned mask = 1; mask < 0xFFFFu; mask += 2) {  // cell 0 stays in part 1
    LabelMap split(4, 4);
    for (int i = 0; i < 16; ++i)
      split.labels[static_cast<std::size_t>(i)] = (mask >> i) & 1u ? 1 : 2;
    MatchTable t = associate(gt, split);
    REQUIRE(compute_msiou(t, 1) < before);
    REQUIRE(compute_msiou(t, 1) == Approx(testsupport::oracle_msiou(gt, split)).margin(1e-12));
  }
}

TEST_CASE("report carries both metrics, the schedule, and unmatched rooms") {
  SplitFixture f;
  MetricReport report = evaluate_segmentation(f.gt, f.pred);
  REQUIRE(report.msiou == Approx(0.96).margin(1e-12));
  REQUIRE(report.mean_iou == Approx(0.6).margin(1e-12));
  REQUIRE(report.delta_alpha_schedule == std::vector<double>{1.0, 0.9});

  nlohmann::json j = metric_report_to_json(report);
  REQUIRE(j.at("per_room").size() == 1);
  REQUIRE(j.at("per_room")[0].at("matches").size() == 2);

  // prediction covering only unknown space is reported but not scored
  LabelMap gt(2, 2);
  gt.at(0, 0) = 1;
  LabelMap pred(2, 2);
  pred.at(0, 0) = 1;
  pred.at(1, 1) = 2;
  MatchTable t = associate(gt, pred);
  REQUIRE(t.unmatched_pred == std::vector<int>{2});
  REQUIRE(compute_msiou(t, t.gt_rooms) == 1.0);
}
