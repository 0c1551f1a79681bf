"""P/R/F1, ROC AUC, and localization Acc/AFP scoring."""

from itertools import combinations, permutations

import numpy as np
import pytest

from cxrlabel.errors import DegenerateLabels, IdSetMismatch, MalformedRow
from cxrlabel.labeling import LabelConfig, ReportLabels, Status
from cxrlabel.localization import BBox, iobb, iou
from cxrlabel.metrics import (
    NORMAL_ROW,
    T_GRID_IOBB,
    T_GRID_IOU,
    TOTAL_ROW,
    ClassScore,
    _greedy_match,
    localization_eval,
    localization_sweep,
    prf1,
    roc_auc,
    roc_points,
)

TWO = LabelConfig("two", ("A", "B"))


def labels(report_id, y, status):
    return ReportLabels(report_id, tuple(y), Status(status))


def auc_by_pairs(scores, gold):
    """Independent oracle: enumerate positive/negative pairs."""
    pos = [s for s, g in zip(scores, gold) if g == 1]
    neg = [s for s, g in zip(scores, gold) if g == 0]
    wins = sum(
        1.0 if p > n else (0.5 if p == n else 0.0) for p in pos for n in neg
    )
    return wins / (len(pos) * len(neg))


def optimal_match_count(gts, dets, threshold, measure):
    """Exhaustive maximum one-to-one matching with overlap > threshold."""
    edge = [[measure(g, d) > threshold for g in gts] for d in dets]
    for k in range(min(len(gts), len(dets)), 0, -1):
        for det_idx in combinations(range(len(dets)), k):
            for gt_idx in permutations(range(len(gts)), k):
                if all(edge[d][g] for d, g in zip(det_idx, gt_idx)):
                    return k
    return 0


class TestClassScore:
    def test_rates(self):
        score = ClassScore(tp=3, fp=1, fn=2)
        assert score.precision == pytest.approx(0.75)
        assert score.recall == pytest.approx(0.6)
        assert score.f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35)

    def test_zero_denominators(self):
        empty = ClassScore(0, 0, 0)
        assert (empty.precision, empty.recall, empty.f1) == (0.0, 0.0, 0.0)

    def test_addition(self):
        assert ClassScore(1, 2, 3) + ClassScore(4, 5, 6) == ClassScore(5, 7, 9)


class TestPrf1:
    PRED = [
        labels("r1", (1, 0), "TARGET_FINDINGS"),
        labels("r2", (1, 1), "TARGET_FINDINGS"),
        labels("r3", (0, 0), "NORMAL"),
        labels("r4", (0, 0), "NORMAL"),
        labels("r5", (0, 1), "TARGET_FINDINGS"),
    ]
    GOLD = [
        labels("r1", (1, 0), "TARGET_FINDINGS"),
        labels("r2", (0, 1), "TARGET_FINDINGS"),
        labels("r3", (0, 0), "NORMAL"),
        labels("r4", (0, 0), "OTHER_FINDINGS_ONLY"),
        labels("r5", (0, 0), "NORMAL"),
    ]

    def test_per_class_counts(self):
        result = prf1(self.PRED, self.GOLD, TWO)
        # A: pred {r1,r2} gold {r1} -> tp 1, fp 1, fn 0
        assert result.scores["A"] == ClassScore(1, 1, 0)
        # B: pred {r2,r5} gold {r2} -> tp 1, fp 1, fn 0
        assert result.scores["B"] == ClassScore(1, 1, 0)
        # Normal: pred {r3,r4} gold {r3,r5} -> tp 1, fp 1, fn 1
        assert result.scores[NORMAL_ROW] == ClassScore(1, 1, 1)

    def test_total_micro_sums_all_rows(self):
        result = prf1(self.PRED, self.GOLD, TWO)
        assert result.total == ClassScore(3, 3, 1)
        assert result.total.precision == pytest.approx(0.5)
        assert result.total.recall == pytest.approx(0.75)

    def test_rows_end_with_total(self):
        result = prf1(self.PRED, self.GOLD, TWO)
        assert result.rows()[-1][0] == TOTAL_ROW
        assert [name for name, _ in result.rows()][:2] == ["A", "B"]
        assert NORMAL_ROW in dict(result.rows())

    def test_order_insensitive(self):
        shuffled = list(reversed(self.PRED))
        assert prf1(shuffled, self.GOLD, TWO) == prf1(self.PRED, self.GOLD, TWO)

    def test_id_mismatch_rejected(self):
        with pytest.raises(IdSetMismatch):
            prf1(self.PRED[:4], self.GOLD, TWO)
        with pytest.raises(IdSetMismatch):
            prf1(
                self.PRED[:4] + [labels("r9", (0, 0), "NORMAL")], self.GOLD, TWO
            )

    def test_perfect_agreement(self):
        result = prf1(self.GOLD, self.GOLD, TWO)
        for _, score in result.rows():
            assert score.fp == 0 and score.fn == 0


class TestRocAuc:
    def test_canonical_values(self):
        assert roc_auc([0.9, 0.8, 0.3], [1, 0, 1]) == pytest.approx(0.5)
        assert roc_auc([0.9, 0.7, 0.3, 0.1], [1, 1, 0, 0]) == 1.0
        assert roc_auc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0

    def test_all_tied_scores_give_half(self):
        assert roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == pytest.approx(0.5)

    def test_matches_pair_enumeration_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(150):
            n = int(rng.integers(2, 50))
            gold = rng.integers(0, 2, size=n)
            if gold.all() or not gold.any():
                gold[0] = 1 - gold[0]
            # quantized scores force ties through the midrank path
            scores = rng.integers(0, 10, size=n) / 10.0
            assert roc_auc(scores, gold) == pytest.approx(
                auc_by_pairs(scores, gold), abs=1e-12
            )

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(14)
        scores = rng.uniform(size=30)
        gold = rng.integers(0, 2, size=30)
        gold[0], gold[1] = 0, 1
        base = roc_auc(scores, gold)
        assert roc_auc(2.0 * scores + 3.0, gold) == pytest.approx(base, abs=1e-12)
        assert roc_auc(np.exp(scores), gold) == pytest.approx(base, abs=1e-12)

    def test_degenerate_labels_rejected(self):
        with pytest.raises(DegenerateLabels):
            roc_auc([0.1, 0.9], [1, 1])
        with pytest.raises(DegenerateLabels):
            roc_auc([0.1, 0.9], [0, 0])

    def test_shape_and_label_validation(self):
        with pytest.raises(MalformedRow):
            roc_auc([0.1, 0.2], [1])
        with pytest.raises(MalformedRow):
            roc_auc([0.1, 0.2], [1, 2])

    def test_roc_points_anchor_and_monotone(self):
        rng = np.random.default_rng(15)
        scores = rng.uniform(size=25)
        gold = rng.integers(0, 2, size=25)
        gold[0], gold[1] = 0, 1
        points = roc_points(scores, gold)
        assert points[0] == (0.0, 0.0)
        assert points[-1] == (1.0, 1.0)
        for (f0, t0), (f1, t1) in zip(points, points[1:]):
            assert f1 >= f0 and t1 >= t0

    def test_curve_area_equals_rank_auc(self):
        rng = np.random.default_rng(16)
        for _ in range(20):
            n = int(rng.integers(4, 40))
            gold = rng.integers(0, 2, size=n)
            if gold.all() or not gold.any():
                gold[0] = 1 - gold[0]
            scores = rng.integers(0, 6, size=n) / 6.0
            points = roc_points(scores, gold)
            area = sum(
                (x1 - x0) * (y0 + y1) / 2.0
                for (x0, y0), (x1, y1) in zip(points, points[1:])
            )
            assert area == pytest.approx(roc_auc(scores, gold), abs=1e-12)


class TestGreedyMatch:
    GT = BBox("i1", "Mass", 0, 0, 10, 10)

    def test_single_match(self):
        det = BBox("i1", "Mass", 5, 0, 10, 10)  # IoBB 0.5
        assert _greedy_match([self.GT], [det], 0.25, iobb) == (1, 0)

    def test_threshold_is_strict(self):
        det = BBox("i1", "Mass", 5, 0, 10, 10)
        assert _greedy_match([self.GT], [det], 0.5, iobb) == (0, 1)

    def test_one_to_one(self):
        dets = [
            BBox("i1", "Mass", 0, 0, 10, 10),
            BBox("i1", "Mass", 1, 1, 9, 9),
        ]
        assert _greedy_match([self.GT], dets, 0.25, iobb) == (1, 1)

    def test_best_det_claims_first(self):
        # The weaker-overlap detection must not steal the only GT.
        strong = BBox("i1", "Mass", 0, 0, 10, 10)
        weak = BBox("i1", "Mass", 7, 0, 10, 10)
        matched, unmatched = _greedy_match([self.GT], [weak, strong], 0.1, iou)
        assert (matched, unmatched) == (1, 1)

    def test_equal_overlap_resolves_by_index(self):
        g1 = BBox("i1", "Mass", 0, 0, 10, 10)
        g2 = BBox("i1", "Mass", 20, 0, 10, 10)
        # det overlaps both GTs identically; the lower GT index is taken
        det = BBox("i1", "Mass", 5, 0, 20, 10)
        overlap_left = iobb(g1, det)
        assert overlap_left == pytest.approx(iobb(g2, det))
        assert _greedy_match([g1, g2], [det], 0.1, iobb) == (1, 0)

    def test_agrees_with_exhaustive_on_seeded_fixtures(self):
        rng = np.random.default_rng(1)
        for _ in range(120):
            gts = [
                BBox("i", "c", float(rng.integers(0, 40)), float(rng.integers(0, 40)),
                     float(rng.integers(5, 30)), float(rng.integers(5, 30)))
                for _ in range(rng.integers(0, 4))
            ]
            dets = [
                BBox("i", "c", float(rng.integers(0, 40)), float(rng.integers(0, 40)),
                     float(rng.integers(5, 30)), float(rng.integers(5, 30)))
                for _ in range(rng.integers(0, 4))
            ]
            for t in (0.1, 0.25, 0.5):
                for measure in (iobb, iou):
                    matched, _ = _greedy_match(gts, dets, t, measure)
                    assert matched == optimal_match_count(gts, dets, t, measure)


class TestLocalizationEval:
    def fixture(self):
        gts = [
            BBox("i1", "Mass", 0, 0, 10, 10),
            BBox("i2", "Mass", 0, 0, 10, 10),
        ]
        dets = [BBox("i1", "Mass", 5, 0, 10, 10)]  # IoBB 0.5 on i1
        return dets, gts

    def test_acc_and_afp_hand_values(self):
        dets, gts = self.fixture()
        result = localization_eval(dets, gts, 0.25, "iobb")
        assert result.n_images == 2
        assert result.acc["Mass"] == pytest.approx(0.5)
        assert result.afp["Mass"] == 0.0
        assert result.matched["Mass"] == 1
        assert result.total_gt["Mass"] == 2

    def test_unmatched_detection_counts_toward_afp(self):
        dets, gts = self.fixture()
        dets.append(BBox("i2", "Mass", 50, 50, 5, 5))
        result = localization_eval(dets, gts, 0.25, "iobb")
        assert result.afp["Mass"] == pytest.approx(0.5)  # 1 unmatched / 2 images

    def test_explicit_image_count(self):
        dets, gts = self.fixture()
        dets.append(BBox("i2", "Mass", 50, 50, 5, 5))
        result = localization_eval(dets, gts, 0.25, "iobb", n_images=4)
        assert result.afp["Mass"] == pytest.approx(0.25)

    def test_class_without_gt_has_no_acc(self):
        dets, gts = self.fixture()
        dets.append(BBox("i1", "Nodule", 0, 0, 5, 5))
        result = localization_eval(dets, gts, 0.25, "iobb")
        assert "Nodule" not in result.acc
        assert result.afp["Nodule"] == pytest.approx(0.5)

    def test_classes_do_not_cross_match(self):
        gts = [BBox("i1", "Mass", 0, 0, 10, 10)]
        dets = [BBox("i1", "Nodule", 0, 0, 10, 10)]
        result = localization_eval(dets, gts, 0.25, "iobb")
        assert result.matched["Mass"] == 0
        assert result.unmatched_det["Nodule"] == 1

    def test_images_do_not_cross_match(self):
        gts = [BBox("i1", "Mass", 0, 0, 10, 10)]
        dets = [BBox("i2", "Mass", 0, 0, 10, 10)]
        result = localization_eval(dets, gts, 0.25, "iobb")
        assert result.matched["Mass"] == 0
        assert result.unmatched_det["Mass"] == 1

    def test_mode_and_threshold_validated(self):
        dets, gts = self.fixture()
        with pytest.raises(MalformedRow):
            localization_eval(dets, gts, 0.25, "dice")
        with pytest.raises(MalformedRow):
            localization_eval(dets, gts, 0.0, "iobb")
        with pytest.raises(MalformedRow):
            localization_eval(dets, gts, 1.0, "iobb")

    def test_sweep_grids(self):
        dets, gts = self.fixture()
        iobb_sweep = localization_sweep(dets, gts, "iobb")
        assert [r.threshold for r in iobb_sweep] == list(T_GRID_IOBB)
        iou_sweep = localization_sweep(dets, gts, "iou")
        assert [r.threshold for r in iou_sweep] == list(T_GRID_IOU)

    def test_acc_non_increasing_afp_non_decreasing(self):
        rng = np.random.default_rng(21)
        for _ in range(15):
            gts = [
                BBox(f"i{rng.integers(0, 3)}", "Mass",
                     float(rng.integers(0, 30)), float(rng.integers(0, 30)),
                     float(rng.integers(5, 25)), float(rng.integers(5, 25)))
                for _ in range(6)
            ]
            dets = [
                BBox(f"i{rng.integers(0, 3)}", "Mass",
                     float(rng.integers(0, 30)), float(rng.integers(0, 30)),
                     float(rng.integers(5, 25)), float(rng.integers(5, 25)))
                for _ in range(6)
            ]
            sweep = localization_sweep(dets, gts, "iobb")
            accs = [r.acc["Mass"] for r in sweep]
            afps = [r.afp["Mass"] for r in sweep]
            assert all(a >= b for a, b in zip(accs, accs[1:]))
            assert all(a <= b for a, b in zip(afps, afps[1:]))
