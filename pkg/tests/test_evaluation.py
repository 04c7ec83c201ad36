import numpy as np
import pytest

from tubedetect.evaluation import (
    AR_IOU_THRESHOLDS,
    GroundTruthSet,
    GtInstance,
    average_precision,
    average_recall,
    evaluate,
    mask_iou,
    match_detections,
    pose_errors,
    pr_curve,
)
from tubedetect.matching import Detection, PoseEstimate
from tubedetect.rotation import quat_from_axis_angle, quat_to_matrix

# ---------------------------------------------------------------------------
# independent naive implementations (oracles)


def naive_labels(dets, gt, thr):
    """From-scratch greedy matcher, iterating dict-of-lists structures."""
    ranked = sorted(dets, key=lambda d: (-d.score, d.image_id, d.y, d.x, d.template_id))
    per_image = {}
    capped = []
    for d in ranked:
        per_image.setdefault(d.image_id, 0)
        if per_image[d.image_id] < 100:
            capped.append(d)
            per_image[d.image_id] += 1
    taken = set()
    labels = []
    for d in capped:
        best = None
        best_iou = -1.0
        for gi, inst in enumerate(gt.instances):
            if inst.image_id != d.image_id or gi in taken:
                continue
            inter = np.logical_and(d.mask, inst.mask).sum()
            union = np.logical_or(d.mask, inst.mask).sum()
            iou = inter / union if union else 0.0
            if iou > best_iou:
                best, best_iou = gi, iou
        if best is not None and best_iou >= thr:
            taken.add(best)
            labels.append(True)
        else:
            labels.append(False)
    return labels


def naive_ap(labels, n_gt):
    if n_gt == 0:
        return None
    tp = 0
    precisions = []
    recalls = []
    for i, lab in enumerate(labels, start=1):
        tp += 1 if lab else 0
        precisions.append(tp / i)
        recalls.append(tp / n_gt)
    total = 0.0
    for i in range(101):
        r = i / 100.0
        best = 0.0
        for p, rec in zip(precisions, recalls):
            if rec >= r and p > best:
                best = p
        total += best
    return total / 101.0


def naive_ar(dets, gt):
    n_gt = len(gt.instances)
    if n_gt == 0:
        return None
    total = 0.0
    for t in AR_IOU_THRESHOLDS:
        total += sum(naive_labels(dets, gt, t)) / n_gt
    return total / len(AR_IOU_THRESHOLDS)


def make_mask(h, w, y0, x0, hh, ww):
    m = np.zeros((h, w), dtype=bool)
    m[y0 : y0 + hh, x0 : x0 + ww] = True
    return m


def det(image_id, mask, score, x=0, y=0, tid=0, pose=None):
    return Detection(
        image_id=image_id,
        x=x,
        y=y,
        score=score,
        template_id=tid,
        bbox=(x, y, 1, 1),
        mask=mask,
        pose=pose,
    )


def random_micro_dataset(rng):
    n_img = int(rng.integers(1, 6))
    images = [(f"im{i}", 24, 24) for i in range(n_img)]
    instances = []
    for i in range(n_img):
        for _ in range(int(rng.integers(0, 4))):
            if len(instances) >= 6:
                break
            instances.append(
                GtInstance(
                    image_id=f"im{i}",
                    mask=make_mask(
                        24, 24, int(rng.integers(0, 14)), int(rng.integers(0, 14)),
                        int(rng.integers(4, 10)), int(rng.integers(4, 10)),
                    ),
                )
            )
    gt = GroundTruthSet(images=images, instances=instances)
    dets = []
    for _ in range(int(rng.integers(0, 11))):
        i = int(rng.integers(0, n_img))
        dets.append(
            det(
                f"im{i}",
                make_mask(
                    24, 24, int(rng.integers(0, 14)), int(rng.integers(0, 14)),
                    int(rng.integers(4, 10)), int(rng.integers(4, 10)),
                ),
                float(np.round(rng.random(), 3)),
                x=int(rng.integers(0, 24)),
                y=int(rng.integers(0, 24)),
                tid=int(rng.integers(0, 5)),
            )
        )
    return dets, gt


class TestMaskIou:
    def test_identical(self):
        m = make_mask(10, 10, 2, 2, 5, 5)
        assert mask_iou(m, m) == 1.0

    def test_disjoint(self):
        assert mask_iou(make_mask(10, 10, 0, 0, 3, 3), make_mask(10, 10, 6, 6, 3, 3)) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            mask_iou(np.zeros((4, 4), bool), np.zeros((5, 5), bool))

    def test_matches_popcount_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = rng.random((16, 16)) > 0.6
            b = rng.random((16, 16)) > 0.6
            inter = sum(1 for y in range(16) for x in range(16) if a[y, x] and b[y, x])
            union = sum(1 for y in range(16) for x in range(16) if a[y, x] or b[y, x])
            expect = inter / union if union else 0.0
            assert mask_iou(a, b) == expect


class TestMatchDetections:
    def test_single_tp(self):
        gt_mask = make_mask(20, 20, 5, 5, 8, 8)
        d_mask = make_mask(20, 20, 5, 5, 8, 6)  # IoU 0.75
        gt = GroundTruthSet([("im0", 20, 20)], [GtInstance("im0", gt_mask)])
        labels = match_detections([det("im0", d_mask, 0.9)], gt, 0.5)
        assert [lab for _, lab in labels] == [True]

    def test_second_detection_on_same_gt_is_fp(self):
        gt_mask = make_mask(20, 20, 5, 5, 8, 8)
        gt = GroundTruthSet([("im0", 20, 20)], [GtInstance("im0", gt_mask)])
        d1 = det("im0", gt_mask.copy(), 0.9)
        d2 = det("im0", gt_mask.copy(), 0.8, x=1)
        labels = match_detections([d1, d2], gt, 0.5)
        assert [lab for _, lab in labels] == [True, False]

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            dets, gt = random_micro_dataset(rng)
            for thr in (0.3, 0.5, 0.75):
                got = [lab for _, lab in match_detections(dets, gt, thr)]
                assert got == naive_labels(dets, gt, thr)


class TestAveragePrecision:
    def test_single_tp_single_gt(self):
        assert average_precision([True], 1) == 1.0

    def test_two_gt_one_tp(self):
        assert average_precision([True], 2) == pytest.approx(51 / 101, abs=1e-15)

    def test_not_applicable(self):
        assert average_precision([], 0) is None

    def test_no_detections_zero(self):
        assert average_precision([], 3) == 0.0

    def test_rank_only_invariance(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            dets, gt = random_micro_dataset(rng)
            if not gt.instances:
                continue
            labels = [lab for _, lab in match_detections(dets, gt, 0.5)]
            ap1 = average_precision(labels, len(gt.instances))
            # a strictly monotone rescale of scores keeps ranking, labels, AP
            for d in dets:
                d.score = d.score**2
            labels2 = [lab for _, lab in match_detections(dets, gt, 0.5)]
            assert labels == labels2
            assert average_precision(labels2, len(gt.instances)) == ap1

    def test_removing_fp_never_decreases_ap(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            labels = list(rng.random(8) > 0.5)
            n_gt = max(int(sum(labels)), 1) + int(rng.integers(0, 3))
            base = average_precision(labels, n_gt)
            for i, lab in enumerate(labels):
                if not lab:
                    reduced = labels[:i] + labels[i + 1 :]
                    assert average_precision(reduced, n_gt) >= base - 1e-15


class TestPrCurveAndAr:
    def test_perfect_detector(self):
        gt_mask = make_mask(20, 20, 5, 5, 8, 8)
        gt = GroundTruthSet([("im0", 20, 20)], [GtInstance("im0", gt_mask)])
        dets = [det("im0", gt_mask.copy(), 0.9)]
        recalls, precisions = pr_curve(dets, gt, 0.5)
        assert len(recalls) == 101 and len(precisions) == 101
        assert all(p == 1.0 for p in precisions)
        assert average_recall(dets, gt) == 1.0

    def test_all_fp_detector(self):
        gt = GroundTruthSet(
            [("im0", 20, 20)], [GtInstance("im0", make_mask(20, 20, 0, 0, 5, 5))]
        )
        dets = [det("im0", make_mask(20, 20, 12, 12, 5, 5), 0.9)]
        _, precisions = pr_curve(dets, gt, 0.5)
        assert all(p == 0.0 for p in precisions)

    def test_interpolated_precision_non_increasing(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            dets, gt = random_micro_dataset(rng)
            _, precisions = pr_curve(dets, gt, 0.5)
            assert all(a >= b for a, b in zip(precisions, precisions[1:]))

    def test_manual_staircase(self):
        # ranked labels: TP FP TP FP FP TP with 4 GT
        labels = [True, False, True, False, False, True]
        # precisions: 1, 1/2, 2/3, 2/4, 2/5, 3/6; recalls: .25 .25 .5 .5 .5 .75
        # p_interp: r<=0.25 -> 1.0; r<=0.5 -> 2/3; r<=0.75 -> 0.5; else 0
        expect = (26 * 1.0 + 25 * (2 / 3) + 25 * 0.5 + 25 * 0.0) / 101
        assert average_precision(labels, 4) == pytest.approx(expect, abs=1e-15)

    def test_band_limited_ious_give_tenth_of_recall(self):
        # detector whose IoU is in (0.5, 0.55): only the lowest threshold hits
        gt_mask = make_mask(20, 20, 2, 5, 13, 8)  # 104 px
        d_mask = make_mask(20, 20, 2, 5, 8, 7)  # 56 px inside gt -> IoU 0.538
        gt = GroundTruthSet([("im0", 20, 20)], [GtInstance("im0", gt_mask)])
        dets = [det("im0", d_mask, 0.9)]
        assert 0.5 < mask_iou(d_mask, gt_mask) < 0.55
        assert average_recall(dets, gt) == pytest.approx(0.1 * 1.0)

    def test_ar_matches_naive(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            dets, gt = random_micro_dataset(rng)
            if not gt.instances:
                assert average_recall(dets, gt) is None
                continue
            assert average_recall(dets, gt) == pytest.approx(naive_ar(dets, gt), abs=1e-15)

    def test_removing_tp_never_increases_recall(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            dets, gt = random_micro_dataset(rng)
            if not gt.instances or not dets:
                continue
            for thr in (0.5, 0.75):
                base = sum(naive_labels(dets, gt, thr))
                pairs = match_detections(dets, gt, thr)
                for d, lab in pairs:
                    if lab:
                        rest = [x for x in dets if x is not d]
                        assert sum(naive_labels(rest, gt, thr)) <= base


def pose_of(axis_angle=None, translation=(0.0, 0.0, 2.0)):
    q = np.array([1.0, 0.0, 0.0, 0.0]) if axis_angle is None else quat_from_axis_angle(*axis_angle)
    return PoseEstimate(
        rotation=q,
        translation=np.asarray(translation, float),
        axis_direction=quat_to_matrix(q) @ np.array([1.0, 0.0, 0.0]),
    )


class TestPoseErrors:
    def _setup(self, det_pose, gt_pose):
        mask = make_mask(20, 20, 5, 5, 8, 8)
        gt = GroundTruthSet([("im0", 20, 20)], [GtInstance("im0", mask, pose=gt_pose)])
        dets = [det("im0", mask.copy(), 0.9, pose=det_pose)]
        return dets, gt

    def test_identical_pose_zero_errors(self):
        dets, gt = self._setup(pose_of(), pose_of())
        (rec,) = pose_errors(dets, gt)
        assert rec.translation_error == 0.0
        assert rec.axis_error == pytest.approx(0.0, abs=1e-9)
        assert rec.flip_aware_axis_error == pytest.approx(0.0, abs=1e-9)

    def test_flipped_axis(self):
        dets, gt = self._setup(pose_of(([0.0, 0.0, 1.0], np.pi)), pose_of())
        (rec,) = pose_errors(dets, gt)
        assert rec.axis_error == pytest.approx(180.0, abs=1e-7)
        assert rec.flip_aware_axis_error == pytest.approx(0.0, abs=1e-7)

    def test_matches_quaternion_geodesic_oracle(self):
        from scipy.spatial.transform import Rotation

        rng = np.random.default_rng(31)
        for _ in range(25):
            r1 = Rotation.random(random_state=int(rng.integers(1 << 30)))
            r2 = Rotation.random(random_state=int(rng.integers(1 << 30)))
            q1 = np.roll(r1.as_quat(), 1)  # xyzw -> wxyz
            q2 = np.roll(r2.as_quat(), 1)
            p1 = PoseEstimate(q1, np.zeros(3), quat_to_matrix(q1) @ np.array([1.0, 0, 0]))
            p2 = PoseEstimate(q2, np.zeros(3), quat_to_matrix(q2) @ np.array([1.0, 0, 0]))
            dets, gt = self._setup(p1, p2)
            (rec,) = pose_errors(dets, gt)
            a1 = r1.apply([1.0, 0.0, 0.0])
            a2 = r2.apply([1.0, 0.0, 0.0])
            expect = np.degrees(np.arccos(np.clip(np.dot(a1, a2), -1, 1)))
            assert rec.axis_error == pytest.approx(expect, abs=1e-8)
            assert rec.flip_aware_axis_error <= min(rec.axis_error, 90.0) + 1e-12

    def test_low_iou_gated_out(self):
        mask = make_mask(20, 20, 5, 5, 8, 8)
        off = make_mask(20, 20, 5, 10, 8, 8)  # IoU < 0.5
        gt = GroundTruthSet([("im0", 20, 20)], [GtInstance("im0", mask, pose=pose_of())])
        assert pose_errors([det("im0", off, 0.9, pose=pose_of())], gt) == []

    def test_no_pose_annotations_empty(self):
        mask = make_mask(20, 20, 5, 5, 8, 8)
        gt = GroundTruthSet([("im0", 20, 20)], [GtInstance("im0", mask)])
        assert pose_errors([det("im0", mask.copy(), 0.9, pose=pose_of())], gt) == []

    def test_translation_error_norm(self):
        dets, gt = self._setup(pose_of(translation=(0.3, 0.0, 2.4)), pose_of())
        (rec,) = pose_errors(dets, gt)
        assert rec.translation_error == pytest.approx(0.5)


class TestEvaluateReport:
    def test_shuffled_input_same_report(self):
        rng = np.random.default_rng(10)
        dets, gt = random_micro_dataset(rng)
        while not gt.instances or len(dets) < 3:
            dets, gt = random_micro_dataset(rng)
        r1 = evaluate(dets, gt)
        shuffled = list(dets)
        rng.shuffle(shuffled)
        r2 = evaluate(shuffled, gt)
        assert r1.ap50 == r2.ap50
        assert r1.ar_50_95 == r2.ar_50_95
        assert r1.pr_curves == r2.pr_curves

    def test_table_shaped_fields(self):
        # report keys follow the AP [.5] / AR [.5:.05:.95] table layout
        rng = np.random.default_rng(1)
        dets, gt = random_micro_dataset(rng)
        doc = evaluate(dets, gt).to_dict()
        assert "AP [.5]" in doc and "AR [.5:.05:.95]" in doc

    def test_no_gt_reports_not_applicable(self):
        gt = GroundTruthSet([("im0", 20, 20)], [])
        rep = evaluate([], gt)
        assert rep.ap50 is None and rep.ar_50_95 is None
        assert any("not applicable" in n for n in rep.notes)

    def test_ap_matches_naive_on_micro_datasets(self):
        rng = np.random.default_rng(77)
        for _ in range(40):
            dets, gt = random_micro_dataset(rng)
            labels = [lab for _, lab in match_detections(dets, gt, 0.5)]
            got = average_precision(labels, len(gt.instances))
            expect = naive_ap(naive_labels(dets, gt, 0.5), len(gt.instances))
            if expect is None:
                assert got is None
            else:
                assert got == pytest.approx(expect, abs=1e-12)
