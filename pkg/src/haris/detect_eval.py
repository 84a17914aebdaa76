"""Detection-quality evaluator: greedy matching, PR curves, AP@0.5.

Matching follows the standard benchmark protocol: detections sorted by
descending confidence, each greedily taking the unmatched same-class ground
truth in its frame with the highest IoU at or above the threshold. The
"All" row pools image/label counts and reports unweighted class means for
the quality metrics (the convention of the YOLO family's summary tables).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field


@dataclass(frozen=True)
class DetectionRecord:
    frame_id: str
    label: str
    bbox: tuple[float, float, float, float]    # x, y, w, h in pixels
    confidence: float

    def __post_init__(self):
        _check_bbox(self.bbox)
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")


@dataclass(frozen=True)
class GroundTruthRecord:
    frame_id: str
    label: str
    bbox: tuple[float, float, float, float]

    def __post_init__(self):
        _check_bbox(self.bbox)


def _check_bbox(bbox):
    if len(bbox) != 4:
        raise ValueError("bbox must be (x, y, w, h)")
    if bbox[2] <= 0 or bbox[3] <= 0:
        raise ValueError("bbox w and h must be > 0")


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    images: int
    labels: int
    precision: float
    recall: float | None      # None: undefined (no ground truth)
    f1: float | None
    ap: float | None


@dataclass(frozen=True)
class EvalReport:
    classes: tuple[ClassMetrics, ...]
    all_row: ClassMetrics
    map50: float
    pr_curves: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    iou_threshold: float = 0.5


def iou(a: tuple, b: tuple) -> float:
    """Intersection-over-union of two (x, y, w, h) boxes."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def _match_class(dets, gts, iou_threshold):
    """Greedy matching; returns TP flags aligned with confidence-sorted dets."""
    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    taken = [False] * len(gts)
    flags = []
    for i in order:
        det = dets[i]
        best_j, best_iou = -1, -1.0
        for j, gt in enumerate(gts):
            if taken[j] or gt.frame_id != det.frame_id:
                continue
            v = iou(det.bbox, gt.bbox)
            if v >= iou_threshold and v > best_iou:   # tie keeps the first gt
                best_j, best_iou = j, v
        if best_j >= 0:
            taken[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def _curve_points(flags, n_gt):
    tp = fp = 0
    points = []
    for is_tp in flags:
        tp += is_tp
        fp += not is_tp
        points.append((tp / n_gt, tp / (tp + fp)))
    return points


def _envelope_area(points) -> float:
    pts = sorted(points)
    recalls = [r for r, _ in pts]
    precs = [p for _, p in pts]
    # running max from the right = best precision at recall >= r
    env = precs[:]
    for i in range(len(env) - 2, -1, -1):
        env[i] = max(env[i], env[i + 1])
    area = 0.0
    prev_r = 0.0
    for r, p in zip(recalls, env):
        area += (r - prev_r) * p
        prev_r = r
    return area


def evaluate(dets: list[DetectionRecord], gts: list[GroundTruthRecord],
             iou_threshold: float = 0.5) -> EvalReport:
    labels = sorted({g.label for g in gts} | {d.label for d in dets})
    rows = []
    curves = {}
    for label in labels:
        dets_c = [d for d in dets if d.label == label]
        gts_c = [g for g in gts if g.label == label]
        images = len({g.frame_id for g in gts_c})
        flags = _match_class(dets_c, gts_c, iou_threshold) if gts_c else \
            [False] * len(dets_c)
        tp = sum(flags)
        fp = len(flags) - tp
        precision = tp / (tp + fp) if flags else 0.0
        if gts_c:
            recall = tp / len(gts_c)
            f1 = 2 * precision * recall / (precision + recall) \
                if precision + recall > 0 else 0.0
            points = _curve_points(flags, len(gts_c))
            ap = _envelope_area(points) if points else 0.0
            curves[label] = points
        else:
            recall = f1 = ap = None
            curves[label] = []
        rows.append(ClassMetrics(label, images, len(gts_c), precision,
                                 recall, f1, ap))

    defined = [r for r in rows if r.recall is not None]
    if defined:
        def mean(vals):
            return sum(vals) / len(vals)
        all_p = mean([r.precision for r in defined])
        all_r = mean([r.recall for r in defined])
        all_f1 = 2 * all_p * all_r / (all_p + all_r) if all_p + all_r > 0 else 0.0
        map50 = mean([r.ap for r in defined])
    else:
        all_p, all_r, all_f1, map50 = 0.0, None, None, 0.0
    all_row = ClassMetrics("All", len({g.frame_id for g in gts}), len(gts),
                           all_p, all_r, all_f1, map50 if defined else None)
    return EvalReport(tuple(rows), all_row, map50, curves, iou_threshold)


def envelope_points(points) -> list[tuple[float, float]]:
    """Origin anchor + one point per distinct recall, strictly increasing."""
    if not points:
        return []
    pts = sorted(points)
    env = [p for _, p in pts]
    for i in range(len(env) - 2, -1, -1):
        env[i] = max(env[i], env[i + 1])
    out = [(0.0, env[0])]
    for (r, _), p in zip(pts, env):
        if r > out[-1][0]:
            out.append((r, p))
    return out


def export_pr_curve(report: EvalReport) -> str:
    """CSV of monotone-envelope PR points per class."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class", "recall", "precision"])
    for label in sorted(report.pr_curves):
        for r, p in envelope_points(report.pr_curves[label]):
            writer.writerow([label, f"{r:.6f}", f"{p:.6f}"])
    return buf.getvalue()


def report_to_csv(report: EvalReport) -> str:
    """Summary table in the Class/Images/Labels/P/R/F1/mAP@.5 layout."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["Class", "Images", "Labels", "P", "R", "F1", "mAP@.5"])

    def fmt(v):
        return "" if v is None else f"{v:.4f}"

    for row in (report.all_row,) + report.classes:
        writer.writerow([row.label, row.images, row.labels, fmt(row.precision),
                         fmt(row.recall), fmt(row.f1), fmt(row.ap)])
    return buf.getvalue()


def write_detections_csv(path, dets: list[DetectionRecord]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["frame_id", "class", "x", "y", "w", "h", "confidence"])
        for d in dets:
            writer.writerow([d.frame_id, d.label, *d.bbox, d.confidence])


def read_detections_csv(path) -> list[DetectionRecord]:
    with open(path, newline="") as f:
        return [DetectionRecord(row["frame_id"], row["class"],
                                (float(row["x"]), float(row["y"]),
                                 float(row["w"]), float(row["h"])),
                                float(row["confidence"]))
                for row in csv.DictReader(f)]


def write_ground_truth_csv(path, gts: list[GroundTruthRecord]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["frame_id", "class", "x", "y", "w", "h"])
        for g in gts:
            writer.writerow([g.frame_id, g.label, *g.bbox])


def read_ground_truth_csv(path) -> list[GroundTruthRecord]:
    with open(path, newline="") as f:
        return [GroundTruthRecord(row["frame_id"], row["class"],
                                  (float(row["x"]), float(row["y"]),
                                   float(row["w"]), float(row["h"])))
                for row in csv.DictReader(f)]
