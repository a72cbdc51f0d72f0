"""Post-clustering classification: toroidal k-NN over marker positions,
confusion-matrix evaluation, and the patch-based spatial entropy metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError

N_CLASSES = 5


@dataclass
class MarkerSet:
    """Labeled reference items frozen at their final grid positions."""

    ids: np.ndarray      # (M,) int64, unique
    coords: np.ndarray   # (M, 2) int64 grid coordinates
    labels: np.ndarray   # (M,) int32 class labels

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.coords = np.asarray(self.coords, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int32)
        if self.ids.size == 0:
            raise ConfigError("marker set is empty")
        if len({int(v) for v in self.ids}) != self.ids.size:
            raise ConfigError("marker ids must be unique")

    def __len__(self) -> int:
        return int(self.ids.size)


def knn_classify(test_coords: Sequence, markers: MarkerSet, k: int,
                 grid_dims: tuple[int, int]) -> np.ndarray:
    """Majority vote of the k nearest markers under the wrapped metric.

    Distance ties break by ascending marker id. A tie in vote counts goes to
    the tied class with the nearest marker; an exact-distance residual tie
    falls to the lowest class index. k must be odd (an even k can deadlock a
    two-class vote) and no larger than the marker count.
    """
    if k % 2 == 0:
        raise ConfigError(f"k must be odd, got {k}")
    if not 1 <= k <= len(markers):
        raise ConfigError(f"k={k} out of range for {len(markers)} markers")
    w, h = grid_dims

    mx = markers.coords[:, 0]
    my = markers.coords[:, 1]
    m = len(markers)
    # rank of each marker id; composite sort key (d2, id) packed into int64
    id_rank = np.empty(m, dtype=np.int64)
    id_rank[np.argsort(markers.ids, kind="stable")] = np.arange(m)

    test_coords = np.asarray(test_coords, dtype=np.int64)
    out = np.empty(len(test_coords), dtype=np.int32)
    for i, (tx, ty) in enumerate(test_coords):
        dx = np.abs(mx - tx)
        dy = np.abs(my - ty)
        np.minimum(dx, w - dx, out=dx)
        np.minimum(dy, h - dy, out=dy)
        d2 = dx * dx + dy * dy
        composite = d2 * m + id_rank
        if k < m:
            nearest = np.argpartition(composite, k)[:k]
        else:
            nearest = np.arange(m)
        nearest = nearest[np.argsort(composite[nearest])]
        out[i] = _vote(markers.labels[nearest], d2[nearest])
    return out


def _vote(labels: np.ndarray, d2: np.ndarray) -> int:
    counts: dict[int, int] = {}
    for lab in labels:
        counts[int(lab)] = counts.get(int(lab), 0) + 1
    best = max(counts.values())
    tied = [c for c, v in counts.items() if v == best]
    if len(tied) == 1:
        return tied[0]
    nearest_d2 = {c: min(int(d) for d, lab in zip(d2, labels) if int(lab) == c)
                  for c in tied}
    closest = min(nearest_d2.values())
    return min(c for c, d in nearest_d2.items() if d == closest)


@dataclass
class EvaluationReport:
    """Confusion counts (rows true, columns predicted) plus accuracies."""

    confusion: np.ndarray
    per_class_accuracy: list  # Optional[float] per class, None when untested
    overall_accuracy: float
    n_test: int

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "per_class_accuracy_pct": [
                None if a is None else round(100.0 * a, 2)
                for a in self.per_class_accuracy
            ],
            "overall_accuracy_pct": round(100.0 * self.overall_accuracy, 2),
            "n_test": self.n_test,
        }


def evaluate(predictions: Sequence[int], truths: Sequence[int],
             n_classes: int = N_CLASSES) -> EvaluationReport:
    """Tally a confusion matrix; per-class accuracy is diagonal over row sum.

    Classes with no test items report accuracy None rather than 0.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.shape != truths.shape:
        raise ConfigError(
            f"length mismatch: {predictions.shape[0]} predictions vs {truths.shape[0]} truths")
    for name, arr in (("prediction", predictions), ("truth", truths)):
        if arr.size and (arr.min() < 1 or arr.max() > n_classes):
            raise ConfigError(f"{name} labels must lie in 1..{n_classes}")
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for p, tr in zip(predictions, truths):
        confusion[tr - 1, p - 1] += 1
    per_class: list[Optional[float]] = []
    for c in range(n_classes):
        row = confusion[c].sum()
        per_class.append(float(confusion[c, c] / row) if row else None)
    total = int(confusion.sum())
    overall = float(np.trace(confusion) / total) if total else 0.0
    return EvaluationReport(confusion, per_class, overall, total)


def aggregate_reports(reports: Sequence[EvaluationReport]) -> EvaluationReport:
    """Sum confusion matrices elementwise and rederive accuracies.

    Aggregate accuracy comes from the summed counts, not from averaging the
    per-batch accuracies.
    """
    if not reports:
        raise ConfigError("nothing to aggregate")
    confusion = np.zeros_like(reports[0].confusion)
    for r in reports:
        confusion = confusion + r.confusion
    per_class: list[Optional[float]] = []
    for c in range(confusion.shape[0]):
        row = confusion[c].sum()
        per_class.append(float(confusion[c, c] / row) if row else None)
    total = int(confusion.sum())
    overall = float(np.trace(confusion) / total) if total else 0.0
    return EvaluationReport(confusion, per_class, overall, total)


def spatial_entropy(snapshot, patch_side: int = 8) -> float:
    """Item-weighted mean Shannon entropy of class mixes in square patches.

    The grid is tiled from the origin in patch_side steps; a final partial
    patch wraps around the edge. 0 means every patch is single-class, 1 means
    patches are maximally mixed. Items without a class, or carried by an ant,
    are ignored; fewer than two classes on the grid scores 0.
    """
    if patch_side < 1:
        raise ConfigError(f"patch_side must be >= 1, got {patch_side}")
    w, h = snapshot.width, snapshot.height
    placed = [(x, y, cls) for (_id, x, y, _role, cls) in snapshot.placements
              if x is not None and cls is not None]
    if not placed:
        return 0.0
    classes = sorted({cls for _x, _y, cls in placed})
    if len(classes) < 2:
        return 0.0
    n_px = -(-w // patch_side)
    n_py = -(-h // patch_side)

    counts: dict[tuple[int, int], dict[int, int]] = {}
    for x, y, cls in placed:
        xs = [x // patch_side]
        if n_px > 1 and x < n_px * patch_side - w:
            xs.append(n_px - 1)
        ys = [y // patch_side]
        if n_py > 1 and y < n_py * patch_side - h:
            ys.append(n_py - 1)
        for px in xs:
            for py in ys:
                bucket = counts.setdefault((px, py), {})
                bucket[cls] = bucket.get(cls, 0) + 1

    weighted = 0.0
    weight_total = 0
    for bucket in counts.values():
        total = sum(bucket.values())
        entropy = 0.0
        for c in bucket.values():
            p = c / total
            entropy -= p * math.log2(p)
        weighted += entropy * total
        weight_total += total
    return weighted / weight_total / math.log2(len(classes))
