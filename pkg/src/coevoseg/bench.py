"""Boundary precision / recall / F-measure against ground-truth boundary maps."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .core import LabelMap


@dataclass
class BoundaryMap:
    bits: np.ndarray  # (height, width) bool

    def __post_init__(self):
        self.bits = np.ascontiguousarray(np.asarray(self.bits, dtype=bool))
        if self.bits.ndim != 2:
            raise ValueError("boundary map must be 2-D")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


@dataclass
class BenchResult:
    TP: int
    FP: int
    FN: int
    P: float
    R: float
    F: float

    def as_dict(self):
        return {"TP": self.TP, "FP": self.FP, "FN": self.FN, "P": self.P, "R": self.R, "F": self.F}


def boundary_of(labels: LabelMap) -> BoundaryMap:
    """A pixel is on a boundary when its right or lower neighbor has another label."""
    lab = labels.labels
    out = np.zeros(lab.shape, dtype=bool)
    out[:, :-1] |= lab[:, :-1] != lab[:, 1:]
    out[:-1, :] |= lab[:-1, :] != lab[1:, :]
    return BoundaryMap(out)


def _offsets(d_max: float) -> List[Tuple[int, int]]:
    """(dy, dx) within Euclidean radius d_max, nearest first, then row-major."""
    k = int(math.floor(d_max))
    offs = [(dy, dx) for dy in range(-k, k + 1) for dx in range(-k, k + 1) if dy * dy + dx * dx <= d_max * d_max]
    offs.sort(key=lambda o: (o[0] * o[0] + o[1] * o[1], o[0], o[1]))
    return offs


def match_boundaries(pred: BoundaryMap, gt: BoundaryMap, d_max: float = 2.0) -> Tuple[int, int, int]:
    """Greedy one-to-one matching of predicted to ground-truth boundary pixels.

    Predicted pixels are visited in row-major order and take the nearest free
    ground-truth pixel within ``d_max`` (ties go to the row-major first one).
    """
    if pred.bits.shape != gt.bits.shape:
        raise ValueError(f"dimension mismatch: pred {pred.bits.shape[::-1]} vs gt {gt.bits.shape[::-1]}")
    if d_max < 0:
        raise ValueError("d_max must be >= 0")
    h, w = gt.bits.shape
    free = gt.bits.copy()
    offs = _offsets(d_max)
    tp = 0
    ys, xs = np.nonzero(pred.bits)
    for y, x in zip(ys.tolist(), xs.tolist()):
        for dy, dx in offs:
            qy, qx = y + dy, x + dx
            if 0 <= qy < h and 0 <= qx < w and free[qy, qx]:
                free[qy, qx] = False
                tp += 1
                break
    n_pred = int(ys.size)
    n_gt = int(gt.bits.sum())
    return tp, n_pred - tp, n_gt - tp


def prf(tp: int, fp: int, fn: int, chi_0: float = 0.5) -> BenchResult:
    P = tp / (tp + fp) if tp + fp > 0 else 0.0
    R = tp / (tp + fn) if tp + fn > 0 else 0.0
    if P == 0.0 or R == 0.0:
        F = 0.0
    else:
        F = 1.0 / (chi_0 / P + (1.0 - chi_0) / R)
    return BenchResult(int(tp), int(fp), int(fn), P, R, F)


def evaluate(labels: LabelMap, gts: Sequence[BoundaryMap], d_max: float = 2.0, chi_0: float = 0.5):
    """Score against each ground truth; returns (per-GT results, best-F result)."""
    pred = boundary_of(labels)
    results = [prf(*match_boundaries(pred, gt, d_max), chi_0) for gt in gts]
    best = max(results, key=lambda r: r.F) if results else None
    return results, best
