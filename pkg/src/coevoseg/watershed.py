"""Priority-flood watershed and extraction of primitive segments."""
from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from .core import ImageBuffer, LabelMap
from .edgemap import EdgeMap

_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class SegmentState(enum.IntEnum):
    ACTIVE = 0
    MATURED = 1
    ABSORBED = 2


@dataclass
class PrimitiveSegment:
    id: int
    pixels: np.ndarray  # (n, 2) array of (x, y)
    s: np.ndarray  # [center x, half length, center y, half width]
    p: np.ndarray  # per-channel mean color
    lam: float = 1.0
    state: SegmentState = SegmentState.ACTIVE
    label: int = 0
    absorber: int = 0

    @property
    def size(self) -> int:
        return int(self.pixels.shape[0])


@dataclass
class BoundarySet:
    """Cross-label 4-adjacent pixel pairs grouped by unordered region pair.

    ``pairs[(i, j)]`` (with ``i < j``) holds an ``(k, 3)`` array of
    ``(flat index a, flat index b, energy)`` rows, one per facing pixel pair.
    """

    pairs: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)

    @staticmethod
    def key(i: int, j: int) -> Tuple[int, int]:
        return (i, j) if i < j else (j, i)

    def __contains__(self, ij) -> bool:
        return self.key(*ij) in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        return iter(self.pairs)

    def get(self, i: int, j: int) -> Optional[np.ndarray]:
        return self.pairs.get(self.key(i, j))

    def energies(self, i: int, j: int) -> np.ndarray:
        rows = self.get(i, j)
        if rows is None:
            return np.empty(0)
        return rows[:, 2]

    def neighbors(self, i: int) -> List[int]:
        out = []
        for a, b in self.pairs:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)


def regional_minima(energy: np.ndarray) -> Tuple[np.ndarray, int]:
    """Label the regional-minimum plateaus of ``energy``, numbered in raster order.

    A plateau is a 4-connected set of equal-valued pixels; it is a regional
    minimum when no pixel on it has a strictly lower 4-neighbor.
    """
    h, w = energy.shape
    pad = np.pad(energy, 1, mode="constant", constant_values=np.inf)
    center = pad[1:-1, 1:-1]
    shifts = (pad[:-2, 1:-1], pad[2:, 1:-1], pad[1:-1, :-2], pad[1:-1, 2:])
    has_lower = np.zeros((h, w), dtype=bool)
    for nb in shifts:
        has_lower |= nb < center
    cand = ~has_lower
    # Two adjacent candidates are necessarily equal-valued, so connected
    # components of ``cand`` are (parts of) plateaus. A part is rejected when
    # it touches an equal-valued pixel that does have a lower neighbor.
    lab, n = ndimage.label(cand, structure=_FOUR)
    if n == 0:
        return lab, 0
    cpad = np.pad(cand, 1, mode="constant", constant_values=False)
    leaks = np.zeros((h, w), dtype=bool)
    for nb, cnb in zip(shifts, (cpad[:-2, 1:-1], cpad[2:, 1:-1], cpad[1:-1, :-2], cpad[1:-1, 2:])):
        leaks |= (nb == center) & ~cnb
    bad = np.unique(lab[cand & leaks])
    keep = np.ones(n + 1, dtype=bool)
    keep[0] = False
    keep[bad] = False
    # renumber survivors by their first pixel in raster order
    flat = lab.ravel()
    first = np.full(n + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat, np.arange(flat.size))
    survivors = np.nonzero(keep)[0]
    survivors = survivors[np.argsort(first[survivors], kind="stable")]
    remap = np.zeros(n + 1, dtype=np.int64)
    remap[survivors] = np.arange(1, survivors.size + 1)
    return remap[lab], int(survivors.size)


def watershed_flood(edges: EdgeMap) -> LabelMap:
    """Meyer flooding from the regional minima of the edge map.

    Seed pixels enter the queue ordered by (basin id, raster position). The
    queue is keyed by (energy, insertion sequence); an unlabeled pixel takes
    the label of the basin that first pushes it, so every pixel ends in
    exactly one basin and there are no watershed-line pixels.
    """
    energy = np.asarray(edges.energy, dtype=np.float64)
    h, w = energy.shape
    seeds, n = regional_minima(energy)
    labels = seeds.ravel().copy()
    flat_e = energy.ravel().tolist()

    seed_idx = np.nonzero(labels)[0]
    order = np.lexsort((seed_idx, labels[seed_idx]))
    heap = []
    seq = 0
    for idx in seed_idx[order].tolist():
        heap.append((flat_e[idx], seq, idx))
        seq += 1
    heapq.heapify(heap)

    lab = labels.tolist()
    pop, push = heapq.heappop, heapq.heappush
    while heap:
        _, _, idx = pop(heap)
        y, x = divmod(idx, w)
        cur = lab[idx]
        if y > 0:
            q = idx - w
            if not lab[q]:
                lab[q] = cur
                push(heap, (flat_e[q], seq, q))
                seq += 1
        if y < h - 1:
            q = idx + w
            if not lab[q]:
                lab[q] = cur
                push(heap, (flat_e[q], seq, q))
                seq += 1
        if x > 0:
            q = idx - 1
            if not lab[q]:
                lab[q] = cur
                push(heap, (flat_e[q], seq, q))
                seq += 1
        if x < w - 1:
            q = idx + 1
            if not lab[q]:
                lab[q] = cur
                push(heap, (flat_e[q], seq, q))
                seq += 1
    return LabelMap(np.array(lab, dtype=np.int64).reshape(h, w))


def rectangle(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Surrounding rectangle of pixel centers as [cx, half length, cy, half width]."""
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    return np.array([(x0 + x1) / 2.0, (x1 - x0 + 1.0) / 2.0, (y0 + y1) / 2.0, (y1 - y0 + 1.0) / 2.0])


def boundary_set(labels: LabelMap, edges: EdgeMap) -> BoundarySet:
    lab = labels.labels
    h, w = lab.shape
    e = edges.energy.ravel()
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    a_parts, b_parts = [], []
    horiz = lab[:, :-1] != lab[:, 1:]
    a_parts.append(idx[:, :-1][horiz])
    b_parts.append(idx[:, 1:][horiz])
    vert = lab[:-1, :] != lab[1:, :]
    a_parts.append(idx[:-1, :][vert])
    b_parts.append(idx[1:, :][vert])
    a = np.concatenate(a_parts)
    b = np.concatenate(b_parts)
    out = BoundarySet()
    if a.size == 0:
        return out
    flat = lab.ravel()
    la, lb = flat[a], flat[b]
    lo, hi = np.minimum(la, lb), np.maximum(la, lb)
    energy = np.maximum(e[a], e[b])
    order = np.lexsort((np.minimum(a, b), hi, lo))
    lo, hi, a, b, energy = lo[order], hi[order], a[order], b[order], energy[order]
    rows = np.column_stack([a.astype(np.float64), b.astype(np.float64), energy])
    cuts = np.nonzero((np.diff(lo) != 0) | (np.diff(hi) != 0))[0] + 1
    starts = np.concatenate([[0], cuts])
    ends = np.concatenate([cuts, [lo.size]])
    for s0, s1 in zip(starts.tolist(), ends.tolist()):
        out.pairs[(int(lo[s0]), int(hi[s0]))] = rows[s0:s1]
    return out


def extract_primitives(
    labels: LabelMap, img: ImageBuffer, edges: EdgeMap
) -> Tuple[List[PrimitiveSegment], BoundarySet]:
    """Build one PrimitiveSegment per label (ids = labels) plus the boundary set."""
    lab = labels.labels
    if lab.shape != (img.height, img.width) or lab.shape != edges.energy.shape:
        raise ValueError(
            f"dimension mismatch: labels {lab.shape[::-1]}, image {(img.width, img.height)}, "
            f"edges {edges.energy.shape[::-1]}"
        )
    k = int(lab.max())
    flat = lab.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=k + 1)
    ends = np.cumsum(counts)
    w = lab.shape[1]
    colors = img.data.reshape(-1, img.channels).astype(np.float64)
    segments = []
    for rid in range(1, k + 1):
        members = order[ends[rid - 1]:ends[rid]]
        if members.size == 0:
            raise ValueError(f"label {rid} is empty; labels must be contiguous 1..K")
        ys, xs = np.divmod(members, w)
        segments.append(
            PrimitiveSegment(
                id=rid,
                pixels=np.column_stack([xs, ys]),
                s=rectangle(xs, ys),
                p=colors[members].mean(axis=0),
            )
        )
    return segments, boundary_set(labels, edges)
