"""Stage 2: co-evolution of primitive segments and construction of initial zones.

Each live segment is attracted by color-compatible neighbors inside radius
``r``. Its rectangle shrinks every iteration, its color drifts toward the
weighted neighborhood mean, and its status pointer (one minus the mean
interaction weight) decides whether it matures (frozen) or is absorbed by the
closest segment that still adapts.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .core import PipelineConfig
from .watershed import BoundarySet, PrimitiveSegment, SegmentState

ACTIVE, MATURED, ABSORBED = int(SegmentState.ACTIVE), int(SegmentState.MATURED), int(SegmentState.ABSORBED)


class NoInitialSegmentsError(RuntimeError):
    pass


def spatial_distance(s_i, s_j) -> float:
    dx = abs(s_i[0] - s_j[0]) - (s_i[1] + s_j[1])
    dy = abs(s_i[2] - s_j[2]) - (s_i[3] + s_j[3])
    return max(dx, 0.0) + max(dy, 0.0)


def color_l1(p_i, p_j) -> float:
    return float(np.abs(np.asarray(p_i, dtype=np.float64) - np.asarray(p_j, dtype=np.float64)).sum())


@dataclass
class CoevolutionState:
    """Struct-of-arrays view of all primitive segments at iteration ``iteration``.

    Row ``k`` describes the segment with id ``k + 1``.
    """

    s: np.ndarray
    p: np.ndarray
    p0: np.ndarray
    lam: np.ndarray
    state: np.ndarray
    absorber: np.ndarray  # id of the absorbing segment, 0 if none
    sizes: np.ndarray
    iteration: int = 0
    matured_count_history: List[int] = field(default_factory=list)
    weight_rows: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    weight_cols: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    weight_vals: np.ndarray = field(default_factory=lambda: np.empty(0))
    primitives: Optional[List[PrimitiveSegment]] = field(default=None, repr=False)

    @classmethod
    def from_segments(cls, segments: Sequence[PrimitiveSegment]) -> "CoevolutionState":
        for k, seg in enumerate(segments):
            if seg.id != k + 1:
                raise ValueError("segment ids must be 1..K in order")
        s = np.array([seg.s for seg in segments], dtype=np.float64).reshape(-1, 4)
        p = np.array([seg.p for seg in segments], dtype=np.float64)
        if p.ndim == 1:
            p = p[:, None]
        st = cls(
            s=s,
            p=p,
            p0=p.copy(),
            lam=np.array([seg.lam for seg in segments], dtype=np.float64),
            state=np.array([int(seg.state) for seg in segments], dtype=np.int8),
            absorber=np.array([seg.absorber for seg in segments], dtype=np.int64),
            sizes=np.array([seg.size for seg in segments], dtype=np.int64),
            primitives=list(segments),
        )
        st.matured_count_history = [st.matured_count]
        return st

    def copy(self) -> "CoevolutionState":
        return CoevolutionState(
            s=self.s.copy(), p=self.p.copy(), p0=self.p0, lam=self.lam.copy(),
            state=self.state.copy(), absorber=self.absorber.copy(), sizes=self.sizes,
            iteration=self.iteration, matured_count_history=list(self.matured_count_history),
            weight_rows=self.weight_rows, weight_cols=self.weight_cols,
            weight_vals=self.weight_vals, primitives=self.primitives,
        )

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @property
    def matured_count(self) -> int:
        return int(np.count_nonzero(self.state == MATURED))

    @property
    def live(self) -> np.ndarray:
        return self.state != ABSORBED

    @property
    def weights(self) -> Dict[Tuple[int, int], float]:
        """Weights recorded during the last step, keyed by (i, j) segment ids."""
        return {
            (int(i) + 1, int(j) + 1): float(w)
            for i, j, w in zip(self.weight_rows, self.weight_cols, self.weight_vals)
        }

    @property
    def segments(self) -> List[PrimitiveSegment]:
        out = []
        for k in range(self.n):
            pixels = self.primitives[k].pixels if self.primitives else np.empty((0, 2), np.int64)
            out.append(
                PrimitiveSegment(
                    id=k + 1, pixels=pixels, s=self.s[k].copy(), p=self.p[k].copy(),
                    lam=float(self.lam[k]), state=SegmentState(int(self.state[k])),
                    absorber=int(self.absorber[k]),
                )
            )
        return out

    def root_of(self, idx: np.ndarray | None = None) -> np.ndarray:
        """Row index of the live segment that each row's pixels end up with."""
        root = np.arange(self.n)
        ab = self.absorber - 1
        has = ab >= 0
        root[has] = ab[has]
        # absorber chains are acyclic and at most n long
        for _ in range(self.n):
            nxt = root.copy()
            moved = ab[root] >= 0
            if not moved.any():
                break
            nxt[moved] = ab[root[moved]]
            root = nxt
        return root if idx is None else root[idx]

    def pixel_mass(self) -> np.ndarray:
        """Pixels owned by each live row, including transitively absorbed ones."""
        return np.bincount(self.root_of(), weights=self.sizes, minlength=self.n).astype(np.int64)


class InitialWeights:
    """Boundary-obstacle weights for adjacent, color-compatible pairs, as CSR."""

    def __init__(self, n: int, boundaries: BoundarySet, p0: np.ndarray, cfg: PipelineConfig):
        rows, cols, vals = [], [], []
        for (i, j) in boundaries:
            w = initial_weight_from(boundaries.energies(i, j), p0[i - 1], p0[j - 1], cfg)
            if w is None:
                continue
            rows += [i - 1, j - 1]
            cols += [j - 1, i - 1]
            vals += [w, w]
        mat = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        mat.sort_indices()
        self.indptr = mat.indptr.astype(np.int64)
        self.indices = mat.indices.astype(np.int64)
        self.values = mat.data.astype(np.float64)


_EMPTY_I = np.zeros(1, np.int64)
_EMPTY_F = np.zeros(0, np.float64)


def initial_weight_from(energies, p_i, p_j, cfg: PipelineConfig) -> Optional[float]:
    """Obstacle weight, or None when the colors are too far apart to relate."""
    if color_l1(p_i, p_j) > cfg.theta_p:
        return None
    e = np.asarray(energies, dtype=np.float64)
    if e.size == 0:
        return None
    return float(1.0 - np.max(1.0 - np.exp(-e / cfg.sigma_w)))


def initial_weight(i: int, j: int, boundaries: BoundarySet, cfg: PipelineConfig,
                   p: np.ndarray) -> float:
    """Iteration-0 weight between segments ``i`` and ``j`` (ids); ``p`` holds initial colors by row."""
    if (i, j) not in boundaries:
        return 0.0
    w = initial_weight_from(boundaries.energies(i, j), p[i - 1], p[j - 1], cfg)
    return 0.0 if w is None else w


def interaction_weight_from(d: float, dp: float, cfg: PipelineConfig) -> float:
    if dp > cfg.theta_p:
        return 0.0
    return 1.0 - (d / (2.0 * cfg.r) + dp / (2.0 * cfg.theta_p))


def interaction_weight(i: int, j: int, state: CoevolutionState, cfg: PipelineConfig) -> float:
    a, b = i - 1, j - 1
    d = spatial_distance(state.s[a], state.s[b])
    return interaction_weight_from(d, color_l1(state.p[a], state.p[b]), cfg)


def neighborhood(i: int, state: CoevolutionState, r: float) -> List[int]:
    a = i - 1
    out = []
    for b in range(state.n):
        if b == a or state.state[b] == ABSORBED:
            continue
        if spatial_distance(state.s[a], state.s[b]) <= r:
            out.append(b + 1)
    return out


def _chunks(rows: np.ndarray, workers: int) -> List[Tuple[int, int]]:
    n = rows.shape[0]
    workers = max(1, min(workers, n))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [(int(bounds[k]), int(bounds[k + 1])) for k in range(workers)]


def _map_chunks(fn, rows: np.ndarray, workers: int):
    spans = _chunks(rows, workers)
    if len(spans) == 1:
        return [fn(*spans[0])]
    with ThreadPoolExecutor(max_workers=len(spans)) as pool:
        return list(pool.map(lambda ab: fn(*ab), spans))


def step(
    state: CoevolutionState,
    boundaries: BoundarySet,
    cfg: PipelineConfig,
    *,
    workers: Optional[int] = None,
    order: Optional[Sequence[int]] = None,
    record_weights: bool = True,
    init: Optional[InitialWeights] = None,
) -> CoevolutionState:
    """Advance one iteration. Reads only the iteration-t state (double-buffered).

    ``order`` permutes the processing order of active rows; it never changes
    the result. ``workers`` splits active rows across threads.
    """
    workers = cfg.workers if workers is None else workers
    nxt = state.copy()
    nxt.iteration = state.iteration + 1
    rows = np.nonzero(state.state == ACTIVE)[0].astype(np.int64)
    if order is not None:
        rows = np.asarray(order, dtype=np.int64) - 1
        if not np.array_equal(np.sort(rows), np.nonzero(state.state == ACTIVE)[0]):
            raise ValueError("order must be a permutation of the active segment ids")
    if rows.size == 0:
        nxt.weight_rows, nxt.weight_cols, nxt.weight_vals = _EMPTY_I[:0], _EMPTY_I[:0], _EMPTY_F
        nxt.matured_count_history.append(nxt.matured_count)
        return nxt

    first = state.iteration == 0
    if first:
        init = init or InitialWeights(state.n, boundaries, state.p0, cfg)
        indptr, indices, w0 = init.indptr, init.indices, init.values
    else:
        indptr, indices, w0 = _EMPTY_I, _EMPTY_I[:0], _EMPTY_F
    live = state.live
    S, P = state.s, state.p
    C = P.shape[1]
    new_s = np.empty((rows.size, 4))
    new_p = np.empty((rows.size, C))
    new_lam = np.empty(rows.size)
    nbr = np.empty(rows.size, np.int64)
    rel = np.empty(rows.size, np.int64)

    def run_chunk(a, b):
        _kernels.update_rows(
            rows[a:b], S, P, live, first, indptr, indices, w0,
            float(cfg.r), float(cfg.theta_p), float(cfg.shrink),
            new_s[a:b], new_p[a:b], new_lam[a:b], nbr[a:b], rel[a:b],
        )

    _map_chunks(run_chunk, rows, workers)

    if record_weights:
        parts = _map_chunks(
            lambda a, b: _kernels.row_weights(
                rows[a:b], S, P, live, first, indptr, indices, w0, float(cfg.r), float(cfg.theta_p)
            ),
            rows, workers,
        )
        wi = np.concatenate([q[0] for q in parts])
        wj = np.concatenate([q[1] for q in parts])
        wv = np.concatenate([q[2] for q in parts])
        key = np.lexsort((wj, wi))
        nxt.weight_rows, nxt.weight_cols, nxt.weight_vals = wi[key], wj[key], wv[key]

    # status pointers of every live segment at iteration t: fresh for active
    # rows, frozen for matured ones
    lam_now = state.lam.copy()
    lam_now[rows] = new_lam
    nxt.lam[rows] = new_lam

    high = new_lam >= cfg.lambda_U
    low = new_lam <= cfg.lambda_L
    absorb_rows = np.sort(rows[high])
    if absorb_rows.size:
        cand = live & (lam_now < cfg.lambda_U)
        targets = _kernels.nearest_candidates(absorb_rows, S, cand)
    else:
        targets = np.empty(0, np.int64)
    absorber_of = dict(zip(absorb_rows.tolist(), targets.tolist()))

    for k, i in enumerate(rows.tolist()):
        if high[k]:
            j = absorber_of[i]
            if j >= 0:
                nxt.s[i] = S[j]
                nxt.p[i] = P[j]
                nxt.state[i] = ABSORBED
                nxt.absorber[i] = j + 1
                continue
            nxt.s[i] = new_s[k]
            nxt.p[i] = new_p[k]
        elif low[k]:
            nxt.state[i] = MATURED
        else:
            nxt.s[i] = new_s[k]
            nxt.p[i] = new_p[k]
    nxt.matured_count_history.append(nxt.matured_count)
    return nxt


def run(
    segments: Sequence[PrimitiveSegment],
    boundaries: BoundarySet,
    cfg: PipelineConfig,
    *,
    workers: Optional[int] = None,
    record_weights: bool = False,
) -> CoevolutionState:
    """Iterate until the matured count has not changed for ``n_stall`` iterations."""
    state = segments if isinstance(segments, CoevolutionState) else CoevolutionState.from_segments(segments)
    init = InitialWeights(state.n, boundaries, state.p0, cfg)
    cap = 50 * cfg.n_stall
    n = cfg.n_stall
    while state.iteration < cap:
        state = step(state, boundaries, cfg, workers=workers, record_weights=record_weights, init=init)
        hist = state.matured_count_history
        if state.iteration >= n and hist[-1] == hist[-1 - n]:
            break
    return state


@dataclass
class InitialSegment:
    label: int
    core_ids: List[int]
    member_ids: List[int]
    center: Tuple[float, float]
    mass: int = 0


def zone_center(state: CoevolutionState, core_ids: Sequence[int]) -> Tuple[float, float]:
    rows = np.asarray(core_ids, dtype=np.int64) - 1
    if rows.size == 0:
        raise ValueError("zone core is empty")
    return float(state.s[rows, 0].mean()), float(state.s[rows, 2].mean())


def build_initial_zones(
    state: CoevolutionState,
    boundaries: BoundarySet,
    cfg: PipelineConfig,
    image_pixels: int,
) -> List[InitialSegment]:
    """Group strongly tied matured segments; groups heavier than delta_t become zones."""
    matured = np.nonzero(state.state == MATURED)[0].astype(np.int64)
    if matured.size == 0:
        raise NoInitialSegmentsError("no initial segments: no primitive segment matured")
    if state.iteration == 0:
        a_list, b_list = [], []
        for u in matured.tolist():
            for v in matured.tolist():
                if u < v and spatial_distance(state.s[u], state.s[v]) <= cfg.r:
                    if initial_weight(u + 1, v + 1, boundaries, cfg, state.p0) >= cfg.xi_c:
                        a_list.append(u)
                        b_list.append(v)
        a, b = np.array(a_list, np.int64), np.array(b_list, np.int64)
    else:
        a, b = _kernels.neighbor_pairs(state.s, state.p, matured, float(cfg.r), float(cfg.theta_p), float(cfg.xi_c))
    pos = np.full(state.n, -1, np.int64)
    pos[matured] = np.arange(matured.size)
    graph = coo_matrix((np.ones(a.size), (pos[a], pos[b])), shape=(matured.size, matured.size))
    ncomp, comp = connected_components(graph, directed=False)
    mass = state.pixel_mass()[matured]
    comp_mass = np.bincount(comp, weights=mass, minlength=ncomp)
    threshold = cfg.delta_t * image_pixels
    zones = []
    # components are visited in order of their smallest member id
    first_member = np.full(ncomp, np.iinfo(np.int64).max)
    np.minimum.at(first_member, comp, matured)
    for c in np.argsort(first_member, kind="stable").tolist():
        if comp_mass[c] <= threshold:
            continue
        core = sorted((matured[comp == c] + 1).tolist())
        zones.append(
            InitialSegment(
                label=len(zones) + 1, core_ids=core, member_ids=list(core),
                center=zone_center(state, core), mass=int(comp_mass[c]),
            )
        )
    if not zones:
        raise NoInitialSegmentsError(
            f"no initial segments: no matured group exceeds {cfg.delta_t:g} of {image_pixels} pixels"
        )
    return zones
