"""Stage 3: deportation and immigration of unlabeled primitive segments.

Every segment outside a zone core first joins the zone whose center is
closest. Then, each iteration, migrants that contrast strongly with their
zone's core may be deported (randomly, with a probability scaled within the
zone) and re-immigrate to the zone with the lowest membership score G.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .coevolve import ABSORBED, CoevolutionState, InitialSegment, spatial_distance
from .core import PipelineConfig, Rng


def contrast(p_i, p_l) -> float:
    """Manhattan distance between two color vectors."""
    a = np.atleast_1d(np.asarray(p_i, dtype=np.float64))
    b = np.atleast_1d(np.asarray(p_l, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError(f"color arity mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(np.abs(a - b).sum())


def point_distance(s_i, center) -> float:
    """Rectangle-to-center distance, the center being a zero-extent rectangle."""
    return spatial_distance(s_i, (center[0], 0.0, center[1], 0.0))


@dataclass
class AssignmentState:
    zones: List[InitialSegment]
    s: np.ndarray
    p: np.ndarray
    labels: np.ndarray  # zone label per segment row, 0 = unlabeled
    core: np.ndarray  # bool per row
    eligible: np.ndarray  # bool per row: takes part in stage 3
    iteration: int = 0
    last_move_rate: float = 0.0
    history: List[int] = field(default_factory=list)  # deported count per iteration

    @classmethod
    def from_coevolution(cls, co: CoevolutionState, zones: Sequence[InitialSegment]) -> "AssignmentState":
        labels = np.zeros(co.n, dtype=np.int64)
        core = np.zeros(co.n, dtype=bool)
        for z in zones:
            rows = np.asarray(z.core_ids, dtype=np.int64) - 1
            labels[rows] = z.label
            core[rows] = True
        eligible = (co.state != ABSORBED) & ~core
        return cls(zones=list(zones), s=co.s.copy(), p=co.p.copy(), labels=labels, core=core, eligible=eligible)

    @property
    def unlabeled_pool(self) -> List[int]:
        return (np.nonzero(self.eligible & (self.labels == 0))[0] + 1).tolist()

    @property
    def migrations(self) -> Dict[int, int]:
        rows = np.nonzero(self.eligible & (self.labels > 0))[0]
        return {int(r) + 1: int(self.labels[r]) for r in rows}

    def zone(self, label: int) -> InitialSegment:
        return self.zones[label - 1]

    def core_colors(self, label: int) -> np.ndarray:
        return self.p[np.asarray(self.zone(label).core_ids) - 1]


def zone_center(s: np.ndarray, zone: InitialSegment):
    rows = np.asarray(zone.core_ids, dtype=np.int64) - 1
    return float(s[rows, 0].mean()), float(s[rows, 2].mean())


def eval_F(p_i, core_colors: np.ndarray) -> float:
    """Largest contrast between a segment and any core member of a zone."""
    core_colors = np.atleast_2d(core_colors)
    if core_colors.shape[0] == 0:
        raise ValueError("zone core is empty")
    return float(np.abs(core_colors - np.asarray(p_i, dtype=np.float64)).sum(axis=1).max())


def _F_matrix(p: np.ndarray, rows: np.ndarray, state: AssignmentState) -> np.ndarray:
    """F of each row in ``rows`` against every zone, shape (len(rows), n_zones)."""
    out = np.empty((rows.size, len(state.zones)))
    for z, zone in enumerate(state.zones):
        cc = state.core_colors(zone.label)
        out[:, z] = np.abs(p[rows][:, None, :] - cc[None, :, :]).sum(axis=2).max(axis=1)
    return out


def deport_probability_from(f_i: float, f_members: Sequence[float]) -> float:
    f_members = np.asarray(f_members, dtype=np.float64)
    hi = f_members.max()
    if hi <= 0:
        return 0.0
    return float(min(max((f_i - f_members.min()) / hi, 0.0), 1.0))


def deport_probability(i: int, state: AssignmentState) -> float:
    """Deportation probability of migrant ``i`` (id) relative to its zone's other migrants."""
    label = int(state.labels[i - 1])
    rows = np.nonzero(state.eligible & (state.labels == label))[0]
    cc = state.core_colors(label)
    f = np.abs(state.p[rows][:, None, :] - cc[None, :, :]).sum(axis=2).max(axis=1)
    f_i = f[np.searchsorted(rows, i - 1)]
    return deport_probability_from(f_i, f)


def eval_G_from(g1: np.ndarray, g2: np.ndarray, alpha: float) -> np.ndarray:
    """Membership scores of one segment over all zones. Lower is fitter."""
    g1 = np.asarray(g1, dtype=np.float64)
    g2 = np.asarray(g2, dtype=np.float64)
    m1, m2 = g1.max(), g2.max()
    t1 = g1 / m1 if m1 > 0 else np.zeros_like(g1)
    t2 = g2 / m2 if m2 > 0 else np.zeros_like(g2)
    return alpha * t1 + (1.0 - alpha) * t2


def eval_G(i: int, label: int, state: AssignmentState, cfg: PipelineConfig) -> float:
    return float(_G_rows(np.array([i - 1]), state, cfg)[0, label - 1])


def _G_rows(rows: np.ndarray, state: AssignmentState, cfg: PipelineConfig) -> np.ndarray:
    g1 = _F_matrix(state.p, rows, state)
    g2 = np.empty_like(g1)
    centers = [zone_center(state.s, z) for z in state.zones]
    for k, r in enumerate(rows.tolist()):
        for z, c in enumerate(centers):
            g2[k, z] = point_distance(state.s[r], c)
    return np.vstack([eval_G_from(g1[k], g2[k], cfg.alpha) for k in range(rows.size)]).reshape(rows.size, -1)


def preliminary_assign(state: AssignmentState) -> AssignmentState:
    """Every unlabeled segment joins the zone with the nearest center (ties: lower label)."""
    centers = [zone_center(state.s, z) for z in state.zones]
    for r in np.nonzero(state.eligible & (state.labels == 0))[0].tolist():
        dists = [point_distance(state.s[r], c) for c in centers]
        state.labels[r] = int(np.argmin(dists)) + 1
    return state


def deportation(state: AssignmentState, rng: Rng) -> List[int]:
    """Deport migrants in ascending id order; returns deported row indices."""
    migrants = np.nonzero(state.eligible & (state.labels > 0))[0]
    if migrants.size == 0:
        return []
    F = _F_matrix(state.p, migrants, state)
    own = F[np.arange(migrants.size), state.labels[migrants] - 1]
    probs = np.zeros(migrants.size)
    for label in np.unique(state.labels[migrants]).tolist():
        sel = state.labels[migrants] == label
        f = own[sel]
        hi = f.max()
        if hi > 0:
            probs[sel] = np.clip((f - f.min()) / hi, 0.0, 1.0)
    # one draw per migrant, in id order, regardless of outcome
    draws = np.array([rng.next_unit() for _ in range(migrants.size)])
    out = migrants[probs > draws]
    state.labels[out] = 0
    return out.tolist()


def immigration(state: AssignmentState, rows: Sequence[int], cfg: PipelineConfig) -> None:
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        return
    G = _G_rows(rows, state, cfg)
    state.labels[rows] = np.argmin(G, axis=1) + 1


def run_assignment(state: AssignmentState, cfg: PipelineConfig, rng: Rng) -> AssignmentState:
    """Alternate deportation and immigration until m_max iterations or a low move rate."""
    if np.any(state.eligible & (state.labels == 0)):
        preliminary_assign(state)
    while state.iteration < cfg.m_max:
        n_migrants = int(np.count_nonzero(state.eligible & (state.labels > 0)))
        if n_migrants == 0:
            state.last_move_rate = 0.0
            break
        deported = deportation(state, rng)
        immigration(state, deported, cfg)
        state.iteration += 1
        state.history.append(len(deported))
        state.last_move_rate = len(deported) / n_migrants
        if state.last_move_rate < cfg.rate_min:
            break
    for z in state.zones:
        z.member_ids = sorted((np.nonzero(state.labels == z.label)[0] + 1).tolist())
    return state


def segment_labels(co: CoevolutionState, state: AssignmentState) -> np.ndarray:
    """Final zone label per segment row; absorbed rows follow their absorber."""
    return state.labels[co.root_of()]
