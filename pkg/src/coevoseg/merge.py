"""Stage 4: (1, 1+1) genetic merging over the region adjacency graph.

A chromosome holds one bit per adjacency edge (1 keeps the boundary, 0 merges
the two regions). Mutation only clears bits, with a probability that grows as
the two regions' mean gray levels get closer; the child replaces the parent
only when its area-weighted inter-region disparity is strictly higher.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import ImageBuffer, LabelMap, PipelineConfig, Rng


@dataclass
class RegionGraph:
    ids: np.ndarray  # region labels, ascending
    sizes: np.ndarray  # pixel counts
    means: np.ndarray  # mean gray level
    edges: np.ndarray  # (N, 2) of region indices (positions in ``ids``), sorted
    total_pixels: int
    gray_levels: int = 256
    label_map: LabelMap | None = field(default=None, repr=False)

    @property
    def n_regions(self) -> int:
        return int(self.ids.size)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])


@dataclass
class Chromosome:
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.size and self.bits.max() > 1:
            raise ValueError("chromosome bits must be 0 or 1")

    @classmethod
    def ones(cls, n: int) -> "Chromosome":
        return cls(np.ones(n, dtype=np.uint8))

    def __len__(self):
        return int(self.bits.size)

    def __str__(self):
        return "".join(str(int(b)) for b in self.bits)


def build_region_graph(labels: LabelMap, gray: ImageBuffer, gray_levels: int = 256) -> RegionGraph:
    lab = labels.labels
    if not labels.is_complete():
        raise ValueError("label map has unlabeled (0) pixels")
    if gray.channels != 1 or lab.shape != (gray.height, gray.width):
        raise ValueError("region graph needs a gray image of the label map's size")
    ids, inv = np.unique(lab.ravel(), return_inverse=True)
    inv = inv.reshape(lab.shape)
    g = gray.data[:, :, 0].astype(np.float64).ravel()
    sizes = np.bincount(inv.ravel(), minlength=ids.size)
    sums = np.bincount(inv.ravel(), weights=g, minlength=ids.size)
    pairs = []
    for a, b in ((inv[:, :-1], inv[:, 1:]), (inv[:-1, :], inv[1:, :])):
        diff = a != b
        lo = np.minimum(a[diff], b[diff])
        hi = np.maximum(a[diff], b[diff])
        pairs.append(np.column_stack([lo, hi]))
    edges = np.unique(np.vstack(pairs), axis=0) if pairs else np.empty((0, 2), np.int64)
    return RegionGraph(
        ids=ids, sizes=sizes.astype(np.int64), means=sums / sizes,
        edges=edges.astype(np.int64).reshape(-1, 2), total_pixels=int(lab.size), gray_levels=gray_levels,
        label_map=labels,
    )


def components(chrom: Chromosome, graph: RegionGraph) -> np.ndarray:
    """Merged-group index per region, numbered by first region in each group."""
    cut = chrom.bits == 0
    e = graph.edges[cut]
    n = graph.n_regions
    mat = coo_matrix((np.ones(e.shape[0]), (e[:, 0], e[:, 1])), shape=(n, n))
    _, comp = connected_components(mat, directed=False)
    # connected_components numbers groups by first visited node, which is
    # ascending region order; normalise anyway so decode stays canonical
    first = np.full(comp.max() + 1, n)
    np.minimum.at(first, comp, np.arange(n))
    rank = np.empty_like(first)
    rank[np.argsort(first)] = np.arange(first.size)
    return rank[comp]


def decode(chrom: Chromosome, graph: RegionGraph, labels: LabelMap | None = None) -> LabelMap:
    """Relabel the graph's label map so regions joined by cleared edges share one label (1..K')."""
    labels = graph.label_map if labels is None else labels
    if labels is None:
        raise ValueError("no label map to decode onto")
    if len(chrom) != graph.n_edges:
        raise ValueError(f"chromosome has {len(chrom)} bits for {graph.n_edges} edges")
    comp = components(chrom, graph)
    lut_pos = np.searchsorted(graph.ids, labels.labels)
    return LabelMap(comp[lut_pos] + 1)


def _disparity(chrom: Chromosome, graph: RegionGraph) -> float:
    comp = components(chrom, graph)
    k = int(comp.max()) + 1
    if k == 1:
        return 0.0
    sizes = np.bincount(comp, weights=graph.sizes, minlength=k)
    means = np.bincount(comp, weights=graph.sizes * graph.means, minlength=k) / sizes
    a, b = comp[graph.edges[:, 0]], comp[graph.edges[:, 1]]
    keep = a != b
    pairs = np.unique(np.column_stack([np.minimum(a[keep], b[keep]), np.maximum(a[keep], b[keep])]), axis=0)
    d = np.abs(means[pairs[:, 0]] - means[pairs[:, 1]]) / graph.gray_levels
    dsum = np.bincount(pairs[:, 0], weights=d, minlength=k) + np.bincount(pairs[:, 1], weights=d, minlength=k)
    deg = np.bincount(pairs[:, 0], minlength=k) + np.bincount(pairs[:, 1], minlength=k)
    mean_d = np.divide(dsum, deg, out=np.zeros(k), where=deg > 0)
    return float(np.sum(sizes / graph.total_pixels * mean_d) / k)


def fitness(chrom: Chromosome, graph: RegionGraph) -> float:
    """Area-weighted mean gray-level disparity between adjacent merged regions."""
    if len(chrom) != graph.n_edges:
        raise ValueError(f"chromosome has {len(chrom)} bits for {graph.n_edges} edges")
    return _disparity(chrom, graph)


def merge_probability(graph: RegionGraph, theta_p: float) -> np.ndarray:
    """Per-edge clearing probability from the original regions' gray-level gap."""
    diff = np.abs(graph.means[graph.edges[:, 0]] - graph.means[graph.edges[:, 1]])
    rho = 1.0 - diff / theta_p
    rho[diff > theta_p] = 0.0
    return rho


def mutate(chrom: Chromosome, graph: RegionGraph, cfg: PipelineConfig, rng: Rng) -> Chromosome:
    rho = merge_probability(graph, cfg.theta_p)
    bits = chrom.bits.copy()
    for k in np.nonzero(bits)[0].tolist():
        if rng.next_unit() < rho[k]:
            bits[k] = 0
    return Chromosome(bits)


@dataclass
class GAResult:
    chromosome: Chromosome
    labels: LabelMap
    fitness_trace: List[float] = field(default_factory=list)


def ga_run(graph: RegionGraph, cfg: PipelineConfig, rng: Rng) -> GAResult:
    """Single-parent GA; ``fitness_trace`` holds the accepted fitness after each iteration."""
    parent = Chromosome.ones(graph.n_edges)
    best = fitness(parent, graph)
    trace = []
    for _ in range(cfg.ga_iters):
        child = mutate(parent, graph, cfg, rng)
        f = fitness(child, graph)
        if f > best:
            parent, best = child, f
        trace.append(best)
    return GAResult(parent, decode(parent, graph), trace)
