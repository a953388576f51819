"""End-to-end orchestration of the four stages."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import assign, coevolve, merge
from .bench import BenchResult, BoundaryMap, evaluate
from .core import ImageBuffer, LabelMap, PipelineConfig, Rng
from .edgemap import EdgeMap, edge_energy, to_grayscale
from .watershed import BoundarySet, PrimitiveSegment, extract_primitives, watershed_flood


@dataclass
class RunReport:
    timings_ms: Dict[str, float] = field(default_factory=dict)
    primitive_count: int = 0
    coevolution_iterations: int = 0
    matured_count: int = 0
    absorbed_count: int = 0
    zone_count: int = 0
    assignment_iterations: int = 0
    final_region_count: int = 0
    fitness_trace: List[float] = field(default_factory=list)
    bench: List[BenchResult] = field(default_factory=list)
    best: Optional[BenchResult] = None
    config: Dict = field(default_factory=dict)

    def as_dict(self) -> Dict:
        out = {
            "timings_ms": {k: round(v, 3) for k, v in self.timings_ms.items()},
            "primitive_count": self.primitive_count,
            "coevolution_iterations": self.coevolution_iterations,
            "matured_count": self.matured_count,
            "absorbed_count": self.absorbed_count,
            "zone_count": self.zone_count,
            "assignment_iterations": self.assignment_iterations,
            "final_region_count": self.final_region_count,
            "fitness_trace": list(self.fitness_trace),
            "config": dict(self.config),
            "seed": self.config.get("seed"),
        }
        if self.bench:
            out["bench"] = [r.as_dict() for r in self.bench]
            out["best"] = self.best.as_dict()
        return out


@dataclass
class PipelineResult:
    """Every intermediate product of one run."""

    gray: ImageBuffer
    edges: EdgeMap
    primitive_labels: LabelMap
    primitives: List[PrimitiveSegment]
    boundaries: BoundarySet
    coevolution: coevolve.CoevolutionState
    zones: List[coevolve.InitialSegment]
    assignment: assign.AssignmentState
    zone_labels: LabelMap  # after stage 3
    graph: merge.RegionGraph
    ga: merge.GAResult
    labels: LabelMap  # final
    report: RunReport


def segment(img: ImageBuffer, cfg: PipelineConfig, gts: Sequence[BoundaryMap] = ()) -> PipelineResult:
    cfg.validate()
    timings = {}
    clock = time.perf_counter

    t0 = clock()
    gray = to_grayscale(img)
    edges = edge_energy(gray)
    timings["edgemap"] = (clock() - t0) * 1e3

    t0 = clock()
    prim_labels = watershed_flood(edges)
    primitives, boundaries = extract_primitives(prim_labels, img, edges)
    timings["watershed"] = (clock() - t0) * 1e3

    t0 = clock()
    co = coevolve.run(primitives, boundaries, cfg)
    zones = coevolve.build_initial_zones(co, boundaries, cfg, img.n_pixels)
    timings["coevolve"] = (clock() - t0) * 1e3

    rng = Rng(cfg.seed)
    t0 = clock()
    st = assign.AssignmentState.from_coevolution(co, zones)
    st = assign.run_assignment(st, cfg, rng)
    seg_labels = assign.segment_labels(co, st)
    zone_labels = LabelMap(seg_labels[prim_labels.labels - 1])
    timings["assign"] = (clock() - t0) * 1e3

    t0 = clock()
    graph = merge.build_region_graph(zone_labels, gray)
    ga = merge.ga_run(graph, cfg, rng)
    timings["merge"] = (clock() - t0) * 1e3

    report = RunReport(
        timings_ms=timings,
        primitive_count=len(primitives),
        coevolution_iterations=co.iteration,
        matured_count=co.matured_count,
        absorbed_count=int(np.count_nonzero(co.state == coevolve.ABSORBED)),
        zone_count=len(zones),
        assignment_iterations=st.iteration,
        final_region_count=ga.labels.n_regions,
        fitness_trace=list(ga.fitness_trace),
        config=cfg.as_dict(),
    )
    if gts:
        report.bench, report.best = evaluate(ga.labels, gts, cfg.d_max, cfg.chi_0)
    timings["total"] = sum(timings.values())
    return PipelineResult(
        gray=gray, edges=edges, primitive_labels=prim_labels, primitives=primitives,
        boundaries=boundaries, coevolution=co, zones=zones, assignment=st,
        zone_labels=zone_labels, graph=graph, ga=ga, labels=ga.labels, report=report,
    )


def run_pipeline(img: ImageBuffer, cfg: PipelineConfig, gts: Sequence[BoundaryMap] = ()) -> Tuple[LabelMap, RunReport]:
    res = segment(img, cfg, gts)
    return res.labels, res.report
