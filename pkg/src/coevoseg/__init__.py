"""Split/merge image segmentation: watershed, co-evolution, deportation/immigration, genetic merging."""
from .core import ConfigError, ImageBuffer, LabelMap, PipelineConfig, Rng, rng_next_unit
from .pipeline import PipelineResult, RunReport, run_pipeline, segment

__all__ = [
    "ConfigError",
    "ImageBuffer",
    "LabelMap",
    "PipelineConfig",
    "PipelineResult",
    "Rng",
    "RunReport",
    "rng_next_unit",
    "run_pipeline",
    "segment",
]
__version__ = "0.1.0"
